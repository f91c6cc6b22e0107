//! Prompt templates for the text-generation and entity-judging backends.
//!
//! Templates are plain UTF-8 text with `{domain}`, `{entities}`, and
//! `{types}` placeholders so operators can localize them; the built-in
//! defaults are the English instructions the pipeline was designed around.

use std::fs;
use std::path::Path;

use crate::entity::Entity;

/// Instruction shown to the generator when two entities were sampled.
pub const DEFAULT_GENERATION_TEMPLATE_PAIR: &str = "\
I want you to act as a speaker in {domain}. I will write you entities and their type, \
you need to output a sentence containing these entities. The resulting sentence should \
be more than 20 words and less than 100 words.
###User: My entities are '{entities}', the types are '{types}'
####Response: ...";

/// Instruction shown to the generator for a single sampled entity.
pub const DEFAULT_GENERATION_TEMPLATE_SINGLE: &str = "\
I want you to act as a speaker in {domain}. I will write you entities and their type, \
you need to output a sentence containing these entities. The resulting sentence should \
be more than 20 words and less than 100 words.
###User: My entity is '{entities}', the type is '{types}'
####Response: ...";

/// Instruction for the accept/reject entity judge.
pub const DEFAULT_JUDGE_TEMPLATE: &str = "\
I will write you an entity and its type, you need to judge If it is an entity and the \
type is correct, print YES or NO.
###User: My entity is '{entities}', the type is '{types}'
####Response: ...";

/// A fill-in-the-placeholders prompt template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    text: String,
}

impl PromptTemplate {
    pub fn new(text: impl Into<String>) -> Self {
        PromptTemplate { text: text.into() }
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        Ok(PromptTemplate {
            text: fs::read_to_string(path)?,
        })
    }

    pub fn fill(&self, domain: &str, entities: &str, types: &str) -> String {
        self.text
            .replace("{domain}", domain)
            .replace("{entities}", entities)
            .replace("{types}", types)
    }
}

/// Generation templates for the one- and two-entity cases. A custom template
/// file replaces both.
#[derive(Debug, Clone)]
pub struct GenerationTemplates {
    single: PromptTemplate,
    pair: PromptTemplate,
}

impl Default for GenerationTemplates {
    fn default() -> Self {
        GenerationTemplates {
            single: PromptTemplate::new(DEFAULT_GENERATION_TEMPLATE_SINGLE),
            pair: PromptTemplate::new(DEFAULT_GENERATION_TEMPLATE_PAIR),
        }
    }
}

impl GenerationTemplates {
    pub fn custom(template: PromptTemplate) -> Self {
        GenerationTemplates {
            single: template.clone(),
            pair: template,
        }
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        Ok(GenerationTemplates::custom(PromptTemplate::from_file(path)?))
    }

    fn for_count(&self, n: usize) -> &PromptTemplate {
        if n <= 1 {
            &self.single
        } else {
            &self.pair
        }
    }
}

/// Builds the sentence-generation prompt for the sampled entities.
/// Surfaces join with `", "`, type labels with `","`.
pub fn build_generation_prompt(
    entities: &[Entity],
    domain: &str,
    templates: &GenerationTemplates,
) -> String {
    let surfaces: Vec<&str> = entities.iter().map(|e| e.surface()).collect();
    let types: Vec<&str> = entities.iter().map(|e| e.etype().as_str()).collect();
    templates
        .for_count(entities.len())
        .fill(domain, &surfaces.join(", "), &types.join(","))
}

/// Builds the judge prompt for one entity. Remote judge services receive the
/// structured surface/type fields on the wire; this is the reference wording
/// such a service is expected to present to its model.
pub fn build_judge_prompt(entity: &Entity) -> String {
    PromptTemplate::new(DEFAULT_JUDGE_TEMPLATE).fill("", entity.surface(), entity.etype().as_str())
}
