#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use emonews_core::backends::{BackendSet, LlmBackend};
use emonews_core::index::{Corpus, HashEmbedder, Index, NewsArticle};
use emonews_core::pipeline::{Pipeline, PipelineConfig, StyleTable, SystemMode};
use emonews_core::sentiment::Lexicon;
use emonews_service::SdsService;

/// Titles chosen so that no emotion tag word appears inside them.
pub const ARTICLES: &[(&str, &str, &str)] = &[
    ("n1", "Flood kills dozens in coastal town", "Heavy rain caused rivers to burst their banks overnight."),
    ("n2", "Local team celebrates victory in cup final", "Fans filled the streets after the match."),
    ("n3", "Protesters furious over fuel price hike", "Thousands marched to parliament on Monday."),
    ("n4", "Astronomers stunned by comet discovery", "The object was spotted by an amateur observer."),
    ("n5", "City council approves transport plan", "The plan adds two bus lines next year."),
];

/// One question per article above, in the same order.
pub const QUESTIONS: &[&str] = &[
    "tell me about the flood in the coastal town",
    "how did the local team do in the cup final",
    "why are protesters marching about the fuel price",
    "what did astronomers find with the comet",
    "what did the city council approve for transport",
];

pub fn corpus() -> Corpus {
    Corpus::new(
        ARTICLES
            .iter()
            .map(|(id, title, body)| NewsArticle {
                id: id.to_string(),
                title: title.to_string(),
                body: body.to_string(),
                language: "en".into(),
                published: None,
                source_url: None,
            })
            .collect(),
    )
    .unwrap()
}

pub fn write_corpus(path: &Path) {
    corpus().save(path).unwrap();
}

pub fn pipeline_with(mode: SystemMode, llm: Option<Arc<dyn LlmBackend>>) -> Pipeline {
    let mut backends = BackendSet::mocks();
    if let Some(llm) = llm {
        backends.llm = llm;
    }
    let index = Arc::new(Index::build(&corpus(), &HashEmbedder).unwrap());
    Pipeline::new(mode, PipelineConfig::default(), index, backends, Arc::new(Lexicon::builtin()), StyleTable::default())
        .unwrap()
}

pub fn pipeline(mode: SystemMode) -> Pipeline {
    pipeline_with(mode, None)
}

pub fn service(dir: &Path, mode: SystemMode, blind: bool) -> SdsService {
    SdsService::open(pipeline(mode), dir, blind).unwrap()
}
