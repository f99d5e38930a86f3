//! The labeled provider-output corpus for the hallucination filter.

use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Clean,
    Extraneous,
    Mismatch,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Sample {
    pub id: usize,
    pub label: Label,
    pub output: String,
}

pub fn load() -> Vec<Sample> {
    include_str!("../fixtures/filter_corpus.jsonl")
        .lines()
        .map(|l| serde_json::from_str(l).expect("corpus line parses"))
        .collect()
}
