//! Shared inputs for the benchmarks.

use omniact_core::{generate_synthetic, ActionLabel, DiaryEntry, SampleScore, SynthConfig};

/// A well-formed three-item answer, as a model would return it.
pub const CLEAN_OUTPUT: &str = r#"[{"chain_of_thoughts": "They are at a grocery store looking at a chocolate bag and may want to know more about it.", "prediction": "Search online"}, {"chain_of_thoughts": "They might want to keep the brand in mind for later.", "prediction": "Save for reference"}, {"chain_of_thoughts": "They might share the find with a friend.", "prediction": "Share with others"}]"#;

/// The same answer wrapped in prose and a code fence, with one label off
/// the taxonomy.
pub const MESSY_OUTPUT: &str = "Sure! Here is my analysis:\n```json\n[{\"chain-of-thoughts\": \"They may want to look it up.\", \"prediction\": \"search online\"},\n {\"chain-of-thoughts\": \"Maybe they will teleport it.\", \"prediction\": \"Teleport\"},\n {\"chain-of-thoughts\": \"Or save it.\", \"prediction\": \"SaveForReference\"}]\n```\nLet me know if you need more.";

pub fn corpus(n: usize) -> Vec<DiaryEntry> {
    generate_synthetic(SynthConfig { seed: 99, n })
}

/// Scores pairing each entry's truth with the next entry's labels.
pub fn scores(corpus: &[DiaryEntry]) -> Vec<SampleScore<ActionLabel>> {
    let labels = |e: &DiaryEntry| e.labels.as_ref().expect("synthetic entries are labeled").actions(omniact_core::Level::Specific);
    corpus
        .iter()
        .zip(corpus.iter().cycle().skip(1))
        .map(|(a, b)| SampleScore::new(a.id.clone(), labels(a), labels(b)))
        .collect()
}
