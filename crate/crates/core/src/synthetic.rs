//! Seeded synthetic corpora for tests, benchmarks and demos.
//!
//! Every document draws background words from a Zipf-like distribution over
//! a shared vocabulary. Relevant documents additionally draw a fraction of
//! their tokens from a small topic vocabulary; irrelevant ones occasionally
//! draw from it too, so the classes overlap.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Relevance, Study};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub name: String,
    pub n_docs: usize,
    pub n_relevant: usize,
    pub background_terms: usize,
    pub topic_terms: usize,
    /// Tokens per document.
    pub doc_len: usize,
    /// Share of a relevant document's tokens drawn from the topic vocabulary.
    pub topic_share: f64,
    /// Share of an irrelevant document's tokens drawn from it.
    pub leak_share: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(name: impl Into<String>, n_docs: usize, n_relevant: usize, seed: u64) -> Self {
        SyntheticSpec {
            name: name.into(),
            n_docs,
            n_relevant: n_relevant.min(n_docs),
            background_terms: 3000,
            topic_terms: 40,
            doc_len: 60,
            topic_share: 0.2,
            leak_share: 0.01,
            seed,
        }
    }
}

pub fn background_term(k: usize) -> String {
    format!("bg{k}")
}

pub fn topic_term(k: usize) -> String {
    format!("topic{k}")
}

pub fn generate(spec: &SyntheticSpec) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let zipf = WeightedIndex::new((1..=spec.background_terms.max(1)).map(|r| 1.0 / r as f64))
        .expect("positive weights");
    let mut labels: Vec<Relevance> = (0..spec.n_docs)
        .map(|i| {
            if i < spec.n_relevant {
                Relevance::Relevant
            } else {
                Relevance::Irrelevant
            }
        })
        .collect();
    labels.shuffle(&mut rng);

    let studies = labels
        .into_iter()
        .enumerate()
        .map(|(id, label)| {
            let share = if label.is_relevant() { spec.topic_share } else { spec.leak_share };
            let words: Vec<String> = (0..spec.doc_len)
                .map(|_| {
                    if spec.topic_terms > 0 && rng.random_bool(share) {
                        topic_term(rng.random_range(0..spec.topic_terms))
                    } else {
                        background_term(zipf.sample(&mut rng))
                    }
                })
                .collect();
            let split = words.len().min(8);
            Study::new(id, words[..split].join(" "), words[split..].join(" ")).with_label(label)
        })
        .collect();
    Corpus::new(spec.name.clone(), studies)
}

/// A corpus with the given counts whose text carries no signal. Useful where
/// only the labels matter, such as linear review.
pub fn label_only(name: &str, n_docs: usize, n_relevant: usize, seed: u64) -> Corpus {
    let mut spec = SyntheticSpec::new(name, n_docs, n_relevant, seed);
    spec.background_terms = 50;
    spec.topic_terms = 0;
    spec.doc_len = 3;
    generate(&spec)
}
