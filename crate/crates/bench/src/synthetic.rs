//! A synthetic RCT whose binary covariate is observed only through text.
//!
//! Each document mixes words from a topic specific to its category `C` with
//! words shared by both categories, so the bag of words is a noisy proxy of
//! `C`. Treatment is randomized and `P(Y | T, C)` is a known table, giving a
//! known ATE.

use rand::Rng;
use serde::{Deserialize, Serialize};

use rctsub::{DiscreteRct, SeededRng, TabularDataset};

use crate::error::{BenchError, Result};
use crate::ingest::{RawTable, SUBPOPULATION_COVARIATE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticTextSpec {
    pub n_docs: usize,
    pub p_c: f64,
    pub p_t: f64,
    /// `p_y[t][c] = P(Y = 1 | T = t, C = c)`.
    pub p_y: [[f64; 2]; 2],
    pub words_per_doc: usize,
    /// Vocabulary size of each category's topic.
    pub topic_words: usize,
    pub shared_words: usize,
    /// Probability that a word is drawn from the document's topic.
    pub topic_share: f64,
    pub seed: u64,
}

impl Default for SyntheticTextSpec {
    fn default() -> Self {
        Self {
            n_docs: 3000,
            p_c: 0.5,
            p_t: 0.5,
            p_y: [[0.2, 0.4], [0.3, 0.6]],
            words_per_doc: 40,
            topic_words: 200,
            shared_words: 300,
            topic_share: 0.5,
            seed: 0,
        }
    }
}

impl SyntheticTextSpec {
    pub fn check(&self) -> Result<()> {
        let prob = |p: f64| p > 0.0 && p < 1.0;
        if self.n_docs < 2 || self.words_per_doc == 0 || self.topic_words == 0 || self.shared_words == 0 {
            return Err(BenchError::Config("synthetic corpus sizes must be positive".into()));
        }
        if !prob(self.p_c) || !prob(self.p_t) || !self.p_y.iter().flatten().all(|&p| (0.0..=1.0).contains(&p)) {
            return Err(BenchError::Config("synthetic probabilities out of range".into()));
        }
        if !(0.0..=1.0).contains(&self.topic_share) {
            return Err(BenchError::Config("topic_share must lie in [0, 1]".into()));
        }
        Ok(())
    }

    fn table(&self) -> DiscreteRct {
        DiscreteRct {
            p_c: self.p_c,
            p_t: self.p_t,
            p_y: self.p_y,
        }
    }

    pub fn true_ate(&self) -> f64 {
        self.table().true_ate()
    }
}

/// Lowercase letter spelling of `k`, at least two letters long.
fn letters(mut k: usize) -> String {
    let mut out = Vec::new();
    loop {
        out.push(b'a' + (k % 26) as u8);
        k /= 26;
        if k == 0 {
            break;
        }
    }
    while out.len() < 3 {
        out.push(b'a');
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

fn word(prefix: &str, k: usize) -> String {
    format!("{prefix}{}", letters(k))
}

pub fn generate_corpus(spec: &SyntheticTextSpec) -> Result<RawTable> {
    spec.check()?;
    let mut rng = SeededRng::new(spec.seed);
    let base = spec.table().generate(spec.n_docs, &mut rng)?;
    let c = base.covariates()[0].clone();
    let topic_prefix = ["zo", "ky"];
    let texts: Vec<String> = c
        .iter()
        .map(|&ci| {
            let words: Vec<String> = (0..spec.words_per_doc)
                .map(|_| {
                    if rng.random_bool(spec.topic_share) {
                        word(topic_prefix[ci as usize], rng.random_range(0..spec.topic_words))
                    } else {
                        word("mu", rng.random_range(0..spec.shared_words))
                    }
                })
                .collect();
            words.join(" ")
        })
        .collect();
    let categories = c.iter().map(|&ci| format!("topic{}", ci as u8)).collect();
    let dataset = TabularDataset::try_new(
        vec![SUBPOPULATION_COVARIATE.into()],
        vec![c],
        base.treatment().to_vec(),
        base.outcome().to_vec(),
    )?;
    Ok(RawTable {
        dataset,
        texts: Some(texts),
        categories: Some(categories),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn words_are_distinct_tokens() {
        assert_eq!(letters(0), "aaa");
        assert_eq!(letters(27), "abb");
        assert_ne!(word("mu", 1), word("mu", 26));
    }

    #[test]
    fn corpus_is_deterministic() {
        let spec = SyntheticTextSpec {
            n_docs: 50,
            ..Default::default()
        };
        assert_eq!(generate_corpus(&spec).unwrap(), generate_corpus(&spec).unwrap());
        let ate = spec.true_ate();
        assert!((ate - (0.5 * 0.1 + 0.5 * 0.2)).abs() < 1e-12);
    }
}
