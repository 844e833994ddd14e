//! Unigram bag-of-words featurization.

use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use rctsub::SparseBinaryMatrix;

use crate::error::{BenchError, Result};
use crate::stopwords;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabularyParams {
    /// Keep terms occurring in at least this many documents.
    pub min_df: usize,
    /// Drop terms occurring in more than this fraction of documents.
    pub max_df: f64,
    pub max_terms: usize,
}

impl Default for VocabularyParams {
    fn default() -> Self {
        Self {
            min_df: 5,
            max_df: 0.10,
            max_terms: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    /// Ordered by descending document frequency, then alphabetically.
    pub terms: Vec<String>,
    pub document_frequency: Vec<usize>,
    pub n_documents: usize,
    pub params: VocabularyParams,
    pub stopwords: String,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index(&self) -> HashMap<&str, u32> {
        self.terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i as u32))
            .collect()
    }
}

fn token_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b\w\w+\b").expect("valid pattern"))
}

/// Lowercase, strip accents (compatibility decomposition, then drop
/// combining marks) and split into word tokens of two or more characters.
/// Stopwords and purely numeric tokens are removed.
pub fn tokenize(doc: &str) -> Vec<String> {
    let folded: String = doc
        .nfkd()
        .filter(|c| !is_combining_mark(*c))
        .collect::<String>()
        .to_lowercase();
    token_pattern()
        .find_iter(&folded)
        .map(|m| m.as_str())
        .filter(|t| !t.chars().all(|c| c.is_numeric()))
        .filter(|t| !stopwords::is_stopword(t))
        .map(str::to_string)
        .collect()
}

fn unique_tokens(doc: &str) -> Vec<String> {
    let mut t = tokenize(doc);
    t.sort_unstable();
    t.dedup();
    t
}

pub fn build_vocabulary(corpus: &[String], params: &VocabularyParams) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(BenchError::Input(
            "cannot build a vocabulary from an empty corpus".into(),
        ));
    }
    if !(params.max_df > 0.0 && params.max_df <= 1.0) || params.max_terms == 0 {
        return Err(BenchError::Config(
            "max_df must lie in (0, 1] and max_terms be positive".into(),
        ));
    }
    let mut df: HashMap<String, usize> = HashMap::new();
    for doc in corpus {
        for t in unique_tokens(doc) {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let n = corpus.len();
    let max_count = (params.max_df * n as f64).floor() as usize;
    let mut kept: Vec<(String, usize)> = df
        .into_iter()
        .filter(|&(_, c)| c >= params.min_df && c <= max_count)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    kept.truncate(params.max_terms);
    if kept.is_empty() {
        return Err(BenchError::Input(format!(
            "no term survives the document-frequency filters (min_df {}, max_df {})",
            params.min_df, params.max_df
        )));
    }
    Ok(Vocabulary {
        document_frequency: kept.iter().map(|k| k.1).collect(),
        terms: kept.into_iter().map(|k| k.0).collect(),
        n_documents: n,
        params: params.clone(),
        stopwords: stopwords::VERSION.into(),
    })
}

/// Binary indicator of each vocabulary term per document.
pub fn featurize(corpus: &[String], vocab: &Vocabulary) -> SparseBinaryMatrix {
    let index = vocab.index();
    let rows = corpus.iter().map(|doc| {
        tokenize(doc)
            .iter()
            .filter_map(|t| index.get(t.as_str()).copied())
            .collect::<Vec<u32>>()
    });
    SparseBinaryMatrix::from_rows(vocab.len(), rows).expect("indices come from the vocabulary")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_pass() -> VocabularyParams {
        VocabularyParams {
            min_df: 1,
            max_df: 1.0,
            max_terms: 2000,
        }
    }

    #[test]
    fn tokenizer_normalizes() {
        assert_eq!(
            tokenize("The Café served 2024 crêpes, x y"),
            vec!["cafe", "served", "crepes"]
        );
    }

    #[test]
    fn min_df_boundary() {
        let mut corpus: Vec<String> = (0..6).map(|_| "physics".to_string()).collect();
        corpus.extend((0..60).map(|i| format!("filler{i}")));
        let vocab = build_vocabulary(&corpus, &VocabularyParams::default()).unwrap();
        assert_eq!(vocab.terms, vec!["physics"]);
        assert_eq!(vocab.document_frequency, vec![6]);
        let stricter = VocabularyParams {
            min_df: 7,
            ..Default::default()
        };
        assert!(build_vocabulary(&corpus, &stricter).is_err());
    }

    #[test]
    fn empty_document_is_all_zero_row() {
        let corpus = vec!["alpha beta".to_string(), String::new()];
        let vocab = build_vocabulary(&corpus, &all_pass()).unwrap();
        let x = featurize(&corpus, &vocab);
        assert_eq!(x.row(1), &[] as &[u32]);
        assert_eq!(x.row(0).len(), 2);
    }

    #[test]
    fn truncation_ties_break_alphabetically() {
        let corpus = vec!["delta charlie bravo".to_string(), "delta alpha".to_string()];
        let vocab = build_vocabulary(
            &corpus,
            &VocabularyParams {
                max_terms: 3,
                ..all_pass()
            },
        )
        .unwrap();
        assert_eq!(vocab.terms, vec!["delta", "alpha", "bravo"]);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(build_vocabulary(&[], &all_pass()).is_err());
    }
}
