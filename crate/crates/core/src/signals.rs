//! Surrogate-side uncertainty signals.
//!
//! With a closed answer space, every distinct parsed answer is its own
//! meaning class, so semantic entropy is the Shannon entropy (in nats) of
//! the empirical answer distribution over the `k` surrogate generations,
//! and self-consistency is the share of the modal answer.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Label assigned to generations the parser could not map to an answer.
/// It counts as a class of its own.
pub const UNPARSED: &str = "<unparsed>";

/// Occurrence counts of each canonical answer among `k` generations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerHistogram {
    counts: BTreeMap<String, usize>,
    k: usize,
}

impl AnswerHistogram {
    pub fn from_answers<S: AsRef<str>>(answers: &[S]) -> Result<Self> {
        if answers.is_empty() {
            return Err(Error::input("answer list is empty"));
        }
        let mut counts = BTreeMap::new();
        for a in answers {
            let a = a.as_ref();
            if a.is_empty() {
                return Err(Error::input(format!(
                    "empty answer label (map parse failures to {UNPARSED:?})"
                )));
            }
            *counts.entry(a.to_owned()).or_insert(0) += 1;
        }
        Ok(AnswerHistogram {
            counts,
            k: answers.len(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> impl Iterator<Item = (&str, usize)> {
        self.counts.iter().map(|(a, &n)| (a.as_str(), n))
    }

    pub fn max_count(&self) -> usize {
        self.counts.values().copied().max().unwrap_or(0)
    }

    /// Shannon entropy of the class frequencies, in nats.
    pub fn entropy(&self) -> f64 {
        if self.counts.len() == 1 {
            return 0.0;
        }
        // Sum in a fixed order (sorted counts) so the result does not depend
        // on how labels are spelled.
        let mut ns: Vec<usize> = self.counts.values().copied().collect();
        ns.sort_unstable();
        let k = self.k as f64;
        -ns.iter()
            .map(|&n| {
                let p = n as f64 / k;
                p * p.ln()
            })
            .sum::<f64>()
    }

    pub fn self_consistency(&self) -> f64 {
        self.max_count() as f64 / self.k as f64
    }
}

/// Semantic entropy of a list of canonical answers, in nats.
pub fn semantic_entropy<S: AsRef<str>>(answers: &[S]) -> Result<f64> {
    Ok(AnswerHistogram::from_answers(answers)?.entropy())
}

/// Fraction of generations that agree with the most common answer.
pub fn self_consistency<S: AsRef<str>>(answers: &[S]) -> Result<f64> {
    Ok(AnswerHistogram::from_answers(answers)?.self_consistency())
}
