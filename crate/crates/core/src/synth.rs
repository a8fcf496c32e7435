//! Synthetic pools with a known difficulty structure.
//!
//! Each instance has a latent difficulty `d`. The surrogate answers
//! correctly with probability `1 - d` per generation (otherwise a uniformly
//! chosen distractor), and the target fails with probability `lambda * d`.
//! Surrogate disagreement therefore tracks target error.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pool::{LabeledPool, Pool, PoolInstance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub k: usize,
    /// Number of answer options.
    pub options: usize,
    pub difficulty_alpha: f64,
    pub difficulty_beta: f64,
    /// Coupling of target error probability to difficulty.
    pub target_link: f64,
    /// Probability that an instance is forced to difficulty 0.
    pub zero_se_boost: f64,
    pub seed: u64,
}

impl SynthConfig {
    /// The fixed fixture used by the acceptance tests.
    pub fn reference() -> Self {
        SynthConfig {
            n: 3000,
            k: 10,
            options: 4,
            difficulty_alpha: 1.0,
            difficulty_beta: 3.0,
            target_link: 0.9,
            zero_se_boost: 0.5,
            seed: 20240601,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::config(m));
        if self.n < 1 {
            return fail("synthetic pool needs N >= 1".into());
        }
        if self.k < 2 {
            return fail(format!("synthetic pool needs k >= 2, got {}", self.k));
        }
        if self.options < 2 {
            return fail(format!(
                "need at least 2 answer options, got {}",
                self.options
            ));
        }
        if !(self.difficulty_alpha > 0.0 && self.difficulty_beta > 0.0) {
            return fail("difficulty Beta shape parameters must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.target_link) {
            return fail(format!(
                "target_link must be in [0, 1], got {}",
                self.target_link
            ));
        }
        if !(0.0..=1.0).contains(&self.zero_se_boost) {
            return fail(format!(
                "zero_se_boost must be in [0, 1], got {}",
                self.zero_se_boost
            ));
        }
        Ok(())
    }
}

/// A generated pool plus the latent quantities behind it.
#[derive(Debug, Clone)]
pub struct SyntheticPool {
    pub labeled: LabeledPool,
    pub gold_answers: Vec<String>,
    pub difficulty: Vec<f64>,
}

fn option_label(j: usize) -> String {
    if j < 26 {
        char::from(b'A' + j as u8).to_string()
    } else {
        format!("opt{j}")
    }
}

pub fn make_pool(config: &SynthConfig) -> Result<SyntheticPool> {
    config.validate()?;
    let beta = Beta::new(config.difficulty_alpha, config.difficulty_beta)
        .map_err(|e| Error::config(format!("difficulty distribution: {e}")))?;
    let labels: Vec<String> = (0..config.options).map(option_label).collect();

    let mut instances = Vec::with_capacity(config.n);
    let mut losses = Vec::with_capacity(config.n);
    let mut gold_answers = Vec::with_capacity(config.n);
    let mut difficulty = Vec::with_capacity(config.n);
    for i in 0..config.n {
        // One stream per instance, so instances are independent of each other.
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(i as u64);

        let d = if rng.random::<f64>() < config.zero_se_boost {
            0.0
        } else {
            beta.sample(&mut rng)
        };
        let correct = rng.random_range(0..config.options);
        let answers = (0..config.k)
            .map(|_| {
                if rng.random::<f64>() < 1.0 - d {
                    labels[correct].clone()
                } else {
                    let j = rng.random_range(0..config.options - 1);
                    labels[if j >= correct { j + 1 } else { j }].clone()
                }
            })
            .collect();
        let loss = if rng.random::<f64>() < config.target_link * d {
            1.0
        } else {
            0.0
        };

        instances.push(PoolInstance::new(format!("synth-{i:05}"), answers)?);
        losses.push(loss);
        gold_answers.push(labels[correct].clone());
        difficulty.push(d);
    }
    Ok(SyntheticPool {
        labeled: LabeledPool::new(Pool::new(instances)?, losses)?,
        gold_answers,
        difficulty,
    })
}

/// The canonical acceptance fixture: N = 3000, k = 10, four options.
pub fn reference_pool() -> SyntheticPool {
    make_pool(&SynthConfig::reference()).expect("reference configuration is valid")
}
