//! Evaluation pool, finite-pool risk and the budget-accounting label oracle.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::signals::AnswerHistogram;

/// One evaluation input with its surrogate answers and cached signals.
///
/// The target loss is not stored here; it lives behind a [`LabelOracle`].
#[derive(Debug, Clone, PartialEq)]
pub struct PoolInstance {
    id: String,
    surrogate_answers: Vec<String>,
    se: f64,
    sc: f64,
}

impl PoolInstance {
    pub fn new(id: impl Into<String>, surrogate_answers: Vec<String>) -> Result<Self> {
        let id = id.into();
        if surrogate_answers.len() < 2 {
            return Err(Error::input(format!(
                "instance {id:?} has {} surrogate answers, need at least 2",
                surrogate_answers.len()
            )));
        }
        let hist = AnswerHistogram::from_answers(&surrogate_answers)
            .map_err(|e| Error::input(format!("instance {id:?}: {e}")))?;
        Ok(PoolInstance {
            se: hist.entropy(),
            sc: hist.self_consistency(),
            id,
            surrogate_answers,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn surrogate_answers(&self) -> &[String] {
        &self.surrogate_answers
    }

    /// Semantic entropy in nats.
    pub fn se(&self) -> f64 {
        self.se
    }

    /// Self-consistency in `[1/k, 1]`.
    pub fn sc(&self) -> f64 {
        self.sc
    }

    pub fn k(&self) -> usize {
        self.surrogate_answers.len()
    }
}

/// An immutable, ordered pool of instances. Ingestion order is the
/// tie-breaking order everywhere downstream.
#[derive(Debug, Clone)]
pub struct Pool {
    instances: Vec<PoolInstance>,
    k: usize,
    index: HashMap<String, usize>,
}

impl Pool {
    pub fn new(instances: Vec<PoolInstance>) -> Result<Self> {
        let Some(first) = instances.first() else {
            return Err(Error::input("pool is empty"));
        };
        let k = first.k();
        let mut index = HashMap::with_capacity(instances.len());
        for (i, inst) in instances.iter().enumerate() {
            if inst.k() != k {
                return Err(Error::input(format!(
                    "instance {:?} has {} answers but the pool uses k = {k}",
                    inst.id,
                    inst.k()
                )));
            }
            if index.insert(inst.id.clone(), i).is_some() {
                return Err(Error::input(format!("duplicate instance id {:?}", inst.id)));
            }
        }
        Ok(Pool {
            instances,
            k,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn instances(&self) -> &[PoolInstance] {
        &self.instances
    }

    pub fn get(&self, i: usize) -> Option<&PoolInstance> {
        self.instances.get(i)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn se_values(&self) -> Vec<f64> {
        self.instances.iter().map(|i| i.se).collect()
    }

    pub fn sc_values(&self) -> Vec<f64> {
        self.instances.iter().map(|i| i.sc).collect()
    }
}

/// Bounds on a per-instance loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRange {
    pub min: f64,
    pub max: f64,
}

impl Default for LossRange {
    fn default() -> Self {
        LossRange { min: 0.0, max: 1.0 }
    }
}

/// A pool together with its full (hidden) target-loss vector.
#[derive(Debug, Clone)]
pub struct LabeledPool {
    pub pool: Pool,
    losses: Vec<f64>,
}

impl LabeledPool {
    pub fn new(pool: Pool, losses: Vec<f64>) -> Result<Self> {
        Self::with_range(pool, losses, LossRange::default())
    }

    pub fn with_range(pool: Pool, losses: Vec<f64>, range: LossRange) -> Result<Self> {
        check_losses(&pool, &losses)?;
        if let Some((i, l)) = losses
            .iter()
            .enumerate()
            .find(|(_, &l)| l < range.min || l > range.max)
        {
            return Err(Error::input(format!(
                "loss {l} of instance {:?} is outside [{}, {}]",
                pool.instances[i].id, range.min, range.max
            )));
        }
        Ok(LabeledPool { pool, losses })
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn risk(&self) -> f64 {
        mean(&self.losses)
    }

    pub fn oracle(&self) -> LabelOracle<'_> {
        LabelOracle::new(&self.pool, &self.losses)
    }
}

fn check_losses(pool: &Pool, losses: &[f64]) -> Result<()> {
    if losses.len() != pool.len() {
        return Err(Error::input(format!(
            "loss vector has {} entries but the pool has {}",
            losses.len(),
            pool.len()
        )));
    }
    if let Some(i) = losses.iter().position(|l| !l.is_finite()) {
        return Err(Error::input(format!(
            "loss of instance {:?} is not finite",
            pool.instances[i].id
        )));
    }
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean target loss over the whole pool.
pub fn finite_pool_risk(pool: &Pool, losses: &[f64]) -> Result<f64> {
    check_losses(pool, losses)?;
    Ok(mean(losses))
}

/// Reveals target losses on request and counts distinct instances labeled.
///
/// Each trial owns its own oracle; nothing is shared between trials.
#[derive(Debug, Clone)]
pub struct LabelOracle<'a> {
    pool: &'a Pool,
    losses: &'a [f64],
    revealed: Vec<bool>,
    labels_used: usize,
}

impl<'a> LabelOracle<'a> {
    pub fn new(pool: &'a Pool, losses: &'a [f64]) -> Self {
        debug_assert_eq!(pool.len(), losses.len());
        LabelOracle {
            pool,
            losses,
            revealed: vec![false; losses.len()],
            labels_used: 0,
        }
    }

    /// Reveals the loss of the instance at position `i` in pool order.
    pub fn reveal(&mut self, i: usize) -> Result<f64> {
        let loss = *self
            .losses
            .get(i)
            .ok_or_else(|| Error::input(format!("instance index {i} is out of range")))?;
        if !self.revealed[i] {
            self.revealed[i] = true;
            self.labels_used += 1;
        }
        Ok(loss)
    }

    pub fn reveal_id(&mut self, id: &str) -> Result<f64> {
        let i = self
            .pool
            .index_of(id)
            .ok_or_else(|| Error::input(format!("unknown instance id {id:?}")))?;
        self.reveal(i)
    }

    pub fn labels_used(&self) -> usize {
        self.labels_used
    }
}
