//! Within-stratum sampling without replacement and the stratified
//! Horvitz-Thompson risk estimator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::allocate::AllocationPlan;
use crate::error::{Error, Result};
use crate::pool::LabelOracle;

/// Address of an independent random stream: one per (seed, trial, stratum).
///
/// The stream is ChaCha8 keyed by the master seed with the 64-bit stream id
/// `trial << 32 | stratum`, so any trial can be replayed on its own and the
/// results do not depend on execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamAddress {
    pub master_seed: u64,
    pub trial: u32,
    pub stratum: u32,
}

impl StreamAddress {
    pub fn new(master_seed: u64, trial: u32, stratum: u32) -> Self {
        StreamAddress {
            master_seed,
            trial,
            stratum,
        }
    }

    pub fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(((self.trial as u64) << 32) | self.stratum as u64);
        rng
    }
}

/// Draws `m` items uniformly without replacement by a partial Fisher-Yates
/// shuffle of a copy of `ids`. Every size-`m` subset is equally likely.
pub fn sample_without_replacement<T: Copy, R: Rng + ?Sized>(
    ids: &[T],
    m: usize,
    rng: &mut R,
) -> Result<Vec<T>> {
    if m == 0 || m > ids.len() {
        return Err(Error::input(format!(
            "cannot draw {m} items without replacement from {}",
            ids.len()
        )));
    }
    let mut buf = ids.to_vec();
    let n = buf.len();
    for i in 0..m {
        let j = rng.random_range(i..n);
        buf.swap(i, j);
    }
    buf.truncate(m);
    Ok(buf)
}

/// Per-stratum samples of instance indices for one trial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleDraw {
    strata: Vec<Vec<usize>>,
}

impl SampleDraw {
    pub fn new(strata: Vec<Vec<usize>>) -> Self {
        SampleDraw { strata }
    }

    /// Samples `plan.counts()[h]` members of every stratum, stratum `h`
    /// using stream `(master_seed, trial, h)`.
    pub fn draw(
        members: &[Vec<usize>],
        plan: &AllocationPlan,
        master_seed: u64,
        trial: u32,
    ) -> Result<Self> {
        if members.len() != plan.h() {
            return Err(Error::input(format!(
                "plan has {} strata but the stratification has {}",
                plan.h(),
                members.len()
            )));
        }
        let strata = members
            .iter()
            .zip(plan.counts())
            .enumerate()
            .map(|(h, (ids, &m))| {
                let mut rng = StreamAddress::new(master_seed, trial, h as u32).rng();
                sample_without_replacement(ids, m, &mut rng)
            })
            .collect::<Result<_>>()?;
        Ok(SampleDraw { strata })
    }

    pub fn strata(&self) -> &[Vec<usize>] {
        &self.strata
    }

    pub fn total(&self) -> usize {
        self.strata.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub value: f64,
    pub labels_used: usize,
}

fn check_draw(draw: &SampleDraw, plan: &AllocationPlan, sizes: &[usize]) -> Result<()> {
    if draw.strata.len() != plan.h() || sizes.len() != plan.h() {
        return Err(Error::input(format!(
            "draw has {} strata, plan {}, sizes {}",
            draw.strata.len(),
            plan.h(),
            sizes.len()
        )));
    }
    for (h, ((s, &m), &n)) in draw.strata.iter().zip(plan.counts()).zip(sizes).enumerate() {
        if s.len() != m || m == 0 || m > n {
            return Err(Error::input(format!(
                "stratum {h}: drew {} of {n} instances but the plan asks for {m}",
                s.len()
            )));
        }
    }
    Ok(())
}

/// `R = (1/N) sum_h N_h * mean(loss over S_h)`, revealing every sampled loss.
pub fn ht_estimate(
    draw: &SampleDraw,
    plan: &AllocationPlan,
    sizes: &[usize],
    oracle: &mut LabelOracle<'_>,
) -> Result<RiskEstimate> {
    check_draw(draw, plan, sizes)?;
    let n: usize = sizes.iter().sum();
    let mut total = 0.0;
    for (s, &nh) in draw.strata.iter().zip(sizes) {
        let mut sum = 0.0;
        for &i in s {
            sum += oracle.reveal(i)?;
        }
        total += nh as f64 * (sum / s.len() as f64);
    }
    Ok(RiskEstimate {
        value: total / n as f64,
        labels_used: oracle.labels_used(),
    })
}

/// The same estimator written as inverse-inclusion weighting:
/// `sum_{i in S} loss_i / (N * pi_h(i))` with `pi_h = m_h / N_h`.
pub fn ht_estimate_weighted(
    draw: &SampleDraw,
    plan: &AllocationPlan,
    sizes: &[usize],
    oracle: &mut LabelOracle<'_>,
) -> Result<RiskEstimate> {
    check_draw(draw, plan, sizes)?;
    let n: f64 = sizes.iter().sum::<usize>() as f64;
    let mut total = 0.0;
    for ((s, &m), &nh) in draw.strata.iter().zip(plan.counts()).zip(sizes) {
        let pi = m as f64 / nh as f64;
        for &i in s {
            total += oracle.reveal(i)? / (n * pi);
        }
    }
    Ok(RiskEstimate {
        value: total,
        labels_used: oracle.labels_used(),
    })
}

/// Mean loss over `budget` instances drawn uniformly from the whole pool.
pub fn uniform_estimate<R: Rng + ?Sized>(
    pool_size: usize,
    budget: usize,
    rng: &mut R,
    oracle: &mut LabelOracle<'_>,
) -> Result<RiskEstimate> {
    if budget == 0 || budget > pool_size {
        return Err(Error::config(format!(
            "budget M = {budget} must be between 1 and the pool size N = {pool_size}"
        )));
    }
    let ids: Vec<usize> = (0..pool_size).collect();
    let sample = sample_without_replacement(&ids, budget, rng)?;
    let mut sum = 0.0;
    for i in sample {
        sum += oracle.reveal(i)?;
    }
    Ok(RiskEstimate {
        value: sum / budget as f64,
        labels_used: oracle.labels_used(),
    })
}
