//! Distributing the label budget over strata.
//!
//! Every rule reduces to a vector of non-negative stratum weights; the
//! shared [`round_allocation`] step turns weights into integer counts with
//! `sum(m) = M` and `1 <= m_h <= N_h`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stratify::Stratification;

/// Default smoothing offset of the proxy-Neyman rule.
pub const DEFAULT_DELTA: f64 = 0.75;

/// Relative width (in units of `M`) within which two fractional parts count
/// as tied and a real-valued share counts as integral.
const ROUND_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocRule {
    /// `m_h = M / H`
    Equal,
    /// `m_h ∝ N_h`
    Proportional,
    /// `m_h ∝ sqrt(N_h)`
    Power,
    /// `m_h ∝ N_h (sqrt(p_h (1 - p_h)) + delta)` from surrogate self-consistency.
    ProxyNeyman,
    /// `m_h ∝ N_h sigma_h` from the true losses; a reference only.
    OracleNeyman,
}

impl AllocRule {
    pub const ALL: [AllocRule; 5] = [
        AllocRule::Equal,
        AllocRule::Proportional,
        AllocRule::Power,
        AllocRule::ProxyNeyman,
        AllocRule::OracleNeyman,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AllocRule::Equal => "equal",
            AllocRule::Proportional => "proportional",
            AllocRule::Power => "power",
            AllocRule::ProxyNeyman => "proxy_neyman",
            AllocRule::OracleNeyman => "oracle_neyman",
        }
    }

    pub fn needs_losses(self) -> bool {
        self == AllocRule::OracleNeyman
    }
}

impl fmt::Display for AllocRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AllocRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AllocRule::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown allocation rule {s:?} (expected equal, proportional, power, proxy_neyman or oracle_neyman)"
                ))
            })
    }
}

/// Pre-rounding allocation weights, one per stratum.
#[derive(Debug, Clone, PartialEq)]
pub struct StratumWeights(Vec<f64>);

impl StratumWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::input("no strata to allocate over"));
        }
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::input(format!(
                "weights must be finite and non-negative: {w:?}"
            )));
        }
        if w.iter().all(|&x| x == 0.0) {
            return Err(Error::input("at least one stratum weight must be positive"));
        }
        Ok(StratumWeights(w))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Integer label counts per stratum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    m: Vec<usize>,
    budget: usize,
    rule: AllocRule,
    delta: Option<f64>,
}

impl AllocationPlan {
    pub fn counts(&self) -> &[usize] {
        &self.m
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn rule(&self) -> AllocRule {
        self.rule
    }

    /// Offset used by the proxy-Neyman rule; `None` for the other rules.
    pub fn delta(&self) -> Option<f64> {
        self.delta
    }

    pub fn h(&self) -> usize {
        self.m.len()
    }

    fn tagged(mut self, rule: AllocRule, delta: Option<f64>) -> Self {
        self.rule = rule;
        self.delta = delta;
        self
    }
}

/// `w_h = N_h (sqrt(p_h (1 - p_h)) + delta)`.
pub fn proxy_neyman_weights(sizes: &[usize], p: &[f64], delta: f64) -> Result<StratumWeights> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::config(format!(
            "delta must be positive and finite, got {delta}"
        )));
    }
    if sizes.len() != p.len() {
        return Err(Error::input(format!(
            "{} strata sizes but {} self-consistency means",
            sizes.len(),
            p.len()
        )));
    }
    if let Some(x) = p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::input(format!(
            "stratum self-consistency {x} is outside [0, 1]"
        )));
    }
    check_sizes(sizes)?;
    StratumWeights::new(
        sizes
            .iter()
            .zip(p)
            .map(|(&n, &p)| n as f64 * ((p * (1.0 - p)).sqrt() + delta))
            .collect(),
    )
}

/// Raw Neyman weights `N_h sigma_h`, with `sigma_h` the population standard
/// deviation of the losses in stratum `h`. These may all be zero.
pub fn oracle_sigma_weights(strat: &Stratification, losses: &[f64]) -> Result<Vec<f64>> {
    if losses.len() != strat.len() {
        return Err(Error::input(format!(
            "loss vector has {} entries but the stratification covers {}",
            losses.len(),
            strat.len()
        )));
    }
    let h = strat.h_eff();
    let mut sum = vec![0.0; h];
    for (&s, &l) in strat.assignment().iter().zip(losses) {
        sum[s] += l;
    }
    let means: Vec<f64> = sum
        .iter()
        .zip(strat.sizes())
        .map(|(s, &n)| s / n as f64)
        .collect();
    let mut ss = vec![0.0; h];
    for (&s, &l) in strat.assignment().iter().zip(losses) {
        ss[s] += (l - means[s]).powi(2);
    }
    Ok(ss
        .iter()
        .zip(strat.sizes())
        .map(|(ss, &n)| n as f64 * (ss / n as f64).sqrt())
        .collect())
}

/// Oracle-Neyman weights. When every stratum is constant any allocation is
/// exact, and the proportional weights are used.
pub fn oracle_neyman_weights(strat: &Stratification, losses: &[f64]) -> Result<StratumWeights> {
    let w = oracle_sigma_weights(strat, losses)?;
    if w.iter().all(|&x| x == 0.0) {
        return baseline_weights(AllocRule::Proportional, strat.sizes());
    }
    StratumWeights::new(w)
}

/// Size-only weights: `1`, `N_h` or `sqrt(N_h)`.
pub fn baseline_weights(rule: AllocRule, sizes: &[usize]) -> Result<StratumWeights> {
    check_sizes(sizes)?;
    let w = match rule {
        AllocRule::Equal => vec![1.0; sizes.len()],
        AllocRule::Proportional => sizes.iter().map(|&n| n as f64).collect(),
        AllocRule::Power => sizes.iter().map(|&n| (n as f64).sqrt()).collect(),
        other => {
            return Err(Error::config(format!(
                "{other} is not a size-only allocation rule"
            )));
        }
    };
    StratumWeights::new(w)
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::input(format!(
            "stratum sizes must all be at least 1: {sizes:?}"
        )));
    }
    Ok(())
}

/// Largest-remainder apportionment of `total` units in proportion to
/// `weights`: floors first, then one extra unit to each of the largest
/// fractional parts, ties to the lower index.
pub fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    assert!(sum > 0.0, "largest_remainder needs a positive weight");
    let tol = ROUND_TOL * total.max(1) as f64;
    let raw: Vec<f64> = weights
        .iter()
        .map(|&w| {
            let r = total as f64 * w / sum;
            if (r - r.round()).abs() <= tol {
                r.round()
            } else {
                r
            }
        })
        .collect();
    let mut m: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let frac: Vec<f64> = raw.iter().zip(&m).map(|(r, &b)| r - b as f64).collect();
    let assigned: usize = m.iter().sum();
    if assigned > total {
        // Only reachable when many shares were snapped up at once.
        let mut extra = assigned - total;
        for h in (0..m.len()).rev() {
            let take = extra.min(m[h]);
            m[h] -= take;
            extra -= take;
        }
        return m;
    }
    let mut chosen = vec![false; m.len()];
    for _ in 0..total - assigned {
        let mut best: Option<usize> = None;
        for j in (0..m.len()).filter(|&j| !chosen[j]) {
            match best {
                Some(b) if frac[j] <= frac[b] + tol => {}
                _ => best = Some(j),
            }
        }
        let Some(b) = best else { break };
        chosen[b] = true;
        m[b] += 1;
    }
    m
}

fn argmax_lowest(m: &[usize]) -> usize {
    let mut best = 0;
    for (j, &x) in m.iter().enumerate() {
        if x > m[best] {
            best = j;
        }
    }
    best
}

/// Integerizes `weights` into a plan with `sum(m) = total` and
/// `1 <= m_h <= caps[h]`.
///
/// Deficient strata are raised to 1 by taking from the stratum with the
/// largest count; strata above their cap are clipped and the excess is
/// reapportioned over the unclipped strata.
pub fn round_allocation(
    weights: &StratumWeights,
    total: usize,
    caps: &[usize],
) -> Result<AllocationPlan> {
    let h = weights.len();
    if caps.len() != h {
        return Err(Error::input(format!(
            "{h} weights but {} stratum sizes",
            caps.len()
        )));
    }
    check_sizes(caps)?;
    if total < h {
        return Err(Error::config(format!(
            "budget M = {total} is smaller than the number of strata H_eff = {h}; every stratum needs at least one label"
        )));
    }
    let n: usize = caps.iter().sum();
    if total > n {
        return Err(Error::config(format!(
            "budget M = {total} exceeds the pool size N = {n}"
        )));
    }

    let w = weights.as_slice();
    let mut m = largest_remainder(w, total);

    for j in 0..h {
        while m[j] == 0 {
            let donor = argmax_lowest(&m);
            m[donor] -= 1;
            m[j] += 1;
        }
    }

    let mut clipped = vec![false; h];
    loop {
        let mut excess = 0;
        for j in 0..h {
            if m[j] > caps[j] {
                excess += m[j] - caps[j];
                m[j] = caps[j];
                clipped[j] = true;
            }
        }
        if excess == 0 {
            break;
        }
        let open: Vec<usize> = (0..h).filter(|&j| !clipped[j]).collect();
        let mut ow: Vec<f64> = open.iter().map(|&j| w[j]).collect();
        if ow.iter().all(|&x| x == 0.0) {
            ow = open.iter().map(|&j| (caps[j] - m[j]) as f64).collect();
        }
        for (&j, add) in open.iter().zip(largest_remainder(&ow, excess)) {
            m[j] += add;
        }
    }

    debug_assert_eq!(m.iter().sum::<usize>(), total);
    Ok(AllocationPlan {
        m,
        budget: total,
        rule: AllocRule::Proportional,
        delta: None,
    })
}

/// Computes the weights of `rule` for `strat` and rounds them to a plan.
///
/// `sc` is needed by the proxy-Neyman rule and `losses` by the oracle rule.
pub fn allocate(
    rule: AllocRule,
    strat: &Stratification,
    sc: &[f64],
    losses: Option<&[f64]>,
    delta: f64,
    budget: usize,
) -> Result<AllocationPlan> {
    let sizes = strat.sizes();
    let (weights, delta) = match rule {
        AllocRule::Equal | AllocRule::Proportional | AllocRule::Power => {
            (baseline_weights(rule, sizes)?, None)
        }
        AllocRule::ProxyNeyman => {
            let p = crate::stratify::stratum_mean_sc(strat, sc)?;
            (proxy_neyman_weights(sizes, &p, delta)?, Some(delta))
        }
        AllocRule::OracleNeyman => {
            let losses = losses.ok_or_else(|| {
                Error::config("oracle_neyman allocation needs the full loss vector")
            })?;
            (oracle_neyman_weights(strat, losses)?, None)
        }
    };
    Ok(round_allocation(&weights, budget, sizes)?.tagged(rule, delta))
}
