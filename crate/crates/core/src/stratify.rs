//! Partitioning the pool into SE-ordered strata.
//!
//! Every method is a deterministic function of the SE values and the
//! requested stratum count `H`. Strata are indexed from low to high SE and
//! empty bins are dropped, so the effective count `H_eff` may be below `H`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of strata.
pub const DEFAULT_STRATA: usize = 5;

const KMEANS_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StratifyMethod {
    /// Zero-SE base stratum plus equal-frequency bins over positive SE.
    AdaptiveSe,
    EqualWidth,
    Quantile,
    Kmeans,
}

impl StratifyMethod {
    pub const ALL: [StratifyMethod; 4] = [
        StratifyMethod::AdaptiveSe,
        StratifyMethod::EqualWidth,
        StratifyMethod::Quantile,
        StratifyMethod::Kmeans,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StratifyMethod::AdaptiveSe => "adaptive_se",
            StratifyMethod::EqualWidth => "equal_width",
            StratifyMethod::Quantile => "quantile",
            StratifyMethod::Kmeans => "kmeans",
        }
    }
}

impl fmt::Display for StratifyMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StratifyMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StratifyMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown stratification method {s:?} (expected adaptive_se, equal_width, quantile or kmeans)"
                ))
            })
    }
}

/// A partition of the pool into `H_eff` non-empty, SE-ordered strata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratification {
    assignment: Vec<usize>,
    sizes: Vec<usize>,
    method: StratifyMethod,
    requested_h: usize,
}

impl Stratification {
    /// Builds a stratification from raw bin labels, dropping empty bins and
    /// reindexing the rest in label order.
    fn from_labels(labels: &[usize], method: StratifyMethod, requested_h: usize) -> Self {
        let max = labels.iter().copied().max().unwrap_or(0);
        let mut counts = vec![0usize; max + 1];
        for &l in labels {
            counts[l] += 1;
        }
        let mut remap = vec![usize::MAX; max + 1];
        let mut sizes = Vec::new();
        for (label, &c) in counts.iter().enumerate() {
            if c > 0 {
                remap[label] = sizes.len();
                sizes.push(c);
            }
        }
        Stratification {
            assignment: labels.iter().map(|&l| remap[l]).collect(),
            sizes,
            method,
            requested_h,
        }
    }

    /// Stratum index of every instance, in pool order.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn h_eff(&self) -> usize {
        self.sizes.len()
    }

    pub fn requested_h(&self) -> usize {
        self.requested_h
    }

    pub fn method(&self) -> StratifyMethod {
        self.method
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Instance indices of each stratum, each list in pool order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self.sizes.iter().map(|&n| Vec::with_capacity(n)).collect();
        for (i, &h) in self.assignment.iter().enumerate() {
            out[h].push(i);
        }
        out
    }
}

fn validate(se: &[f64], h: usize) -> Result<()> {
    if h < 2 {
        return Err(Error::config(format!(
            "number of strata must be at least 2, got {h}"
        )));
    }
    if se.is_empty() {
        return Err(Error::input("cannot stratify an empty pool"));
    }
    if let Some(v) = se.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::input(format!(
            "SE values must be finite and non-negative, got {v}"
        )));
    }
    Ok(())
}

/// Instance indices sorted by (value, pool index).
fn sorted_order(se: &[f64], subset: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut order: Vec<usize> = subset.collect();
    order.sort_by(|&a, &b| se[a].total_cmp(&se[b]).then(a.cmp(&b)));
    order
}

/// Equal-frequency binning by sorted rank: bin `b` takes ranks
/// `[floor(b*n/B), floor((b+1)*n/B))`. A run of equal values straddling an
/// edge stays in the lower bin. Returns a bin label per sorted position.
fn equal_frequency_labels(se: &[f64], order: &[usize], bins: usize) -> Vec<usize> {
    let n = order.len();
    let mut labels = Vec::with_capacity(n);
    for (rank, &i) in order.iter().enumerate() {
        // Largest b with floor(b*n/B) <= rank.
        let by_rank = (((rank + 1) * bins - 1) / n).min(bins - 1);
        let label = match labels.last() {
            Some(&prev) if rank > 0 && se[order[rank - 1]] == se[i] => prev,
            _ => by_rank,
        };
        labels.push(label);
    }
    labels
}

fn quantile_labels(
    se: &[f64],
    bins: usize,
    subset: impl Iterator<Item = usize>,
    offset: usize,
    out: &mut [usize],
) {
    let order = sorted_order(se, subset);
    if order.is_empty() {
        return;
    }
    for (&i, l) in order.iter().zip(equal_frequency_labels(se, &order, bins)) {
        out[i] = l + offset;
    }
}

/// Zero-SE instances form the base stratum; the positive-SE instances are
/// split into `H - 1` equal-frequency bins. Without any zero-SE instance all
/// `H` bins go to the positive values.
pub fn adaptive_se_stratify(se: &[f64], h: usize) -> Result<Stratification> {
    validate(se, h)?;
    let has_zero = se.contains(&0.0);
    let (bins, offset) = if has_zero { (h - 1, 1) } else { (h, 0) };
    let mut labels = vec![0usize; se.len()];
    quantile_labels(
        se,
        bins,
        (0..se.len()).filter(|&i| se[i] > 0.0),
        offset,
        &mut labels,
    );
    Ok(Stratification::from_labels(
        &labels,
        StratifyMethod::AdaptiveSe,
        h,
    ))
}

/// Equal-frequency bins over all values, zeros included.
pub fn quantile_stratify(se: &[f64], h: usize) -> Result<Stratification> {
    validate(se, h)?;
    let mut labels = vec![0usize; se.len()];
    quantile_labels(se, h, 0..se.len(), 0, &mut labels);
    Ok(Stratification::from_labels(
        &labels,
        StratifyMethod::Quantile,
        h,
    ))
}

/// `H` equal-width intervals over `[min, max]`; the last interval is closed.
pub fn equal_width_stratify(se: &[f64], h: usize) -> Result<Stratification> {
    validate(se, h)?;
    let min = se.iter().copied().fold(f64::INFINITY, f64::min);
    let max = se.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let labels: Vec<usize> = if max == min {
        vec![0; se.len()]
    } else {
        let width = (max - min) / h as f64;
        se.iter()
            .map(|&v| (((v - min) / width).floor() as usize).min(h - 1))
            .collect()
    };
    Ok(Stratification::from_labels(
        &labels,
        StratifyMethod::EqualWidth,
        h,
    ))
}

/// One-dimensional Lloyd iterations. Centroids start at `H` equally spaced
/// order statistics of the distinct values; equidistant points go to the
/// lower centroid.
pub fn kmeans_stratify(se: &[f64], h: usize) -> Result<Stratification> {
    validate(se, h)?;
    let mut distinct: Vec<f64> = se.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let d = distinct.len();
    let h_fit = h.min(d);
    if h_fit == 1 {
        return Ok(Stratification::from_labels(
            &vec![0; se.len()],
            StratifyMethod::Kmeans,
            h,
        ));
    }

    let mut centroids: Vec<f64> = (0..h_fit)
        .map(|j| distinct[j * (d - 1) / (h_fit - 1)])
        .collect();
    let mut labels = vec![usize::MAX; se.len()];
    for _ in 0..KMEANS_MAX_ITERS {
        let next: Vec<usize> = se.iter().map(|&v| nearest(&centroids, v)).collect();
        if next == labels {
            break;
        }
        labels = next;
        let mut sum = vec![0.0; h_fit];
        let mut count = vec![0usize; h_fit];
        for (&v, &l) in se.iter().zip(&labels) {
            sum[l] += v;
            count[l] += 1;
        }
        for j in 0..h_fit {
            if count[j] > 0 {
                centroids[j] = sum[j] / count[j] as f64;
            }
        }
    }

    // Centroids stay sorted in 1-D, but sort explicitly so strata are
    // SE-ordered whatever happened during the iterations.
    let mut by_centroid: Vec<usize> = (0..h_fit).collect();
    by_centroid.sort_by(|&a, &b| centroids[a].total_cmp(&centroids[b]).then(a.cmp(&b)));
    let mut rank = vec![0; h_fit];
    for (r, &j) in by_centroid.iter().enumerate() {
        rank[j] = r;
    }
    let labels: Vec<usize> = labels.iter().map(|&l| rank[l]).collect();
    Ok(Stratification::from_labels(
        &labels,
        StratifyMethod::Kmeans,
        h,
    ))
}

fn nearest(centroids: &[f64], v: f64) -> usize {
    let mut best = 0;
    let mut best_d = (v - centroids[0]).abs();
    for (j, &c) in centroids.iter().enumerate().skip(1) {
        let d = (v - c).abs();
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

pub fn stratify(method: StratifyMethod, se: &[f64], h: usize) -> Result<Stratification> {
    match method {
        StratifyMethod::AdaptiveSe => adaptive_se_stratify(se, h),
        StratifyMethod::EqualWidth => equal_width_stratify(se, h),
        StratifyMethod::Quantile => quantile_stratify(se, h),
        StratifyMethod::Kmeans => kmeans_stratify(se, h),
    }
}

/// Mean self-consistency of each stratum.
pub fn stratum_mean_sc(strat: &Stratification, sc: &[f64]) -> Result<Vec<f64>> {
    if sc.len() != strat.len() {
        return Err(Error::input(format!(
            "got {} self-consistency values for {} instances",
            sc.len(),
            strat.len()
        )));
    }
    let mut sums = vec![0.0; strat.h_eff()];
    for (&h, &s) in strat.assignment.iter().zip(sc) {
        sums[h] += s;
    }
    Ok(sums
        .iter()
        .zip(&strat.sizes)
        .map(|(s, &n)| s / n as f64)
        .collect())
}
