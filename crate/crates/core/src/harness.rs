//! Monte Carlo evaluation of estimators on a fully labeled pool.
//!
//! Trial `t` of every method at a given budget draws from the streams
//! `(master_seed, t, ·)`, so methods are compared on shared seeds.

use std::fmt;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocate::{allocate, AllocRule, AllocationPlan, DEFAULT_DELTA};
use crate::error::{Error, Result};
use crate::estimate::{ht_estimate, uniform_estimate, RiskEstimate, SampleDraw, StreamAddress};
use crate::pool::LabeledPool;
use crate::stratify::{stratify, Stratification, StratifyMethod, DEFAULT_STRATA};

/// Trials per budget used for reported results.
pub const DEFAULT_TRIALS: usize = 3000;

/// Budgets of the ablation tables.
pub const ABLATION_BUDGETS: [usize; 5] = [50, 100, 200, 400, 800];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StratifiedSpec {
    pub stratify: StratifyMethod,
    pub strata: usize,
    pub alloc: AllocRule,
    pub delta: f64,
}

impl StratifiedSpec {
    pub fn new(stratify: StratifyMethod, strata: usize, alloc: AllocRule) -> Self {
        StratifiedSpec {
            stratify,
            strata,
            alloc,
            delta: DEFAULT_DELTA,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }
}

/// An estimator configuration: flat uniform sampling or a stratified design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MethodSpec {
    Uniform,
    Stratified(StratifiedSpec),
}

impl MethodSpec {
    /// Adaptive-SE strata with `rule` at the default `H` and `delta`.
    pub fn adaptive(rule: AllocRule) -> Self {
        MethodSpec::Stratified(StratifiedSpec::new(
            StratifyMethod::AdaptiveSe,
            DEFAULT_STRATA,
            rule,
        ))
    }

    /// The default method: adaptive-SE strata with proxy-Neyman allocation.
    pub fn proxy_neyman() -> Self {
        Self::adaptive(AllocRule::ProxyNeyman)
    }

    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodSpec::Uniform => f.write_str("uniform"),
            MethodSpec::Stratified(s) => {
                write!(f, "{}+{}(H={}", s.stratify, s.alloc, s.strata)?;
                if s.alloc == AllocRule::ProxyNeyman {
                    write!(f, ",delta={}", s.delta)?;
                }
                f.write_str(")")
            }
        }
    }
}

/// A method with its stratification computed; allocation depends on `M`.
#[derive(Debug, Clone)]
pub struct PreparedMethod<'a> {
    labeled: &'a LabeledPool,
    spec: MethodSpec,
    strata: Option<(Stratification, Vec<Vec<usize>>)>,
}

impl<'a> PreparedMethod<'a> {
    pub fn new(labeled: &'a LabeledPool, spec: MethodSpec) -> Result<Self> {
        let strata = match spec {
            MethodSpec::Uniform => None,
            MethodSpec::Stratified(s) => {
                let st = stratify(s.stratify, &labeled.pool.se_values(), s.strata)?;
                let members = st.members();
                Some((st, members))
            }
        };
        Ok(PreparedMethod {
            labeled,
            spec,
            strata,
        })
    }

    pub fn spec(&self) -> MethodSpec {
        self.spec
    }

    pub fn stratification(&self) -> Option<&Stratification> {
        self.strata.as_ref().map(|(s, _)| s)
    }

    /// Allocation at `budget`; `None` for uniform sampling.
    pub fn plan(&self, budget: usize) -> Result<Option<AllocationPlan>> {
        let n = self.labeled.pool.len();
        if budget == 0 || budget > n {
            return Err(Error::config(format!(
                "budget M = {budget} must be between 1 and the pool size N = {n}"
            )));
        }
        match (&self.spec, &self.strata) {
            (MethodSpec::Stratified(s), Some((st, _))) => allocate(
                s.alloc,
                st,
                &self.labeled.pool.sc_values(),
                Some(self.labeled.losses()),
                s.delta,
                budget,
            )
            .map(Some),
            _ => Ok(None),
        }
    }

    fn trial(
        &self,
        plan: Option<&AllocationPlan>,
        budget: usize,
        seed: u64,
        t: u32,
    ) -> Result<RiskEstimate> {
        let mut oracle = self.labeled.oracle();
        let est = match (plan, &self.strata) {
            (Some(plan), Some((st, members))) => {
                let draw = SampleDraw::draw(members, plan, seed, t)?;
                ht_estimate(&draw, plan, st.sizes(), &mut oracle)?
            }
            _ => {
                let mut rng = StreamAddress::new(seed, t, 0).rng();
                uniform_estimate(self.labeled.pool.len(), budget, &mut rng, &mut oracle)?
            }
        };
        debug_assert_eq!(est.labels_used, budget);
        Ok(est)
    }

    /// Runs `trials` independent trials at `budget`.
    pub fn run(
        &self,
        budget: usize,
        trials: usize,
        seed: u64,
        exec: Execution,
    ) -> Result<Vec<RiskEstimate>> {
        let plan = self.plan(budget)?;
        let trials = u32::try_from(trials)
            .map_err(|_| Error::config(format!("too many trials: {trials}")))?;
        let one = |t: u32| self.trial(plan.as_ref(), budget, seed, t);
        match exec {
            Execution::Serial => (0..trials).map(one).collect(),
            Execution::Parallel => (0..trials).into_par_iter().map(one).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

/// `trials` Monte Carlo estimates of the pool risk by `method` at `budget`.
pub fn run_trials(
    labeled: &LabeledPool,
    method: MethodSpec,
    budget: usize,
    trials: usize,
    master_seed: u64,
) -> Result<Vec<RiskEstimate>> {
    PreparedMethod::new(labeled, method)?.run(budget, trials, master_seed, Execution::Parallel)
}

pub fn values(estimates: &[RiskEstimate]) -> Vec<f64> {
    estimates.iter().map(|e| e.value).collect()
}

/// Mean squared error against the true pool risk.
pub fn mse(estimates: &[f64], risk: f64) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::input("MSE of an empty set of estimates"));
    }
    Ok(estimates.iter().map(|e| (e - risk).powi(2)).sum::<f64>() / estimates.len() as f64)
}

/// Standard error of the MSE itself (spread of squared errors over `sqrt(T)`).
pub fn mse_standard_error(estimates: &[f64], risk: f64) -> Result<f64> {
    let sq: Vec<f64> = estimates.iter().map(|e| (e - risk).powi(2)).collect();
    sem(&sq)
}

/// `MSE(method) / MSE(uniform)`; `None` when the uniform MSE is zero.
pub fn relative_mse(method: &[f64], uniform: &[f64], risk: f64) -> Result<Option<f64>> {
    if method.len() != uniform.len() {
        return Err(Error::input(format!(
            "method has {} trials but uniform has {}",
            method.len(),
            uniform.len()
        )));
    }
    let u = mse(uniform, risk)?;
    if u == 0.0 {
        return Ok(None);
    }
    Ok(Some(mse(method, risk)? / u))
}

/// Standard error of the mean: sample standard deviation over `sqrt(T)`.
pub fn sem(estimates: &[f64]) -> Result<f64> {
    let t = estimates.len();
    if t < 2 {
        return Err(Error::input(format!(
            "standard error needs at least 2 values, got {t}"
        )));
    }
    let mean = estimates.iter().sum::<f64>() / t as f64;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (t - 1) as f64;
    Ok((var / t as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavingsRecord {
    pub m_uniform_ref: usize,
    pub target_mse: f64,
    /// Budget at which the method first reaches the target MSE; `None` when
    /// it never does on the measured grid.
    pub matched_m: Option<f64>,
    pub savings_fraction: Option<f64>,
}

fn sorted_curve(curve: &[(usize, f64)]) -> Result<Vec<(f64, f64)>> {
    if curve.is_empty() {
        return Err(Error::input("empty MSE curve"));
    }
    let mut c: Vec<(f64, f64)> = curve.iter().map(|&(m, e)| (m as f64, e)).collect();
    c.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(c)
}

/// Budget needed by the method to match the uniform MSE at `m_ref`,
/// by piecewise-linear interpolation of the method's MSE curve.
pub fn budget_savings(
    uniform_curve: &[(usize, f64)],
    method_curve: &[(usize, f64)],
    m_ref: usize,
) -> Result<SavingsRecord> {
    let u = sorted_curve(uniform_curve)?;
    let m_ref_f = m_ref as f64;
    let target = interpolate(&u, m_ref_f).ok_or_else(|| {
        Error::input(format!(
            "reference budget {m_ref} is outside the uniform curve"
        ))
    })?;

    let c = sorted_curve(method_curve)?;
    let mut matched = None;
    for (j, &(m, e)) in c.iter().enumerate() {
        if e <= target {
            matched = Some(if j == 0 {
                m
            } else {
                let (m0, e0) = c[j - 1];
                m0 + (target - e0) * (m - m0) / (e - e0)
            });
            break;
        }
    }
    Ok(SavingsRecord {
        m_uniform_ref: m_ref,
        target_mse: target,
        matched_m: matched,
        savings_fraction: matched.map(|m| 1.0 - m / m_ref_f),
    })
}

fn interpolate(curve: &[(f64, f64)], x: f64) -> Option<f64> {
    if let Some(&(_, y)) = curve.iter().find(|p| p.0 == x) {
        return Some(y);
    }
    curve.windows(2).find_map(|w| {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        (x > x0 && x < x1).then(|| y0 + (x - x0) * (y1 - y0) / (x1 - x0))
    })
}

/// One (method, budget) cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub method: String,
    pub stratification: Option<StratifyMethod>,
    pub allocation: Option<AllocRule>,
    #[serde(rename = "H")]
    pub h: Option<usize>,
    #[serde(rename = "H_eff")]
    pub h_eff: Option<usize>,
    pub delta: Option<f64>,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub seed: u64,
    pub mean_estimate: f64,
    #[serde(rename = "R_D")]
    pub r_d: f64,
    pub mse: f64,
    pub relative_mse: Option<f64>,
    pub sem: f64,
    /// Standard error of `mse`.
    pub mse_se: f64,
    pub strata_sizes: Vec<usize>,
    pub allocation_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub method: String,
    #[serde(rename = "M")]
    pub m: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub pool_size: usize,
    pub k: usize,
    #[serde(rename = "R_D")]
    pub r_d: f64,
    pub trials: usize,
    pub master_seed: u64,
    /// Methods share trial streams with the uniform baseline.
    pub shared_seeds: bool,
    pub budgets: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub meta: ReportMeta,
    pub cells: Vec<ReportCell>,
    pub skipped: Vec<SkippedCell>,
}

/// The flat CSV row layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub method: String,
    pub stratification: Option<StratifyMethod>,
    pub allocation: Option<AllocRule>,
    #[serde(rename = "H")]
    pub h: Option<usize>,
    #[serde(rename = "H_eff")]
    pub h_eff: Option<usize>,
    pub delta: Option<f64>,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub seed: u64,
    pub mean_estimate: f64,
    #[serde(rename = "R_D")]
    pub r_d: f64,
    pub mse: f64,
    pub relative_mse: Option<f64>,
    pub sem: f64,
}

impl From<&ReportCell> for CsvRow {
    fn from(c: &ReportCell) -> Self {
        CsvRow {
            method: c.method.clone(),
            stratification: c.stratification,
            allocation: c.allocation,
            h: c.h,
            h_eff: c.h_eff,
            delta: c.delta,
            m: c.m,
            t: c.t,
            seed: c.seed,
            mean_estimate: c.mean_estimate,
            r_d: c.r_d,
            mse: c.mse,
            relative_mse: c.relative_mse,
            sem: c.sem,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    #[serde(rename = "M")]
    pub m: usize,
    pub mse: f64,
    pub relative_mse: Option<f64>,
    pub sem: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotCurve {
    pub method: String,
    pub points: Vec<PlotPoint>,
}

impl ExperimentReport {
    pub fn cell(&self, method: &str, m: usize) -> Option<&ReportCell> {
        self.cells.iter().find(|c| c.method == method && c.m == m)
    }

    /// `(M, MSE)` points of one method, in budget order.
    pub fn mse_curve(&self, method: &str) -> Vec<(usize, f64)> {
        let mut c: Vec<(usize, f64)> = self
            .cells
            .iter()
            .filter(|c| c.method == method)
            .map(|c| (c.m, c.mse))
            .collect();
        c.sort_by_key(|p| p.0);
        c
    }

    /// Mean relative MSE of a method over the budgets where it is defined.
    pub fn mean_relative_mse(&self, method: &str) -> Option<f64> {
        let r: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.method == method)
            .filter_map(|c| c.relative_mse)
            .collect();
        (!r.is_empty()).then(|| r.iter().sum::<f64>() / r.len() as f64)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for c in &self.cells {
            out.serialize(CsvRow::from(c))?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Vec<CsvRow>> {
        csv::Reader::from_reader(r)
            .deserialize()
            .map(|row| row.map_err(Error::from))
            .collect()
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        Ok(serde_json::from_reader(r)?)
    }

    /// One curve per method for external plotting.
    pub fn plot_data(&self) -> Vec<PlotCurve> {
        let mut curves: Vec<PlotCurve> = Vec::new();
        for c in &self.cells {
            let point = PlotPoint {
                m: c.m,
                mse: c.mse,
                relative_mse: c.relative_mse,
                sem: c.sem,
            };
            match curves.iter_mut().find(|k| k.method == c.method) {
                Some(k) => k.points.push(point),
                None => curves.push(PlotCurve {
                    method: c.method.clone(),
                    points: vec![point],
                }),
            }
        }
        for k in &mut curves {
            k.points.sort_by_key(|p| p.m);
        }
        curves
    }
}

#[allow(clippy::too_many_arguments)]
fn cell(
    prepared: &PreparedMethod<'_>,
    plan: Option<&AllocationPlan>,
    m: usize,
    trials: usize,
    seed: u64,
    est: &[f64],
    uniform: &[f64],
    r_d: f64,
) -> Result<ReportCell> {
    let (stratification, allocation, h, h_eff, delta, sizes) = match prepared.spec() {
        MethodSpec::Uniform => (
            None,
            None,
            None,
            None,
            None,
            vec![prepared.labeled.pool.len()],
        ),
        MethodSpec::Stratified(s) => {
            let st = prepared
                .stratification()
                .expect("stratified method has strata");
            (
                Some(s.stratify),
                Some(s.alloc),
                Some(s.strata),
                Some(st.h_eff()),
                plan.and_then(AllocationPlan::delta),
                st.sizes().to_vec(),
            )
        }
    };
    Ok(ReportCell {
        method: prepared.spec().name(),
        stratification,
        allocation,
        h,
        h_eff,
        delta,
        m,
        t: trials,
        seed,
        mean_estimate: est.iter().sum::<f64>() / est.len() as f64,
        r_d,
        mse: mse(est, r_d)?,
        relative_mse: relative_mse(est, uniform, r_d)?,
        sem: if est.len() >= 2 { sem(est)? } else { 0.0 },
        mse_se: if est.len() >= 2 {
            mse_standard_error(est, r_d)?
        } else {
            0.0
        },
        allocation_counts: plan.map_or_else(|| vec![m], |p| p.counts().to_vec()),
        strata_sizes: sizes,
    })
}

/// Runs every method at every budget, always including the uniform
/// baseline as the relative-MSE denominator. Infeasible cells are skipped
/// and recorded.
pub fn sweep(
    labeled: &LabeledPool,
    methods: &[MethodSpec],
    budgets: &[usize],
    trials: usize,
    master_seed: u64,
) -> Result<ExperimentReport> {
    sweep_with(
        labeled,
        methods,
        budgets,
        trials,
        master_seed,
        Execution::Parallel,
    )
}

pub fn sweep_with(
    labeled: &LabeledPool,
    methods: &[MethodSpec],
    budgets: &[usize],
    trials: usize,
    master_seed: u64,
    exec: Execution,
) -> Result<ExperimentReport> {
    if trials == 0 {
        return Err(Error::config("number of trials must be at least 1"));
    }
    if budgets.is_empty() {
        return Err(Error::config("no budgets given"));
    }
    let mut specs = vec![MethodSpec::Uniform];
    for m in methods {
        if !specs.contains(m) {
            specs.push(*m);
        }
    }
    let prepared: Vec<PreparedMethod<'_>> = specs
        .iter()
        .map(|&s| PreparedMethod::new(labeled, s))
        .collect::<Result<_>>()?;
    let r_d = labeled.risk();
    let n = labeled.pool.len();

    let mut cells = Vec::new();
    let mut skipped = Vec::new();
    for &m in budgets {
        if m == 0 || m > n {
            for p in &prepared {
                skipped.push(SkippedCell {
                    method: p.spec().name(),
                    m,
                    reason: format!("budget M = {m} is outside [1, N = {n}]"),
                });
            }
            continue;
        }
        let uniform = values(&prepared[0].run(m, trials, master_seed, exec)?);
        for p in &prepared {
            let plan = match p.plan(m) {
                Ok(plan) => plan,
                Err(e) if e.is_config() => {
                    skipped.push(SkippedCell {
                        method: p.spec().name(),
                        m,
                        reason: e.to_string(),
                    });
                    continue;
                }
                Err(e) => return Err(e),
            };
            let est = if p.spec() == MethodSpec::Uniform {
                uniform.clone()
            } else {
                values(&p.run(m, trials, master_seed, exec)?)
            };
            cells.push(cell(
                p,
                plan.as_ref(),
                m,
                trials,
                master_seed,
                &est,
                &uniform,
                r_d,
            )?);
        }
    }
    Ok(ExperimentReport {
        meta: ReportMeta {
            pool_size: n,
            k: labeled.pool.k(),
            r_d,
            trials,
            master_seed,
            shared_seeds: true,
            budgets: budgets.to_vec(),
        },
        cells,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{make_pool, SynthConfig};

    fn small_pool() -> LabeledPool {
        make_pool(&SynthConfig {
            n: 120,
            seed: 7,
            ..SynthConfig::reference()
        })
        .unwrap()
        .labeled
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[0.5, 0.5], 0.5).unwrap(), 0.0);
        assert!((mse(&[0.4, 0.6], 0.5).unwrap() - 0.01).abs() < 1e-15);
        assert!((mse(&[0.7], 0.5).unwrap() - 0.04).abs() < 1e-15);
        assert!(mse(&[], 0.5).is_err());
    }

    #[test]
    fn sem_examples() {
        assert_eq!(sem(&[0.3; 5]).unwrap(), 0.0);
        assert!((sem(&[0.4, 0.6]).unwrap() - 0.1).abs() < 1e-15);
        assert!(sem(&[0.4]).is_err());
    }

    #[test]
    fn sem_shrinks_with_replication() {
        let base = [0.1, 0.4, 0.3, 0.9, 0.5, 0.2];
        let rep: Vec<f64> = base
            .iter()
            .cycle()
            .take(base.len() * 100)
            .copied()
            .collect();
        // 100x the values: sqrt(100) from the 1/sqrt(T) factor, times the
        // change of the n-1 divisor in the sample variance (5 vs 599/100).
        let ratio = sem(&base).unwrap() / sem(&rep).unwrap();
        assert!(
            (ratio - 10.0 * (599.0f64 / 500.0).sqrt()).abs() < 1e-9,
            "{ratio}"
        );
    }

    #[test]
    fn relative_mse_examples() {
        // MSEs 0.008 and 0.010 around R = 0
        let a = [0.008f64.sqrt(), -(0.008f64.sqrt())];
        let u = [0.1, -0.1];
        assert!((relative_mse(&a, &u, 0.0).unwrap().unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(relative_mse(&u, &u, 0.0).unwrap(), Some(1.0));
        assert_eq!(relative_mse(&[0.2, 0.2], &[0.2, 0.2], 0.2).unwrap(), None);
        assert!(relative_mse(&[0.2], &[0.2, 0.2], 0.2).is_err());
    }

    #[test]
    fn savings_examples() {
        let s = budget_savings(&[(200, 0.002)], &[(144, 0.002)], 200).unwrap();
        assert_eq!(s.matched_m, Some(144.0));
        assert!((s.savings_fraction.unwrap() - 0.28).abs() < 1e-12);

        let curve = [(50, 0.004), (100, 0.002), (200, 0.001)];
        let s = budget_savings(&curve, &curve, 100).unwrap();
        assert_eq!(s.matched_m, Some(100.0));
        assert_eq!(s.savings_fraction, Some(0.0));

        let worse = [(50, 0.005), (100, 0.003), (200, 0.0015)];
        let s = budget_savings(&curve, &worse, 200).unwrap();
        assert_eq!(s.matched_m, None);
        assert_eq!(s.savings_fraction, None);

        // interpolation: target 0.002 between (50, 0.003) and (100, 0.001)
        let better = [(50, 0.003), (100, 0.001), (200, 0.0005)];
        let s = budget_savings(&curve, &better, 100).unwrap();
        assert!((s.matched_m.unwrap() - 75.0).abs() < 1e-9);

        assert!(budget_savings(&curve, &better, 400).is_err());
        // reference between grid points is interpolated on the uniform curve
        let s = budget_savings(&curve, &curve, 150).unwrap();
        assert!((s.target_mse - 0.0015).abs() < 1e-15);
    }

    #[test]
    fn census_trials_are_exact() {
        let lp = small_pool();
        let n = lp.pool.len();
        for method in [MethodSpec::Uniform, MethodSpec::proxy_neyman()] {
            let est = run_trials(&lp, method, n, 20, 1).unwrap();
            assert!(est.iter().all(|e| (e.value - lp.risk()).abs() < 1e-12));
            assert!(est.iter().all(|e| e.labels_used == n));
        }
    }

    #[test]
    fn single_trial_mse() {
        let lp = small_pool();
        let est = values(&run_trials(&lp, MethodSpec::Uniform, 10, 1, 3).unwrap());
        assert_eq!(est.len(), 1);
        assert_eq!(mse(&est, lp.risk()).unwrap(), (est[0] - lp.risk()).powi(2));
    }

    #[test]
    fn infeasible_budget_is_rejected() {
        let lp = small_pool();
        let e = run_trials(&lp, MethodSpec::proxy_neyman(), 2, 5, 1).unwrap_err();
        assert!(e.is_config());
        assert!(run_trials(&lp, MethodSpec::Uniform, 121, 5, 1)
            .unwrap_err()
            .is_config());
    }

    #[test]
    fn sweep_skips_and_records() {
        let lp = small_pool();
        let r = sweep(&lp, &[MethodSpec::proxy_neyman()], &[2, 30], 50, 9).unwrap();
        assert_eq!(r.skipped.len(), 1);
        assert_eq!(r.skipped[0].m, 2);
        assert_eq!(r.cells.len(), 3);
        assert_eq!(r.cell("uniform", 30).unwrap().relative_mse, Some(1.0));
        assert_eq!(r.cell("uniform", 2).unwrap().relative_mse, Some(1.0));
        let c = r.cell(&MethodSpec::proxy_neyman().name(), 30).unwrap();
        assert_eq!(c.allocation_counts.iter().sum::<usize>(), 30);
        assert_eq!(c.strata_sizes.iter().sum::<usize>(), 120);
        assert_eq!(c.delta, Some(DEFAULT_DELTA));
    }

    #[test]
    fn single_cell_report() {
        let lp = small_pool();
        let r = sweep(&lp, &[MethodSpec::Uniform], &[10], 5, 2).unwrap();
        assert_eq!(r.cells.len(), 1);
        assert!(sweep(&lp, &[], &[], 5, 2).is_err());
        assert!(sweep(&lp, &[], &[10], 0, 2).is_err());
    }

    #[test]
    fn method_names() {
        assert_eq!(MethodSpec::Uniform.name(), "uniform");
        assert_eq!(
            MethodSpec::proxy_neyman().name(),
            "adaptive_se+proxy_neyman(H=5,delta=0.75)"
        );
        assert_eq!(
            MethodSpec::adaptive(AllocRule::Power).name(),
            "adaptive_se+power(H=5)"
        );
    }
}
