//! Label-efficient estimation of a model's benchmark risk.
//!
//! A cheap surrogate model answers every pool instance `k` times. The
//! disagreement among those answers (semantic entropy) stratifies the pool,
//! the budget is split across strata by a smoothed Neyman rule built from
//! surrogate self-consistency, and the target's risk is estimated from the
//! labeled sample with the unbiased stratified Horvitz-Thompson estimator.
//!
//! ```
//! use active_eval::{harness::MethodSpec, synth::reference_pool, harness::run_trials};
//!
//! let fixture = reference_pool();
//! let est = run_trials(&fixture.labeled, MethodSpec::proxy_neyman(), 100, 3, 42).unwrap();
//! assert_eq!(est.len(), 3);
//! assert!(est.iter().all(|e| e.labels_used == 100));
//! ```

pub mod allocate;
pub mod error;
pub mod estimate;
pub mod harness;
pub mod ingest;
pub mod parse;
pub mod pool;
pub mod signals;
pub mod stratify;
pub mod synth;

pub use error::{Error, Result};
pub use pool::{finite_pool_risk, LabelOracle, LabeledPool, Pool, PoolInstance};
