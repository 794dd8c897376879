//! Marginal-cost-guided time series aggregation for generation expansion
//! planning (GEP) with energy storage.
//!
//! The crate is organised bottom-up:
//!
//! * [`lp`]: tagged linear programs, a bundled bounded-variable revised
//!   simplex solver that reports equality-row duals, KKT checking and a
//!   brute-force vertex oracle.
//! * [`gep`]: system/time-series types and builders for the full-scale,
//!   aggregated and capacity-fixed dispatch models.
//! * [`ml`]: KDE sampling, reduced-model labelling and a random forest that
//!   predicts full-horizon marginal costs.
//! * [`tsa`]: chronological hierarchical clustering, protected peak steps,
//!   a k-medoids baseline and aggregation assembly.
//! * [`algorithm`]: the iterative bound-tightening driver.
//! * [`bench`]: CSV ingestion, synthetic data, perturbation scenarios and
//!   the multi-method benchmark harness.

pub mod algorithm;
pub mod bench;
pub mod gep;
pub mod lp;
pub mod ml;
pub mod tsa;

pub(crate) mod seed;
