//! Time series aggregation: protected peak steps, chronological hierarchical
//! clustering, a k-medoids baseline and assembly into an [`Aggregation`].

mod chc;
mod kmedoids;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gep::{Aggregation, GepError, SystemSpec, TimeSeriesTable};

pub use chc::{chronological_cluster, ClusterTree, Clustering, Merge};
pub use kmedoids::{kmedoids_cluster, KMedoids};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TsaError {
    #[error("target of {target} groups is below the {runs} runs left between protected steps")]
    InfeasibleTarget { target: usize, runs: usize },
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("invalid features: {0}")]
    InvalidFeatures(String),
    #[error(transparent)]
    Gep(#[from] GepError),
}

/// Per-step feature vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSeries {
    pub rows: Vec<Vec<f64>>,
}

impl FeatureSeries {
    pub fn from_values(values: &[f64]) -> Self {
        FeatureSeries { rows: values.iter().map(|&v| vec![v]).collect() }
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self, TsaError> {
        let n = columns.first().map_or(0, |c| c.len());
        if columns.iter().any(|c| c.len() != n) {
            return Err(TsaError::InvalidFeatures("columns differ in length".into()));
        }
        Ok(FeatureSeries { rows: (0..n).map(|t| columns.iter().map(|c| c[t]).collect()).collect() })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, |r| r.len())
    }

    pub fn validate(&self) -> Result<(), TsaError> {
        let d = self.dim();
        if let Some(t) = self.rows.iter().position(|r| r.len() != d || r.iter().any(|v| !v.is_finite())) {
            return Err(TsaError::InvalidFeatures(format!("step {t} is ragged or not finite")));
        }
        Ok(())
    }

    /// Each column shifted to zero mean and scaled to unit population
    /// standard deviation; constant columns become zero.
    pub fn standardized(&self) -> FeatureSeries {
        let n = self.len().max(1) as f64;
        let d = self.dim();
        let mut rows = self.rows.clone();
        for j in 0..d {
            let mean = self.rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let sd = (self.rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n).sqrt();
            for r in rows.iter_mut() {
                r[j] = if sd > 0.0 { (r[j] - mean) / sd } else { 0.0 };
            }
        }
        FeatureSeries { rows }
    }

    /// Raw inputs as features: every capacity factor, demand, and price
    /// when market participation is on.
    pub fn from_inputs(spec: &SystemSpec, ts: &TimeSeriesTable) -> Result<Self, TsaError> {
        let mut cols = ts.capacity_factors.clone();
        cols.push(ts.demand.clone());
        if spec.market_participation {
            cols.push(ts.price.clone());
        }
        Self::from_columns(&cols)
    }
}

/// `D_t − Δ Σ_g x_g F_{g,t}`; may be negative.
pub fn compute_net_demand(spec: &SystemSpec, ts: &TimeSeriesTable, x: &[f64]) -> Result<Vec<f64>, TsaError> {
    ts.check_against(spec)?;
    if x.len() != spec.generators.len() {
        return Err(GepError::ShapeMismatch(format!(
            "{} capacities for {} generators",
            x.len(),
            spec.generators.len()
        ))
        .into());
    }
    if let Some(g) = x.iter().position(|v| !(*v >= 0.0)) {
        return Err(GepError::ShapeMismatch(format!("capacity of generator {g} is negative")).into());
    }
    Ok((0..ts.horizon())
        .map(|t| {
            let supply: f64 = x.iter().zip(&ts.capacity_factors).map(|(xg, f)| xg * f[t]).sum();
            ts.demand[t] - spec.delta * supply
        })
        .collect())
}

/// Steps kept at full resolution, ascending.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtectedSet {
    pub steps: Vec<usize>,
}

impl ProtectedSet {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn mask(&self, horizon: usize) -> Vec<bool> {
        let mut m = vec![false; horizon];
        for &t in &self.steps {
            m[t] = true;
        }
        m
    }
}

/// The `n_top` steps with the highest net demand; ties go to the earlier
/// step.
pub fn build_protected_set(net_demand: &[f64], n_top: usize) -> Result<ProtectedSet, TsaError> {
    if n_top > net_demand.len() {
        return Err(TsaError::InvalidTarget(format!("cannot protect {n_top} of {} steps", net_demand.len())));
    }
    let mut order: Vec<usize> = (0..net_demand.len()).collect();
    order.sort_by(|&a, &b| net_demand[b].total_cmp(&net_demand[a]).then(a.cmp(&b)));
    let mut steps = order[..n_top].to_vec();
    steps.sort_unstable();
    Ok(ProtectedSet { steps })
}

/// Merges clustered groups with protected singletons in chronological order.
pub fn assemble_aggregation(
    horizon: usize,
    groups: &[Vec<usize>],
    protected: &ProtectedSet,
) -> Result<Aggregation, TsaError> {
    let mut all: Vec<Vec<usize>> = groups.to_vec();
    all.extend(protected.steps.iter().map(|&t| vec![t]));
    all.sort_by_key(|g| g.first().copied().unwrap_or(usize::MAX));
    Ok(Aggregation::new(horizon, all)?)
}
