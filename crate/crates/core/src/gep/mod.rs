//! Generation expansion planning domain types and LP builders.

mod aggregation;
mod model;
mod objective;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{LpError, LpStatus};

pub use aggregation::{aggregate_inputs, Aggregation};
pub use model::{
    build_aggregated_from_full, build_aggregated_model, build_dispatch_model, build_full_model, extract_marginal_costs,
    GepModel, ModelLayout, SolvedModel, BALANCE, BUDGET, GENLIM, SOC,
};
pub use objective::{evaluate_aggregated_objective, evaluate_full_objective};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GepError {
    #[error("invalid system spec: {0}")]
    InvalidSpec(String),
    #[error("invalid time series: {0}")]
    InvalidSeries(String),
    #[error("invalid aggregation: {0}")]
    InvalidAggregation(String),
    #[error("fixed capacities cost {cost} which exceeds the budget {budget}")]
    BudgetViolated { cost: f64, budget: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("no rows tagged {0}")]
    MissingTag(String),
    #[error("LP not solved to optimality ({0:?})")]
    NotOptimal(LpStatus),
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub name: String,
    /// Operational cost, money/MWh.
    pub c_op: f64,
    /// Investment cost, money/MW.
    pub c_inv: f64,
    /// Variable renewable: output limited by its capacity-factor series.
    pub is_vre: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StorageSpec {
    pub name: String,
    pub eta_c: f64,
    pub eta_d: f64,
    /// MWh
    pub e_max: f64,
    /// MWh
    pub e_min: f64,
    /// MW
    pub p_c_max: f64,
    /// MW
    pub p_d_max: f64,
    /// Discharge cost, money/MWh.
    pub c_d: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub generators: Vec<GeneratorSpec>,
    #[serde(default)]
    pub storages: Vec<StorageSpec>,
    /// Penalty for non-supplied energy, money/MWh.
    pub c_ns: f64,
    pub budget: f64,
    /// Hours per step.
    pub delta: f64,
    #[serde(default)]
    pub market_participation: bool,
}

impl SystemSpec {
    pub fn validate(&self) -> Result<(), GepError> {
        let bad = |m: String| Err(GepError::InvalidSpec(m));
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        if !(self.budget >= 0.0) {
            return bad(format!("budget must be nonnegative, got {}", self.budget));
        }
        if !(self.c_ns > 0.0 && self.c_ns.is_finite()) {
            return bad(format!("c_ns must be positive, got {}", self.c_ns));
        }
        if self.generators.is_empty() {
            return bad("at least one generator is required".into());
        }
        for g in &self.generators {
            if !(g.c_op >= 0.0 && g.c_op.is_finite()) || !(g.c_inv >= 0.0 && g.c_inv.is_finite()) {
                return bad(format!("generator {} has negative or non-finite costs", g.name));
            }
        }
        for s in &self.storages {
            let ok = s.eta_c > 0.0
                && s.eta_c <= 1.0
                && s.eta_d > 0.0
                && s.eta_d <= 1.0
                && s.e_min >= 0.0
                && s.e_min <= s.e_max
                && s.e_max.is_finite()
                && s.p_c_max >= 0.0
                && s.p_d_max >= 0.0
                && s.p_c_max.is_finite()
                && s.p_d_max.is_finite()
                && s.c_d >= 0.0;
            if !ok {
                return bad(format!("storage {} has invalid parameters", s.name));
            }
        }
        Ok(())
    }

    pub fn generator_names(&self) -> Vec<String> {
        self.generators.iter().map(|g| g.name.clone()).collect()
    }

    /// Copy with investment costs and budget multiplied by `factor`.
    ///
    /// Used to plan over a horizon shorter than the one the investment
    /// costs are annualised for; the budget row keeps its meaning.
    pub fn with_investment_scale(&self, factor: f64) -> SystemSpec {
        let mut s = self.clone();
        for g in s.generators.iter_mut() {
            g.c_inv *= factor;
        }
        s.budget *= factor;
        s
    }
}

/// Capacity factors, demand and price over a horizon.
///
/// `capacity_factors[g]` follows the generator order of the [`SystemSpec`];
/// non-VRE generators carry a constant 1.0 series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesTable {
    pub capacity_factors: Vec<Vec<f64>>,
    /// MWh per step.
    pub demand: Vec<f64>,
    /// money/MWh
    pub price: Vec<f64>,
}

impl TimeSeriesTable {
    pub fn horizon(&self) -> usize {
        self.demand.len()
    }

    pub fn validate(&self) -> Result<(), GepError> {
        let t = self.horizon();
        if t == 0 {
            return Err(GepError::InvalidSeries("empty horizon".into()));
        }
        if self.price.len() != t || self.capacity_factors.iter().any(|f| f.len() != t) {
            return Err(GepError::InvalidSeries("series lengths differ".into()));
        }
        for (g, f) in self.capacity_factors.iter().enumerate() {
            if let Some(k) = f.iter().position(|v| !(0.0..=1.0).contains(v)) {
                return Err(GepError::InvalidSeries(format!(
                    "capacity factor {} of generator {g} at step {k} outside [0, 1]",
                    f[k]
                )));
            }
        }
        if let Some(k) = self.demand.iter().position(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(GepError::InvalidSeries(format!("demand at step {k} is negative or not finite")));
        }
        if let Some(k) = self.price.iter().position(|v| !v.is_finite()) {
            return Err(GepError::InvalidSeries(format!("price at step {k} is not finite")));
        }
        Ok(())
    }

    /// Validates the pair, including the market-price guard `π < C^ns`.
    pub fn check_against(&self, spec: &SystemSpec) -> Result<(), GepError> {
        spec.validate()?;
        self.validate()?;
        if self.capacity_factors.len() != spec.generators.len() {
            return Err(GepError::ShapeMismatch(format!(
                "{} capacity-factor series for {} generators",
                self.capacity_factors.len(),
                spec.generators.len()
            )));
        }
        if spec.market_participation {
            if let Some(k) = self.price.iter().position(|&p| p >= spec.c_ns) {
                return Err(GepError::InvalidSeries(format!(
                    "price {} at step {k} is not below c_ns {}",
                    self.price[k], spec.c_ns
                )));
            }
        }
        Ok(())
    }

    /// Keeps only the given steps, in the given order.
    pub fn select(&self, steps: &[usize]) -> TimeSeriesTable {
        TimeSeriesTable {
            capacity_factors: self.capacity_factors.iter().map(|f| steps.iter().map(|&t| f[t]).collect()).collect(),
            demand: steps.iter().map(|&t| self.demand[t]).collect(),
            price: steps.iter().map(|&t| self.price[t]).collect(),
        }
    }
}

/// Dual of the energy-balance row per step, money/MWh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalCostSeries {
    pub values: Vec<f64>,
}

impl MarginalCostSeries {
    pub fn horizon(&self) -> usize {
        self.values.len()
    }
}

/// Decoded primal solution of a full-scale or aggregated model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GepSolution {
    /// MW per generator.
    pub x: Vec<f64>,
    /// MW, `[g][r]`.
    pub p: Vec<Vec<f64>>,
    pub p_c: Vec<Vec<f64>>,
    pub p_d: Vec<Vec<f64>>,
    /// MWh, `[s][0..=H]` including the initial state.
    pub e: Vec<Vec<f64>>,
    pub e_ns: Vec<f64>,
    /// Energy sold; all zeros when market participation is off.
    pub o: Vec<f64>,
    pub objective: f64,
}

pub type FullSolution = GepSolution;
pub type AggregatedSolution = GepSolution;

impl GepSolution {
    pub fn horizon(&self) -> usize {
        self.e_ns.len()
    }

    pub fn zeros(spec: &SystemSpec, horizon: usize) -> Self {
        let ng = spec.generators.len();
        let ns = spec.storages.len();
        GepSolution {
            x: vec![0.0; ng],
            p: vec![vec![0.0; horizon]; ng],
            p_c: vec![vec![0.0; horizon]; ns],
            p_d: vec![vec![0.0; horizon]; ns],
            e: vec![vec![0.0; horizon + 1]; ns],
            e_ns: vec![0.0; horizon],
            o: vec![0.0; horizon],
            objective: 0.0,
        }
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn thermal(c_op: f64, c_inv: f64) -> GeneratorSpec {
        GeneratorSpec { name: "thermal".into(), c_op, c_inv, is_vre: false }
    }

    pub fn pv(c_op: f64, c_inv: f64) -> GeneratorSpec {
        GeneratorSpec { name: "pv".into(), c_op, c_inv, is_vre: true }
    }

    pub fn battery(hours: f64) -> StorageSpec {
        StorageSpec {
            name: "bess".into(),
            eta_c: 0.9,
            eta_d: 0.9,
            e_max: hours * 50.0,
            e_min: 0.0,
            p_c_max: 50.0,
            p_d_max: 50.0,
            c_d: 1.5,
        }
    }

    pub fn spec(generators: Vec<GeneratorSpec>, storages: Vec<StorageSpec>) -> SystemSpec {
        SystemSpec { generators, storages, c_ns: 5000.0, budget: 1e9, delta: 1.0, market_participation: false }
    }

    pub fn series(factors: Vec<Vec<f64>>, demand: Vec<f64>) -> TimeSeriesTable {
        let t = demand.len();
        TimeSeriesTable { capacity_factors: factors, demand, price: vec![0.0; t] }
    }
}
