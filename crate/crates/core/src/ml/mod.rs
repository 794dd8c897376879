//! Marginal-cost estimation: KDE sampling of the inputs, a reduced GEP solve
//! over the samples, and a random forest that maps input features to the
//! resulting (discretised) marginal costs.

mod forest;
mod kde;
mod labels;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gep::{GepError, MarginalCostSeries, SystemSpec, TimeSeriesTable};
use crate::seed::derive_seed;

pub use forest::{predict_marginal_costs, train_forest, ForestConfig, RandomForest, TreeNode};
pub use kde::{fit_kde, sample_kde, KdeModel};
pub use labels::{build_training_labels, LabelDictionary, TrainingSet};

pub const MODEL_FORMAT: &str = "mcb-tsa/estimator/v1";

#[derive(Debug, Error)]
pub enum MlError {
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("feature schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("unsupported model format {0:?}")]
    Format(String),
    #[error(transparent)]
    Gep(#[from] GepError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Per-step input features: capacity factor of every generator, demand,
/// and price when market participation is on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    /// Admissible range per column (`None` = unbounded); samples are
    /// clipped into it.
    pub bounds: Vec<(Option<f64>, Option<f64>)>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn from_series(spec: &SystemSpec, ts: &TimeSeriesTable) -> Result<Self, MlError> {
        ts.check_against(spec)?;
        let mut names: Vec<String> = spec.generators.iter().map(|g| format!("F_{}", g.name)).collect();
        let mut bounds = vec![(Some(0.0), Some(1.0)); names.len()];
        names.push("D".into());
        bounds.push((Some(0.0), None));
        if spec.market_participation {
            names.push("price".into());
            bounds.push((None, Some(spec.c_ns * (1.0 - 1e-9))));
        }
        let rows = (0..ts.horizon())
            .map(|t| {
                let mut row: Vec<f64> = ts.capacity_factors.iter().map(|f| f[t]).collect();
                row.push(ts.demand[t]);
                if spec.market_participation {
                    row.push(ts.price[t]);
                }
                row
            })
            .collect();
        Ok(FeatureMatrix { names, bounds, rows })
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cols(&self) -> usize {
        self.names.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Inverse of [`FeatureMatrix::from_series`].
    pub fn to_series(&self, spec: &SystemSpec) -> Result<TimeSeriesTable, MlError> {
        let ng = spec.generators.len();
        let want = ng + 1 + usize::from(spec.market_participation);
        if self.num_cols() != want {
            return Err(MlError::SchemaMismatch(format!("{} columns, expected {want}", self.num_cols())));
        }
        let t = self.num_rows();
        Ok(TimeSeriesTable {
            capacity_factors: (0..ng).map(|g| self.column(g)).collect(),
            demand: self.column(ng),
            price: if spec.market_participation { self.column(ng + 1) } else { vec![0.0; t] },
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Number of synthetic steps drawn from the KDE.
    pub k: usize,
    pub n_trees: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig { k: 500, n_trees: 100, max_depth: 20, seed: 0 }
    }
}

/// Fitted KDE and forest, cacheable between runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorModel {
    pub format: String,
    pub kde: KdeModel,
    pub forest: RandomForest,
    /// Capacities of the reduced solve, MW.
    pub x_tilde: Vec<f64>,
}

impl EstimatorModel {
    pub fn save_json(&self, path: &Path) -> Result<(), MlError> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self, MlError> {
        let model: EstimatorModel = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if model.format != MODEL_FORMAT {
            return Err(MlError::Format(model.format));
        }
        Ok(model)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOutput {
    pub mu: MarginalCostSeries,
    pub x_tilde: Vec<f64>,
    pub model: EstimatorModel,
}

/// Full pipeline: KDE fit, K samples, reduced solve, forest, prediction.
///
/// The reduced model covers K steps instead of T, so investment costs and
/// budget are scaled by K/T; capacities then stay comparable with the
/// full-horizon ones and the duals remain per-MWh marginal costs.
pub fn estimate(spec: &SystemSpec, ts: &TimeSeriesTable, config: &EstimatorConfig) -> Result<EstimatorOutput, MlError> {
    if config.k == 0 {
        return Err(MlError::EmptyInput("K must be at least 1".into()));
    }
    let features = FeatureMatrix::from_series(spec, ts)?;
    let kde = fit_kde(&features)?;
    let sampled = sample_kde(&kde, config.k, derive_seed(config.seed, 0));
    let reduced_spec = spec.with_investment_scale(config.k as f64 / ts.horizon() as f64);
    let training = build_training_labels(&reduced_spec, &sampled)?;
    let forest = train_forest(
        &training.features,
        &training.labels,
        &training.dictionary,
        &ForestConfig { n_trees: config.n_trees, max_depth: config.max_depth, seed: derive_seed(config.seed, 1) },
    )?;
    let mu = predict_marginal_costs(&forest, &features)?;
    let model = EstimatorModel { format: MODEL_FORMAT.into(), kde, forest, x_tilde: training.x_tilde.clone() };
    Ok(EstimatorOutput { mu, x_tilde: training.x_tilde, model })
}
