//! Iterative aggregation driver: estimate marginal costs, protect peak
//! net-demand steps, cluster the rest chronologically, and tighten the
//! aggregated lower bound / dispatch upper bound until the gap closes.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gep::{
    build_aggregated_from_full, build_dispatch_model, Aggregation, GepError, MarginalCostSeries, SystemSpec,
    TimeSeriesTable,
};
use crate::lp::SolverOptions;
use crate::ml::{self, EstimatorConfig, FeatureMatrix, MlError};
use crate::seed::derive_seed;
use crate::tsa::{
    assemble_aggregation, build_protected_set, chronological_cluster, compute_net_demand, kmedoids_cluster,
    ClusterTree, FeatureSeries, ProtectedSet, TsaError,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Chronological clustering on estimated marginal costs.
    Mcb,
    /// Chronological clustering on standardised raw inputs.
    InputChc,
    /// K-medoids on net demand at the estimated capacities.
    KmedoidsNetDemand,
    /// K-medoids on standardised raw inputs.
    KmedoidsInput,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Mcb, Method::InputChc, Method::KmedoidsNetDemand, Method::KmedoidsInput];

    pub fn name(self) -> &'static str {
        match self {
            Method::Mcb => "mcb",
            Method::InputChc => "input-chc",
            Method::KmedoidsNetDemand => "kmedoids-net-demand",
            Method::KmedoidsInput => "kmedoids-input",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == s)
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Method::parse(s).ok_or_else(|| {
            let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
            format!("unknown method {s:?}, expected one of {}", names.join(", "))
        })
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub r0: usize,
    pub delta_r: usize,
    pub r_max: usize,
    /// Percent.
    pub eps_target: f64,
    pub k: usize,
    pub n_top: usize,
    pub seed: u64,
    pub method: Method,
    /// When set, `R` counts the protected singletons too, so clustering
    /// targets `R − N_top` groups.
    pub count_protected_in_r: bool,
    pub n_trees: usize,
    pub max_depth: usize,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        AlgorithmConfig {
            r0: 400,
            delta_r: 100,
            r_max: 900,
            eps_target: 1.0,
            k: 500,
            n_top: 100,
            seed: 0,
            method: Method::Mcb,
            count_protected_in_r: false,
            n_trees: 100,
            max_depth: 20,
        }
    }
}

impl AlgorithmConfig {
    pub fn validate(&self) -> Result<(), AlgorithmError> {
        let bad = |m: &str| Err(AlgorithmError::Config(m.into()));
        if self.r0 < 1 {
            return bad("r0 must be at least 1");
        }
        if self.delta_r < 1 {
            return bad("delta_r must be at least 1");
        }
        if self.r_max < self.r0 {
            return bad("r_max must be at least r0");
        }
        if !(self.eps_target > 0.0) {
            return bad("eps_target must be positive");
        }
        if self.k < 1 {
            return bad("k must be at least 1");
        }
        if self.n_trees < 1 {
            return bad("n_trees must be at least 1");
        }
        Ok(())
    }

    /// Upper bound on the number of loop iterations.
    pub fn max_iterations(&self) -> usize {
        (self.r_max - self.r0).div_ceil(self.delta_r) + 1
    }

    pub fn estimator(&self) -> EstimatorConfig {
        EstimatorConfig { k: self.k, n_trees: self.n_trees, max_depth: self.max_depth, seed: derive_seed(self.seed, 0) }
    }
}

#[derive(Debug, Error)]
pub enum AlgorithmError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("optimality gap undefined for an upper bound of zero")]
    UndefinedGap,
    #[error(transparent)]
    Gep(#[from] GepError),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error(transparent)]
    Tsa(#[from] TsaError),
    #[error("iteration {iteration} failed: {source}")]
    Aborted {
        iteration: usize,
        #[source]
        source: Box<AlgorithmError>,
        /// Iterations completed before the failure.
        partial: Vec<IterationRecord>,
    },
}

/// `100 · (f_UB − f_LB) / f_UB`, applied verbatim for negative bounds.
pub fn gap(f_lb: f64, f_ub: f64) -> Result<f64, AlgorithmError> {
    if f_ub == 0.0 {
        return Err(AlgorithmError::UndefinedGap);
    }
    Ok(100.0 * (f_ub - f_lb) / f_ub)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub f_lb: f64,
    pub f_ub: f64,
    pub x_hat: Vec<f64>,
    pub t_agg_s: f64,
    pub t_ub_s: f64,
    pub lp_iterations_agg: usize,
    pub lp_iterations_ub: usize,
}

/// Aggregated optimum as lower bound; dispatch over the full horizon with
/// capacities fixed to the aggregated ones as upper bound.
pub fn compute_bounds(
    spec: &SystemSpec,
    ts: &TimeSeriesTable,
    agg: &Aggregation,
    opts: &SolverOptions,
) -> Result<Bounds, GepError> {
    let start = Instant::now();
    let model = build_aggregated_from_full(spec, ts, agg)?;
    let lower = model.solve(opts)?;
    let t_agg_s = start.elapsed().as_secs_f64();
    let x_hat: Vec<f64> = lower.solution.x.iter().map(|v| v.max(0.0)).collect();

    let start = Instant::now();
    let upper = build_dispatch_model(spec, ts, &x_hat)?.solve(opts)?;
    let t_ub_s = start.elapsed().as_secs_f64();
    Ok(Bounds {
        f_lb: lower.lp.objective,
        f_ub: upper.lp.objective,
        x_hat,
        t_agg_s,
        t_ub_s,
        lp_iterations_agg: lower.lp.stats.iterations,
        lp_iterations_ub: upper.lp.stats.iterations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Loop variable `R`.
    pub r: usize,
    /// Representatives in the solved model, protected singletons included.
    pub representatives: usize,
    pub f_lb: f64,
    pub f_ub: f64,
    pub eps_percent: f64,
    /// Set when `f_UB < 0` and the gap formula was applied verbatim.
    pub negative_objective: bool,
    pub t_agg_s: f64,
    pub t_ub_s: f64,
    pub lp_iterations_agg: usize,
    pub lp_iterations_ub: usize,
    pub x_hat: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    GapMet,
    RExhausted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    pub mu: MarginalCostSeries,
    pub x_tilde: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub method: Method,
    pub iterations: Vec<IterationRecord>,
    pub termination: Termination,
    pub estimate: Option<EstimateSummary>,
    pub protected: ProtectedSet,
    pub final_aggregation: Aggregation,
    pub t_setup_s: f64,
}

impl RunResult {
    pub fn last(&self) -> &IterationRecord {
        self.iterations.last().expect("a run has at least one iteration")
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    /// `iteration,R,f_LB,f_UB,eps_percent,t_agg_s,t_ub_s`
    pub fn write_iterations_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["iteration", "R", "f_LB", "f_UB", "eps_percent", "t_agg_s", "t_ub_s"])?;
        for rec in &self.iterations {
            wr.write_record([
                rec.iteration.to_string(),
                rec.r.to_string(),
                rec.f_lb.to_string(),
                rec.f_ub.to_string(),
                rec.eps_percent.to_string(),
                rec.t_agg_s.to_string(),
                rec.t_ub_s.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// How groups are formed over the unprotected steps.
#[derive(Clone, Debug)]
pub enum Grouping {
    /// Chronological clustering (Euclidean on the feature vectors).
    Chronological(FeatureSeries),
    /// K-medoids (L1), each group represented by its medoid's inputs.
    Medoids(FeatureSeries),
}

/// Everything the loop needs besides the configuration.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub grouping: Grouping,
    pub protected: ProtectedSet,
    pub estimate: Option<EstimateSummary>,
}

/// Builds features and the protected set for `config.method`.
///
/// MCB and the net-demand k-medoids baseline take capacities from the
/// estimator's reduced solve; the input-feature baselines protect by plain
/// demand (zero capacities).
pub fn prepare(spec: &SystemSpec, ts: &TimeSeriesTable, config: &AlgorithmConfig) -> Result<Prepared, AlgorithmError> {
    ts.check_against(spec)?;
    let zero = vec![0.0; spec.generators.len()];
    let inputs = || FeatureSeries::from_inputs(spec, ts).map(|f| f.standardized());
    let (grouping, x_tilde, estimate) = match config.method {
        Method::Mcb => {
            let out = ml::estimate(spec, ts, &config.estimator())?;
            let f = FeatureSeries::from_values(&out.mu.values);
            let summary = EstimateSummary { mu: out.mu, x_tilde: out.x_tilde.clone() };
            (Grouping::Chronological(f), out.x_tilde, Some(summary))
        }
        Method::KmedoidsNetDemand => {
            let x = reduced_capacities(spec, ts, &config.estimator())?;
            let net = compute_net_demand(spec, ts, &x)?;
            (Grouping::Medoids(FeatureSeries::from_values(&net)), x, None)
        }
        Method::InputChc => (Grouping::Chronological(inputs()?), zero, None),
        Method::KmedoidsInput => (Grouping::Medoids(inputs()?), zero, None),
    };
    let net = compute_net_demand(spec, ts, &x_tilde)?;
    let protected = build_protected_set(&net, config.n_top.min(ts.horizon()))?;
    Ok(Prepared { grouping, protected, estimate })
}

/// Capacities of the estimator's reduced solve (KDE samples, no forest).
fn reduced_capacities(spec: &SystemSpec, ts: &TimeSeriesTable, cfg: &EstimatorConfig) -> Result<Vec<f64>, MlError> {
    let features = FeatureMatrix::from_series(spec, ts)?;
    let kde = ml::fit_kde(&features)?;
    let sampled = ml::sample_kde(&kde, cfg.k, derive_seed(cfg.seed, 0));
    let reduced = spec.with_investment_scale(cfg.k as f64 / ts.horizon() as f64);
    Ok(ml::build_training_labels(&reduced, &sampled)?.x_tilde)
}

/// Runs the full method: preparation followed by the bound-tightening loop.
pub fn run(spec: &SystemSpec, ts: &TimeSeriesTable, config: &AlgorithmConfig) -> Result<RunResult, AlgorithmError> {
    config.validate()?;
    let start = Instant::now();
    let prepared = prepare(spec, ts, config)?;
    let t_setup_s = start.elapsed().as_secs_f64();
    let mut result = run_prepared(spec, ts, config, prepared)?;
    result.t_setup_s = t_setup_s;
    Ok(result)
}

fn clustered_target(config: &AlgorithmConfig, r: usize, protected: usize) -> usize {
    if config.count_protected_in_r {
        r.saturating_sub(protected)
    } else {
        r
    }
}

/// The loop itself, on externally supplied features and protected set.
///
/// `R` starts at `r0`; each pass clusters the unprotected steps into the
/// target number of groups (clamped to what the protected gaps allow),
/// solves both bounds, and stops once the gap reaches the target or
/// `R + δ_R` reaches `r_max`.
pub fn run_prepared(
    spec: &SystemSpec,
    ts: &TimeSeriesTable,
    config: &AlgorithmConfig,
    prepared: Prepared,
) -> Result<RunResult, AlgorithmError> {
    config.validate()?;
    let Prepared { grouping, protected, estimate } = prepared;
    let opts = SolverOptions::default();
    let mut tree: Option<ClusterTree> = None;
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut r = config.r0;
    let mut iteration = 0;
    loop {
        let mut step = || -> Result<(Aggregation, Bounds), AlgorithmError> {
            let agg = build_aggregation(&grouping, &protected, config, r, iteration, &mut tree)?;
            let bounds = compute_bounds(spec, ts, &agg, &opts)?;
            Ok((agg, bounds))
        };
        let (agg, bounds) =
            step().map_err(|e| AlgorithmError::Aborted { iteration, source: Box::new(e), partial: records.clone() })?;
        let eps = gap(bounds.f_lb, bounds.f_ub).map_err(|e| AlgorithmError::Aborted {
            iteration,
            source: Box::new(e),
            partial: records.clone(),
        })?;
        records.push(IterationRecord {
            iteration,
            r,
            representatives: agg.len(),
            f_lb: bounds.f_lb,
            f_ub: bounds.f_ub,
            eps_percent: eps,
            negative_objective: bounds.f_ub < 0.0,
            t_agg_s: bounds.t_agg_s,
            t_ub_s: bounds.t_ub_s,
            lp_iterations_agg: bounds.lp_iterations_agg,
            lp_iterations_ub: bounds.lp_iterations_ub,
            x_hat: bounds.x_hat,
        });
        let termination = if eps <= config.eps_target {
            Some(Termination::GapMet)
        } else {
            r += config.delta_r;
            (r >= config.r_max).then_some(Termination::RExhausted)
        };
        if let Some(termination) = termination {
            return Ok(RunResult {
                method: config.method,
                iterations: records,
                termination,
                estimate,
                protected,
                final_aggregation: agg,
                t_setup_s: 0.0,
            });
        }
        iteration += 1;
    }
}

/// Aggregation solved at loop value `r` (first-iteration seed for the
/// medoid methods).
pub fn aggregation_at(prepared: &Prepared, config: &AlgorithmConfig, r: usize) -> Result<Aggregation, AlgorithmError> {
    build_aggregation(&prepared.grouping, &prepared.protected, config, r, 0, &mut None)
}

fn build_aggregation(
    grouping: &Grouping,
    protected: &ProtectedSet,
    config: &AlgorithmConfig,
    r: usize,
    iteration: usize,
    tree: &mut Option<ClusterTree>,
) -> Result<Aggregation, AlgorithmError> {
    let horizon = match grouping {
        Grouping::Chronological(f) | Grouping::Medoids(f) => f.len(),
    };
    let target = clustered_target(config, r, protected.len()).min(horizon - protected.len());
    match grouping {
        Grouping::Chronological(f) => {
            let target = target.max(runs_between(horizon, protected));
            // Targets only grow, so the first clustering's merge history
            // answers every later iteration.
            let groups = match tree {
                Some(t) => t.groups_at(target)?,
                None => {
                    let c = chronological_cluster(f, protected, target)?;
                    *tree = Some(c.tree);
                    c.groups
                }
            };
            Ok(assemble_aggregation(horizon, &groups, protected)?)
        }
        Grouping::Medoids(f) => {
            medoid_aggregation(f, protected, target.max(1), derive_seed(config.seed, 100 + iteration as u64))
        }
    }
}

fn runs_between(horizon: usize, protected: &ProtectedSet) -> usize {
    let mask = protected.mask(horizon);
    (0..horizon).filter(|&t| !mask[t] && (t == 0 || mask[t - 1])).count()
}

fn medoid_aggregation(
    features: &FeatureSeries,
    protected: &ProtectedSet,
    target: usize,
    seed: u64,
) -> Result<Aggregation, AlgorithmError> {
    let horizon = features.len();
    let mask = protected.mask(horizon);
    let domain: Vec<usize> = (0..horizon).filter(|&t| !mask[t]).collect();
    let mut pairs: Vec<(usize, Vec<usize>)> = protected.steps.iter().map(|&t| (t, vec![t])).collect();
    if !domain.is_empty() {
        let sub = FeatureSeries { rows: domain.iter().map(|&t| features.rows[t].clone()).collect() };
        let km = kmedoids_cluster(&sub, target.min(domain.len()), seed)?;
        for (m, g) in km.medoids.iter().zip(&km.groups) {
            pairs.push((domain[*m], g.iter().map(|&i| domain[i]).collect()));
        }
    }
    pairs.sort_by_key(|p| p.0);
    let (reps, groups): (Vec<usize>, Vec<Vec<usize>>) = pairs.into_iter().unzip();
    Ok(Aggregation::with_representatives(horizon, groups, reps)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gep::build_full_model;
    use crate::gep::fixtures::*;

    fn instance(t: usize) -> (SystemSpec, TimeSeriesTable) {
        let s = spec(vec![thermal(130.0, 2e3), pv(1.0, 1.5e3)], vec![battery(4.0)]);
        let cf: Vec<f64> =
            (0..t).map(|k| (((k % 24) as f64 - 6.0) / 12.0 * std::f64::consts::PI).sin().max(0.0)).collect();
        let demand: Vec<f64> = (0..t).map(|k| 60.0 + 25.0 * ((k % 24) as f64 / 3.8).sin() + (k % 7) as f64).collect();
        (s, series(vec![vec![1.0; t], cf], demand))
    }

    #[test]
    fn gap_formula() {
        assert_eq!(gap(100.0, 100.0).unwrap(), 0.0);
        assert!((gap(198.0, 200.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((gap(-50.0, -40.0).unwrap() + 25.0).abs() < 1e-12);
        assert!(matches!(gap(1.0, 0.0), Err(AlgorithmError::UndefinedGap)));
    }

    #[test]
    fn identity_bounds_equal_full() {
        let (s, ts) = instance(24);
        let f = build_full_model(&s, &ts).unwrap().solve(&SolverOptions::default()).unwrap().lp.objective;
        let b = compute_bounds(&s, &ts, &Aggregation::identity(24), &SolverOptions::default()).unwrap();
        assert!((b.f_lb - f).abs() <= 1e-7 * f.abs());
        assert!((b.f_ub - f).abs() <= 1e-7 * f.abs());
    }

    #[test]
    fn coarse_aggregation_has_gap() {
        let (s, ts) = instance(24);
        let b = compute_bounds(&s, &ts, &Aggregation::from_block_lengths(&[24]).unwrap(), &SolverOptions::default())
            .unwrap();
        assert!(gap(b.f_lb, b.f_ub).unwrap() > 1e-3);
    }

    #[test]
    fn full_resolution_collapses_in_one_iteration() {
        let (s, ts) = instance(48);
        let cfg = AlgorithmConfig {
            r0: 48,
            delta_r: 10,
            r_max: 100,
            n_top: 0,
            k: 24,
            n_trees: 5,
            max_depth: 6,
            method: Method::InputChc,
            ..AlgorithmConfig::default()
        };
        let res = run(&s, &ts, &cfg).unwrap();
        assert_eq!(res.iterations.len(), 1);
        assert!(res.last().eps_percent <= 1e-5);
        assert_eq!(res.termination, Termination::GapMet);
    }

    #[test]
    fn loop_bound_and_exhaustion() {
        let (s, ts) = instance(48);
        let cfg = AlgorithmConfig {
            r0: 2,
            delta_r: 3,
            r_max: 9,
            eps_target: 1e-9,
            n_top: 2,
            k: 24,
            n_trees: 5,
            max_depth: 6,
            method: Method::Mcb,
            ..AlgorithmConfig::default()
        };
        let res = run(&s, &ts, &cfg).unwrap();
        assert_eq!(res.termination, Termination::RExhausted);
        assert!(res.iterations.len() <= cfg.max_iterations());
        assert_eq!(res.iterations.iter().map(|r| r.r).collect::<Vec<_>>(), vec![2, 5, 8]);
        let one = AlgorithmConfig { r_max: 2, ..cfg.clone() };
        assert_eq!(run(&s, &ts, &one).unwrap().iterations.len(), 1);
        let mut buf = Vec::new();
        res.write_iterations_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iteration,R,f_LB,f_UB,eps_percent,t_agg_s,t_ub_s\n0,2,"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn every_method_runs_and_is_reproducible() {
        let (s, ts) = instance(72);
        for method in Method::ALL {
            let cfg = AlgorithmConfig {
                r0: 8,
                delta_r: 8,
                r_max: 40,
                eps_target: 0.5,
                n_top: 4,
                k: 24,
                n_trees: 5,
                max_depth: 6,
                seed: 9,
                method,
                ..AlgorithmConfig::default()
            };
            let a = run(&s, &ts, &cfg).unwrap();
            let b = run(&s, &ts, &cfg).unwrap();
            let strip = |r: &RunResult| r.iterations.iter().map(|i| (i.r, i.f_lb, i.f_ub)).collect::<Vec<_>>();
            assert_eq!(strip(&a), strip(&b), "{method}");
            assert_eq!(a.final_aggregation, b.final_aggregation);
            // Medoid inputs are not group means, so only chronological
            // aggregations bound from below.
            let chronological = matches!(method, Method::Mcb | Method::InputChc);
            for rec in a.iterations.iter().filter(|_| chronological) {
                assert!(rec.f_lb <= rec.f_ub + 1e-6 * (1.0 + rec.f_ub.abs()), "{method}: {rec:?}");
            }
            assert_eq!(a.estimate.is_some(), method == Method::Mcb);
        }
    }

    #[test]
    fn protected_counting_switch() {
        let (s, ts) = instance(48);
        let base = AlgorithmConfig {
            r0: 12,
            delta_r: 1,
            r_max: 12,
            n_top: 4,
            method: Method::InputChc,
            ..AlgorithmConfig::default()
        };
        let a = run(&s, &ts, &base).unwrap();
        assert_eq!(a.last().representatives, 16);
        let b = run(&s, &ts, &AlgorithmConfig { count_protected_in_r: true, ..base }).unwrap();
        assert_eq!(b.last().representatives, 12);
    }

    #[test]
    fn config_validation() {
        assert!(AlgorithmConfig { r0: 0, ..AlgorithmConfig::default() }.validate().is_err());
        assert!(AlgorithmConfig { r_max: 10, ..AlgorithmConfig::default() }.validate().is_err());
        assert!(AlgorithmConfig { eps_target: 0.0, ..AlgorithmConfig::default() }.validate().is_err());
        assert_eq!(AlgorithmConfig::default().max_iterations(), 6);
        assert_eq!(Method::parse("kmedoids-input"), Some(Method::KmedoidsInput));
    }
}
