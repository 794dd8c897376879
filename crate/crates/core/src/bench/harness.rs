use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{perturb, to_fixed_json_pretty, BenchError, ExperimentConfig};
use crate::algorithm::{self, AlgorithmConfig, Method, RunResult, Termination};
use crate::gep::{build_full_model, SystemSpec, TimeSeriesTable};
use crate::lp::SolverOptions;
use crate::seed::derive_seed;

pub const REPORT_SCHEMA: &str = "mcb-tsa/report/v1";

const TIMING_NOTE: &str = "Solution time is wall-clock (method run / full-scale solve) and is written to \
timings.csv so that this file is reproducible; lp_work_ratio compares simplex iteration counts.";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    Failed,
}

/// Full-scale solve of one perturbed scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReference {
    pub scenario: usize,
    pub seed: u64,
    pub status: RowStatus,
    pub error: Option<String>,
    pub f_full: Option<f64>,
    pub x_full: Option<Vec<f64>>,
    pub lp_iterations: Option<usize>,
    #[serde(skip)]
    pub t_full_s: f64,
}

/// Outcome of one (method, scenario) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: Method,
    pub scenario: usize,
    pub status: RowStatus,
    pub error: Option<String>,
    pub eps_percent: Option<f64>,
    pub termination: Option<Termination>,
    pub iterations: Option<usize>,
    pub final_r: Option<usize>,
    pub representatives: Option<usize>,
    pub f_lb: Option<f64>,
    pub f_ub: Option<f64>,
    pub x: Option<Vec<f64>>,
    /// `100 · (x − x_full) / x_full` summed over VRE generators; `null` when
    /// the reference builds none but the method does.
    pub vre_investment_error_percent: Option<f64>,
    pub thermal_investment_error_percent: Option<f64>,
    /// Simplex iterations of the whole run over those of the full solve.
    pub lp_work_ratio: Option<f64>,
    #[serde(skip)]
    pub t_method_s: Option<f64>,
    #[serde(skip)]
    pub time_ratio: Option<f64>,
}

impl ReportRow {
    fn failed(method: Method, scenario: usize, error: String) -> Self {
        ReportRow {
            method,
            scenario,
            status: RowStatus::Failed,
            error: Some(error),
            eps_percent: None,
            termination: None,
            iterations: None,
            final_r: None,
            representatives: None,
            f_lb: None,
            f_ub: None,
            x: None,
            vre_investment_error_percent: None,
            thermal_investment_error_percent: None,
            lp_work_ratio: None,
            t_method_s: None,
            time_ratio: None,
        }
    }
}

/// Type-7 (linear interpolation) quantiles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

pub fn quartiles(values: &[f64]) -> Option<Quartiles> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = (v.len() - 1) as f64 * p;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(v.len() - 1);
        v[lo] + (h - lo as f64) * (v[hi] - v[lo])
    };
    Some(Quartiles { min: v[0], q1: q(0.25), median: q(0.5), q3: q(0.75), max: v[v.len() - 1] })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub completed: usize,
    pub failed: usize,
    pub eps_percent: Option<Quartiles>,
    pub vre_investment_error_percent: Option<Quartiles>,
    pub thermal_investment_error_percent: Option<Quartiles>,
    pub lp_work_ratio: Option<Quartiles>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub schema: String,
    pub note: String,
    pub master_seed: u64,
    pub scenarios: usize,
    pub noise: (f64, f64),
    pub perturbed_columns: Vec<String>,
    pub generators: Vec<String>,
    pub methods: Vec<Method>,
    pub references: Vec<ScenarioReference>,
    /// Method-major, scenarios ascending.
    pub rows: Vec<ReportRow>,
    pub summary: Vec<MethodSummary>,
}

impl BenchmarkReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.status == RowStatus::Failed).count()
    }

    pub fn to_json(&self) -> Result<String, BenchError> {
        to_fixed_json_pretty(self).map_err(|e| BenchError::Io(e.to_string()))
    }

    pub fn rows_for(&self, method: Method) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(move |r| r.method == method)
    }

    /// `method,scenario,t_full_s,t_method_s,time_ratio`
    pub fn write_timings_csv<W: Write>(&self, w: W) -> Result<(), BenchError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["method", "scenario", "t_full_s", "t_method_s", "time_ratio"])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for row in &self.rows {
            let t_full = self.references[row.scenario].t_full_s;
            wr.write_record([
                row.method.name().to_string(),
                row.scenario.to_string(),
                t_full.to_string(),
                opt(row.t_method_s),
                opt(row.time_ratio),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// `R,f_LB,f_UB`, one row per iteration.
pub fn write_convergence_csv<W: Write>(run: &RunResult, w: W) -> Result<(), BenchError> {
    if run.iterations.is_empty() {
        return Err(BenchError::Invalid("run has no iterations".into()));
    }
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["R", "f_LB", "f_UB"])?;
    for rec in &run.iterations {
        wr.write_record([rec.r.to_string(), rec.f_lb.to_string(), rec.f_ub.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn emit_convergence_plotdata(run: &RunResult, path: &Path) -> Result<(), BenchError> {
    let file = std::fs::File::create(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
    write_convergence_csv(run, std::io::BufWriter::new(file))
}

fn class_totals(spec: &SystemSpec, x: &[f64]) -> (f64, f64) {
    spec.generators.iter().zip(x).fold(
        (0.0, 0.0),
        |(vre, th), (g, v)| {
            if g.is_vre {
                (vre + v, th)
            } else {
                (vre, th + v)
            }
        },
    )
}

fn investment_error(x_method: f64, x_full: f64) -> Option<f64> {
    const ZERO: f64 = 1e-6;
    if x_full.abs() > ZERO {
        Some(100.0 * (x_method - x_full) / x_full)
    } else if x_method.abs() <= ZERO {
        Some(0.0)
    } else {
        None
    }
}

fn solve_reference(spec: &SystemSpec, ts: &TimeSeriesTable, scenario: usize, seed: u64) -> ScenarioReference {
    let start = Instant::now();
    let solved = build_full_model(spec, ts).and_then(|m| m.solve(&SolverOptions::default()));
    let t_full_s = start.elapsed().as_secs_f64();
    match solved {
        Ok(s) => ScenarioReference {
            scenario,
            seed,
            status: RowStatus::Ok,
            error: None,
            f_full: Some(s.lp.objective),
            x_full: Some(s.solution.x),
            lp_iterations: Some(s.lp.stats.iterations),
            t_full_s,
        },
        Err(e) => ScenarioReference {
            scenario,
            seed,
            status: RowStatus::Failed,
            error: Some(e.to_string()),
            f_full: None,
            x_full: None,
            lp_iterations: None,
            t_full_s,
        },
    }
}

fn run_method(
    spec: &SystemSpec,
    ts: &TimeSeriesTable,
    config: &AlgorithmConfig,
    reference: &ScenarioReference,
) -> (ReportRow, Option<RunResult>) {
    let method = config.method;
    let scenario = reference.scenario;
    let (Some(x_full), Some(lp_full)) = (&reference.x_full, reference.lp_iterations) else {
        return (ReportRow::failed(method, scenario, "full-scale reference failed".into()), None);
    };
    let start = Instant::now();
    let run = match algorithm::run(spec, ts, config) {
        Ok(run) => run,
        Err(e) => return (ReportRow::failed(method, scenario, e.to_string()), None),
    };
    let t_method_s = start.elapsed().as_secs_f64();
    let last = run.last();
    let (vre_m, th_m) = class_totals(spec, &last.x_hat);
    let (vre_f, th_f) = class_totals(spec, x_full);
    let lp_iterations: usize = run.iterations.iter().map(|r| r.lp_iterations_agg + r.lp_iterations_ub).sum();
    let row = ReportRow {
        method,
        scenario,
        status: RowStatus::Ok,
        error: None,
        eps_percent: Some(last.eps_percent),
        termination: Some(run.termination),
        iterations: Some(run.iterations.len()),
        final_r: Some(last.r),
        representatives: Some(last.representatives),
        f_lb: Some(last.f_lb),
        f_ub: Some(last.f_ub),
        x: Some(last.x_hat.clone()),
        vre_investment_error_percent: investment_error(vre_m, vre_f),
        thermal_investment_error_percent: investment_error(th_m, th_f),
        lp_work_ratio: Some(lp_iterations as f64 / lp_full.max(1) as f64),
        t_method_s: Some(t_method_s),
        time_ratio: Some(t_method_s / reference.t_full_s.max(f64::MIN_POSITIVE)),
    };
    (row, Some(run))
}

fn summarize(method: Method, rows: &[ReportRow]) -> MethodSummary {
    let ok: Vec<&ReportRow> = rows.iter().filter(|r| r.method == method && r.status == RowStatus::Ok).collect();
    let col = |f: fn(&ReportRow) -> Option<f64>| quartiles(&ok.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
    MethodSummary {
        method,
        completed: ok.len(),
        failed: rows.iter().filter(|r| r.method == method).count() - ok.len(),
        eps_percent: col(|r| r.eps_percent),
        vre_investment_error_percent: col(|r| r.vre_investment_error_percent),
        thermal_investment_error_percent: col(|r| r.thermal_investment_error_percent),
        lp_work_ratio: col(|r| r.lp_work_ratio),
    }
}

fn write_file(
    path: &Path,
    f: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> Result<(), BenchError>,
) -> Result<(), BenchError> {
    let file = std::fs::File::create(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
    let mut w = std::io::BufWriter::new(file);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Runs every configured method on every perturbed scenario.
///
/// Scenario `i` uses seed `derive(master, i)`; its perturbation and the
/// algorithm draw independent streams from it, so a scenario's results do
/// not depend on which other scenarios run. Failures become rows with an
/// error message. When an output directory is configured the per-run
/// iteration CSVs, one convergence CSV per method (first successful
/// scenario), `report.json` and `timings.csv` are written there.
pub fn run_benchmark(config: &ExperimentConfig) -> Result<BenchmarkReport, BenchError> {
    config.validate()?;
    let spec = &config.system;
    let base = config.load_timeseries()?;
    let columns = config.perturbed_columns();
    let out_dir = config.bench.output_dir.as_deref();
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| BenchError::Io(format!("{}: {e}", dir.display())))?;
    }

    let seeds: Vec<u64> = (0..config.bench.scenarios).map(|i| derive_seed(config.seed, i as u64)).collect();
    let inputs: Vec<TimeSeriesTable> = seeds
        .iter()
        .map(|&s| perturb(&base, spec, &columns, config.bench.noise, derive_seed(s, 0)))
        .collect::<Result<_, _>>()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.bench.workers)
        .build()
        .map_err(|e| BenchError::Invalid(e.to_string()))?;

    let references: Vec<ScenarioReference> = pool.install(|| {
        inputs.par_iter().zip(&seeds).enumerate().map(|(i, (ts, &s))| solve_reference(spec, ts, i, s)).collect()
    });

    let tasks: Vec<(Method, usize)> =
        config.bench.methods.iter().flat_map(|&m| (0..inputs.len()).map(move |i| (m, i))).collect();
    let results: Vec<(ReportRow, Option<RunResult>)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(method, i)| {
                let cfg = AlgorithmConfig { method, seed: derive_seed(seeds[i], 1), ..config.algorithm.clone() };
                let (mut row, run) = run_method(spec, &inputs[i], &cfg, &references[i]);
                if let (Some(dir), Some(run)) = (out_dir, &run) {
                    let path = dir.join(format!("iterations_{}_{i}.csv", method.name()));
                    if let Err(e) = write_file(&path, |w| run.write_iterations_csv(w).map_err(BenchError::from)) {
                        row = ReportRow::failed(method, i, e.to_string());
                    }
                }
                (row, run)
            })
            .collect()
    });

    if let Some(dir) = out_dir {
        for &method in &config.bench.methods {
            let first =
                results.iter().find(|(row, run)| row.method == method && row.status == RowStatus::Ok && run.is_some());
            if let Some((_, Some(run))) = first {
                emit_convergence_plotdata(run, &dir.join(format!("convergence_{}.csv", method.name())))?;
            }
        }
    }

    let rows: Vec<ReportRow> = results.into_iter().map(|(row, _)| row).collect();
    let summary = config.bench.methods.iter().map(|&m| summarize(m, &rows)).collect();
    let report = BenchmarkReport {
        schema: REPORT_SCHEMA.into(),
        note: TIMING_NOTE.into(),
        master_seed: config.seed,
        scenarios: config.bench.scenarios,
        noise: config.bench.noise,
        perturbed_columns: columns,
        generators: spec.generator_names(),
        methods: config.bench.methods.clone(),
        references,
        rows,
        summary,
    };
    if let Some(dir) = out_dir {
        let json = report.to_json()?;
        write_file(&dir.join("report.json"), |w| Ok(w.write_all(json.as_bytes())?))?;
        write_file(&dir.join("timings.csv"), |w| report.write_timings_csv(w))?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{BenchSettings, DataSource};
    use crate::gep::fixtures::*;

    #[test]
    fn quartiles_type7() {
        let q = quartiles(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((q.min, q.q1, q.median, q.q3, q.max), (1.0, 1.75, 2.5, 3.25, 4.0));
        assert_eq!(quartiles(&[5.0]).unwrap().median, 5.0);
        assert!(quartiles(&[]).is_none());
    }

    #[test]
    fn investment_errors() {
        assert_eq!(investment_error(110.0, 100.0), Some(10.0));
        assert_eq!(investment_error(0.0, 0.0), Some(0.0));
        assert_eq!(investment_error(5.0, 0.0), None);
    }

    fn tiny_config(dir: Option<&Path>) -> ExperimentConfig {
        let mut system = spec(vec![thermal(130.0, 1e3), pv(1.0, 8e2)], vec![battery(4.0)]);
        system.budget = 1e8;
        let t = 48;
        ExperimentConfig {
            system,
            data: DataSource::Synthetic { horizon: t, seed: 1, generator: Default::default() },
            algorithm: AlgorithmConfig {
                r0: t,
                delta_r: 1,
                r_max: t + 1,
                n_top: 0,
                k: 20,
                n_trees: 5,
                max_depth: 4,
                method: Method::Mcb,
                ..AlgorithmConfig::default()
            },
            bench: BenchSettings {
                methods: vec![Method::Mcb, Method::InputChc],
                scenarios: 2,
                noise: (1.0, 1.0),
                perturb_columns: vec![],
                output_dir: dir.map(Path::to_path_buf),
                workers: 2,
            },
            seed: 11,
        }
    }

    #[test]
    fn identity_runs_are_exact() {
        let report = run_benchmark(&tiny_config(None)).unwrap();
        assert_eq!(report.rows.len(), 4);
        assert_eq!(report.failures(), 0);
        for row in &report.rows {
            let f_full = report.references[row.scenario].f_full.unwrap();
            assert!(row.eps_percent.unwrap().abs() < 1e-5, "{row:?}");
            assert!((row.f_lb.unwrap() - f_full).abs() <= 1e-7 * f_full.abs());
            assert!(row.vre_investment_error_percent.unwrap().abs() < 1e-3);
            assert!(row.thermal_investment_error_percent.unwrap().abs() < 1e-3);
        }
    }

    #[test]
    fn writes_outputs_reproducibly() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(Some(dir.path()));
        cfg.bench.noise = (0.8, 1.2);
        cfg.algorithm.r0 = 12;
        cfg.algorithm.delta_r = 12;
        cfg.algorithm.r_max = 48;
        run_benchmark(&cfg).unwrap();
        let first = std::fs::read(dir.path().join("report.json")).unwrap();
        for name in ["iterations_mcb_0.csv", "iterations_input-chc_1.csv", "convergence_mcb.csv", "timings.csv"] {
            assert!(dir.path().join(name).exists(), "{name}");
        }
        cfg.bench.workers = 1;
        run_benchmark(&cfg).unwrap();
        assert_eq!(first, std::fs::read(dir.path().join("report.json")).unwrap());
        let parsed: BenchmarkReport = serde_json::from_slice(&first).unwrap();
        assert_eq!(parsed.rows.len(), 4);
    }

    #[test]
    fn scenario_results_do_not_depend_on_scenario_count() {
        let mut cfg = tiny_config(None);
        cfg.bench.noise = (0.8, 1.2);
        cfg.bench.methods = vec![Method::InputChc];
        cfg.algorithm.r0 = 12;
        let two = run_benchmark(&cfg).unwrap();
        cfg.bench.scenarios = 1;
        let one = run_benchmark(&cfg).unwrap();
        use crate::bench::to_fixed_json;
        assert_eq!(to_fixed_json(&one.rows[0]).unwrap(), to_fixed_json(&two.rows[0]).unwrap());
        assert_eq!(to_fixed_json(&one.references[0]).unwrap(), to_fixed_json(&two.references[0]).unwrap());
    }

    #[test]
    fn convergence_csv() {
        let cfg = tiny_config(None);
        let ts = cfg.load_timeseries().unwrap();
        let run = algorithm::run(&cfg.system, &ts, &cfg.algorithm).unwrap();
        let mut buf = Vec::new();
        write_convergence_csv(&run, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "R,f_LB,f_UB");
        let cells: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(cells[0], "48");
        let (lb, ub): (f64, f64) = (cells[1].parse().unwrap(), cells[2].parse().unwrap());
        assert!((lb - ub).abs() <= 1e-7 * ub.abs());
    }
}
