use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use mcb_tsa::algorithm::{self, Method};
use mcb_tsa::bench::{
    self, emit_convergence_plotdata, emit_timeseries, run_benchmark, BenchError, DataSource, ExperimentConfig,
    SyntheticSpec,
};
use mcb_tsa::gep::{build_full_model, TimeSeriesTable};
use mcb_tsa::lp::SolverOptions;
use mcb_tsa::ml;

mod exit;

#[derive(Parser)]
#[command(
    name = "mcb-tsa",
    version,
    about = "Marginal-cost-guided time series aggregation for capacity expansion planning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Input {
    /// Experiment config (TOML, schema mcb-tsa/config/v1).
    #[arg(short, long)]
    config: PathBuf,
    /// Time-series CSV replacing the config's data section.
    #[arg(long)]
    timeseries: Option<PathBuf>,
}

#[derive(Args, Default)]
struct AlgorithmFlags {
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    r0: Option<usize>,
    #[arg(long)]
    delta_r: Option<usize>,
    #[arg(long)]
    r_max: Option<usize>,
    /// Target gap in percent.
    #[arg(long)]
    eps_target: Option<f64>,
    /// KDE sample count.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    n_top: Option<usize>,
    #[arg(long)]
    n_trees: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    /// Count protected steps towards R.
    #[arg(long)]
    count_protected_in_r: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the full-horizon model.
    SolveFull {
        #[command(flatten)]
        input: Input,
        /// Solution summary (JSON).
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Marginal costs per step (CSV `step,mu`).
        #[arg(long)]
        duals: Option<PathBuf>,
    },
    /// Predict full-horizon marginal costs.
    Estimate {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        algorithm: AlgorithmFlags,
        /// Predicted marginal costs (CSV `step,mu`).
        #[arg(short, long)]
        output: PathBuf,
        /// Trained estimator (JSON).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Build the aggregation for one value of R.
    Aggregate {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        algorithm: AlgorithmFlags,
        #[arg(long)]
        r: usize,
        /// Aggregation (CSV `original_step,representative_id,weight`).
        #[arg(short, long)]
        output: PathBuf,
        /// Also solve the lower and upper bound models.
        #[arg(long)]
        bounds: bool,
    },
    /// Run the iterative aggregation loop.
    Run {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        algorithm: AlgorithmFlags,
        /// Output directory.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run the perturbation benchmark.
    Bench {
        #[command(flatten)]
        input: Input,
        /// Master seed.
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        scenarios: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<Method>>,
        /// Noise interval as `lo,hi`.
        #[arg(long, value_parser = parse_interval)]
        noise: Option<(f64, f64)>,
        /// Output directory, replacing `bench.output_dir`.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic time series for the configured system.
    GenData {
        /// Experiment config; its `data.synthetic` section supplies the
        /// generator parameters when present.
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        output: PathBuf,
    },
}

impl AlgorithmFlags {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        let a = &mut cfg.algorithm;
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { a.$f = v; })* };
        }
        set!(method, r0, delta_r, r_max, eps_target, k, n_top, n_trees, max_depth, seed);
        if self.count_protected_in_r {
            a.count_protected_in_r = true;
        }
    }
}

fn load(input: &Input) -> Result<(ExperimentConfig, TimeSeriesTable)> {
    let mut cfg = ExperimentConfig::load(&input.config)?;
    if let Some(p) = &input.timeseries {
        cfg.data = DataSource::File(p.clone());
    }
    let ts = cfg.load_timeseries()?;
    Ok((cfg, ts))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(bench::to_fixed_json_pretty(value)?.as_bytes())?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn write_series(path: &Path, values: &[f64]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(create(path)?);
    wr.write_record(["step", "mu"])?;
    for (t, v) in values.iter().enumerate() {
        wr.write_record([t.to_string(), v.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct FullSummary<'a> {
    objective: f64,
    generators: Vec<String>,
    x: &'a [f64],
    lp_iterations: usize,
    horizon: usize,
}

fn solve_full(input: &Input, output: Option<&Path>, duals: Option<&Path>) -> Result<()> {
    let (cfg, ts) = load(input)?;
    let model = build_full_model(&cfg.system, &ts)?;
    let solved = model.solve(&SolverOptions::default())?;
    println!("objective {}", solved.lp.objective);
    for (g, x) in cfg.system.generators.iter().zip(&solved.solution.x) {
        println!("x_{} {}", g.name, x);
    }
    if let Some(p) = output {
        let summary = FullSummary {
            objective: solved.lp.objective,
            generators: cfg.system.generator_names(),
            x: &solved.solution.x,
            lp_iterations: solved.lp.stats.iterations,
            horizon: ts.horizon(),
        };
        write_json(p, &summary)?;
    }
    if let Some(p) = duals {
        write_series(p, &model.marginal_costs(&solved.lp)?.values)?;
    }
    Ok(())
}

fn estimate(input: &Input, flags: &AlgorithmFlags, output: &Path, model: Option<&Path>) -> Result<()> {
    let (mut cfg, ts) = load(input)?;
    flags.apply(&mut cfg);
    cfg.validate()?;
    let out = ml::estimate(&cfg.system, &ts, &cfg.algorithm.estimator())?;
    write_series(output, &out.mu.values)?;
    if let Some(p) = model {
        out.model.save_json(p)?;
    }
    for (g, x) in cfg.system.generators.iter().zip(&out.x_tilde) {
        println!("x_tilde_{} {}", g.name, x);
    }
    Ok(())
}

fn aggregate(input: &Input, flags: &AlgorithmFlags, r: usize, output: &Path, bounds: bool) -> Result<()> {
    let (mut cfg, ts) = load(input)?;
    flags.apply(&mut cfg);
    cfg.validate()?;
    let prepared = algorithm::prepare(&cfg.system, &ts, &cfg.algorithm)?;
    let agg = algorithm::aggregation_at(&prepared, &cfg.algorithm, r)?;
    let mut w = create(output)?;
    agg.write_csv(&mut w)?;
    w.flush()?;
    println!("representatives {}", agg.len());
    if bounds {
        let b = algorithm::compute_bounds(&cfg.system, &ts, &agg, &SolverOptions::default())?;
        println!("f_LB {}", b.f_lb);
        println!("f_UB {}", b.f_ub);
        println!("eps_percent {}", algorithm::gap(b.f_lb, b.f_ub)?);
    }
    Ok(())
}

fn run(input: &Input, flags: &AlgorithmFlags, out: &Path) -> Result<()> {
    let (mut cfg, ts) = load(input)?;
    flags.apply(&mut cfg);
    cfg.validate()?;
    let result = algorithm::run(&cfg.system, &ts, &cfg.algorithm)?;
    let name = cfg.algorithm.method.name();
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = create(&out.join(format!("iterations_{name}.csv")))?;
    result.write_iterations_csv(&mut w)?;
    w.flush()?;
    emit_convergence_plotdata(&result, &out.join(format!("convergence_{name}.csv")))?;
    write_json(&out.join("run.json"), &result)?;
    let last = result.last();
    println!(
        "{name}: {:?} after {} iterations, R = {}, eps = {}%",
        result.termination,
        result.iterations.len(),
        last.r,
        last.eps_percent
    );
    Ok(())
}

struct BenchFlags<'a> {
    seed: u64,
    scenarios: Option<usize>,
    workers: Option<usize>,
    methods: Option<&'a [Method]>,
    noise: Option<(f64, f64)>,
    out: Option<&'a Path>,
}

fn bench_cmd(input: &Input, flags: BenchFlags) -> Result<bool> {
    let mut cfg = ExperimentConfig::load(&input.config)?;
    if let Some(p) = &input.timeseries {
        cfg.data = DataSource::File(p.clone());
    }
    cfg.seed = flags.seed;
    if let Some(n) = flags.scenarios {
        cfg.bench.scenarios = n;
    }
    if let Some(w) = flags.workers {
        cfg.bench.workers = w;
    }
    if let Some(m) = flags.methods {
        cfg.bench.methods = m.to_vec();
    }
    if let Some(n) = flags.noise {
        cfg.bench.noise = n;
    }
    if let Some(o) = flags.out {
        cfg.bench.output_dir = Some(o.to_path_buf());
    }
    if cfg.bench.output_dir.is_none() {
        return Err(BenchError::Config("no output directory: pass --out or set bench.output_dir".into()).into());
    }
    let report = run_benchmark(&cfg)?;
    for s in &report.summary {
        let median = |q: &Option<bench::Quartiles>| q.map(|q| q.median.to_string()).unwrap_or_else(|| "-".into());
        println!(
            "{}: {} ok, {} failed, median eps {}%, median VRE error {}%, median thermal error {}%",
            s.method,
            s.completed,
            s.failed,
            median(&s.eps_percent),
            median(&s.vre_investment_error_percent),
            median(&s.thermal_investment_error_percent)
        );
    }
    for row in report.rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("{} scenario {}: {}", row.method, row.scenario, row.error.as_deref().unwrap_or(""));
    }
    Ok(report.failures() == 0)
}

fn gen_data(config: &Path, horizon: Option<usize>, seed: Option<u64>, output: &Path) -> Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    let (h, s, generator) = match cfg.data {
        DataSource::Synthetic { horizon, seed, generator } => (Some(horizon), seed, generator),
        DataSource::File(_) => (None, 0, SyntheticSpec::default()),
    };
    let horizon = horizon
        .or(h)
        .ok_or_else(|| BenchError::Config("no horizon: pass --horizon or configure data.synthetic".into()))?;
    if horizon == 0 {
        return Err(BenchError::Config("horizon must be at least 1".into()).into());
    }
    let ts = bench::generate_synthetic(&generator, &cfg.system, horizon, seed.unwrap_or(s));
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    emit_timeseries(output, &cfg.system, &ts)?;
    Ok(())
}

fn parse_interval(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected `lo,hi`")?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok((num(lo)?, num(hi)?))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::SolveFull { input, output, duals } => {
            solve_full(input, output.as_deref(), duals.as_deref()).map(|_| true)
        }
        Command::Estimate { input, algorithm, output, model } => {
            estimate(input, algorithm, output, model.as_deref()).map(|_| true)
        }
        Command::Aggregate { input, algorithm, r, output, bounds } => {
            aggregate(input, algorithm, *r, output, *bounds).map(|_| true)
        }
        Command::Run { input, algorithm, out } => run(input, algorithm, out).map(|_| true),
        Command::Bench { input, seed, scenarios, workers, methods, noise, out } => bench_cmd(
            input,
            BenchFlags {
                seed: *seed,
                scenarios: *scenarios,
                workers: *workers,
                methods: methods.as_deref(),
                noise: *noise,
                out: out.as_deref(),
            },
        ),
        Command::GenData { config, horizon, seed, output } => gen_data(config, *horizon, *seed, output).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(exit::PARTIAL),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::code(&e))
        }
    }
}
