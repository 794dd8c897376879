//! Python bindings: system and time-series types, the full-scale solve,
//! the marginal-cost estimator, clustering, bounds and the iterative loop.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;

use mcb_tsa::algorithm::{self, AlgorithmConfig, AlgorithmError, Method};
use mcb_tsa::bench::{self, reference_system, BenchError, Renewable, SyntheticSpec};
use mcb_tsa::gep::{self, build_full_model, GepError};
use mcb_tsa::lp::SolverOptions;
use mcb_tsa::ml::{self, MlError};
use mcb_tsa::tsa::{self, FeatureSeries, ProtectedSet, TsaError};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn gep_err(e: GepError) -> PyErr {
    match e {
        GepError::NotOptimal(_) | GepError::Lp(_) => PyRuntimeError::new_err(e.to_string()),
        _ => value_err(e),
    }
}

fn alg_err(e: AlgorithmError) -> PyErr {
    match e {
        AlgorithmError::Gep(g) => gep_err(g),
        AlgorithmError::Ml(MlError::Gep(g)) | AlgorithmError::Tsa(TsaError::Gep(g)) => gep_err(g),
        AlgorithmError::Aborted { .. } | AlgorithmError::UndefinedGap => PyRuntimeError::new_err(e.to_string()),
        _ => value_err(e),
    }
}

fn bench_err(e: BenchError) -> PyErr {
    match e {
        BenchError::Gep(g) => gep_err(g),
        BenchError::Algorithm(a) => alg_err(a),
        _ => value_err(e),
    }
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = bench::to_fixed_json(value).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Generators, storage units and cost parameters.
#[pyclass(name = "SystemSpec", from_py_object)]
#[derive(Clone)]
struct PySystemSpec {
    inner: gep::SystemSpec,
}

#[pymethods]
impl PySystemSpec {
    /// Parses the `[system]` table layout (TOML).
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let inner: gep::SystemSpec = toml::from_str(text).map_err(value_err)?;
        inner.validate().map_err(gep_err)?;
        Ok(PySystemSpec { inner })
    }

    /// Thermal + PV (or wind) + storage with `hours` of energy capacity.
    #[staticmethod]
    #[pyo3(signature = (renewable = "pv", hours = 4.0))]
    fn reference(renewable: &str, hours: f64) -> PyResult<Self> {
        let r = match renewable {
            "pv" => Renewable::Pv,
            "wind" => Renewable::Wind,
            other => return Err(value_err(format!("unknown renewable {other:?}"))),
        };
        Ok(PySystemSpec { inner: reference_system(r, hours) })
    }

    fn with_investment_scale(&self, factor: f64) -> Self {
        PySystemSpec { inner: self.inner.with_investment_scale(factor) }
    }

    #[getter]
    fn generator_names(&self) -> Vec<String> {
        self.inner.generator_names()
    }

    #[getter]
    fn budget(&self) -> f64 {
        self.inner.budget
    }

    fn to_toml(&self) -> PyResult<String> {
        toml::to_string(&self.inner).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("SystemSpec(generators={:?}, storages={})", self.inner.generator_names(), self.inner.storages.len())
    }
}

/// Capacity factors (one list per generator), demand and price.
#[pyclass(name = "TimeSeries", from_py_object)]
#[derive(Clone)]
struct PyTimeSeries {
    inner: gep::TimeSeriesTable,
}

#[pymethods]
impl PyTimeSeries {
    #[new]
    #[pyo3(signature = (capacity_factors, demand, price = None))]
    fn new(capacity_factors: Vec<Vec<f64>>, demand: Vec<f64>, price: Option<Vec<f64>>) -> PyResult<Self> {
        let price = price.unwrap_or_else(|| vec![0.0; demand.len()]);
        let inner = gep::TimeSeriesTable { capacity_factors, demand, price };
        inner.validate().map_err(gep_err)?;
        Ok(PyTimeSeries { inner })
    }

    #[staticmethod]
    fn load_csv(path: PathBuf, spec: &PySystemSpec) -> PyResult<Self> {
        Ok(PyTimeSeries { inner: bench::load_timeseries(&path, &spec.inner).map_err(bench_err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (spec, horizon, seed = 0))]
    fn synthetic(spec: &PySystemSpec, horizon: usize, seed: u64) -> Self {
        PyTimeSeries { inner: bench::generate_synthetic(&SyntheticSpec::default(), &spec.inner, horizon, seed) }
    }

    fn to_csv(&self, path: PathBuf, spec: &PySystemSpec) -> PyResult<()> {
        bench::emit_timeseries(&path, &spec.inner, &self.inner).map_err(bench_err)
    }

    /// Multiplies the named columns by uniform noise from `[lo, hi]`.
    fn perturb(&self, spec: &PySystemSpec, columns: Vec<String>, lo: f64, hi: f64, seed: u64) -> PyResult<Self> {
        let inner = bench::perturb(&self.inner, &spec.inner, &columns, (lo, hi), seed).map_err(bench_err)?;
        Ok(PyTimeSeries { inner })
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    #[getter]
    fn demand(&self) -> Vec<f64> {
        self.inner.demand.clone()
    }

    #[getter]
    fn capacity_factors(&self) -> Vec<Vec<f64>> {
        self.inner.capacity_factors.clone()
    }

    #[getter]
    fn price(&self) -> Vec<f64> {
        self.inner.price.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.horizon()
    }
}

/// Partition of the horizon into representative steps.
#[pyclass(name = "Aggregation", from_py_object)]
#[derive(Clone)]
struct PyAggregation {
    inner: gep::Aggregation,
}

#[pymethods]
impl PyAggregation {
    #[new]
    fn new(horizon: usize, groups: Vec<Vec<usize>>) -> PyResult<Self> {
        Ok(PyAggregation { inner: gep::Aggregation::new(horizon, groups).map_err(gep_err)? })
    }

    #[staticmethod]
    fn identity(horizon: usize) -> Self {
        PyAggregation { inner: gep::Aggregation::identity(horizon) }
    }

    #[staticmethod]
    fn from_block_lengths(lengths: Vec<usize>) -> PyResult<Self> {
        Ok(PyAggregation { inner: gep::Aggregation::from_block_lengths(&lengths).map_err(gep_err)? })
    }

    #[getter]
    fn groups(&self) -> Vec<Vec<usize>> {
        self.inner.groups().to_vec()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Loop parameters of the iterative aggregation.
#[pyclass(name = "AlgorithmConfig", from_py_object)]
#[derive(Clone)]
struct PyAlgorithmConfig {
    inner: AlgorithmConfig,
}

#[pymethods]
impl PyAlgorithmConfig {
    #[new]
    #[pyo3(signature = (
        method = "mcb", r0 = 400, delta_r = 100, r_max = 900, eps_target = 1.0, k = 500,
        n_top = 100, seed = 0, count_protected_in_r = false, n_trees = 100, max_depth = 20
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        method: &str,
        r0: usize,
        delta_r: usize,
        r_max: usize,
        eps_target: f64,
        k: usize,
        n_top: usize,
        seed: u64,
        count_protected_in_r: bool,
        n_trees: usize,
        max_depth: usize,
    ) -> PyResult<Self> {
        let method: Method = method.parse().map_err(value_err)?;
        let inner = AlgorithmConfig {
            r0,
            delta_r,
            r_max,
            eps_target,
            k,
            n_top,
            seed,
            method,
            count_protected_in_r,
            n_trees,
            max_depth,
        };
        inner.validate().map_err(alg_err)?;
        Ok(PyAlgorithmConfig { inner })
    }

    #[getter]
    fn method(&self) -> &'static str {
        self.inner.method.name()
    }

    fn __repr__(&self) -> String {
        format!("AlgorithmConfig({:?})", self.inner)
    }
}

/// Full-horizon optimum: `{"objective", "x", "mu", "lp_iterations"}`.
#[pyfunction]
fn solve_full<'py>(py: Python<'py>, spec: &PySystemSpec, ts: &PyTimeSeries) -> PyResult<Bound<'py, PyAny>> {
    let model = build_full_model(&spec.inner, &ts.inner).map_err(gep_err)?;
    let solved = model.solve(&SolverOptions::default()).map_err(gep_err)?;
    let mu = model.marginal_costs(&solved.lp).map_err(gep_err)?;
    let out = serde_json::json!({
        "objective": solved.lp.objective,
        "x": solved.solution.x,
        "mu": mu.values,
        "lp_iterations": solved.lp.stats.iterations,
    });
    to_py(py, &out)
}

/// Predicted marginal costs and reduced-model capacities:
/// `{"mu", "x_tilde"}`.
#[pyfunction]
#[pyo3(signature = (spec, ts, k = 500, n_trees = 100, max_depth = 20, seed = 0))]
fn estimate<'py>(
    py: Python<'py>,
    spec: &PySystemSpec,
    ts: &PyTimeSeries,
    k: usize,
    n_trees: usize,
    max_depth: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = ml::EstimatorConfig { k, n_trees, max_depth, seed };
    let out = ml::estimate(&spec.inner, &ts.inner, &cfg).map_err(|e| match e {
        MlError::Gep(g) => gep_err(g),
        e => value_err(e),
    })?;
    to_py(py, &serde_json::json!({ "mu": out.mu.values, "x_tilde": out.x_tilde }))
}

fn features(values: Vec<Vec<f64>>) -> PyResult<FeatureSeries> {
    let f = FeatureSeries { rows: values };
    f.validate().map_err(value_err)?;
    Ok(f)
}

/// Chronological clustering of per-step feature rows into `r` contiguous
/// groups that never span a protected step.
#[pyfunction]
#[pyo3(signature = (rows, r, protected = Vec::new()))]
fn chronological_cluster(rows: Vec<Vec<f64>>, r: usize, protected: Vec<usize>) -> PyResult<Vec<Vec<usize>>> {
    let f = features(rows)?;
    let c = tsa::chronological_cluster(&f, &ProtectedSet { steps: protected }, r).map_err(value_err)?;
    Ok(c.groups)
}

/// K-medoids (L1) of per-step feature rows: `(medoids, groups)`.
#[pyfunction]
#[pyo3(signature = (rows, r, seed = 0))]
fn kmedoids(rows: Vec<Vec<f64>>, r: usize, seed: u64) -> PyResult<(Vec<usize>, Vec<Vec<usize>>)> {
    let km = tsa::kmedoids_cluster(&features(rows)?, r, seed).map_err(value_err)?;
    Ok((km.medoids, km.groups))
}

/// `(f_lb, f_ub, x_hat)` for an aggregation.
#[pyfunction]
fn compute_bounds(spec: &PySystemSpec, ts: &PyTimeSeries, agg: &PyAggregation) -> PyResult<(f64, f64, Vec<f64>)> {
    let b =
        algorithm::compute_bounds(&spec.inner, &ts.inner, &agg.inner, &SolverOptions::default()).map_err(gep_err)?;
    Ok((b.f_lb, b.f_ub, b.x_hat))
}

/// Runs the iterative loop; returns the run record as a dict.
#[pyfunction]
fn run<'py>(
    py: Python<'py>,
    spec: &PySystemSpec,
    ts: &PyTimeSeries,
    config: &PyAlgorithmConfig,
) -> PyResult<Bound<'py, PyAny>> {
    let result = algorithm::run(&spec.inner, &ts.inner, &config.inner).map_err(alg_err)?;
    to_py(py, &result)
}

/// Runs the benchmark described by a config file; returns the report dict.
#[pyfunction]
#[pyo3(signature = (config_path, seed))]
fn run_benchmark<'py>(py: Python<'py>, config_path: PathBuf, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = bench::ExperimentConfig::load(&config_path).map_err(bench_err)?;
    cfg.seed = seed;
    let report = bench::run_benchmark(&cfg).map_err(bench_err)?;
    to_py(py, &report)
}

#[pymodule]
fn mcb_tsa_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystemSpec>()?;
    m.add_class::<PyTimeSeries>()?;
    m.add_class::<PyAggregation>()?;
    m.add_class::<PyAlgorithmConfig>()?;
    m.add_function(wrap_pyfunction!(solve_full, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(chronological_cluster, m)?)?;
    m.add_function(wrap_pyfunction!(kmedoids, m)?)?;
    m.add_function(wrap_pyfunction!(compute_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(run_benchmark, m)?)?;
    Ok(())
}
