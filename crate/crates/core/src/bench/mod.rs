//! Data ingestion, synthetic instances, perturbation scenarios and the
//! benchmark harness.

mod config;
mod harness;
mod io;
mod json;
mod perturb;
mod synth;

use thiserror::Error;

use crate::algorithm::AlgorithmError;
use crate::gep::{GeneratorSpec, GepError, StorageSpec, SystemSpec};

pub use config::{BenchSettings, DataSource, ExperimentConfig, CONFIG_SCHEMA};
pub use harness::{
    emit_convergence_plotdata, quartiles, run_benchmark, write_convergence_csv, BenchmarkReport, MethodSummary,
    Quartiles, ReportRow, RowStatus, ScenarioReference, REPORT_SCHEMA,
};
pub use io::{emit_timeseries, factor_column, load_timeseries, read_timeseries, write_timeseries};
pub use json::{to_fixed_json, to_fixed_json_pretty};
pub use perturb::perturb;
pub use synth::{generate_synthetic, Profile, SyntheticSpec};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("I/O: {0}")]
    Io(String),
    #[error("line {line}, column {column}: {message}")]
    Parse { line: u64, column: String, message: String },
    #[error("CSV: {0}")]
    Csv(String),
    #[error("schema: {0}")]
    Schema(String),
    #[error("invalid: {0}")]
    Invalid(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Gep(#[from] GepError),
    #[error(transparent)]
    Algorithm(#[from] AlgorithmError),
}

impl From<csv::Error> for BenchError {
    fn from(e: csv::Error) -> Self {
        match e.kind() {
            csv::ErrorKind::Io(_) => BenchError::Io(e.to_string()),
            _ => BenchError::Csv(e.to_string()),
        }
    }
}

impl From<std::io::Error> for BenchError {
    fn from(e: std::io::Error) -> Self {
        BenchError::Io(e.to_string())
    }
}

/// Renewable technology of the reference case.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Renewable {
    Pv,
    Wind,
}

/// One thermal unit, one renewable unit and one storage unit of
/// `hours · 200 MW` energy capacity, hourly steps, market participation off.
pub fn reference_system(renewable: Renewable, hours: f64) -> SystemSpec {
    let (name, c_op) = match renewable {
        Renewable::Pv => ("pv", 1.0),
        Renewable::Wind => ("wind", 2.5),
    };
    SystemSpec {
        generators: vec![
            GeneratorSpec { name: "thermal".into(), c_op: 130.0, c_inv: 1e5, is_vre: false },
            GeneratorSpec { name: name.into(), c_op, c_inv: 8e4, is_vre: true },
        ],
        storages: vec![StorageSpec {
            name: "storage".into(),
            eta_c: 0.9,
            eta_d: 0.9,
            e_max: hours * 200.0,
            e_min: 0.0,
            p_c_max: 200.0,
            p_d_max: 200.0,
            c_d: 1.5,
        }],
        c_ns: 5e3,
        budget: 3e8,
        delta: 1.0,
        market_participation: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_cases() {
        let s = reference_system(Renewable::Pv, 4.0);
        s.validate().unwrap();
        assert_eq!(s.storages[0].e_max, 800.0);
        assert_eq!(reference_system(Renewable::Wind, 50.0).storages[0].e_max, 10_000.0);
        assert_eq!(reference_system(Renewable::Wind, 4.0).generators[1].c_op, 2.5);
    }
}
