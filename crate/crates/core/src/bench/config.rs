use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{factor_column, generate_synthetic, load_timeseries, BenchError, SyntheticSpec};
use crate::algorithm::{AlgorithmConfig, Method};
use crate::gep::{SystemSpec, TimeSeriesTable};

pub const CONFIG_SCHEMA: &str = "mcb-tsa/config/v1";

/// Where the time series comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// CSV file, absolute or relative to the config file.
    File(PathBuf),
    Synthetic {
        horizon: usize,
        seed: u64,
        #[serde(flatten)]
        generator: SyntheticSpec,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSettings {
    pub methods: Vec<Method>,
    pub scenarios: usize,
    /// Multiplicative noise interval `[lo, hi]`.
    pub noise: (f64, f64),
    /// CSV column names to perturb; empty means every VRE capacity factor.
    pub perturb_columns: Vec<String>,
    pub output_dir: Option<PathBuf>,
    pub workers: usize,
}

impl Default for BenchSettings {
    fn default() -> Self {
        BenchSettings {
            methods: Method::ALL.to_vec(),
            scenarios: 10,
            noise: (0.8, 1.2),
            perturb_columns: Vec::new(),
            output_dir: None,
            workers: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub system: SystemSpec,
    pub data: DataSource,
    pub algorithm: AlgorithmConfig,
    pub bench: BenchSettings,
    /// Master seed of the benchmark; scenario seeds derive from it.
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    system_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    system: Option<SystemSpec>,
    data: DataSection,
    #[serde(default)]
    algorithm: AlgorithmConfig,
    #[serde(default)]
    bench: BenchSettings,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DataSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timeseries: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    synthetic: Option<SyntheticSection>,
}

#[derive(Serialize, Deserialize)]
struct SyntheticSection {
    horizon: usize,
    #[serde(default)]
    seed: u64,
    #[serde(flatten)]
    generator: SyntheticSpec,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl ExperimentConfig {
    /// Parses a TOML document; relative paths resolve against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, BenchError> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        if file.schema != CONFIG_SCHEMA {
            return Err(BenchError::Config(format!(
                "unsupported schema {:?}, expected {CONFIG_SCHEMA:?}",
                file.schema
            )));
        }
        let system = match (file.system, file.system_file) {
            (Some(s), None) => s,
            (None, Some(p)) => {
                let p = resolve(base_dir, &p);
                let text = std::fs::read_to_string(&p).map_err(|e| BenchError::Io(format!("{}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| BenchError::Config(format!("{}: {e}", p.display())))?
            }
            _ => return Err(BenchError::Config("give exactly one of `system` and `system_file`".into())),
        };
        let data = match (file.data.timeseries, file.data.synthetic) {
            (Some(p), None) => DataSource::File(resolve(base_dir, &p)),
            (None, Some(s)) => DataSource::Synthetic { horizon: s.horizon, seed: s.seed, generator: s.generator },
            _ => return Err(BenchError::Config("give exactly one of `data.timeseries` and `data.synthetic`".into())),
        };
        let mut bench = file.bench;
        bench.output_dir = bench.output_dir.map(|p| resolve(base_dir, &p));
        let cfg = ExperimentConfig { system, data, algorithm: file.algorithm, bench, seed: file.seed.unwrap_or(0) };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    pub fn to_toml_string(&self) -> Result<String, BenchError> {
        let (timeseries, synthetic) = match &self.data {
            DataSource::File(p) => (Some(p.clone()), None),
            DataSource::Synthetic { horizon, seed, generator } => {
                (None, Some(SyntheticSection { horizon: *horizon, seed: *seed, generator: generator.clone() }))
            }
        };
        let file = ConfigFile {
            schema: CONFIG_SCHEMA.into(),
            seed: Some(self.seed),
            system_file: None,
            system: Some(self.system.clone()),
            data: DataSection { timeseries, synthetic },
            algorithm: self.algorithm.clone(),
            bench: self.bench.clone(),
        };
        toml::to_string(&file).map_err(|e| BenchError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        self.system.validate()?;
        self.algorithm.validate()?;
        let b = &self.bench;
        if b.scenarios < 1 {
            return Err(BenchError::Config("bench.scenarios must be at least 1".into()));
        }
        if !(b.noise.0 > 0.0 && b.noise.0 <= b.noise.1 && b.noise.1.is_finite()) {
            return Err(BenchError::Config(format!(
                "bench.noise [{}, {}] must satisfy 0 < lo <= hi",
                b.noise.0, b.noise.1
            )));
        }
        if b.methods.is_empty() {
            return Err(BenchError::Config("bench.methods is empty".into()));
        }
        if b.workers < 1 {
            return Err(BenchError::Config("bench.workers must be at least 1".into()));
        }
        let known: Vec<String> = self
            .system
            .generators
            .iter()
            .map(|g| factor_column(&g.name))
            .chain(["D".to_string(), "price".to_string()])
            .collect();
        if let Some(c) = b.perturb_columns.iter().find(|c| !known.contains(c)) {
            return Err(BenchError::Config(format!("unknown perturbed column {c:?}")));
        }
        if let DataSource::Synthetic { horizon: 0, .. } = self.data {
            return Err(BenchError::Config("data.synthetic.horizon must be at least 1".into()));
        }
        Ok(())
    }

    /// Columns to perturb after applying the empty-means-VRE default.
    pub fn perturbed_columns(&self) -> Vec<String> {
        if !self.bench.perturb_columns.is_empty() {
            return self.bench.perturb_columns.clone();
        }
        self.system.generators.iter().filter(|g| g.is_vre).map(|g| factor_column(&g.name)).collect()
    }

    pub fn load_timeseries(&self) -> Result<TimeSeriesTable, BenchError> {
        let ts = match &self.data {
            DataSource::File(p) => load_timeseries(p, &self.system)?,
            DataSource::Synthetic { horizon, seed, generator } => {
                generate_synthetic(generator, &self.system, *horizon, *seed)
            }
        };
        ts.check_against(&self.system)?;
        Ok(ts)
    }
}
