//! Pipeline configuration file (TOML). Every section and key is optional;
//! missing entries take the Brusselator experiment defaults, unknown keys are
//! rejected.

use std::collections::BTreeMap;
use std::path::Path;

use koopman_kkl::dataset::{Filter, DEFAULT_MAX_ATTEMPTS};
use koopman_kkl::dynamics::{FieldRegistry, IntegratorConfig, OutputMap, VectorField};
use koopman_kkl::inverse::KernelKind;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub system: SystemConfig,
    pub integrator: IntegratorSection,
    pub sampling: SamplingConfig,
    pub basis: BasisConfig,
    pub lattice: LatticeConfig,
    pub injection: InjectionConfig,
    pub krr: KrrConfig,
    pub observer: ObserverSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    /// One-based index of the measured state coordinate.
    pub output_coordinate: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            name: "brusselator".into(),
            params: BTreeMap::from([("a".into(), 1.0), ("b".into(), 3.0)]),
            output_coordinate: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSection {
    pub substep: f64,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        Self { substep: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub n_traj: usize,
    pub duration: f64,
    pub dt: f64,
    pub init_mean: Vec<f64>,
    pub init_std: f64,
    pub filters: Vec<String>,
    pub max_attempts: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            n_traj: 100,
            duration: 3.0,
            dt: 0.1,
            init_mean: vec![1.0, 3.0],
            init_std: 0.75,
            filters: ["x1 >= 0.2", "x2 >= 0.1", "|x - (1, 3)| >= 0.5", "x1 + x2 <= 7"]
                .map(String::from)
                .to_vec(),
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisConfig {
    pub degree: u32,
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self { degree: 5 }
    }
}

/// Either a fixed period or `"estimate"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Period {
    Fixed(f64),
    Keyword(PeriodKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeriodKeyword {
    Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeConfig {
    pub mu_real: f64,
    pub period: Period,
    pub m_max: usize,
    pub n_max: usize,
    /// Used when `period = "estimate"`.
    pub probe: Vec<f64>,
    pub settle: f64,
    pub observe: f64,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self {
            mu_real: -1.0,
            period: Period::Fixed(7.16),
            m_max: 7,
            n_max: 7,
            probe: vec![2.0, 2.0],
            settle: 50.0,
            observe: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InjectionConfig {
    pub lambdas: Vec<f64>,
    pub ridge: f64,
}

impl Default for InjectionConfig {
    fn default() -> Self {
        Self {
            lambdas: vec![0.5, 0.25],
            ridge: koopman_kkl::injection::DEFAULT_RIDGE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KrrSource {
    Scatter,
    Pairs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KrrConfig {
    pub source: KrrSource,
    pub count: usize,
    pub mean: Vec<f64>,
    pub std: f64,
    pub filters: Vec<String>,
    pub length_scale: f64,
    pub xi: f64,
    pub kernel: String,
    /// Seed of the scattered set; `seed + 1` when absent.
    pub seed: Option<u64>,
}

impl Default for KrrConfig {
    fn default() -> Self {
        Self {
            source: KrrSource::Scatter,
            count: 1000,
            mean: vec![1.0, 3.0],
            std: 1.15,
            filters: ["x1 > 0.2", "x2 > 0.1"].map(String::from).to_vec(),
            length_scale: 2.0,
            xi: koopman_kkl::inverse::DEFAULT_XI,
            kernel: "laplace".into(),
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObserverSection {
    pub x0_true: Vec<f64>,
    pub x0_hat: Vec<f64>,
    pub duration: f64,
    pub dt: f64,
}

impl Default for ObserverSection {
    fn default() -> Self {
        Self {
            x0_true: vec![2.0, 2.0],
            x0_hat: vec![1.5, 1.5],
            duration: 30.0,
            dt: 0.1,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Fully resolved configuration, defaults included.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// SHA-256 of the resolved configuration.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn field(&self) -> Result<Box<dyn VectorField<f64>>, CliError> {
        FieldRegistry::with_builtins()
            .build(&self.system.name, &self.system.params)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn output_map(&self) -> OutputMap<f64> {
        OutputMap::Coordinate(self.system.output_coordinate.saturating_sub(1))
    }

    pub fn integrator(&self) -> IntegratorConfig<f64> {
        IntegratorConfig {
            substep: self.integrator.substep,
        }
    }

    pub fn scatter_seed(&self) -> u64 {
        self.krr.seed.unwrap_or(self.seed.wrapping_add(1))
    }

    pub fn kernel(&self) -> Result<KernelKind, CliError> {
        KernelKind::parse(&self.krr.kernel)
            .ok_or_else(|| CliError::Config(format!("krr.kernel: unknown kernel `{}`", self.krr.kernel)))
    }

    pub fn trajectory_filters(&self) -> Result<Vec<Filter<f64>>, CliError> {
        parse_filters(&self.sampling.filters, self.dim()?, "sampling.filters")
    }

    pub fn scatter_filters(&self) -> Result<Vec<Filter<f64>>, CliError> {
        parse_filters(&self.krr.filters, self.dim()?, "krr.filters")
    }

    fn dim(&self) -> Result<usize, CliError> {
        Ok(self.field()?.dim())
    }

    /// Checks everything that can be checked without running a stage.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let field = self.field()?;
        let dim = field.dim();
        if self.system.output_coordinate == 0 || self.system.output_coordinate > dim {
            return bad(format!(
                "system.output_coordinate must be in 1..={dim}, got {}",
                self.system.output_coordinate
            ));
        }
        let positive = [
            ("integrator.substep", self.integrator.substep),
            ("sampling.duration", self.sampling.duration),
            ("sampling.dt", self.sampling.dt),
            ("krr.length_scale", self.krr.length_scale),
            ("observer.duration", self.observer.duration),
            ("observer.dt", self.observer.dt),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{key} must be positive, got {v}"));
            }
        }
        for (key, v) in [("sampling.init_std", self.sampling.init_std), ("krr.std", self.krr.std), ("krr.xi", self.krr.xi)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{key} must be non-negative, got {v}"));
            }
        }
        if !(self.injection.ridge >= 0.0) {
            return bad(format!("injection.ridge must be non-negative, got {}", self.injection.ridge));
        }
        if self.sampling.n_traj == 0 || self.krr.count == 0 {
            return bad("sampling.n_traj and krr.count must be positive".into());
        }
        for (key, v) in [
            ("sampling.init_mean", &self.sampling.init_mean),
            ("krr.mean", &self.krr.mean),
            ("observer.x0_true", &self.observer.x0_true),
            ("observer.x0_hat", &self.observer.x0_hat),
            ("lattice.probe", &self.lattice.probe),
        ] {
            if v.len() != dim {
                return bad(format!("{key} has {} entries, system dimension is {dim}", v.len()));
            }
        }
        if !(self.lattice.mu_real < 0.0) {
            return bad(format!("lattice.mu_real must be negative, got {}", self.lattice.mu_real));
        }
        if let Period::Fixed(p) = self.lattice.period {
            if !(p > 0.0 && p.is_finite()) {
                return bad(format!("lattice.period must be positive or \"estimate\", got {p}"));
            }
        }
        if self.injection.lambdas.is_empty() || self.injection.lambdas.iter().any(|&l| !(l > 0.0)) {
            return bad("injection.lambdas must be a non-empty list of positive rates".into());
        }
        self.kernel()?;
        self.trajectory_filters()?;
        self.scatter_filters()?;
        Ok(())
    }
}

fn parse_filters(text: &[String], dim: usize, key: &str) -> Result<Vec<Filter<f64>>, CliError> {
    text.iter()
        .map(|t| Filter::parse(t, dim).map_err(|e| CliError::Config(format!("{key}: {e}"))))
        .collect()
}
