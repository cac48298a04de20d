//! Run configuration: one JSON file, one experiment kind.

use std::collections::BTreeSet;

use hnls_core::field::GridPolicy;
use hnls_core::nls::Nonlinearity;
use hnls_core::strichartz::{DataFamily, NormRoute};
use hnls_core::weyl::SpatialPoints;
use hnls_core::{CutoffProfile, Execution, Signature};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};

/// Highest configuration and output schema this build understands.
pub const SCHEMA_VERSION: u32 = 1;

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub seed: u64,
    #[serde(default)]
    pub execution: Execution,
    #[serde(default)]
    pub caps: Caps,
    pub experiments: Vec<Experiment>,
    #[serde(default)]
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Caps {
    /// Largest `G^d · n_t` any single norm may use, refinement included.
    pub max_cost: Option<u128>,
    /// Wall-clock budget for each experiment, checked when it finishes.
    pub max_wall_seconds: Option<f64>,
}

/// Bounds on a named scalar reported by the experiments.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub metric: String,
    pub min: Option<f64>,
    pub max: Option<f64>,
    /// Index into `experiments`; every experiment when absent.
    pub experiment: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    Strichartz(StrichartzSpec),
    Bilinear(BilinearSpec),
    Multilinear(MultilinearSpec),
    Kernel(KernelSpec),
    Galilean(GalileanSpec),
    Solve(SolveSpec),
    Picard(PicardSpec),
    Inflation(InflationSpec),
    AdmissibilityTable(TableSpec),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Strichartz(_) => "strichartz",
            Experiment::Bilinear(_) => "bilinear",
            Experiment::Multilinear(_) => "multilinear",
            Experiment::Kernel(_) => "kernel",
            Experiment::Galilean(_) => "galilean",
            Experiment::Solve(_) => "solve",
            Experiment::Picard(_) => "picard",
            Experiment::Inflation(_) => "inflation",
            Experiment::AdmissibilityTable(_) => "admissibility-table",
        }
    }

    pub fn signature(&self) -> Option<&Signature> {
        match self {
            Experiment::Strichartz(s) => Some(&s.sig),
            Experiment::Bilinear(s) => Some(&s.sig),
            Experiment::Multilinear(s) => Some(&s.sig),
            Experiment::Kernel(s) => Some(&s.sig),
            Experiment::Galilean(s) => Some(&s.sig),
            Experiment::Solve(s) => Some(&s.sig),
            Experiment::Picard(s) => Some(&s.sig),
            Experiment::Inflation(s) => Some(&s.sig),
            Experiment::AdmissibilityTable(_) => None,
        }
    }

    /// Scalars this kind reports and checks may refer to.
    pub fn metrics(&self) -> &'static [&'static str] {
        match self {
            Experiment::Strichartz(_) => &["slope", "predicted", "deviation", "residual", "failures"],
            Experiment::Bilinear(_) => &["slope", "residual", "exact"],
            Experiment::Multilinear(_) => &["max_variation", "min_ratio", "max_ratio"],
            Experiment::Kernel(_) => &["max_ratio", "ratio_slope", "max_minor_ratio", "minor_slope"],
            Experiment::Galilean(_) => &["max_deviation"],
            Experiment::Solve(_) => &[
                "mass_drift",
                "energy_drift",
                "halving_ratio",
                "energy_halving_ratio",
            ],
            Experiment::Picard(_) => &[
                "max_ratio",
                "last_difference",
                "diverging",
                "split_step_error",
                "threshold_amplitude",
            ],
            Experiment::Inflation(_) => &["max_growth"],
            Experiment::AdmissibilityTable(_) => &["rows"],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrichartzSpec {
    pub sig: Signature,
    pub p: f64,
    pub data: DataFamily,
    pub ns: Vec<u64>,
    #[serde(default = "auto_route")]
    pub route: NormRoute,
    #[serde(default = "one")]
    pub t_max: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default)]
    pub policy: GridPolicy,
    /// Accepted `|slope − predicted|`.
    pub tolerance: Option<f64>,
}

fn auto_route() -> NormRoute {
    NormRoute::Auto
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BilinearSpec {
    pub sig: Signature,
    pub n1: u64,
    pub n2s: Vec<u64>,
    pub samples: usize,
    #[serde(default = "one")]
    pub t_max: f64,
    #[serde(default)]
    pub policy: GridPolicy,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultilinearSpec {
    pub sig: Signature,
    pub m: usize,
    pub s: f64,
    pub bases: Vec<[u64; 4]>,
    #[serde(default = "two")]
    pub rescales: u32,
}

fn two() -> u32 {
    2
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub sig: Signature,
    pub cutoff: CutoffProfile,
    pub ns: Vec<u64>,
    pub samples: usize,
    #[serde(default = "sigma")]
    pub sigma: f64,
    #[serde(default = "random_points")]
    pub points: SpatialPoints,
}

fn sigma() -> f64 {
    0.1
}

fn random_points() -> SpatialPoints {
    SpatialPoints::Random
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GalileanSpec {
    pub sig: Signature,
    /// Half width of the seeded random data box.
    pub half: usize,
    pub center: Vec<i64>,
    pub side: i64,
    pub times: Vec<f64>,
    #[serde(default = "grid64")]
    pub grid: usize,
}

fn grid64() -> usize {
    64
}

/// Initial data for the nonlinear solvers.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum NlsData {
    /// Seeded complex Gaussian coefficients on `[−half, half]^d`.
    Gaussian { half: usize },
    PlaneWave { k: Vec<i64>, re: f64, im: f64 },
    Modes { modes: Vec<ModeSpec> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub k: Vec<i64>,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSpec {
    pub sig: Signature,
    pub m: usize,
    pub nonlinearity: Nonlinearity,
    pub data: NlsData,
    /// Rescale the data to this `L²` norm.
    pub mass_norm: Option<f64>,
    pub t_max: f64,
    pub h: f64,
    #[serde(default = "one_usize")]
    pub record_every: usize,
    #[serde(default)]
    pub step_halving: bool,
    /// Regularity of the tracked Sobolev norm; `s_c` when absent.
    pub s: Option<f64>,
}

fn one_usize() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSpec {
    pub sig: Signature,
    pub m: usize,
    #[serde(default = "focusing")]
    pub nonlinearity: Nonlinearity,
    pub data: NlsData,
    /// Rescale the data to this `H^{s_c}` norm.
    pub amplitude: Option<f64>,
    pub t_max: f64,
    pub n_iter: usize,
    pub n_time: usize,
    #[serde(default = "yes")]
    pub compare_split_step: bool,
    pub threshold: Option<ThresholdSpec>,
}

fn focusing() -> Nonlinearity {
    Nonlinearity::Focusing
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSpec {
    pub lo: f64,
    pub hi: f64,
    pub bisections: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InflationSpec {
    pub sig: Signature,
    pub m: usize,
    #[serde(default = "focusing")]
    pub nonlinearity: Nonlinearity,
    pub s: f64,
    /// `H^s` norm of the data.
    pub amplitude: f64,
    pub data: NlsData,
    pub t_max: f64,
    pub h: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    pub dims: Vec<usize>,
}

impl Config {
    /// Parses a configuration, or the configuration embedded in a run
    /// manifest, and validates it.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| CliError::Schema(format!("not valid JSON: {e}")))?;
        let value = match value.get("config") {
            Some(inner) if value.get("outputs").is_some() => inner.clone(),
            _ => value,
        };
        let cfg: Config = serde_json::from_value(value).map_err(|e| CliError::Schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version > SCHEMA_VERSION {
            return Err(CliError::Schema(format!(
                "schema version {} is newer than {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        let Some(first) = self.experiments.first() else {
            return Err(CliError::Schema("experiment list is empty".into()));
        };
        let kinds: BTreeSet<&str> = self.experiments.iter().map(Experiment::kind).collect();
        if kinds.len() > 1 {
            return Err(CliError::Schema(format!(
                "one experiment kind per file, found {kinds:?}"
            )));
        }
        for c in &self.checks {
            if !first.metrics().contains(&c.metric.as_str()) {
                return Err(CliError::Schema(format!(
                    "unknown metric `{}` for {}; expected one of {:?}",
                    c.metric,
                    first.kind(),
                    first.metrics()
                )));
            }
            if let Some(i) = c.experiment {
                if i >= self.experiments.len() {
                    return Err(CliError::Schema(format!("check refers to experiment {i}")));
                }
            }
            if c.min.is_none() && c.max.is_none() {
                return Err(CliError::Schema(format!("check on `{}` has no bound", c.metric)));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> &'static str {
        self.experiments[0].kind()
    }

    /// Canonical JSON (sorted keys) used for hashing and embedding.
    pub fn canonical(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
