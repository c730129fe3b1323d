//! Run configuration: defaults, then a JSON file, then command-line overrides.

use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use soc_metrology::measurement::MleConfig;
use soc_metrology::{ModelParams, Statistics};

use crate::error::{CliError, CliResult};

/// Highest coupling ratio the pair-density sweep accepts.
pub const FIG2_RATIO_CAP: f64 = 0.99;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// CFI of pair position measurements vs the fermionic QFI over a k/k_c sweep
    Fig2,
    /// QFI against atom number for each statistics, with log-log slopes
    Scaling,
    /// Thermal QFI: closed forms against the spectral sum over a beta sweep
    Thermal,
    /// Standard-quantum-limit and Heisenberg-limit thresholds
    Limits,
    /// Maximum-likelihood Monte Carlo against the Cramer-Rao bound
    Mle,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Fig2 => "fig2",
            Scenario::Scaling => "scaling",
            Scenario::Thermal => "thermal",
            Scenario::Limits => "limits",
            Scenario::Mle => "mle",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParameter {
    KOverKc,
    BetaOmega,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    #[serde(default = "linear")]
    pub spacing: Spacing,
}

fn linear() -> Spacing {
    Spacing::Linear
}

impl SweepSpec {
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                if i == n - 1 {
                    return self.stop;
                }
                match self.spacing {
                    Spacing::Linear => self.start + t * (self.stop - self.start),
                    Spacing::Log => (self.start.ln() + t * (self.stop.ln() - self.start.ln())).exp(),
                }
            })
            .collect()
    }

    fn validate(&self) -> CliResult<()> {
        if self.points < 2 {
            return Err(CliError::Config(format!("sweep needs at least 2 points, got {}", self.points)));
        }
        if !self.start.is_finite() || !self.stop.is_finite() {
            return Err(CliError::Config("sweep bounds must be finite".into()));
        }
        if self.spacing == Spacing::Log && (self.start <= 0.0 || self.stop <= 0.0) {
            return Err(CliError::Config("log sweep bounds must be positive".into()));
        }
        match self.parameter {
            SweepParameter::KOverKc => {
                let (lo, hi) = (self.start.min(self.stop), self.start.max(self.stop));
                if lo < 0.0 || hi >= 1.0 {
                    return Err(CliError::Config(format!(
                        "k/k_c sweep [{}, {}] must stay in the normal phase [0, 1)",
                        self.start, self.stop
                    )));
                }
            }
            SweepParameter::BetaOmega => {
                if self.start.min(self.stop) <= 0.0 {
                    return Err(CliError::Config("beta*omega must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    /// Fock cutoff for the thermal spectral sum; `None` picks one per point.
    pub cutoff: Option<usize>,
    pub grid_points: usize,
    /// Finite-difference step relative to `Omega`.
    pub d_omega_rel: f64,
    pub seed: u64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self { cutoff: None, grid_points: 1024, d_omega_rel: 1e-4, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingSpec {
    pub n_list: Vec<usize>,
    pub statistics: Vec<Statistics>,
}

impl Default for ScalingSpec {
    fn default() -> Self {
        Self {
            n_list: vec![1, 2, 3, 5, 10, 20, 50, 100, 200, 500],
            statistics: vec![Statistics::Fermionic, Statistics::SymmetricBosonic, Statistics::TonksGirardeau],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig2Spec {
    /// k/k_c values at which the pair density is dumped.
    pub density_at: Vec<f64>,
    pub density_points: usize,
}

impl Default for Fig2Spec {
    fn default() -> Self {
        Self { density_at: Vec::new(), density_points: 128 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MleSpec {
    pub sample_count: usize,
    pub mode: usize,
    pub estimator: MleConfig,
}

impl Default for MleSpec {
    fn default() -> Self {
        Self { sample_count: 100_000, mode: 0, estimator: MleConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Option<Scenario>,
    pub params: ModelParams,
    /// Coupling for fixed-coupling scenarios; `params.k` must stay 0.
    pub k_over_kc: f64,
    pub sweep: Option<SweepSpec>,
    pub numerics: Numerics,
    pub scaling: ScalingSpec,
    pub fig2: Fig2Spec,
    pub mle: MleSpec,
    /// Output path; stdout when absent.
    pub out: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: None,
            params: ModelParams::default(),
            k_over_kc: 0.5,
            sweep: None,
            numerics: Numerics::default(),
            scaling: ScalingSpec::default(),
            fig2: Fig2Spec::default(),
            mle: MleSpec::default(),
            out: None,
        }
    }
}

/// Command-line layer applied over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub scenario: Option<Scenario>,
    pub out: Option<String>,
    pub seed: Option<u64>,
    /// `key=value` with dotted keys, e.g. `params.Omega=50` or `sweep.points=9`.
    pub params: Vec<String>,
}

impl RunConfig {
    /// Defaults, then the file at `path`, then `overrides`.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> CliResult<Self> {
        let mut value = serde_json::to_value(Self::default()).expect("default config serializes");
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let file: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            if !file.is_object() {
                return Err(CliError::Config(format!("{}: top level must be an object", path.display())));
            }
            merge(&mut value, file);
        }
        for kv in &overrides.params {
            let (key, raw) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--param expects key=value, got {kv:?}")))?;
            set_path(&mut value, key.trim(), parse_scalar(raw.trim()))?;
        }
        if let Some(s) = overrides.scenario {
            value["scenario"] = serde_json::to_value(s).unwrap();
        }
        if let Some(seed) = overrides.seed {
            value["numerics"]["seed"] = Value::from(seed);
        }
        if let Some(out) = &overrides.out {
            value["out"] = Value::from(out.clone());
        }
        let config: Self = serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.params.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.params.k != 0.0 {
            return Err(CliError::Config("set the coupling through k_over_kc, not params.k".into()));
        }
        if !(0.0..1.0).contains(&self.k_over_kc) {
            return Err(CliError::Config(format!("k_over_kc = {} is outside [0, 1)", self.k_over_kc)));
        }
        if let Some(sweep) = &self.sweep {
            sweep.validate()?;
        }
        if self.numerics.grid_points < soc_metrology::measurement::MIN_GRID_POINTS {
            return Err(CliError::Config(format!("grid_points must be >= {}", soc_metrology::measurement::MIN_GRID_POINTS)));
        }
        if self.fig2.density_points < soc_metrology::measurement::MIN_GRID_POINTS {
            return Err(CliError::Config(format!("fig2.density_points must be >= {}", soc_metrology::measurement::MIN_GRID_POINTS)));
        }
        if !(self.numerics.d_omega_rel > 0.0 && self.numerics.d_omega_rel < 0.05) {
            return Err(CliError::Config("d_omega_rel must lie in (0, 0.05)".into()));
        }
        Ok(())
    }

    /// Parameters at the configured coupling ratio.
    pub fn params_at(&self, k_over_kc: f64) -> ModelParams {
        self.params.with_ratio(k_over_kc)
    }

    /// The config without its output location, which does not affect results.
    pub fn provenance(&self) -> Self {
        Self { out: None, ..self.clone() }
    }

    /// SHA-256 of the canonical JSON encoding of [`RunConfig::provenance`].
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(&self.provenance()).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn parse_scalar(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn set_path(root: &mut Value, key: &str, value: Value) -> CliResult<()> {
    if key.is_empty() {
        return Err(CliError::Config("empty --param key".into()));
    }
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if node.is_null() {
            *node = Value::Object(Map::new());
        }
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("--param {key}: {part:?} is not inside an object")))?;
        if i == parts.len() - 1 {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    unreachable!()
}
