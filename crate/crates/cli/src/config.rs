//! Configuration documents and flag overrides.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use srelab::laws::{CoefficientLaw, LawSpec};
use srelab::limitlab::{CltSpec, CovSpec, FcltSpec, TruncMomentSpec, WllnSpec};
use srelab::rng::parse_seed;
use srelab::sre::U0Mode;
use srelab::slowvary::PositiveLawSpec;
use srelab::{Error, Result};

/// Flags shared by every experiment subcommand.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct CommonArgs {
    /// JSON configuration document.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// JSON coefficient-law document; replaces the config's `law`.
    #[arg(long)]
    pub law: Option<PathBuf>,
    /// Master seed, decimal or 0x-prefixed hex.
    #[arg(long, value_parser = seed_arg)]
    pub seed: Option<u64>,
    /// Replication count; replaces the config's `reps`.
    #[arg(long)]
    pub reps: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory for report.json and curves.csv.
    #[arg(long, env = "SRELAB_OUT")]
    pub out: Option<PathBuf>,
}

fn seed_arg(s: &str) -> std::result::Result<u64, String> {
    parse_seed(s).map_err(|e| format!("invalid seed `{s}`: {e}"))
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

/// A configuration after flags are applied.
pub struct Resolved<T> {
    pub seed: u64,
    pub threads: usize,
    pub out: PathBuf,
    pub config: T,
}

impl CommonArgs {
    /// Merge the config file and the flags, then parse into `T`.
    pub fn resolve<T: DeserializeOwned>(&self, subcommand: &str) -> Result<Resolved<T>> {
        let mut doc = match &self.config {
            Some(p) => read_json(p)?,
            None => Value::Object(Map::new()),
        };
        let obj = doc
            .as_object_mut()
            .ok_or_else(|| Error::Input("configuration must be a JSON object".into()))?;
        if let Some(p) = &self.law {
            obj.insert("law".into(), read_json(p)?);
        }
        if let Some(r) = self.reps {
            obj.insert("reps".into(), r.into());
        }
        let seed = match (self.seed, obj.remove("seed")) {
            (Some(s), _) => s,
            (None, None) => 0,
            (None, Some(Value::Number(n))) => n
                .as_u64()
                .ok_or_else(|| Error::Input(format!("seed {n} is not a 64-bit unsigned integer")))?,
            (None, Some(Value::String(s))) => {
                parse_seed(&s).map_err(|e| Error::Input(format!("seed `{s}`: {e}")))?
            }
            (None, Some(other)) => return Err(Error::Input(format!("seed must be a number or string, got {other}"))),
        };
        let config: T = serde_json::from_value(doc).map_err(|e| Error::Input(format!("configuration: {e}")))?;
        let threads = self
            .threads
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        if threads == 0 {
            return Err(Error::Input("--threads must be >= 1".into()));
        }
        let out = self
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from("srelab-out").join(subcommand));
        Ok(Resolved {
            seed,
            threads,
            out,
            config,
        })
    }
}

pub fn require_law(law: &Option<LawSpec>) -> Result<CoefficientLaw> {
    match law {
        Some(spec) => CoefficientLaw::from_spec(spec),
        None => Err(Error::Input("a coefficient law is required (`law` in the config or --law)".into())),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantsConfig {
    pub law: Option<LawSpec>,
    /// Replications for `D` when `κ ≠ 1`.
    #[serde(default = "default_d_reps")]
    pub reps: u64,
}

fn default_d_reps() -> u64 {
    100_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub law: Option<LawSpec>,
    #[serde(default = "default_path_n")]
    pub n: u64,
    #[serde(default = "default_u0")]
    pub u0: U0Mode,
    /// Exponent for the `Σ U_j^κ` column; solved from the law when absent.
    #[serde(default)]
    pub kappa: Option<f64>,
    /// Simulate `X_j = σ_j Z_j` for GARCH laws instead of `U_j`.
    #[serde(default)]
    pub garch_returns: bool,
    /// Paths; the first is written in full to `path.csv`.
    #[serde(default = "one")]
    pub reps: u64,
}

fn default_path_n() -> u64 {
    1000
}

fn default_u0() -> U0Mode {
    U0Mode::Stationary
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerpetuityConfig {
    pub law: Option<LawSpec>,
    #[serde(default = "default_d_reps")]
    pub reps: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_depth")]
    pub max_depth: u64,
    #[serde(default = "default_quantiles")]
    pub quantiles: Vec<f64>,
}

fn default_tol() -> f64 {
    srelab::sre::DEFAULT_TOL
}

fn default_max_depth() -> u64 {
    srelab::sre::DEFAULT_MAX_DEPTH
}

fn default_quantiles() -> Vec<f64> {
    vec![0.1, 0.25, 0.5, 0.75, 0.9, 0.99]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruncMomentConfig {
    pub law: Option<LawSpec>,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(flatten)]
    pub spec: TruncMomentSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Sre,
    Iid,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizerSpec {
    TruncatedMean,
    /// `b_n` for the slowly varying function in `Ell::parse` syntax.
    Bruin(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WllnConfig {
    #[serde(default = "default_source")]
    pub source: SourceKind,
    pub law: Option<LawSpec>,
    #[serde(default)]
    pub kappa: Option<f64>,
    pub y: Option<PositiveLawSpec>,
    #[serde(default = "default_normalizer")]
    pub normalizer: NormalizerSpec,
    #[serde(flatten)]
    pub spec: WllnSpec,
}

fn default_source() -> SourceKind {
    SourceKind::Sre
}

fn default_normalizer() -> NormalizerSpec {
    NormalizerSpec::TruncatedMean
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CltConfig {
    pub law: Option<LawSpec>,
    #[serde(flatten)]
    pub spec: CltSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FcltConfig {
    pub law: Option<LawSpec>,
    #[serde(flatten)]
    pub spec: FcltSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovConfig {
    pub law: Option<LawSpec>,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(flatten)]
    pub spec: CovSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub ell: String,
    pub which: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlowvaryConfig {
    /// Law of `Y` for truncated means and tail ratios.
    pub y: Option<PositiveLawSpec>,
    #[serde(default)]
    pub x_grid: Vec<f64>,
    /// Monte Carlo draws per `x` for the tail ratio (0 = analytic only).
    #[serde(default)]
    pub reps: u64,
    /// Slowly varying functions for `b_n`, in `Ell::parse` syntax.
    #[serde(default)]
    pub bn_ell: Vec<String>,
    #[serde(default)]
    pub n_grid: Vec<u64>,
    #[serde(default)]
    pub probes: Vec<ProbeSpec>,
    #[serde(default = "default_probe_tol")]
    pub probe_tolerance: f64,
    /// Allowed relative gap between Monte Carlo and exact tail ratios.
    #[serde(default = "default_mc_tol")]
    pub mc_tolerance: f64,
}

fn default_mc_tol() -> f64 {
    0.1
}

fn default_probe_tol() -> f64 {
    0.05
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"seed": "0x10", "reps": 5, "law": {"variant": "lognormal_a_const_b", "mu": -0.5, "sigma": 1.0, "b": 1.0}}"#).unwrap();
        let args = CommonArgs {
            config: Some(cfg.clone()),
            reps: Some(9),
            threads: Some(2),
            ..Default::default()
        };
        let r: Resolved<PerpetuityConfig> = args.resolve("perpetuity").unwrap();
        assert_eq!((r.seed, r.config.reps, r.threads), (16, 9, 2));
        let seeded = CommonArgs {
            seed: Some(3),
            ..args
        };
        assert_eq!(seeded.resolve::<PerpetuityConfig>("perpetuity").unwrap().seed, 3);
    }

    #[test]
    fn missing_law_file_is_an_input_error() {
        let args = CommonArgs {
            law: Some("/nonexistent/law.json".into()),
            ..Default::default()
        };
        assert!(matches!(args.resolve::<ConstantsConfig>("constants"), Err(Error::Input(_))));
    }
}
