//! Monte Carlo experiments for the limit theorems, with verdicts.

pub mod clt;
pub mod covprobe;
pub mod report;
pub mod truncmoment;
pub mod wlln;

pub use report::{fnv1a, ExperimentReport, Flags, Level, RunManifest, RunOutput, Status, Verdict};
pub use truncmoment::{growth_exponent, truncated_moment_experiment, Estimator, TruncMomentSpec};
pub use wlln::{error_trend, wlln_experiment, Normalizer, WllnSource, WllnSpec};
pub use clt::{clt_experiment, fclt_experiment, gof_normal, CltSpec, FcltSpec, GarchParams, NormKind, Normalization};
pub use covprobe::{covariance_decay_probe, CovSpec, LagCovariances};
