//! Experiment reports, verdicts, manifests and output files.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

/// One row of `curves.csv`: a statistic at one level `n` or `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Level {
    pub series: String,
    pub level: f64,
    pub value: f64,
    pub std_error: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl Level {
    pub fn new(series: &str, level: f64, value: f64, std_error: f64) -> Self {
        let half = 1.959_963_984_540_054 * std_error;
        Level {
            series: series.into(),
            level,
            value,
            std_error,
            ci_lo: value - half,
            ci_hi: value + half,
        }
    }

    pub fn exact(series: &str, level: f64, value: f64) -> Self {
        Level::new(series, level, value, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub rule: String,
    pub threshold: String,
    pub observed: f64,
    pub status: Status,
}

impl Verdict {
    pub fn check(rule: &str, threshold: impl Into<String>, observed: f64, pass: bool) -> Self {
        Verdict {
            rule: rule.into(),
            threshold: threshold.into(),
            observed,
            status: if pass { Status::Pass } else { Status::Fail },
        }
    }

    pub fn inconclusive(rule: &str, threshold: impl Into<String>, observed: f64) -> Self {
        Verdict {
            rule: rule.into(),
            threshold: threshold.into(),
            observed,
            status: Status::Inconclusive,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Flags {
    /// Paths excluded for overflow or non-finite sums.
    pub overflow: u64,
    /// Perpetuity draws that hit the depth limit.
    pub truncated: u64,
    pub unreliable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub scenario: String,
    pub levels: Vec<Level>,
    pub verdicts: Vec<Verdict>,
    pub flags: Flags,
    pub notes: Vec<String>,
    /// FNV-1a over the canonical serialization of everything above.
    pub digest: String,
}

impl ExperimentReport {
    pub fn new(scenario: &str) -> Self {
        ExperimentReport {
            scenario: scenario.into(),
            levels: Vec::new(),
            verdicts: Vec::new(),
            flags: Flags::default(),
            notes: Vec::new(),
            digest: String::new(),
        }
    }

    pub fn push(&mut self, level: Level) {
        self.levels.push(level);
    }

    pub fn verdict(&mut self, v: Verdict) {
        self.verdicts.push(v);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn find(&self, series: &str, level: f64) -> Option<&Level> {
        self.levels.iter().find(|l| l.series == series && l.level == level)
    }

    pub fn series(&self, series: &str) -> Vec<&Level> {
        self.levels.iter().filter(|l| l.series == series).collect()
    }

    pub fn rule(&self, rule: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.rule == rule)
    }

    /// No verdict failed.
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.status != Status::Fail)
    }

    pub fn finalize(mut self) -> Self {
        self.digest = String::new();
        let canonical = serde_json::to_string(&self).expect("report serializes");
        self.digest = format!("{:016x}", fnv1a(canonical.as_bytes()));
        self
    }

    pub fn write_curves(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "series,level,value,std_error,ci_lo,ci_hi")?;
        for l in &self.levels {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                l.series, l.level, l.value, l.std_error, l.ci_lo, l.ci_hi
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub subcommand: String,
    pub config: serde_json::Value,
    pub master_seed: u64,
    pub threads: usize,
    pub wall_time_s: f64,
    /// Digest over all reports of the run, independent of `threads`.
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutput {
    pub manifest: RunManifest,
    pub reports: Vec<ExperimentReport>,
}

impl RunOutput {
    pub fn new(subcommand: &str, config: serde_json::Value, seed: u64, threads: usize, wall: f64, reports: Vec<ExperimentReport>) -> Self {
        let joined: String = reports.iter().map(|r| r.digest.as_str()).collect::<Vec<_>>().join(",");
        RunOutput {
            manifest: RunManifest {
                tool_version: env!("CARGO_PKG_VERSION").into(),
                subcommand: subcommand.into(),
                config,
                master_seed: seed,
                threads,
                wall_time_s: wall,
                digest: format!("{:016x}", fnv1a(joined.as_bytes())),
            },
            reports,
        }
    }

    pub fn passed(&self) -> bool {
        self.reports.iter().all(ExperimentReport::passed)
    }

    /// Write `report.json` and `curves.csv` into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(dir.join("report.json"), json + "\n")?;
        let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("curves.csv"))?);
        writeln!(w, "scenario,series,level,value,std_error,ci_lo,ci_hi")?;
        for r in &self.reports {
            for l in &r.levels {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    r.scenario, l.series, l.level, l.value, l.std_error, l.ci_lo, l.ci_hi
                )?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
