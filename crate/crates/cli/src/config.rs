//! Run configurations: what a run computes, independent of where it is written.
//!
//! A `RunConfig` is embedded in every output file, so any file can be
//! regenerated with `fblgbc --config <file>`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use fblgbc::mc_oracle::{Fault, McConfig, ValidationGrid};
use fblgbc::model::ChannelSpec;
use fblgbc::qform::ConfusionModel;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    #[serde(rename = "P")]
    pub power: f64,
    #[serde(rename = "N1")]
    pub noise1: f64,
    #[serde(rename = "N2")]
    pub noise2: f64,
}

impl Channel {
    pub fn spec(&self, n: usize) -> ChannelSpec {
        ChannelSpec::new(self.power, self.noise1, self.noise2, n)
    }
}

/// How code sizes are chosen at each grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SizeSpec {
    /// Fixed codebook sizes.
    Counts { m1: u64, m2: u64 },
    /// Fixed rates in bits per channel use.
    RatesBits { r1: f64, r2: f64 },
    /// Fractions of the asymptotic rate pair at each α.
    RegionFraction { fractions: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McSettings {
    pub seed: u64,
    pub samples: u64,
}

impl McSettings {
    pub fn mc(&self) -> McConfig {
        McConfig::new(self.samples, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtJob {
    pub channel: Channel,
    pub ns: Vec<usize>,
    pub alphas: Vec<f64>,
    pub sizes: SizeSpec,
    #[serde(default)]
    pub confusion_model: ConfusionModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpcJob {
    #[serde(flatten)]
    pub dt: DtJob,
    pub mc: McSettings,
}

/// Peak-power split: explicit powers, or P1 = αP for each α.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PeakSplit {
    Powers {
        #[serde(rename = "P1")]
        p1: f64,
        #[serde(rename = "P2")]
        p2: f64,
    },
    Alphas { alphas: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaBetaJob {
    pub channel: Channel,
    pub ns: Vec<usize>,
    pub split: PeakSplit,
    pub eps1: f64,
    pub eps2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionJob {
    pub channel: Channel,
    pub n: usize,
    pub eps: f64,
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub confusion_model: ConfusionModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateJob {
    pub grid: ValidationGrid,
    pub mc: McSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<Fault>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepJob {
    pub channel: Channel,
    pub ns: Vec<usize>,
    pub alphas: Vec<f64>,
    pub fractions: Vec<f64>,
    #[serde(default)]
    pub confusion_model: ConfusionModel,
    /// Adds the superposition-coding total when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare_spc: Option<McSettings>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Job {
    DtDpc(DtJob),
    DtSpc(SpcJob),
    KappaBeta(KappaBetaJob),
    Region(RegionJob),
    Validate(ValidateJob),
    Sweep(SweepJob),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub job: Job,
    #[serde(default)]
    pub format: Format,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn check_positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_channel(c: &Channel) -> Result<(), CliError> {
    check_positive("P", c.power)?;
    check_positive("N1", c.noise1)?;
    check_positive("N2", c.noise2)
}

fn check_list<T>(name: &str, v: &[T]) -> Result<(), CliError> {
    if v.is_empty() {
        Err(usage(format!("{name} needs at least one value")))
    } else {
        Ok(())
    }
}

fn check_ns(ns: &[usize]) -> Result<(), CliError> {
    check_list("n", ns)?;
    if ns.contains(&0) {
        return Err(usage("blocklength n must be at least 1"));
    }
    Ok(())
}

fn check_alphas(a: &[f64]) -> Result<(), CliError> {
    check_list("alpha", a)?;
    if let Some(x) = a.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(usage(format!("alpha must lie in [0, 1], got {x}")));
    }
    Ok(())
}

fn check_eps(name: &str, e: f64) -> Result<(), CliError> {
    if e > 0.0 && e < 1.0 {
        Ok(())
    } else {
        Err(usage(format!("{name} must lie in (0, 1), got {e}")))
    }
}

fn check_samples(mc: &McSettings) -> Result<(), CliError> {
    if mc.samples == 0 {
        return Err(usage("samples must be at least 1"));
    }
    Ok(())
}

fn check_dt(j: &DtJob) -> Result<(), CliError> {
    check_channel(&j.channel)?;
    check_ns(&j.ns)?;
    check_alphas(&j.alphas)?;
    match &j.sizes {
        SizeSpec::Counts { m1, m2 } if *m1 == 0 || *m2 == 0 => Err(usage("M1 and M2 must be at least 1")),
        SizeSpec::RatesBits { r1, r2 } if !(*r1 >= 0.0 && *r2 >= 0.0) => Err(usage("rates must be nonnegative")),
        SizeSpec::RegionFraction { fractions } => {
            check_list("rate-fraction", fractions)?;
            match fractions.iter().find(|f| !(**f >= 0.0 && f.is_finite())) {
                Some(f) => Err(usage(format!("rate fractions must be nonnegative, got {f}"))),
                None => Ok(()),
            }
        }
        _ => Ok(()),
    }
}

impl RunConfig {
    /// Checks everything a usage error should catch before any numerics run.
    pub fn check(&self) -> Result<(), CliError> {
        match &self.job {
            Job::DtDpc(j) => check_dt(j),
            Job::DtSpc(j) => {
                check_dt(&j.dt)?;
                check_samples(&j.mc)
            }
            Job::KappaBeta(j) => {
                check_channel(&j.channel)?;
                check_ns(&j.ns)?;
                check_eps("eps1", j.eps1)?;
                check_eps("eps2", j.eps2)?;
                match &j.split {
                    PeakSplit::Powers { p1, p2 } => {
                        if !(*p1 >= 0.0 && *p2 >= 0.0 && p1 + p2 <= j.channel.power * (1.0 + 1e-12)) {
                            return Err(usage("P1, P2 must be nonnegative with P1 + P2 <= P"));
                        }
                        Ok(())
                    }
                    PeakSplit::Alphas { alphas } => check_alphas(alphas),
                }
            }
            Job::Region(j) => {
                check_channel(&j.channel)?;
                check_ns(&[j.n])?;
                check_alphas(&j.alphas)?;
                if !(j.eps > 0.0) {
                    return Err(usage(format!("eps must be positive, got {}", j.eps)));
                }
                Ok(())
            }
            Job::Validate(j) => {
                let g = &j.grid;
                check_channel(&Channel { power: g.power, noise1: g.noise1, noise2: g.noise2 })?;
                check_ns(&g.ns)?;
                check_alphas(&g.alphas)?;
                check_samples(&j.mc)?;
                if !(g.target_p > 0.0 && g.target_p < 1.0) || !(g.band > 0.0) {
                    return Err(usage("target-p must lie in (0, 1) and band must be positive"));
                }
                Ok(())
            }
            Job::Sweep(j) => {
                check_channel(&j.channel)?;
                check_ns(&j.ns)?;
                check_alphas(&j.alphas)?;
                check_list("rate-fraction", &j.fractions)?;
                if let Some(mc) = &j.compare_spc {
                    check_samples(mc)?;
                }
                Ok(())
            }
        }
    }

    /// Reads a configuration from a JSON file, or recovers the one embedded
    /// in a CSV or JSON-lines output file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        let parse = |s: &str| serde_json::from_str::<RunConfig>(s).map_err(|e| usage(format!("bad config in {}: {e}", path.display())));
        let trimmed = text.trim_start();
        if trimmed.starts_with('#') {
            let line = trimmed
                .lines()
                .take_while(|l| l.starts_with('#'))
                .find_map(|l| l.strip_prefix(crate::output::CONFIG_PREFIX))
                .ok_or_else(|| usage(format!("{} has no embedded config line", path.display())))?;
            return parse(line);
        }
        if let Ok(v) = serde_json::from_str::<serde_json::Value>(trimmed) {
            // A whole-file JSON document: a config, or a validation report.
            return match v.get("config") {
                Some(c) => serde_json::from_value(c.clone()).map_err(|e| usage(format!("bad embedded config: {e}"))),
                None => parse(trimmed),
            };
        }
        // JSON lines: the header is the first line.
        let first = trimmed.lines().next().unwrap_or("");
        let header: serde_json::Value = serde_json::from_str(first).map_err(|e| usage(format!("bad config in {}: {e}", path.display())))?;
        let cfg = header
            .get("header")
            .and_then(|h| h.get("config"))
            .ok_or_else(|| usage(format!("{} has no embedded config", path.display())))?;
        serde_json::from_value(cfg.clone()).map_err(|e| usage(format!("bad embedded config: {e}")))
    }
}
