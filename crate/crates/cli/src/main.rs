//! `fblgbc`: finite-blocklength bounds for the two-user Gaussian broadcast
//! channel from the command line.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage error, 3 numerical
//! failure. `FBLGBC_THREADS` caps the worker pool.

mod commands;
mod config;
mod output;

use std::fmt::Display;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fblgbc::mc_oracle::{Fault, ValidationGrid};
use fblgbc::qform::ConfusionModel;

use commands::Outcome;
use config::{Channel, DtJob, Format, Job, KappaBetaJob, McSettings, PeakSplit, RegionJob, RunConfig, SizeSpec, SpcJob, SweepJob, ValidateJob};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("validation failed: {0}")]
    ValidationFailed(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn numeric(e: impl Display) -> Self {
        CliError::Numeric(e.to_string())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::ValidationFailed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Numeric(_) | CliError::Io(_) => 3,
        }
    }
}

impl From<fblgbc::Error> for CliError {
    fn from(e: fblgbc::Error) -> Self {
        CliError::numeric(e)
    }
}

/// Accepts `4096`, `2^12` and `1e6` style counts.
fn parse_count(s: &str) -> Result<u64, String> {
    let s = s.trim();
    if let Some((b, e)) = s.split_once('^') {
        let b: u64 = b.trim().parse().map_err(|e| format!("bad base in {s}: {e}"))?;
        let e: u32 = e.trim().parse().map_err(|e| format!("bad exponent in {s}: {e}"))?;
        return b.checked_pow(e).ok_or_else(|| format!("{s} overflows"));
    }
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let x: f64 = s.parse().map_err(|_| format!("not a count: {s}"))?;
    if x >= 0.0 && x.fract() == 0.0 && x < 1.8e19 {
        Ok(x as u64)
    } else {
        Err(format!("not a nonnegative integer: {s}"))
    }
}

fn parse_confusion(s: &str) -> Result<ConfusionModel, String> {
    serde_json::from_value(serde_json::Value::from(s)).map_err(|_| format!("unknown confusion model `{s}` (independent | shared-state)"))
}

#[derive(Debug, Parser)]
#[command(name = "fblgbc", version, about = "Finite-blocklength bounds for the Gaussian broadcast channel")]
struct Cli {
    /// Rerun from a JSON config, or from the config embedded in an output file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write to this file instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Args)]
struct ChannelArgs {
    /// Total transmit power.
    #[arg(long = "P")]
    power: f64,
    /// Noise variance at receiver 1 (the stronger one).
    #[arg(long = "N1")]
    noise1: f64,
    /// Noise variance at receiver 2.
    #[arg(long = "N2")]
    noise2: f64,
}

impl From<&ChannelArgs> for Channel {
    fn from(c: &ChannelArgs) -> Self {
        Channel { power: c.power, noise1: c.noise1, noise2: c.noise2 }
    }
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Blocklengths (comma separated or repeated).
    #[arg(long = "n", required = true, value_delimiter = ',', num_args = 1..)]
    ns: Vec<usize>,
    /// Power fractions α for user 1.
    #[arg(long = "alpha", required = true, value_delimiter = ',', num_args = 1..)]
    alphas: Vec<f64>,
}

#[derive(Debug, Args)]
struct SizeArgs {
    #[arg(long = "M1", value_parser = parse_count, requires = "m2", conflicts_with_all = ["r1", "fractions"])]
    m1: Option<u64>,
    #[arg(long = "M2", value_parser = parse_count, requires = "m1")]
    m2: Option<u64>,
    /// Rate of user 1 in bits per channel use.
    #[arg(long = "R1", requires = "r2", conflicts_with = "fractions")]
    r1: Option<f64>,
    #[arg(long = "R2", requires = "r1")]
    r2: Option<f64>,
    /// Fractions of the asymptotic rate pair.
    #[arg(long = "rate-fraction", value_delimiter = ',', num_args = 1..)]
    fractions: Option<Vec<f64>>,
}

impl SizeArgs {
    fn spec(&self) -> Result<SizeSpec, CliError> {
        match (self.m1.zip(self.m2), self.r1.zip(self.r2), &self.fractions) {
            (Some((m1, m2)), None, None) => Ok(SizeSpec::Counts { m1, m2 }),
            (None, Some((r1, r2)), None) => Ok(SizeSpec::RatesBits { r1, r2 }),
            (None, None, Some(f)) => Ok(SizeSpec::RegionFraction { fractions: f.clone() }),
            _ => Err(CliError::Usage("give exactly one of --M1/--M2, --R1/--R2 or --rate-fraction".into())),
        }
    }
}

#[derive(Debug, Args)]
struct McArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_parser = parse_count, default_value = "1e6")]
    samples: u64,
}

impl From<&McArgs> for McSettings {
    fn from(m: &McArgs) -> Self {
        McSettings { seed: m.seed, samples: m.samples }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dependence-testing bound with dirty-paper coding (closed form).
    DtDpc {
        #[command(flatten)]
        channel: ChannelArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        sizes: SizeArgs,
        #[arg(long, value_parser = parse_confusion, default_value = "independent")]
        confusion_model: ConfusionModel,
    },
    /// Dependence-testing bound with superposition coding (closed form + Monte Carlo).
    DtSpc {
        #[command(flatten)]
        channel: ChannelArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        sizes: SizeArgs,
        #[command(flatten)]
        mc: McArgs,
    },
    /// κβ lower bounds on code size under per-codeword power constraints.
    KappaBeta {
        #[command(flatten)]
        channel: ChannelArgs,
        #[arg(long = "n", required = true, value_delimiter = ',', num_args = 1..)]
        ns: Vec<usize>,
        #[arg(long = "P1", requires = "p2", conflicts_with = "alphas")]
        p1: Option<f64>,
        #[arg(long = "P2", requires = "p1")]
        p2: Option<f64>,
        /// P1 = αP, P2 = (1-α)P for each α.
        #[arg(long = "alpha", value_delimiter = ',', num_args = 1..)]
        alphas: Option<Vec<f64>>,
        /// Error probability for both users unless overridden.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        eps1: Option<f64>,
        #[arg(long)]
        eps2: Option<f64>,
    },
    /// Largest rate pairs meeting a total error target, per α.
    Region {
        #[command(flatten)]
        channel: ChannelArgs,
        #[arg(long = "n")]
        n: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long = "alpha", value_delimiter = ',', num_args = 1..,
              default_value = "0,0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5,0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9,0.95,1")]
        alphas: Vec<f64>,
        #[arg(long, value_parser = parse_confusion, default_value = "independent")]
        confusion_model: ConfusionModel,
    },
    /// Check every closed-form term against seeded Monte Carlo.
    Validate {
        #[arg(long = "P", default_value_t = 2.0)]
        power: f64,
        #[arg(long = "N1", default_value_t = 1.0)]
        noise1: f64,
        #[arg(long = "N2", default_value_t = 1.0)]
        noise2: f64,
        #[arg(long = "n", value_delimiter = ',', num_args = 1.., default_value = "10,50,100")]
        ns: Vec<usize>,
        #[arg(long = "alpha", value_delimiter = ',', num_args = 1.., default_value = "0.3,0.5,0.8")]
        alphas: Vec<f64>,
        /// Pass band in standard errors.
        #[arg(long, default_value_t = 3.0)]
        band: f64,
        /// Closed-form probability the thresholds are placed at.
        #[arg(long, default_value_t = 0.2)]
        target_p: f64,
        #[arg(long, value_parser = parse_confusion, default_value = "independent")]
        confusion_model: ConfusionModel,
        #[command(flatten)]
        mc: McArgs,
        /// Scale the user-1 misdetection eigenvalue (self-test of the gate).
        #[arg(long, hide = true)]
        inject_fault: Option<f64>,
    },
    /// DPC totals over α × n × rate fraction, optionally against SPC.
    Sweep {
        #[command(flatten)]
        channel: ChannelArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long = "rate-fraction", required = true, value_delimiter = ',', num_args = 1..)]
        fractions: Vec<f64>,
        #[arg(long, value_parser = parse_confusion, default_value = "independent")]
        confusion_model: ConfusionModel,
        /// Add the superposition-coding bound (Monte Carlo).
        #[arg(long)]
        compare_spc: bool,
        #[command(flatten)]
        mc: McArgs,
    },
}

impl Command {
    fn job(&self) -> Result<Job, CliError> {
        Ok(match self {
            Command::DtDpc { channel, grid, sizes, confusion_model } => Job::DtDpc(DtJob {
                channel: channel.into(),
                ns: grid.ns.clone(),
                alphas: grid.alphas.clone(),
                sizes: sizes.spec()?,
                confusion_model: *confusion_model,
            }),
            Command::DtSpc { channel, grid, sizes, mc } => Job::DtSpc(SpcJob {
                dt: DtJob {
                    channel: channel.into(),
                    ns: grid.ns.clone(),
                    alphas: grid.alphas.clone(),
                    sizes: sizes.spec()?,
                    confusion_model: ConfusionModel::default(),
                },
                mc: mc.into(),
            }),
            Command::KappaBeta { channel, ns, p1, p2, alphas, eps, eps1, eps2 } => {
                let split = match (p1.zip(*p2), alphas) {
                    (Some((p1, p2)), None) => PeakSplit::Powers { p1, p2 },
                    (None, Some(a)) => PeakSplit::Alphas { alphas: a.clone() },
                    _ => return Err(CliError::Usage("give either --P1/--P2 or --alpha".into())),
                };
                let (Some(eps1), Some(eps2)) = (eps1.or(*eps), eps2.or(*eps)) else {
                    return Err(CliError::Usage("give --eps, or both --eps1 and --eps2".into()));
                };
                Job::KappaBeta(KappaBetaJob { channel: channel.into(), ns: ns.clone(), split, eps1, eps2 })
            }
            Command::Region { channel, n, eps, alphas, confusion_model } => Job::Region(RegionJob {
                channel: channel.into(),
                n: *n,
                eps: *eps,
                alphas: alphas.clone(),
                confusion_model: *confusion_model,
            }),
            Command::Validate { power, noise1, noise2, ns, alphas, band, target_p, confusion_model, mc, inject_fault } => {
                Job::Validate(ValidateJob {
                    grid: ValidationGrid {
                        power: *power,
                        noise1: *noise1,
                        noise2: *noise2,
                        ns: ns.clone(),
                        alphas: alphas.clone(),
                        target_p: *target_p,
                        band: *band,
                        confusion_model: *confusion_model,
                    },
                    mc: mc.into(),
                    fault: inject_fault.map(Fault::ScaleLambda1Dp),
                })
            }
            Command::Sweep { channel, grid, fractions, confusion_model, compare_spc, mc } => Job::Sweep(SweepJob {
                channel: channel.into(),
                ns: grid.ns.clone(),
                alphas: grid.alphas.clone(),
                fractions: fractions.clone(),
                confusion_model: *confusion_model,
                compare_spc: compare_spc.then(|| mc.into()),
            }),
        })
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match (&cli.config, &cli.command) {
        (Some(path), None) => RunConfig::load(path)?,
        (None, Some(cmd)) => RunConfig { job: cmd.job()?, format: Format::default() },
        (Some(_), Some(_)) => return Err(CliError::Usage("--config replaces the subcommand; give one or the other".into())),
        (None, None) => return Err(CliError::Usage("no subcommand given (try --help)".into())),
    };
    if let Some(f) = cli.format {
        cfg.format = f;
    }
    cfg.check()?;
    Ok(cfg)
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("FBLGBC_THREADS") else {
        return Ok(());
    };
    let threads: usize = v.trim().parse().map_err(|_| CliError::Usage(format!("FBLGBC_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().map_err(CliError::numeric)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    configure_threads()?;
    let cfg = resolve(cli)?;
    let outcome = commands::run(&cfg.job)?;

    let mut buf = Vec::new();
    let verdict = match &outcome {
        Outcome::Table(t) => {
            output::write_table(&mut buf, t, &cfg)?;
            Ok(())
        }
        Outcome::Validation(report) => {
            output::write_document(&mut buf, &cfg, "report", report)?;
            eprintln!("validation: {} passed, {} failed", report.passed, report.failed);
            if report.all_passed {
                Ok(())
            } else {
                let first = report.failures().map(|c| format!("{} (z = {:.2})", c.label, c.z)).collect::<Vec<_>>().join(", ");
                Err(CliError::ValidationFailed(first))
            }
        }
    };
    match &cli.output {
        Some(path) => std::fs::write(path, &buf)?,
        None => std::io::stdout().lock().write_all(&buf)?,
    }
    verdict
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fblgbc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
