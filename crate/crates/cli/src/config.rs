//! Command-line flags, the JSON config file, and their merge into a [`RunConfig`].
//!
//! Every flag has a config-file key of the same name with `-` replaced by
//! `_`. A flag given on the command line wins over the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use spectral_relax::power::StoppingConfig;
use spectral_relax::Tolerances;

use crate::error::{CliError, CliResult};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "specrelax", version, about = "Spectral relaxation experiments on reversible Markov chains")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Seed for synthetic spectra and random observables.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Tolerance override as `key=value`; repeatable.
    #[arg(long = "tol", global = true, value_name = "KEY=VALUE")]
    pub tol: Vec<String>,
    /// JSON file with defaults for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SourceArgs {
    /// Chain (JSON `kernel` or dense CSV) or profile (JSON `eigenvalues`, `log_weights`) file.
    #[arg(long, conflicts_with = "preset")]
    pub input: Option<PathBuf>,
    /// `paper-s8`, `kN`, `cycle-N` or `barbell-metastable`.
    #[arg(long)]
    pub preset: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Spectrum, gap, `λ₃/λ₂`, `δ*` and rigidity summary.
    Analyze {
        #[command(flatten)]
        source: SourceArgs,
    },
    /// Per-step ledger up to the horizon.
    Simulate {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        horizon: Option<u64>,
    },
    /// Rigidity time and bound for each `δ`.
    Rigidity {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, value_delimiter = ',')]
        delta: Vec<f64>,
    },
    /// Ledger plus entropy bookkeeping and per-mode fluxes.
    Thermo {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        horizon: Option<u64>,
        /// Steps at which to report per-mode fluxes and affinities.
        #[arg(long, value_delimiter = ',')]
        modes_at: Vec<u64>,
    },
    /// Power iteration with the observable stopping rule.
    Power {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Spectral gap parameter `1 − (λ₃/λ₂)²`; estimated online when absent.
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        kmin: Option<usize>,
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Chebyshev-accelerated versus plain slow-mode fraction.
    Accel {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        degree: Option<usize>,
        /// Suppression interval `a,b`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "paper_simple")]
        interval: Vec<f64>,
        /// Use the map `λ ↦ λ/λ₂` with this `λ₂`.
        #[arg(long)]
        paper_simple: Option<f64>,
        #[arg(long)]
        compare_plain: bool,
        /// Number of accelerated steps.
        #[arg(long)]
        rounds: Option<u64>,
    },
    /// First-passage tail to an absorbing target.
    Fpt {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        target: Option<usize>,
        /// `uniform`, `quasistationary`, `restricted-pi`, or a JSON file holding a distribution.
        #[arg(long)]
        start: Option<String>,
        #[arg(long)]
        kmax: Option<u64>,
    },
    /// Entropy collapse through the hypercube cutoff window.
    Hypercube {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        alpha: Vec<f64>,
    },
}

/// Contents of a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    #[serde(default)]
    pub tol: BTreeMap<String, f64>,
    pub input: Option<PathBuf>,
    pub preset: Option<String>,
    pub horizon: Option<u64>,
    pub delta: Option<Vec<f64>>,
    pub modes_at: Option<Vec<u64>>,
    pub epsilon: Option<f64>,
    pub tau: Option<f64>,
    pub kmin: Option<usize>,
    pub max_iter: Option<usize>,
    pub degree: Option<usize>,
    pub interval: Option<[f64; 2]>,
    pub paper_simple: Option<f64>,
    pub compare_plain: Option<bool>,
    pub rounds: Option<u64>,
    pub target: Option<usize>,
    pub start: Option<String>,
    pub kmax: Option<u64>,
    pub n: Option<usize>,
    pub alpha: Option<Vec<f64>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    File(PathBuf),
    Preset(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum StartSpec {
    Uniform,
    QuasiStationary,
    RestrictedPi,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanSpec {
    Default,
    Interval(f64, f64),
    PaperSimple(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Task {
    Analyze,
    Simulate { horizon: u64 },
    Rigidity { deltas: Vec<f64> },
    Thermo { horizon: u64, modes_at: Vec<u64> },
    Power { epsilon: f64, tau: Option<f64>, stopping: StoppingConfig, max_iter: usize },
    Accel { degree: usize, plan: PlanSpec, compare_plain: bool, rounds: u64 },
    Fpt { target: usize, start: StartSpec, kmax: u64 },
    Hypercube { n: usize, alphas: Vec<f64> },
}

/// Fully resolved run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: Task,
    pub source: Option<Source>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub tolerances: Tolerances,
}

fn list<T: Clone>(flag: &[T], file: &Option<Vec<T>>, default: &[T]) -> Vec<T> {
    if !flag.is_empty() {
        flag.to_vec()
    } else {
        file.clone().unwrap_or_else(|| default.to_vec())
    }
}

fn apply_tol(tol: &mut Tolerances, key: &str, value: f64) -> CliResult<()> {
    if !(value.is_finite() && value >= 0.0) {
        return Err(CliError::Config(format!("tolerance {key} must be finite and nonnegative")));
    }
    match key {
        "row_sum" => tol.row_sum = value,
        "detailed_balance" => tol.detailed_balance = value,
        "pi_floor" => tol.pi_floor = value,
        "cluster" => tol.cluster = value,
        _ => return Err(CliError::Config(format!("unknown tolerance key `{key}`"))),
    }
    Ok(())
}

fn parse_tol_flag(entry: &str) -> CliResult<(String, f64)> {
    let (key, value) = entry
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("expected key=value, got `{entry}`")))?;
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("tolerance `{key}` has non-numeric value `{value}`")))?;
    Ok((key.trim().to_string(), value))
}

fn source(args: &SourceArgs, file: &FileConfig) -> Option<Source> {
    match (&args.input, &args.preset) {
        (Some(p), _) => Some(Source::File(p.clone())),
        (None, Some(p)) => Some(Source::Preset(p.clone())),
        (None, None) => match (&file.input, &file.preset) {
            (Some(_), Some(_)) => None,
            (Some(p), None) => Some(Source::File(p.clone())),
            (None, Some(p)) => Some(Source::Preset(p.clone())),
            (None, None) => None,
        },
    }
}

fn start_spec(text: &str) -> StartSpec {
    match text {
        "uniform" => StartSpec::Uniform,
        "quasistationary" | "quasi-stationary" => StartSpec::QuasiStationary,
        "restricted-pi" | "pi" => StartSpec::RestrictedPi,
        path => StartSpec::File(PathBuf::from(path)),
    }
}

impl RunConfig {
    pub fn resolve(cli: &Cli) -> CliResult<Self> {
        let file = match &cli.global.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        if file.input.is_some() && file.preset.is_some() {
            return Err(CliError::Config("config sets both input and preset".into()));
        }
        let mut tolerances = Tolerances::default();
        for (k, v) in &file.tol {
            apply_tol(&mut tolerances, k, *v)?;
        }
        for entry in &cli.global.tol {
            let (k, v) = parse_tol_flag(entry)?;
            apply_tol(&mut tolerances, &k, v)?;
        }

        let (task, source) = match &cli.command {
            Command::Analyze { source: s } => (Task::Analyze, source(s, &file)),
            Command::Simulate { source: s, horizon } => (
                Task::Simulate {
                    horizon: horizon.or(file.horizon).unwrap_or(200),
                },
                source(s, &file),
            ),
            Command::Rigidity { source: s, delta } => (
                Task::Rigidity {
                    deltas: list(delta, &file.delta, &[0.3, 0.1, 0.01]),
                },
                source(s, &file),
            ),
            Command::Thermo {
                source: s,
                horizon,
                modes_at,
            } => (
                Task::Thermo {
                    horizon: horizon.or(file.horizon).unwrap_or(200),
                    modes_at: list(modes_at, &file.modes_at, &[]),
                },
                source(s, &file),
            ),
            Command::Power {
                source: s,
                epsilon,
                tau,
                kmin,
                max_iter,
            } => {
                let mut stopping = StoppingConfig::default();
                if let Some(k) = kmin.or(file.kmin) {
                    stopping.k_min = k;
                }
                (
                    Task::Power {
                        epsilon: epsilon.or(file.epsilon).unwrap_or(0.1),
                        tau: tau.or(file.tau),
                        stopping,
                        max_iter: max_iter.or(file.max_iter).unwrap_or(1000),
                    },
                    source(s, &file),
                )
            }
            Command::Accel {
                source: s,
                degree,
                interval,
                paper_simple,
                compare_plain,
                rounds,
            } => {
                let plan = if !interval.is_empty() {
                    match interval.as_slice() {
                        [a, b] => PlanSpec::Interval(*a, *b),
                        _ => return Err(CliError::Config("--interval takes exactly two values a,b".into())),
                    }
                } else if let Some(l) = paper_simple {
                    PlanSpec::PaperSimple(*l)
                } else {
                    match (file.interval, file.paper_simple) {
                        (Some(_), Some(_)) => {
                            return Err(CliError::Config("config sets both interval and paper_simple".into()))
                        }
                        (Some([a, b]), None) => PlanSpec::Interval(a, b),
                        (None, Some(l)) => PlanSpec::PaperSimple(l),
                        (None, None) => PlanSpec::Default,
                    }
                };
                (
                    Task::Accel {
                        degree: degree.or(file.degree).unwrap_or(4),
                        plan,
                        compare_plain: *compare_plain || file.compare_plain.unwrap_or(false),
                        rounds: rounds.or(file.rounds).unwrap_or(10),
                    },
                    source(s, &file),
                )
            }
            Command::Fpt {
                source: s,
                target,
                start,
                kmax,
            } => (
                Task::Fpt {
                    target: target.or(file.target).unwrap_or(0),
                    start: start_spec(start.as_deref().or(file.start.as_deref()).unwrap_or("restricted-pi")),
                    kmax: kmax.or(file.kmax).unwrap_or(100),
                },
                source(s, &file),
            ),
            Command::Hypercube { n, alpha } => (
                Task::Hypercube {
                    n: n.or(file.n).unwrap_or(64),
                    alphas: list(alpha, &file.alpha, &[-2.0, -1.0, 0.0, 1.0, 2.0]),
                },
                None,
            ),
        };
        if !matches!(task, Task::Hypercube { .. }) && source.is_none() {
            return Err(CliError::Config("one of --input or --preset is required".into()));
        }
        Ok(Self {
            task,
            source,
            seed: cli.global.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            out: cli.global.out.clone().or(file.out),
            format: cli.global.format.or(file.format).unwrap_or(Format::Csv),
            tolerances,
        })
    }
}
