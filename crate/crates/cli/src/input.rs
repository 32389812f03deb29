//! Chains, profiles and presets.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use spectral_relax::trajectory::project_initial;
use spectral_relax::zoo::{
    barbell_metastable, complete_graph, cycle_graph, random_observable, synthetic_chain, synthetic_profile,
};
use spectral_relax::{build_chain, spectral_decomposition, ReversibleChain, SpectralProfile, Tolerances};

use crate::config::Source;
use crate::error::{CliError, CliResult};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainFile {
    kernel: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    eigenvalues: Vec<f64>,
    log_weights: Vec<f64>,
}

/// What an input resolves to before a command asks for a chain or a profile.
#[derive(Debug, Clone)]
pub enum Loaded {
    /// A chain and the observable to evolve on it.
    Chain { chain: ReversibleChain, g0: DVector<f64> },
    Profile(SpectralProfile),
    /// The synthetic 50-mode example; its profile needs no realized chain.
    PaperS8 { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Preset {
    PaperS8,
    Complete(usize),
    Cycle(usize),
    Barbell,
}

impl Preset {
    pub fn parse(name: &str) -> CliResult<Self> {
        let bad = || CliError::Config(format!("unknown preset `{name}`"));
        if name == "paper-s8" {
            return Ok(Preset::PaperS8);
        }
        if name == "barbell-metastable" {
            return Ok(Preset::Barbell);
        }
        if let Some(n) = name.strip_prefix("cycle-") {
            return n.parse().map(Preset::Cycle).map_err(|_| bad());
        }
        if let Some(n) = name.strip_prefix('k') {
            return n.parse().map(Preset::Complete).map_err(|_| bad());
        }
        Err(bad())
    }
}

fn seeded_observable(chain: &ReversibleChain, seed: u64) -> DVector<f64> {
    random_observable(chain.n(), &mut ChaCha8Rng::seed_from_u64(seed))
}

fn with_observable(chain: ReversibleChain, seed: u64) -> Loaded {
    let g0 = seeded_observable(&chain, seed);
    Loaded::Chain { chain, g0 }
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn chain_from_rows(rows: Vec<Vec<f64>>, tol: &Tolerances) -> CliResult<ReversibleChain> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Config("kernel must be a nonempty square matrix".into()));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(build_chain(DMatrix::from_row_slice(n, n, &flat), tol)?)
}

fn parse_csv_kernel(text: &str) -> CliResult<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| CliError::Config(format!("kernel entry `{f}` is not a number")))
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Reads a chain or profile file, or builds a preset.
pub fn load(source: &Source, tol: &Tolerances, seed: u64) -> CliResult<Loaded> {
    match source {
        Source::Preset(name) => Ok(match Preset::parse(name)? {
            Preset::PaperS8 => Loaded::PaperS8 { seed },
            Preset::Complete(n) => with_observable(complete_graph(n)?, seed),
            Preset::Cycle(n) => with_observable(cycle_graph(n)?, seed),
            Preset::Barbell => with_observable(barbell_metastable(), seed),
        }),
        Source::File(path) => {
            let text = read(path)?;
            let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
            if is_csv {
                let chain = chain_from_rows(parse_csv_kernel(&text)?, tol)?;
                return Ok(with_observable(chain, seed));
            }
            let value: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let bad = |e: serde_json::Error| CliError::Config(format!("{}: {e}", path.display()));
            if value.get("kernel").is_some() {
                let file: ChainFile = serde_json::from_value(value).map_err(bad)?;
                Ok(with_observable(chain_from_rows(file.kernel, tol)?, seed))
            } else if value.get("eigenvalues").is_some() {
                let file: ProfileFile = serde_json::from_value(value).map_err(bad)?;
                Ok(Loaded::Profile(SpectralProfile::from_log_weights(
                    &file.eigenvalues,
                    &file.log_weights,
                )?))
            } else {
                Err(CliError::Config(format!(
                    "{}: expected a `kernel` or an `eigenvalues` key",
                    path.display()
                )))
            }
        }
    }
}

impl Loaded {
    /// Modal profile of the observable, projecting onto the eigenbasis if needed.
    pub fn profile(&self) -> CliResult<SpectralProfile> {
        match self {
            Loaded::Profile(p) => Ok(p.clone()),
            Loaded::PaperS8 { seed } => Ok(synthetic_profile(*seed)),
            Loaded::Chain { chain, g0 } => {
                let decomp = spectral_decomposition(chain)?;
                Ok(project_initial(&decomp, chain, g0)?)
            }
        }
    }

    /// The chain and observable; profile inputs have no chain.
    pub fn chain(&self, command: &str) -> CliResult<(ReversibleChain, DVector<f64>)> {
        match self {
            Loaded::Chain { chain, g0 } => Ok((chain.clone(), g0.clone())),
            Loaded::PaperS8 { seed } => Ok(synthetic_chain(*seed)?),
            Loaded::Profile(_) => Err(CliError::Config(format!(
                "`{command}` needs a chain, not a spectral profile"
            ))),
        }
    }
}
