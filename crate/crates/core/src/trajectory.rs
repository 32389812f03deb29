//! Relaxation trajectories in spectral coordinates.
//!
//! Writing `g_0 − π(g_0) = Σ c_i φ_i`, the energy of `g_k = P^k g_0` splits
//! into modal energies `n_i(k) = |c_i|² λ_i^{2k}`. A [`SpectralProfile`]
//! stores `(λ_i, ln|c_i|²)` and every step is evaluated in log-domain, so
//! `k` can run to 10⁹ without underflow. Modes with `λ_i = 0` vanish after
//! the first step and are carried as `-inf` log-energies.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::chain::{ReversibleChain, SpectralDecomposition};
use crate::error::{RelaxError, Result};
use crate::logspace::log_sum_exp;

/// Relative cutoff below which projected modes are discarded.
pub const DROP_TOL: f64 = 1e-14;

/// Modes whose `λ` lies within this distance of the top one form the slow cluster.
pub const CLUSTER_TOL: f64 = 1e-12;

/// One nontrivial eigenmode: eigenvalue and `ln|c_i|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub lambda: f64,
    pub log_weight: f64,
}

impl Mode {
    pub fn new(lambda: f64, weight: f64) -> Self {
        Self {
            lambda,
            log_weight: weight.ln(),
        }
    }

    /// `ln n_i(k)`, or `-inf` for a zero eigenvalue after step 0.
    pub fn log_energy_at(&self, k: u64) -> f64 {
        if k == 0 {
            self.log_weight
        } else if self.lambda == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.log_weight + 2.0 * (k as f64) * self.lambda.abs().ln()
        }
    }
}

/// Modal content of a centered initial condition, sorted by descending `λ`.
///
/// Index 0 is the slow mode: the mode with the largest eigenvalue (not the
/// largest modulus).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralProfile {
    modes: Vec<Mode>,
    #[serde(default)]
    dropped: usize,
    #[serde(default)]
    reference_slow_lambda: Option<f64>,
}

/// Slow/fast split of a profile used by the rigidity bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct SlowSplit {
    pub lambda2: f64,
    /// `max |λ_i|` over the fast modes, 0 when there are none.
    pub lambda3: f64,
    pub log_c2_sq: f64,
    /// `ln Σ_fast |c_i|²`, `-inf` when there are no fast modes.
    pub log_r0: f64,
    /// Fast modes whose modulus is within [`CLUSTER_TOL`] of `λ_2` or above it.
    pub cluster: Vec<usize>,
}

impl SlowSplit {
    pub fn separated(&self) -> bool {
        self.cluster.is_empty()
    }

    pub fn c2_sq(&self) -> f64 {
        self.log_c2_sq.exp()
    }

    pub fn r0(&self) -> f64 {
        self.log_r0.exp()
    }

    /// `R_0 / |c_2|²`.
    pub fn init_ratio(&self) -> f64 {
        (self.log_r0 - self.log_c2_sq).exp()
    }

    /// `max |λ_i| / λ_2` over fast modes.
    pub fn ratio(&self) -> f64 {
        self.lambda3 / self.lambda2
    }
}

impl SpectralProfile {
    pub fn new(mut modes: Vec<Mode>) -> Result<Self> {
        if modes.is_empty() {
            return Err(RelaxError::InvalidProfile("no modes".into()));
        }
        for m in &modes {
            if !m.lambda.is_finite() || m.lambda.abs() > 1.0 || m.lambda >= 1.0 {
                return Err(RelaxError::InvalidProfile(format!(
                    "eigenvalue {} outside [-1, 1)",
                    m.lambda
                )));
            }
            if !m.log_weight.is_finite() {
                return Err(RelaxError::InvalidProfile(format!(
                    "log weight {} is not finite",
                    m.log_weight
                )));
            }
        }
        modes.sort_by(|a, b| b.lambda.total_cmp(&a.lambda));
        Ok(Self {
            modes,
            dropped: 0,
            reference_slow_lambda: None,
        })
    }

    /// Builds a profile from `(λ, |c|²)` pairs with positive weights.
    pub fn from_weights(pairs: &[(f64, f64)]) -> Result<Self> {
        for &(_, w) in pairs {
            if !(w > 0.0 && w.is_finite()) {
                return Err(RelaxError::InvalidProfile(format!("weight {w} is not positive")));
            }
        }
        Self::new(pairs.iter().map(|&(l, w)| Mode::new(l, w)).collect())
    }

    pub fn from_log_weights(lambdas: &[f64], log_weights: &[f64]) -> Result<Self> {
        if lambdas.len() != log_weights.len() {
            return Err(RelaxError::DimensionMismatch {
                expected: lambdas.len(),
                got: log_weights.len(),
            });
        }
        Self::new(
            lambdas
                .iter()
                .zip(log_weights)
                .map(|(&lambda, &log_weight)| Mode { lambda, log_weight })
                .collect(),
        )
    }

    /// Records the chain's second eigenvalue so a missing slow mode can be detected.
    pub fn with_reference_slow_lambda(mut self, lambda2: f64) -> Self {
        self.reference_slow_lambda = Some(lambda2);
        self
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Number of projected modes discarded as negligible.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn reference_slow_lambda(&self) -> Option<f64> {
        self.reference_slow_lambda
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.lambda).collect()
    }

    pub fn log_weights(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.log_weight).collect()
    }

    pub fn slow(&self) -> &Mode {
        &self.modes[0]
    }

    pub fn fast(&self) -> &[Mode] {
        &self.modes[1..]
    }

    /// Fails with `NoSlowMode` when the chain's top nontrivial mode was not excited.
    pub fn check_slow_mode(&self) -> Result<()> {
        if let Some(lambda) = self.reference_slow_lambda {
            if self.modes[0].lambda < lambda - CLUSTER_TOL {
                return Err(RelaxError::NoSlowMode { lambda });
            }
        }
        Ok(())
    }

    pub fn split(&self) -> SlowSplit {
        let lambda2 = self.modes[0].lambda;
        let fast = self.fast();
        let lambda3 = fast.iter().map(|m| m.lambda.abs()).fold(0.0, f64::max);
        let log_r0 = log_sum_exp(&fast.iter().map(|m| m.log_weight).collect::<Vec<_>>());
        let cluster = fast
            .iter()
            .enumerate()
            .filter(|(_, m)| m.lambda.abs() >= lambda2 - CLUSTER_TOL)
            .map(|(i, _)| i + 1)
            .collect();
        SlowSplit {
            lambda2,
            lambda3,
            log_c2_sq: self.modes[0].log_weight,
            log_r0,
            cluster,
        }
    }

    pub fn log_energy(&self, k: u64) -> f64 {
        log_sum_exp(&self.modes.iter().map(|m| m.log_energy_at(k)).collect::<Vec<_>>())
    }

    /// Same profile with every eigenvalue replaced by `f(λ)`.
    pub fn map_lambdas(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let mut out = Self::new(
            self.modes
                .iter()
                .map(|m| Mode {
                    lambda: f(m.lambda),
                    log_weight: m.log_weight,
                })
                .collect(),
        )?;
        out.dropped = self.dropped;
        out.reference_slow_lambda = self.reference_slow_lambda.map(f);
        Ok(out)
    }
}

/// Modal state at step `k` of an active trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalLedger {
    pub k: u64,
    /// `ln n_i(k)` aligned with the profile's modes.
    pub log_modal_energies: Vec<f64>,
    pub log_e: f64,
    pub log_p: Vec<f64>,
    pub p: Vec<f64>,
    /// `ρ_k = Σ p_i λ_i² = E_{k+1}/E_k`.
    pub rho: f64,
    /// `d_k = 1 − ρ_k`, accumulated as `Σ p_i (1 − λ_i²)`.
    pub d: f64,
}

/// Either an active ledger or the terminal state reached when every mode has died.
#[derive(Debug, Clone, PartialEq)]
pub enum Ledger {
    Active(ModalLedger),
    Dead { k: u64 },
}

impl Ledger {
    pub fn active(self) -> Result<ModalLedger> {
        match self {
            Ledger::Active(l) => Ok(l),
            Ledger::Dead { k } => Err(RelaxError::DeadTrajectory { k }),
        }
    }

    pub fn is_dead(&self) -> bool {
        matches!(self, Ledger::Dead { .. })
    }
}

impl ModalLedger {
    pub fn energy(&self) -> f64 {
        self.log_e.exp()
    }

    /// Slow-mode fraction `p_0`.
    pub fn alpha2(&self) -> f64 {
        self.p[0]
    }

    /// Shannon entropy of the modal distribution in nats.
    pub fn entropy(&self) -> f64 {
        self.p
            .iter()
            .zip(&self.log_p)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, lp)| -p * lp)
            .sum()
    }

    /// `ln` of the modal entropy, accurate when the entropy is far below the
    /// smallest positive double. `-inf` for a point mass.
    pub fn log_entropy(&self) -> f64 {
        let j = self
            .log_p
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let others: Vec<f64> = self
            .log_p
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != j)
            .map(|(_, &lp)| lp)
            .collect();
        let log_f = log_sum_exp(&others);
        if log_f == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        // S = f · [g(f) + Σ q_i (−ln p_i)], with q the distribution off the dominant mode
        let f = log_f.exp();
        let g = if f < 1e-300 {
            1.0
        } else {
            -(1.0 - f) * (-f).ln_1p() / f
        };
        let tail: f64 = others
            .iter()
            .filter(|lp| **lp > f64::NEG_INFINITY)
            .map(|&lp| (lp - log_f).exp() * (-lp))
            .sum();
        log_f + (g + tail).ln()
    }
}

/// Modal ledger after `k` steps, or the terminal ledger if the energy vanished.
pub fn ledger_at(profile: &SpectralProfile, k: u64) -> Ledger {
    let log_modal_energies: Vec<f64> = profile.modes.iter().map(|m| m.log_energy_at(k)).collect();
    let log_e = log_sum_exp(&log_modal_energies);
    if log_e == f64::NEG_INFINITY {
        return Ledger::Dead { k };
    }
    let log_p: Vec<f64> = log_modal_energies.iter().map(|&l| l - log_e).collect();
    let p: Vec<f64> = log_p.iter().map(|l| l.exp()).collect();
    let mut rho = 0.0;
    let mut d = 0.0;
    for (pi, m) in p.iter().zip(&profile.modes) {
        rho += pi * m.lambda * m.lambda;
        d += pi * (1.0 - m.lambda) * (1.0 + m.lambda);
    }
    Ledger::Active(ModalLedger {
        k,
        log_modal_energies,
        log_e,
        log_p,
        p,
        rho,
        d,
    })
}

/// Active ledger at `k`, or `DeadTrajectory`.
pub fn active_ledger(profile: &SpectralProfile, k: u64) -> Result<ModalLedger> {
    ledger_at(profile, k).active()
}

/// Projects `g0` onto the nontrivial eigenvectors.
pub fn project_initial(
    decomp: &SpectralDecomposition,
    chain: &ReversibleChain,
    g0: &DVector<f64>,
) -> Result<SpectralProfile> {
    let norm_sq = chain.pi_norm_sq(g0)?;
    let centered = chain.center(g0)?;
    let centered_sq = chain.pi_norm_sq(&centered)?;
    if norm_sq == 0.0 || centered_sq <= 1e-28 * norm_sq {
        return Err(RelaxError::ZeroProjection);
    }
    let n = decomp.n();
    let coeffs: Vec<(f64, f64)> = (1..n)
        .map(|i| {
            let c = chain.pi_inner(&centered, &decomp.eigenvector(i)).unwrap_or(0.0);
            (decomp.eigenvalues()[i], c * c)
        })
        .collect();
    let e0: f64 = coeffs.iter().map(|(_, w)| w).sum();
    if e0 == 0.0 {
        return Err(RelaxError::ZeroProjection);
    }
    let kept: Vec<Mode> = coeffs
        .iter()
        .filter(|(_, w)| *w >= DROP_TOL * e0 && *w > 0.0)
        .map(|&(l, w)| Mode::new(l.clamp(-1.0, 1.0 - f64::EPSILON), w))
        .collect();
    let dropped = coeffs.len() - kept.len();
    let mut profile = SpectralProfile::new(kept)?;
    profile.dropped = dropped;
    profile.reference_slow_lambda = (n > 1).then(|| decomp.eigenvalues()[1]);
    Ok(profile)
}

/// Energy drop over one step, resolved per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct DissipationStep {
    pub k: u64,
    pub e_k: f64,
    pub e_k1: f64,
    /// `E_k − E_{k+1}` accumulated from the modewise terms.
    pub delta_e: f64,
    /// `(1 − λ_i²) n_i(k)` per mode.
    pub modewise_terms: Vec<f64>,
    /// `d_k = Σ p_i(k) (2μ_i − μ_i²)` with `μ_i = 1 − λ_i`.
    pub relative: f64,
}

pub fn dissipation_step(profile: &SpectralProfile, k: u64) -> Result<DissipationStep> {
    let ledger = active_ledger(profile, k)?;
    let modewise_terms: Vec<f64> = ledger
        .log_modal_energies
        .iter()
        .zip(&profile.modes)
        .map(|(&ln, m)| (1.0 - m.lambda) * (1.0 + m.lambda) * ln.exp())
        .collect();
    let relative = ledger
        .p
        .iter()
        .zip(&profile.modes)
        .map(|(p, m)| {
            let mu = 1.0 - m.lambda;
            p * (2.0 * mu - mu * mu)
        })
        .sum();
    let e_k1 = match ledger_at(profile, k + 1) {
        Ledger::Active(l) => l.energy(),
        Ledger::Dead { .. } => 0.0,
    };
    Ok(DissipationStep {
        k,
        e_k: ledger.energy(),
        e_k1,
        delta_e: modewise_terms.iter().sum(),
        modewise_terms,
        relative,
    })
}

/// `P g` by dense product, the brute-force reference for spectral formulas.
pub fn matrix_oracle_step(chain: &ReversibleChain, g: &DVector<f64>) -> Result<DVector<f64>> {
    chain.apply(g)
}

/// `max_i |p_i(k+1) − p_i(k) − p_i(k)(λ_i² − ρ_k)/ρ_k|`.
pub fn transport_residual(profile: &SpectralProfile, k: u64) -> Result<f64> {
    let now = active_ledger(profile, k)?;
    let next = active_ledger(profile, k + 1)?;
    Ok(profile
        .modes
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let predicted = now.p[i] * (m.lambda * m.lambda - now.rho) / now.rho;
            (next.p[i] - now.p[i] - predicted).abs()
        })
        .fold(0.0, f64::max))
}
