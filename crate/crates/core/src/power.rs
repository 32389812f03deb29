//! Power iteration with observable convergence certificates.
//!
//! The normalized iterate `v_k = g_k/‖g_k‖_π` satisfies
//! `‖v_k − s₂φ₂‖²_π = 2(1 − √α₂(k))`, and the energy ratios `ρ_k` alone
//! reveal the modal variance `V̂_k = ρ_k(ρ_{k+1} − ρ_k)`. The stopping rule
//! compares `Γ_k = ρ_{k+1}/ρ_k − 1` against `η(ε) = τ²ε⁴/8`, where `τ`
//! lower-bounds `1 − (λ₃/λ₂)²`. No rule that only sees the energy sequence
//! can certify the error with substantially fewer steps, so the threshold
//! is not tuned further.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::chain::ReversibleChain;
use crate::error::{RelaxError, Result};

/// Matrix-path power iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerRun {
    /// `ln E_k` for `k = 0..=steps`.
    pub log_e: Vec<f64>,
    /// `ρ_k = E_{k+1}/E_k` for `k = 0..steps`.
    pub rho: Vec<f64>,
    iterates: Vec<DVector<f64>>,
}

impl PowerRun {
    pub fn steps(&self) -> usize {
        self.rho.len()
    }

    /// `v_k`, unit π-norm.
    pub fn iterate(&self, k: usize) -> Option<&DVector<f64>> {
        self.iterates.get(k)
    }

    pub fn energies(&self) -> Vec<f64> {
        self.log_e.iter().map(|l| l.exp()).collect()
    }
}

/// Iterates `g ← P g` from the centered `g0`, renormalizing every step and
/// removing the stationary component that roundoff reintroduces.
///
/// Stops early if the iterate vanishes exactly.
pub fn run_power(chain: &ReversibleChain, g0: &DVector<f64>, max_iter: usize) -> Result<PowerRun> {
    let norm0 = chain.pi_norm_sq(g0)?;
    let centered = chain.center(g0)?;
    let e0 = chain.pi_norm_sq(&centered)?;
    if norm0 == 0.0 || e0 <= 1e-28 * norm0 {
        return Err(RelaxError::ZeroProjection);
    }
    let mut log_e = vec![e0.ln()];
    let mut rho = Vec::with_capacity(max_iter);
    let mut v = centered / e0.sqrt();
    let mut iterates = vec![v.clone()];
    for _ in 0..max_iter {
        let w = chain.center(&(chain.kernel() * &v))?;
        let s = chain.pi_norm_sq(&w)?;
        if s == 0.0 {
            break;
        }
        rho.push(s);
        log_e.push(log_e.last().copied().unwrap_or(0.0) + s.ln());
        v = w / s.sqrt();
        iterates.push(v.clone());
    }
    Ok(PowerRun {
        log_e,
        rho,
        iterates,
    })
}

/// `‖v_k − s₂φ₂‖²_π = 2(1 − √α₂)`.
pub fn error_identity(alpha2: f64) -> Result<f64> {
    if !(alpha2 > 0.0 && alpha2 <= 1.0) {
        return Err(RelaxError::OutOfRange {
            value: alpha2,
            range: "(0, 1]",
        });
    }
    Ok(2.0 * (1.0 - alpha2.sqrt()))
}

/// Squared π-distance from `v` to `±φ₂`, the sign taken from `⟨v, φ₂⟩_π`.
pub fn eigenvector_error_sq(chain: &ReversibleChain, v: &DVector<f64>, phi2: &DVector<f64>) -> Result<f64> {
    let s = chain.pi_inner(v, phi2)?.signum();
    chain.pi_norm_sq(&(v - phi2 * s))
}

const RHO_SLACK: f64 = 1e-12;

fn check_rho(rho_k: f64, rho_k1: f64) -> Result<()> {
    let ok = rho_k > 0.0 && rho_k1 <= 1.0 && rho_k1 >= rho_k - RHO_SLACK && rho_k.is_finite() && rho_k1.is_finite();
    if ok {
        Ok(())
    } else {
        Err(RelaxError::InvalidRho { rho_k, rho_k1 })
    }
}

/// `V̂_k = ρ_k(ρ_{k+1} − ρ_k)`, clamped at 0.
pub fn observable_variance(rho_k: f64, rho_k1: f64) -> Result<f64> {
    check_rho(rho_k, rho_k1)?;
    Ok((rho_k * (rho_k1 - rho_k)).max(0.0))
}

/// `Γ_k = ρ_{k+1}/ρ_k − 1`, clamped at 0.
pub fn gamma(rho_k: f64, rho_k1: f64) -> Result<f64> {
    check_rho(rho_k, rho_k1)?;
    Ok((rho_k1 / rho_k - 1.0).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaBounds {
    /// `V̂/λ₂⁴ ≤ 1 − α₂`.
    pub lower: f64,
    /// `1 − α₂ ≤ 2V̂/(λ₂² − λ₃²)²`, valid once `α₂ ≥ ½`.
    pub upper_if_majority: f64,
    /// Roots of `a(1 − a)(λ₂² − λ₃²)² = V̂`; `1 − α₂` lies outside
    /// `(small_root, 1 − small_root)` by the lower variance bound.
    pub small_root: Option<f64>,
}

/// Brackets `1 − α₂` from the observable variance.
pub fn alpha_bounds_from_variance(vhat: f64, lambda2: f64, lambda3: f64) -> Result<AlphaBounds> {
    let l3 = lambda3.abs();
    if !(lambda2 > l3) {
        return Err(RelaxError::Degenerate(format!(
            "need lambda2 > |lambda3| (got {lambda2}, {lambda3})"
        )));
    }
    if !(vhat >= 0.0) {
        return Err(RelaxError::InvalidArguments(format!("vhat = {vhat}")));
    }
    let gap = lambda2 * lambda2 - l3 * l3;
    let c = vhat / (gap * gap);
    let small_root = (c <= 0.25).then(|| 0.5 - (0.25 - c).sqrt());
    Ok(AlphaBounds {
        lower: vhat / lambda2.powi(4),
        upper_if_majority: 2.0 * c,
        small_root,
    })
}

/// Tunables of the adaptive stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StoppingConfig {
    /// Earliest step at which a stop is allowed.
    pub k_min: usize,
    /// Steps before the online estimate of τ is trusted.
    pub burn_in: usize,
    /// Floor applied to the online estimate.
    pub tau_min: f64,
    /// Estimates freeze once `V̂_k < freeze_rel · ρ_k²`.
    pub freeze_rel: f64,
    /// Require Γ to have decreased on each of the last three steps.
    pub guard: bool,
    /// Consecutive sub-floor raw estimates tolerated before reporting collapse.
    pub collapse_patience: usize,
}

impl Default for StoppingConfig {
    fn default() -> Self {
        Self {
            k_min: 3,
            burn_in: 5,
            tau_min: 1e-3,
            freeze_rel: 1e-13,
            guard: false,
            collapse_patience: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Verdict {
    Running,
    Stopped { k: usize, gamma: f64, eta: f64, tau: f64 },
    Failed { k: usize, tau_hat: f64 },
}

/// Streaming state of the stopping rule; feed `ρ_0, ρ_1, …` with [`StoppingState::push`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoppingState {
    pub rho_history: Vec<f64>,
    pub vhat_history: Vec<f64>,
    pub gamma_history: Vec<f64>,
    /// `τ̂_k = 1 − √(V̂_{k+1}/V̂_k)` (unfloored), aligned with `k`; `None`
    /// during burn-in or after freezing.
    pub tau_hat_history: Vec<Option<f64>>,
    pub tau: Option<f64>,
    pub tau_hat: Option<f64>,
    pub epsilon: f64,
    pub verdict: Verdict,
    pub config: StoppingConfig,
    frozen: bool,
    low_streak: usize,
}

/// `η(ε) = τ²ε⁴/8`.
pub fn eta(tau: f64, epsilon: f64) -> f64 {
    tau * tau * epsilon.powi(4) / 8.0
}

impl StoppingState {
    pub fn new(epsilon: f64, tau: Option<f64>, config: StoppingConfig) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(RelaxError::OutOfRange {
                value: epsilon,
                range: "(0, 1]",
            });
        }
        if let Some(t) = tau {
            if !(t > 0.0 && t <= 1.0) {
                return Err(RelaxError::OutOfRange {
                    value: t,
                    range: "(0, 1]",
                });
            }
        }
        Ok(Self {
            rho_history: Vec::new(),
            vhat_history: Vec::new(),
            gamma_history: Vec::new(),
            tau_hat_history: Vec::new(),
            tau,
            tau_hat: None,
            epsilon,
            verdict: Verdict::Running,
            config,
            frozen: false,
            low_streak: 0,
        })
    }

    /// τ used by the threshold: the given value, or the floored online estimate.
    pub fn tau_used(&self) -> f64 {
        self.tau
            .unwrap_or_else(|| self.tau_hat.unwrap_or(self.config.tau_min).max(self.config.tau_min))
    }

    pub fn eta(&self) -> f64 {
        eta(self.tau_used(), self.epsilon)
    }

    /// Consumes `ρ_j`. Once `ρ_{k+1}` is known, `Γ_k` is formed and tested.
    pub fn push(&mut self, rho: f64) -> Result<Verdict> {
        if self.verdict != Verdict::Running {
            return Ok(self.verdict);
        }
        if let Some(&prev) = self.rho_history.last() {
            check_rho(prev, rho)?;
        } else if !(rho > 0.0 && rho <= 1.0) {
            return Err(RelaxError::InvalidRho {
                rho_k: rho,
                rho_k1: f64::NAN,
            });
        }
        self.rho_history.push(rho);
        let n = self.rho_history.len();
        if n < 2 {
            return Ok(self.verdict);
        }
        let k = n - 2;
        let rho_k = self.rho_history[k];
        let vhat = observable_variance(rho_k, rho)?;
        let g = gamma(rho_k, rho)?;
        self.vhat_history.push(vhat);
        self.gamma_history.push(g);

        if self.tau.is_none() {
            self.update_tau_hat(k, rho_k)?;
        }

        let guard_ok = !self.config.guard
            || (k >= 3 && self.gamma_history[k - 3..=k].windows(2).all(|w| w[1] < w[0]));
        let threshold = self.eta();
        if k >= self.config.k_min && guard_ok && g <= threshold {
            self.verdict = Verdict::Stopped {
                k,
                gamma: g,
                eta: threshold,
                tau: self.tau_used(),
            };
        }
        Ok(self.verdict)
    }

    fn update_tau_hat(&mut self, k: usize, rho_k: f64) -> Result<()> {
        if self.vhat_history[k] < self.config.freeze_rel * rho_k * rho_k {
            self.frozen = true;
        }
        if k == 0 {
            return Ok(());
        }
        let j = k - 1;
        if j < self.config.burn_in || self.frozen || self.vhat_history[j] <= 0.0 {
            self.tau_hat_history.push(None);
            return Ok(());
        }
        let raw = 1.0 - (self.vhat_history[k] / self.vhat_history[j]).sqrt();
        self.tau_hat_history.push(Some(raw));
        self.tau_hat = Some(raw);
        if raw < self.config.tau_min {
            self.low_streak += 1;
            if self.low_streak >= self.config.collapse_patience {
                self.verdict = Verdict::Failed { k: j, tau_hat: raw };
                return Err(RelaxError::TauCollapse { k: j, tau_hat: raw });
            }
        } else {
            self.low_streak = 0;
        }
        Ok(())
    }

    pub fn stopped_at(&self) -> Option<usize> {
        match self.verdict {
            Verdict::Stopped { k, .. } => Some(k),
            _ => None,
        }
    }
}

/// Runs the stopping rule over a finite `ρ` stream.
pub fn adaptive_stop(
    rhos: impl IntoIterator<Item = f64>,
    epsilon: f64,
    tau: Option<f64>,
    config: StoppingConfig,
) -> Result<StoppingState> {
    let mut state = StoppingState::new(epsilon, tau, config)?;
    for rho in rhos {
        match state.push(rho)? {
            Verdict::Stopped { .. } => return Ok(state),
            Verdict::Failed { k, tau_hat } => return Err(RelaxError::TauCollapse { k, tau_hat }),
            Verdict::Running => {}
        }
    }
    Err(RelaxError::StreamEnded {
        steps: state.rho_history.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::spectral_decomposition;
    use crate::trajectory::{active_ledger, project_initial, SpectralProfile};
    use crate::zoo;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn error_identity_examples() {
        assert_eq!(error_identity(1.0).unwrap(), 0.0);
        assert_eq!(error_identity(0.25).unwrap(), 1.0);
        assert!(error_identity(0.0).is_err());
        assert!(error_identity(1.1).is_err());
    }

    #[test]
    fn eigenvector_start_stays_put() {
        let chain = zoo::random_reversible_chain(12, 0.5, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let d = spectral_decomposition(&chain).unwrap();
        let phi2 = d.eigenvector(1);
        let run = run_power(&chain, &phi2, 20).unwrap();
        let l2 = d.eigenvalues()[1];
        for k in 0..20 {
            assert_abs_diff_eq!(run.rho[k], l2 * l2, epsilon = 1e-12);
            assert!(eigenvector_error_sq(&chain, run.iterate(k).unwrap(), &phi2).unwrap() < 1e-18);
        }
    }

    #[test]
    fn two_eigenvector_start_matches_moments() {
        let chain = zoo::random_reversible_chain(10, 0.5, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let d = spectral_decomposition(&chain).unwrap();
        let g = d.eigenvector(1) + d.eigenvector(2);
        let run = run_power(&chain, &g, 5).unwrap();
        let (l2, l3) = (d.eigenvalues()[1], d.eigenvalues()[2]);
        assert_abs_diff_eq!(run.rho[0], 0.5 * (l2 * l2 + l3 * l3), epsilon = 1e-12);
        let expected = (l2.powi(4) + l3.powi(4)) / (l2 * l2 + l3 * l3);
        assert_abs_diff_eq!(run.rho[1], expected, epsilon = 1e-12);
        let profile = project_initial(&d, &chain, &g).unwrap();
        for k in 0..5 {
            assert_abs_diff_eq!(run.rho[k], active_ledger(&profile, k as u64).unwrap().rho, epsilon = 1e-12);
        }
    }

    #[test]
    fn variance_hand_case() {
        let p = SpectralProfile::from_weights(&[(0.9, 1.0), (0.1, 1.0)]).unwrap();
        let r0 = active_ledger(&p, 0).unwrap().rho;
        let r1 = active_ledger(&p, 1).unwrap().rho;
        assert_abs_diff_eq!(r0, 0.41, epsilon = 1e-15);
        assert_abs_diff_eq!(r1, 0.6562 / 0.82, epsilon = 1e-15);
        assert_abs_diff_eq!(observable_variance(r0, r1).unwrap(), 0.16, epsilon = 1e-15);
        assert_eq!(observable_variance(0.81, 0.81).unwrap(), 0.0);
        assert_eq!(gamma(0.81, 0.81).unwrap(), 0.0);
        assert!(observable_variance(0.5, 0.4).is_err());
        assert!(observable_variance(0.0, 0.4).is_err());
    }

    #[test]
    fn variance_bounds_bracket_alpha() {
        // α₂ = 0.75 on (0.9, 0.1)
        let p = SpectralProfile::from_weights(&[(0.9, 3.0), (0.1, 1.0)]).unwrap();
        let l0 = active_ledger(&p, 0).unwrap();
        let l1 = active_ledger(&p, 1).unwrap();
        assert_abs_diff_eq!(l0.alpha2(), 0.75, epsilon = 1e-15);
        let v = observable_variance(l0.rho, l1.rho).unwrap();
        let gap: f64 = 0.81 - 0.01;
        assert!(0.75 * 0.25 * gap * gap <= v + 1e-15);
        assert!(v <= 0.25 * 0.9f64.powi(4) + 1e-15);
        let b = alpha_bounds_from_variance(v, 0.9, 0.1).unwrap();
        assert!(b.upper_if_majority >= 0.25);
        assert!(b.lower <= 0.25);
        assert_eq!(alpha_bounds_from_variance(0.0, 0.9, 0.1).unwrap().upper_if_majority, 0.0);
        assert!(alpha_bounds_from_variance(0.1, 0.5, 0.5).is_err());
    }

    #[test]
    fn rigid_stream_stops_at_kmin() {
        let s = adaptive_stop(std::iter::repeat_n(0.64, 10), 0.1, Some(0.5), StoppingConfig::default()).unwrap();
        assert_eq!(s.stopped_at(), Some(3));
        assert_eq!(s.gamma_history[3], 0.0);
    }

    #[test]
    fn stream_can_end() {
        let rhos = [0.3, 0.5, 0.6, 0.62];
        assert_eq!(
            adaptive_stop(rhos, 0.1, Some(0.5), StoppingConfig::default()).unwrap_err(),
            RelaxError::StreamEnded { steps: 4 }
        );
    }

    #[test]
    fn stopping_state_validates_inputs() {
        assert!(StoppingState::new(0.0, None, StoppingConfig::default()).is_err());
        assert!(StoppingState::new(0.1, Some(1.5), StoppingConfig::default()).is_err());
        let mut s = StoppingState::new(0.1, None, StoppingConfig::default()).unwrap();
        s.push(0.5).unwrap();
        assert!(s.push(0.2).is_err());
    }

    #[test]
    fn online_tau_collapse_is_reported() {
        // two modes with nearly equal moduli: V̂ barely decays
        let p = SpectralProfile::from_weights(&[(0.9, 1.0), (0.89999, 1.0)]).unwrap();
        let rhos: Vec<f64> = (0..200).map(|k| active_ledger(&p, k).unwrap().rho).collect();
        let err = adaptive_stop(rhos, 0.1, None, StoppingConfig::default()).unwrap_err();
        assert!(matches!(err, RelaxError::TauCollapse { .. }), "{err:?}");
    }
}
