//! Entropy bookkeeping for the modal distribution `p_k`.
//!
//! The modal distribution evolves by the exact transport rule
//! `p_i(k+1) = p_i(k) λ_i² / ρ_k`, which yields closed identities for the
//! entropy change, a flux-force form of the driving covariance, and a
//! monotone quantity `G = E·S`. All logarithms are natural.

use serde::{Deserialize, Serialize};

use crate::error::{RelaxError, Result};
use crate::logspace::{binary_entropy, log_sum_exp, neg_x_ln_x};
use crate::rigidity::{crossing, rigidity_time_upto_half, RigidityOutcome};
use crate::trajectory::{active_ledger, ledger_at, Ledger, ModalLedger, SpectralProfile, CLUSTER_TOL};

/// Shannon entropy `−Σ p ln p` of a probability vector.
pub fn spectral_entropy(p: &[f64]) -> Result<f64> {
    if p.is_empty() {
        return Err(RelaxError::NotADistribution("empty vector".into()));
    }
    if let Some(x) = p.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
        return Err(RelaxError::NotADistribution(format!("entry {x}")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(RelaxError::NotADistribution(format!("sums to {total}")));
    }
    Ok(p.iter().map(|&x| neg_x_ln_x(x)).sum())
}

/// `D_KL(next ‖ now)`, skipping modes that are empty at `next`.
fn kl(now: &ModalLedger, next: &ModalLedger) -> f64 {
    next.p
        .iter()
        .zip(next.log_p.iter().zip(&now.log_p))
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, (ln_next, ln_now))| p * (ln_next - ln_now))
        .sum()
}

/// Per-mode flux `J_i = p_i(ρ − λ_i²)` and affinity `A_i = ln(n_i/n_2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluxForce {
    pub index: usize,
    pub flux: f64,
    pub affinity: f64,
    pub product: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceReport {
    /// Canonical form `(1/E) Σ_fast n_i(ρ − λ_i²) ln(n_i/n_2)`.
    pub cov: f64,
    /// Moment form `−Σ p_i(λ_i² − ρ) ln p_i`.
    pub cov_moment: f64,
    /// `Σ J_i A_i`.
    pub cov_flux_force: f64,
    /// `ln(1 − α₂)`; the covariance equals `exp(log_fast_mass)·scaled_cov`.
    pub log_fast_mass: f64,
    /// Canonical sum taken under the conditional fast distribution, so its
    /// sign survives when the covariance itself underflows.
    pub scaled_cov: f64,
    pub terms: Vec<FluxForce>,
}

impl CovarianceReport {
    /// Largest pairwise gap between the three evaluations, relative to the
    /// magnitude of the summed terms.
    pub fn agreement(&self) -> f64 {
        let scale = self
            .terms
            .iter()
            .map(|t| t.product.abs())
            .sum::<f64>()
            .max(self.cov.abs())
            .max(f64::MIN_POSITIVE);
        let a = (self.cov - self.cov_moment).abs();
        let b = (self.cov - self.cov_flux_force).abs();
        let c = (self.cov_moment - self.cov_flux_force).abs();
        a.max(b).max(c) / scale
    }
}

fn covariance_from_ledger(profile: &SpectralProfile, l: &ModalLedger) -> CovarianceReport {
    let modes = profile.modes();
    let ln_p2 = l.log_p[0];
    let mut terms = Vec::new();
    let mut cov = 0.0;
    let mut moment = 0.0;
    let mut flux_force = 0.0;
    for (i, m) in modes.iter().enumerate() {
        if l.p[i] == 0.0 {
            continue;
        }
        let l2 = m.lambda * m.lambda;
        moment -= l.p[i] * (l2 - l.rho) * l.log_p[i];
        if i == 0 {
            continue;
        }
        let affinity = l.log_modal_energies[i] - l.log_modal_energies[0];
        let flux = l.p[i] * (l.rho - l2);
        let product = flux * affinity;
        // (1/E) n_i (ρ − λ²) ln(n_i/n_2), with n_i/E = p_i
        cov += l.p[i] * (l.rho - l2) * (l.log_p[i] - ln_p2);
        flux_force += product;
        terms.push(FluxForce {
            index: i,
            flux,
            affinity,
            product,
        });
    }
    let fast: Vec<f64> = l.log_p[1..].to_vec();
    let log_fast_mass = log_sum_exp(&fast);
    let scaled_cov = if log_fast_mass == f64::NEG_INFINITY {
        0.0
    } else {
        modes[1..]
            .iter()
            .zip(&l.log_p[1..])
            .filter(|(_, lp)| **lp > f64::NEG_INFINITY)
            .map(|(m, &lp)| (lp - log_fast_mass).exp() * (l.rho - m.lambda * m.lambda) * (lp - ln_p2))
            .sum()
    };
    CovarianceReport {
        cov,
        cov_moment: moment,
        cov_flux_force: flux_force,
        log_fast_mass,
        scaled_cov,
        terms,
    }
}

/// `Cov_{p_k}(λ², ln(1/p_k))` in its three equivalent forms.
pub fn canonical_covariance(profile: &SpectralProfile, k: u64) -> Result<CovarianceReport> {
    profile.check_slow_mode()?;
    let l = active_ledger(profile, k)?;
    if l.p[0] == 0.0 {
        return Err(RelaxError::DeadMode { index: 0, k });
    }
    Ok(covariance_from_ledger(profile, &l))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyBalance {
    pub s_k: f64,
    pub s_k1: f64,
    /// `S(k+1) − S(k)`.
    pub ds: f64,
    pub cov: f64,
    pub rho: f64,
    pub cov_over_rho: f64,
    /// `D_KL(p_{k+1} ‖ p_k)`.
    pub kl: f64,
    /// `|dS − Cov/ρ + KL|`.
    pub residual: f64,
}

/// Entropy change `dS = Cov/ρ − KL`, each term computed independently.
pub fn entropy_balance(profile: &SpectralProfile, k: u64) -> Result<EntropyBalance> {
    let now = active_ledger(profile, k)?;
    let next = active_ledger(profile, k + 1)?;
    let cov = if now.p[0] > 0.0 {
        covariance_from_ledger(profile, &now).cov
    } else {
        now.p
            .iter()
            .zip(profile.modes())
            .zip(&now.log_p)
            .filter(|((p, _), _)| **p > 0.0)
            .map(|((p, m), lp)| -p * (m.lambda * m.lambda - now.rho) * lp)
            .sum()
    };
    let s_k = now.entropy();
    let s_k1 = next.entropy();
    let kl = kl(&now, &next);
    let ds = s_k1 - s_k;
    let cov_over_rho = cov / now.rho;
    Ok(EntropyBalance {
        s_k,
        s_k1,
        ds,
        cov,
        rho: now.rho,
        cov_over_rho,
        kl,
        residual: (ds - cov_over_rho + kl).abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoModeTransition {
    /// First integer step with `α₂ ≥ ½`.
    pub k_star: u64,
    /// Real solution of `(λ₂/|λ_j|)^{2k} = w_j/w_2` (may be negative).
    pub k_crossing: f64,
    /// Entropy of the interpolated two-mode distribution at `k_crossing`.
    pub entropy_at_crossing: f64,
    pub alpha_at_crossing: f64,
}

/// Transition of a two-mode trajectory through `α₂ = ½`.
pub fn two_mode_transition(lambda2: f64, lambdaj: f64, w2: f64, wj: f64) -> Result<TwoModeTransition> {
    if !(w2 > 0.0 && wj > 0.0 && w2.is_finite() && wj.is_finite()) {
        return Err(RelaxError::InvalidArguments("weights must be positive".into()));
    }
    let lj = lambdaj.abs();
    if !(lambda2 < 1.0 && lj > 0.0 && lambda2 >= lj - CLUSTER_TOL) {
        return Err(RelaxError::InvalidArguments(format!(
            "need 1 > lambda2 > |lambdaj| > 0 (got {lambda2}, {lambdaj})"
        )));
    }
    if (lambda2 - lj).abs() <= CLUSTER_TOL {
        return Err(RelaxError::Degenerate(format!("lambda2 = |lambdaj| = {lj}")));
    }
    let profile = SpectralProfile::from_weights(&[(lambda2, w2), (lambdaj, wj)])?;
    let k_star = match rigidity_time_upto_half(&profile, 0.5)?.outcome {
        RigidityOutcome::Reached(k) => k,
        other => {
            return Err(RelaxError::NonConvergent(format!(
                "two-mode scan ended with {other:?}"
            )))
        }
    };
    let log_gap = 2.0 * (lambda2 / lj).ln();
    let k_crossing = (wj / w2).ln() / log_gap;
    // logit of α at real time t: ln(w2/wj) + t·2 ln(λ₂/|λ_j|)
    let logit = (w2 / wj).ln() + k_crossing * log_gap;
    let alpha = 1.0 / (1.0 + (-logit).exp());
    Ok(TwoModeTransition {
        k_star,
        k_crossing,
        entropy_at_crossing: binary_entropy(alpha),
        alpha_at_crossing: alpha,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralThreshold {
    /// `δ* = 1 − max(½, λ₃²/λ₂²)`.
    pub delta_star: f64,
    pub t_threshold: u64,
}

/// Threshold past which the entropy decreases monotonically.
pub fn general_threshold(profile: &SpectralProfile) -> Result<GeneralThreshold> {
    let split = profile.split();
    if !split.separated() {
        return Err(RelaxError::Degenerate(format!(
            "fast modulus {} is not below lambda2 = {}",
            split.lambda3, split.lambda2
        )));
    }
    let r = split.lambda3 / split.lambda2;
    let delta_star = 1.0 - (r * r).max(0.5);
    let report = rigidity_time_upto_half(profile, delta_star)?;
    let t_threshold = report.t_rigid().ok_or_else(|| {
        RelaxError::NonConvergent(format!("threshold not reached: {:?}", report.outcome))
    })?;
    Ok(GeneralThreshold {
        delta_star,
        t_threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClausiusReport {
    /// `Σ_k D_KL(p_{k+1} ‖ p_k)`.
    pub lhs: f64,
    /// `S(0) + Σ_k Cov_k/ρ_k`.
    pub rhs: f64,
    pub residual: f64,
    pub steps_used: u64,
    /// Entropy left at truncation; bounds the residual.
    pub final_entropy: f64,
    pub converged: bool,
}

/// Accumulates both sides of `Σ KL = S(0) + Σ Cov/ρ` until the entropy falls
/// below `tolerance` or `cap` steps have been taken.
pub fn clausius_check(profile: &SpectralProfile, tolerance: f64, cap: u64) -> Result<ClausiusReport> {
    let split = profile.split();
    if !split.separated() {
        return Err(RelaxError::NonConvergent(
            "degenerate slow cluster keeps the entropy positive".into(),
        ));
    }
    let mut now = active_ledger(profile, 0)?;
    let s0 = now.entropy();
    let mut lhs = 0.0;
    let mut cov_sum = 0.0;
    let mut k = 0u64;
    let mut s = s0;
    while s >= tolerance && k < cap {
        let next = match ledger_at(profile, k + 1) {
            Ledger::Active(l) => l,
            Ledger::Dead { k } => return Err(RelaxError::DeadTrajectory { k }),
        };
        lhs += kl(&now, &next);
        cov_sum += covariance_from_ledger(profile, &now).cov / now.rho;
        now = next;
        k += 1;
        s = now.entropy();
    }
    let rhs = s0 + cov_sum;
    Ok(ClausiusReport {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        steps_used: k,
        final_entropy: s,
        converged: s < tolerance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GStep {
    pub g_k: f64,
    pub g_k1: f64,
    /// `Σ n_i(1 − λ_i²)(−ln p_i)`.
    pub a: f64,
    /// `Σ λ_i² n_i ln λ_i² − E_{k+1} ln ρ_k`.
    pub b: f64,
    /// `E_k(1 − S(k))`, which is not monotone.
    pub f_k: f64,
    pub f_k1: f64,
}

impl GStep {
    /// `|G_k − G_{k+1} − A − B|` relative to `G_k`.
    pub fn relative_residual(&self) -> f64 {
        let scale = self.g_k.abs().max(f64::MIN_POSITIVE);
        (self.g_k - self.g_k1 - self.a - self.b).abs() / scale
    }
}

/// One step of the entropy-energy `G = E·S` with its two nonnegative parts.
pub fn g_step(profile: &SpectralProfile, k: u64) -> Result<GStep> {
    let now = active_ledger(profile, k)?;
    let next = active_ledger(profile, k + 1)?;
    let e_k = now.energy();
    let e_k1 = next.energy();
    let s_k = now.entropy();
    let s_k1 = next.entropy();
    let mut a = 0.0;
    let mut moment = 0.0;
    for (i, m) in profile.modes().iter().enumerate() {
        if now.p[i] == 0.0 {
            continue;
        }
        let n = now.log_modal_energies[i].exp();
        let l2 = m.lambda * m.lambda;
        a += n * (1.0 - m.lambda) * (1.0 + m.lambda) * (-now.log_p[i]);
        if l2 > 0.0 {
            moment += l2 * n * l2.ln();
        }
    }
    let b = moment - e_k1 * now.rho.ln();
    Ok(GStep {
        g_k: e_k * s_k,
        g_k1: e_k1 * s_k1,
        a,
        b,
        f_k: e_k * (1.0 - s_k),
        f_k1: e_k1 * (1.0 - s_k1),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyDecomposition {
    pub alpha2: f64,
    /// `H(α₂)`.
    pub h_binary: f64,
    /// Entropy of the fast modes conditioned on being fast; 0 when `α₂ = 1`.
    pub h_fast: f64,
    pub s_spec: f64,
}

/// `S = H(α₂) + (1 − α₂) H(q)`.
pub fn entropy_decomposition(profile: &SpectralProfile, k: u64) -> Result<EntropyDecomposition> {
    let l = active_ledger(profile, k)?;
    let alpha2 = l.alpha2();
    let log_fast = log_sum_exp(&l.log_p[1..]);
    let h_fast = if log_fast == f64::NEG_INFINITY {
        0.0
    } else {
        l.log_p[1..]
            .iter()
            .filter(|lp| **lp > f64::NEG_INFINITY)
            .map(|&lp| {
                let lq = lp - log_fast;
                -lq.exp() * lq
            })
            .sum()
    };
    Ok(EntropyDecomposition {
        alpha2,
        h_binary: binary_entropy(alpha2),
        h_fast,
        s_spec: l.entropy(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdtCheck {
    /// `(C_i(k+1) − C_i(k))/C_i(k)` with `C_i(k) = |c_i λ_i^k|²`.
    pub ratio: f64,
    /// `λ_i² − 1`.
    pub expected: f64,
}

/// Per-mode relaxation ratio of the squared modal amplitude.
pub fn fdt_check(profile: &SpectralProfile, index: usize, k: u64) -> Result<FdtCheck> {
    let mode = profile.modes().get(index).ok_or_else(|| {
        RelaxError::InvalidArguments(format!("mode index {index} out of range"))
    })?;
    if mode.lambda == 0.0 && k > 0 {
        return Err(RelaxError::DeadMode { index, k });
    }
    let c_k = mode.log_energy_at(k).exp();
    let c_k1 = mode.log_energy_at(k + 1).exp();
    Ok(FdtCheck {
        ratio: (c_k1 - c_k) / c_k,
        expected: mode.lambda * mode.lambda - 1.0,
    })
}

/// One row of the per-step ledger; `None` marks a quantity that is undefined
/// at that step (for example once the trajectory has died).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub k: u64,
    #[serde(rename = "E")]
    pub e: Option<f64>,
    pub rho: Option<f64>,
    pub d: Option<f64>,
    pub alpha2: Option<f64>,
    #[serde(rename = "S_spec")]
    pub s_spec: Option<f64>,
    #[serde(rename = "Cov")]
    pub cov: Option<f64>,
    #[serde(rename = "KL")]
    pub kl: Option<f64>,
    #[serde(rename = "G")]
    pub g: Option<f64>,
    #[serde(rename = "A")]
    pub a: Option<f64>,
    #[serde(rename = "B")]
    pub b: Option<f64>,
    #[serde(rename = "Gamma")]
    pub gamma: Option<f64>,
    #[serde(rename = "Vhat")]
    pub vhat: Option<f64>,
}

impl LedgerRow {
    pub const HEADER: [&'static str; 13] = [
        "k", "E", "rho", "d", "alpha2", "S_spec", "Cov", "KL", "G", "A", "B", "Gamma", "Vhat",
    ];

    fn empty(k: u64) -> Self {
        Self {
            k,
            e: None,
            rho: None,
            d: None,
            alpha2: None,
            s_spec: None,
            cov: None,
            kl: None,
            g: None,
            a: None,
            b: None,
            gamma: None,
            vhat: None,
        }
    }
}

/// Ledger rows for `k = 0..=horizon`, stopping after the first dead step.
pub fn thermo_ledger(profile: &SpectralProfile, horizon: u64) -> Vec<LedgerRow> {
    let mut rows = Vec::new();
    for k in 0..=horizon {
        let now = match ledger_at(profile, k) {
            Ledger::Active(l) => l,
            Ledger::Dead { k } => {
                let mut row = LedgerRow::empty(k);
                row.e = Some(0.0);
                rows.push(row);
                break;
            }
        };
        let mut row = LedgerRow::empty(k);
        row.e = Some(now.energy());
        row.rho = Some(now.rho);
        row.d = Some(now.d);
        row.alpha2 = Some(now.alpha2());
        let s = now.entropy();
        row.s_spec = Some(s);
        row.g = Some(now.energy() * s);
        if now.p[0] > 0.0 {
            row.cov = Some(covariance_from_ledger(profile, &now).cov);
        }
        if let Ledger::Active(next) = ledger_at(profile, k + 1) {
            row.kl = Some(kl(&now, &next));
            if let Ok(g) = g_step(profile, k) {
                row.a = Some(g.a);
                row.b = Some(g.b);
            }
            if now.rho > 0.0 {
                row.gamma = Some((next.rho / now.rho - 1.0).max(0.0));
                row.vhat = Some((now.rho * (next.rho - now.rho)).max(0.0));
            }
        }
        rows.push(row);
    }
    rows
}

/// First `k ≤ cap` with `α₂(k) ≥ 1 − δ` for any `δ ∈ (0, 1)`, if reached.
pub fn threshold_step(profile: &SpectralProfile, delta: f64, cap: u64) -> Option<u64> {
    match crossing(profile, delta, cap) {
        RigidityOutcome::Reached(k) => Some(k),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::LN_2;

    fn two_mode() -> SpectralProfile {
        SpectralProfile::from_weights(&[(0.9, 1.0), (0.1, 1.0)]).unwrap()
    }

    fn s8_two_mode() -> SpectralProfile {
        SpectralProfile::from_weights(&[(0.95, 0.1), (0.70, 0.9)]).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(spectral_entropy(&[1.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(spectral_entropy(&[0.5, 0.5]).unwrap(), LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(spectral_entropy(&[0.2; 5]).unwrap(), 5f64.ln(), epsilon = 1e-15);
        assert!(spectral_entropy(&[0.5, 0.6]).is_err());
        assert!(spectral_entropy(&[1.5, -0.5]).is_err());
    }

    #[test]
    fn balance_examples() {
        let single = SpectralProfile::from_weights(&[(0.7, 1.0)]).unwrap();
        let b = entropy_balance(&single, 3).unwrap();
        assert_eq!((b.ds, b.cov, b.kl), (0.0, 0.0, 0.0));

        let b = entropy_balance(&two_mode(), 0).unwrap();
        let p1: [f64; 2] = [0.81 / 0.82, 0.01 / 0.82];
        let s1 = -p1[0] * p1[0].ln() - p1[1] * p1[1].ln();
        assert_abs_diff_eq!(s1, 0.06586, epsilon = 1e-4);
        assert_abs_diff_eq!(b.ds, s1 - LN_2, epsilon = 1e-14);
        assert_abs_diff_eq!(b.ds, -0.62729, epsilon = 1e-4);
        assert!(b.residual <= 1e-12);
    }

    #[test]
    fn covariance_sign_law() {
        let half = SpectralProfile::from_weights(&[(0.9, 0.3), (0.2, 0.3)]).unwrap();
        assert_eq!(canonical_covariance(&half, 0).unwrap().cov, 0.0);
        let p = s8_two_mode();
        assert!(canonical_covariance(&p, 0).unwrap().cov > 0.0);
        let late = canonical_covariance(&p, 8).unwrap();
        assert!(late.cov < 0.0);
        assert!(late.scaled_cov < 0.0);
        assert!(late.agreement() < 1e-11);
    }

    #[test]
    fn transition_examples() {
        let t = two_mode_transition(0.95, 0.70, 0.1, 0.9).unwrap();
        assert_eq!(t.k_star, 4);
        assert_abs_diff_eq!(t.k_crossing, 3.598, epsilon = 1e-3);
        assert_abs_diff_eq!(t.entropy_at_crossing, LN_2, epsilon = 1e-12);
        let t = two_mode_transition(0.9, 0.1, 1.0, 1.0).unwrap();
        assert_eq!(t.k_star, 0);
        assert_abs_diff_eq!(t.entropy_at_crossing, LN_2, epsilon = 1e-15);
        assert!(matches!(
            two_mode_transition(0.5, -0.5, 1.0, 1.0),
            Err(RelaxError::Degenerate(_))
        ));
    }

    #[test]
    fn threshold_examples() {
        let t = general_threshold(&s8_two_mode()).unwrap();
        assert_abs_diff_eq!(t.delta_star, 1.0 - 0.49 / 0.9025, epsilon = 1e-12);
        assert_abs_diff_eq!(t.delta_star, 0.4570, epsilon = 1e-4);
        let p = SpectralProfile::from_weights(&[(0.95, 0.1), (0.5, 0.9)]).unwrap();
        assert_eq!(general_threshold(&p).unwrap().delta_star, 0.5);
        let single = SpectralProfile::from_weights(&[(0.6, 1.0)]).unwrap();
        let t = general_threshold(&single).unwrap();
        assert_eq!(t.t_threshold, 0);
        assert_eq!(t.delta_star, 0.5);
    }

    #[test]
    fn clausius_examples() {
        let single = SpectralProfile::from_weights(&[(0.6, 1.0)]).unwrap();
        let c = clausius_check(&single, 1e-12, 1000).unwrap();
        assert_eq!((c.lhs, c.rhs, c.steps_used), (0.0, 0.0, 0));
        let c = clausius_check(&two_mode(), 1e-12, 1000).unwrap();
        assert!(c.converged);
        assert!(c.residual <= 1e-10, "{c:?}");
        assert!((8..=14).contains(&c.steps_used), "{c:?}");
    }

    #[test]
    fn g_examples() {
        let g = g_step(&two_mode(), 0).unwrap();
        assert_abs_diff_eq!(g.g_k, 2.0 * LN_2, epsilon = 1e-14);
        let p1: [f64; 2] = [0.81 / 0.82, 0.01 / 0.82];
        let s1 = -p1[0] * p1[0].ln() - p1[1] * p1[1].ln();
        assert_abs_diff_eq!(g.g_k1, 0.82 * s1, epsilon = 1e-14);
        assert!(g.relative_residual() < 1e-12);
        assert!(g.a >= 0.0 && g.b >= 0.0);
        assert_abs_diff_eq!(g.f_k, 0.6137, epsilon = 1e-3);
        assert_abs_diff_eq!(g.f_k1, 0.7660, epsilon = 1e-3);
        let single = g_step(&SpectralProfile::from_weights(&[(0.5, 2.0)]).unwrap(), 2).unwrap();
        assert_eq!((single.g_k, single.g_k1, single.a), (0.0, 0.0, 0.0));
        assert!(single.b.abs() < 1e-16);
    }

    #[test]
    fn decomposition_examples() {
        let d = entropy_decomposition(&s8_two_mode(), 3).unwrap();
        assert_eq!(d.h_fast, 0.0);
        assert_abs_diff_eq!(d.s_spec, d.h_binary, epsilon = 1e-15);
        let m = 6;
        let mut pairs = vec![(0.9, 0.5)];
        pairs.extend((0..m).map(|i| (0.1 * i as f64 - 0.2, 0.5 / m as f64)));
        let d = entropy_decomposition(&SpectralProfile::from_weights(&pairs).unwrap(), 0).unwrap();
        assert_abs_diff_eq!(d.s_spec, LN_2 + 0.5 * (m as f64).ln(), epsilon = 1e-14);
        let d = entropy_decomposition(&SpectralProfile::from_weights(&[(0.3, 1.0)]).unwrap(), 1).unwrap();
        assert_eq!((d.s_spec, d.h_binary, d.h_fast), (0.0, 0.0, 0.0));
    }

    #[test]
    fn fdt_examples() {
        let p = SpectralProfile::from_weights(&[(0.9, 1.0), (-0.5, 2.0), (0.0, 1.0)]).unwrap();
        for k in [0, 1, 10] {
            let f = fdt_check(&p, 0, k).unwrap();
            assert_abs_diff_eq!(f.ratio, -0.19, epsilon = 1e-14);
            let f = fdt_check(&p, 2, k).unwrap();
            assert_abs_diff_eq!(f.ratio, -0.75, epsilon = 1e-14);
        }
        assert_eq!(fdt_check(&p, 1, 0).unwrap().ratio, -1.0);
        assert!(matches!(fdt_check(&p, 1, 1), Err(RelaxError::DeadMode { .. })));
    }

    #[test]
    fn ledger_rows_stop_at_death() {
        let p = SpectralProfile::from_weights(&[(0.0, 1.0), (0.0, 2.0)]).unwrap();
        let rows = thermo_ledger(&p, 10);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].e, Some(0.0));
        assert_eq!(rows[1].rho, None);
    }
}
