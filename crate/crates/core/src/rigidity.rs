//! Convergence of a trajectory onto its slowest mode.
//!
//! The slow-mode fraction `α₂(k) = n_2(k)/E_k` measures how close `g_k` is
//! to a multiple of `φ_2`. The rigidity time `T_rigid(δ)` is the first step
//! with `α₂ ≥ 1 − δ`. With `λ₃` the largest fast modulus and strict
//! separation `λ₂ > λ₃`, `1 − α₂(k) ≤ (R₀/|c₂|²)(λ₃/λ₂)^{2k}`, so
//! `T_rigid(δ) ≤ ⌊L(δ)⌋ + 1` with
//! `L(δ) = ln(R₀/(|c₂|² δ)) / (2 ln(λ₂/λ₃))`.

use serde::Serialize;

use crate::error::{RelaxError, Result};
use crate::trajectory::{active_ledger, ledger_at, Ledger, SlowSplit, SpectralProfile};

/// Lower limit of the default scan cap.
pub const MIN_SCAN_CAP: u64 = 1_000_000;

/// Longest α₂ trace stored in a report.
const TRACE_LIMIT: u64 = 100_000;

/// `α₂(k)` for the mode with the largest eigenvalue.
pub fn slow_fraction(profile: &SpectralProfile, k: u64) -> Result<f64> {
    profile.check_slow_mode()?;
    Ok(active_ledger(profile, k)?.alpha2())
}

fn alpha_at(profile: &SpectralProfile, k: u64) -> Option<f64> {
    match ledger_at(profile, k) {
        Ledger::Active(l) => Some(l.alpha2()),
        Ledger::Dead { .. } => None,
    }
}

/// How the scan for `α₂ ≥ 1 − δ` ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RigidityOutcome {
    /// First step with `α₂ ≥ 1 − δ`.
    Reached(u64),
    /// Every mode died at this step before the threshold was met.
    Terminal(u64),
    /// The threshold is not met within the cap (or provably never).
    NotReached { cap: u64 },
}

impl RigidityOutcome {
    pub fn step(&self) -> Option<u64> {
        match *self {
            RigidityOutcome::Reached(k) | RigidityOutcome::Terminal(k) => Some(k),
            RigidityOutcome::NotReached { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RigidityReport {
    pub delta: f64,
    pub outcome: RigidityOutcome,
    /// `L(δ)`, `+inf` for a degenerate slow cluster.
    pub l: f64,
    /// `α₂(k)` from `k = 0` up to the reported step (or the scanned range).
    pub alpha2_trace: Vec<f64>,
    /// `λ₃/λ₂` with `λ₃` the largest fast modulus.
    pub ratio: f64,
    /// `R₀/|c₂|²`.
    pub init_ratio: f64,
    /// Profile indices of fast modes as slow as the slow mode.
    pub cluster: Vec<usize>,
    /// Eigenvalue of a fast mode whose modulus exceeds `λ₂`, if any.
    pub dominating_lambda: Option<f64>,
}

impl RigidityReport {
    pub fn t_rigid(&self) -> Option<u64> {
        self.outcome.step()
    }
}

/// `L(δ)` from a slow/fast split; accepts `δ` up to ½.
pub(crate) fn l_from_split(split: &SlowSplit, delta: f64) -> f64 {
    if split.log_r0 == f64::NEG_INFINITY {
        return 0.0;
    }
    let num = split.log_r0 - split.log_c2_sq - delta.ln();
    if num <= 0.0 {
        return 0.0;
    }
    if !split.separated() {
        return f64::INFINITY;
    }
    if split.lambda3 == 0.0 {
        return 0.0;
    }
    num / (2.0 * (split.lambda2 / split.lambda3).ln())
}

fn default_cap(l: f64) -> u64 {
    if l.is_finite() {
        MIN_SCAN_CAP.max(10 * l.ceil() as u64)
    } else {
        MIN_SCAN_CAP
    }
}

/// First `k ≤ cap` with `α₂(k) ≥ 1 − δ`, for any `δ ∈ (0, 1)`.
pub(crate) fn crossing(profile: &SpectralProfile, delta: f64, cap: u64) -> RigidityOutcome {
    let target = 1.0 - delta;
    let reached = |k: u64| alpha_at(profile, k).is_some_and(|a| a >= target);
    if reached(0) {
        return RigidityOutcome::Reached(0);
    }
    if ledger_at(profile, 1).is_dead() {
        return RigidityOutcome::Terminal(1);
    }
    let split = profile.split();
    if split.separated() {
        // α₂ is nondecreasing: bracket the crossing, then bisect
        let mut lo = 0u64;
        let mut hi = 1u64;
        while hi < cap && !reached(hi) {
            lo = hi;
            hi = hi.saturating_mul(2);
        }
        if hi >= cap {
            hi = cap;
            if !reached(hi) {
                return RigidityOutcome::NotReached { cap };
            }
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if reached(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        debug_assert!(!reached(hi - 1));
        return RigidityOutcome::Reached(hi);
    }

    // α₂ ≤ w_slow / (w_slow + w_cluster) for every k
    let slow = profile.slow().log_weight;
    let cluster: Vec<f64> = split.cluster.iter().map(|&i| profile.modes()[i].log_weight).collect();
    let log_cluster = crate::logspace::log_sum_exp(&cluster);
    let ceiling = 1.0 / (1.0 + (log_cluster - slow).exp());
    if ceiling < target {
        return RigidityOutcome::NotReached { cap };
    }
    // fast/slow energy ratio is convex in k: once it stops falling, α₂ has peaked
    let mut prev = f64::INFINITY;
    for k in 0..=cap {
        match alpha_at(profile, k) {
            None => return RigidityOutcome::Terminal(k),
            Some(a) if a >= target => return RigidityOutcome::Reached(k),
            Some(a) => {
                let r = (1.0 - a) / a;
                if r >= prev {
                    break;
                }
                prev = r;
            }
        }
    }
    RigidityOutcome::NotReached { cap }
}

fn build_report(profile: &SpectralProfile, delta: f64, cap: Option<u64>) -> RigidityReport {
    let split = profile.split();
    let l = l_from_split(&split, delta);
    let cap = cap.unwrap_or_else(|| default_cap(l));
    let outcome = crossing(profile, delta, cap);
    let trace_end = match outcome {
        RigidityOutcome::Reached(k) => k,
        RigidityOutcome::Terminal(k) => k.saturating_sub(1),
        RigidityOutcome::NotReached { .. } => 0,
    }
    .min(TRACE_LIMIT);
    let alpha2_trace = (0..=trace_end).filter_map(|k| alpha_at(profile, k)).collect();
    let ratio = if split.lambda2 > 0.0 {
        split.ratio()
    } else {
        f64::NAN
    };
    let dominating_lambda = profile
        .fast()
        .iter()
        .filter(|m| m.lambda.abs() > split.lambda2 + crate::trajectory::CLUSTER_TOL)
        .max_by(|a, b| a.lambda.abs().total_cmp(&b.lambda.abs()))
        .map(|m| m.lambda);
    RigidityReport {
        delta,
        outcome,
        l,
        alpha2_trace,
        ratio,
        init_ratio: split.init_ratio(),
        cluster: split.cluster,
        dominating_lambda,
    }
}

/// Exact rigidity time with the closed-form bound alongside.
///
/// `cap` defaults to `max(10⁶, 10·⌈L(δ)⌉)`.
pub fn rigidity_time(
    profile: &SpectralProfile,
    delta: f64,
    cap: Option<u64>,
) -> Result<RigidityReport> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(RelaxError::OutOfRange {
            value: delta,
            range: "(0, 1/2)",
        });
    }
    if cap == Some(0) {
        return Err(RelaxError::InvalidArguments("cap must be at least 1".into()));
    }
    profile.check_slow_mode()?;
    Ok(build_report(profile, delta, cap))
}

/// Same as [`rigidity_time`] but accepting `δ = ½`.
pub(crate) fn rigidity_time_upto_half(profile: &SpectralProfile, delta: f64) -> Result<RigidityReport> {
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(RelaxError::OutOfRange {
            value: delta,
            range: "(0, 1/2]",
        });
    }
    profile.check_slow_mode()?;
    Ok(build_report(profile, delta, None))
}

/// `L(δ) = ln(R₀/(|c₂|² δ)) / (2 ln(λ₂/|λ₃|))`, clamped at 0.
pub fn rigidity_bound_l(lambda2: f64, lambda3: f64, c2_sq: f64, r0: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(RelaxError::InvalidArguments(format!("delta {delta} outside (0, 1/2)")));
    }
    if !(c2_sq > 0.0 && c2_sq.is_finite()) || !(r0 >= 0.0 && r0.is_finite()) {
        return Err(RelaxError::InvalidArguments(format!(
            "weights must satisfy c2_sq > 0, R0 >= 0 (got {c2_sq}, {r0})"
        )));
    }
    if r0 <= c2_sq * delta {
        return Ok(0.0);
    }
    let l3 = lambda3.abs();
    if !(lambda2 > 0.0 && lambda2 <= 1.0 && l3 > 0.0 && l3 <= lambda2) {
        return Err(RelaxError::InvalidArguments(format!(
            "need 0 < |lambda3| <= lambda2 <= 1 (got {lambda2}, {lambda3})"
        )));
    }
    if l3 == lambda2 {
        return Ok(f64::INFINITY);
    }
    Ok((r0 / (c2_sq * delta)).ln() / (2.0 * (lambda2 / l3).ln()))
}

/// `(R₀/|c₂|²)(λ₃/λ₂)^{2k}`, an upper bound on `1 − α₂(k)`.
pub fn alpha_deficit_bound(profile: &SpectralProfile, k: u64) -> f64 {
    let split = profile.split();
    if split.log_r0 == f64::NEG_INFINITY || split.lambda3 == 0.0 && k > 0 {
        return 0.0;
    }
    (split.log_r0 - split.log_c2_sq + 2.0 * k as f64 * (split.lambda3 / split.lambda2).ln()).exp()
}

/// Outcome of the constant-dissipation test on an energy sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RigidVerdict {
    /// Constant relative dissipation from the first step.
    Rigid { rho: f64, eta: f64 },
    /// Constant relative dissipation from `step` onward.
    RigidAfter { step: usize, rho: f64, eta: f64 },
    /// `d_witness` and `d_{witness+1}` differ by more than the tolerance.
    NotRigid { witness: usize, d_k: f64, d_k1: f64 },
}

/// Tests whether `(E_k − E_{k+1})/E_k` is constant, within `tol`, on a suffix
/// of at least two steps.
pub fn detect_rigid(energies: &[f64], tol: f64) -> Result<RigidVerdict> {
    if energies.len() < 3 {
        return Err(RelaxError::TooShort {
            needed: 3,
            got: energies.len(),
        });
    }
    if let Some(e) = energies.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(RelaxError::InvalidArguments(format!("energy {e} is not positive")));
    }
    let d: Vec<f64> = energies.windows(2).map(|w| 1.0 - w[1] / w[0]).collect();
    let last = d.len() - 1;
    // walk back while the suffix stays within tol of its running range
    let mut lo = d[last];
    let mut hi = d[last];
    let mut start = last;
    while start > 0 {
        let cand = d[start - 1];
        if cand.max(hi) - cand.min(lo) > tol {
            break;
        }
        lo = lo.min(cand);
        hi = hi.max(cand);
        start -= 1;
    }
    if start == last {
        let witness = (0..last)
            .find(|&k| (d[k] - d[k + 1]).abs() > tol)
            .unwrap_or(last - 1);
        return Ok(RigidVerdict::NotRigid {
            witness,
            d_k: d[witness],
            d_k1: d[witness + 1],
        });
    }
    let ratio = energies[start + 1] / energies[start];
    let rho = ratio.sqrt();
    let eta = 1.0 - ratio;
    if start == 0 {
        Ok(RigidVerdict::Rigid { rho, eta })
    } else {
        Ok(RigidVerdict::RigidAfter { step: start, rho, eta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosureBound {
    pub bound: f64,
    /// `|d_k − (1 − λ₂²)|`.
    pub actual: f64,
}

/// Bound on how far the relative dissipation is from its rigid value once
/// `k ≥ T_rigid(δ)`.
///
/// Uses `(1 − λ₃²)δ + max_fast(1 − λ_i²)(λ₃/λ₂)^{2k} R₀/|c₂|²`.
pub fn closure_bound(profile: &SpectralProfile, delta: f64, k: u64) -> Result<ClosureBound> {
    let split = profile.split();
    if !split.separated() {
        return Err(RelaxError::Degenerate(
            "slow mode is not strictly separated".into(),
        ));
    }
    let report = rigidity_time(profile, delta, None)?;
    let t = match report.outcome {
        RigidityOutcome::Reached(t) => t,
        other => {
            return Err(RelaxError::PreconditionUnmet(format!(
                "rigidity not reached: {other:?}"
            )))
        }
    };
    if k < t {
        return Err(RelaxError::PreconditionUnmet(format!(
            "k = {k} is below T_rigid = {t}"
        )));
    }
    let ledger = active_ledger(profile, k)?;
    let l2 = split.lambda2;
    let actual = (ledger.d - (1.0 - l2) * (1.0 + l2)).abs();
    let worst_fast = profile
        .fast()
        .iter()
        .map(|m| (1.0 - m.lambda) * (1.0 + m.lambda))
        .fold(0.0, f64::max);
    let l3 = split.lambda3;
    let bound = (1.0 - l3) * (1.0 + l3) * delta + worst_fast * alpha_deficit_bound(profile, k);
    Ok(ClosureBound { bound, actual })
}
