//! First-passage times through absorption.
//!
//! Making state `a` absorbing leaves a substochastic block `B` on the other
//! states. `B` is self-adjoint in the restricted `π` inner product, so its
//! spectrum `ν₂ ≥ … ≥ ν_n` is real and interlaces with the spectrum of `P`.
//! The survival tail is `P(τ_a > k) = Σ α_i ν_i^k`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::chain::ReversibleChain;
use crate::error::{RelaxError, Result};
use crate::rigidity::rigidity_time;
use crate::trajectory::SpectralProfile;

/// Tolerance on the start distribution's total mass and on mass at the target.
const START_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct AbsorbingModel {
    target: usize,
    /// Surviving states in original order.
    states: Vec<usize>,
    absorbed_kernel: DMatrix<f64>,
    block: DMatrix<f64>,
    /// `√π` on the surviving states.
    sqrt_pi: DVector<f64>,
    /// Absorbed spectrum, descending.
    nu: Vec<f64>,
    /// Orthonormal eigenvectors of the symmetrized block, as columns aligned with `nu`.
    u: DMatrix<f64>,
}

/// Builds the absorbed model for target state `a`.
pub fn absorb(chain: &ReversibleChain, a: usize) -> Result<AbsorbingModel> {
    let n = chain.n();
    if a >= n {
        return Err(RelaxError::InvalidState { state: a, n });
    }
    if n < 2 {
        return Err(RelaxError::InvalidSize(n));
    }
    let p = chain.kernel();
    let mut absorbed_kernel = p.clone();
    for y in 0..n {
        absorbed_kernel[(a, y)] = if y == a { 1.0 } else { 0.0 };
    }
    let states: Vec<usize> = (0..n).filter(|&x| x != a).collect();
    let m = states.len();
    let block = DMatrix::from_fn(m, m, |i, j| p[(states[i], states[j])]);
    let sqrt_pi = DVector::from_iterator(m, states.iter().map(|&x| chain.pi()[x].sqrt()));
    let sym = DMatrix::from_fn(m, m, |i, j| {
        let s = sqrt_pi[i] / sqrt_pi[j] * block[(i, j)];
        let t = sqrt_pi[j] / sqrt_pi[i] * block[(j, i)];
        0.5 * (s + t)
    });
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| RelaxError::EigensolveFailure("absorbed block did not converge".into()))?;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let nu = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut u = DMatrix::zeros(m, m);
    for (c, &i) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(i).into_owned();
        let pivot = col.iter().copied().max_by(|x, y| x.abs().total_cmp(&y.abs())).unwrap_or(1.0);
        if pivot < 0.0 {
            col.neg_mut();
        }
        u.set_column(c, &col);
    }
    Ok(AbsorbingModel {
        target: a,
        states,
        absorbed_kernel,
        block,
        sqrt_pi,
        nu,
        u,
    })
}

/// Ways to choose the initial distribution off the target.
#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    Uniform,
    /// `π` conditioned off the target.
    RestrictedPi,
    /// Left Perron vector of the block, the distribution conditioned on survival.
    QuasiStationary,
    /// Explicit distribution over all `n` states.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterlacingReport {
    /// Largest violation of `λ_{k−1} ≥ ν_k ≥ λ_k`; nonpositive when it holds exactly.
    pub max_violation: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailPoint {
    pub k: u64,
    /// Survival mass of `μ B^k`.
    pub matrix: f64,
    /// `Σ α_i ν_i^k`.
    pub spectral: f64,
}

impl AbsorbingModel {
    pub fn target(&self) -> usize {
        self.target
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn absorbed_kernel(&self) -> &DMatrix<f64> {
        &self.absorbed_kernel
    }

    pub fn block(&self) -> &DMatrix<f64> {
        &self.block
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.nu
    }

    /// Leading absorbed eigenvalue `ν₂`.
    pub fn nu2(&self) -> f64 {
        self.nu[0]
    }

    /// Checks Cauchy interlacing against the full spectrum (descending, `λ_1 = 1`).
    pub fn interlacing(&self, full: &[f64], tol: f64) -> Result<InterlacingReport> {
        if full.len() != self.nu.len() + 1 {
            return Err(RelaxError::DimensionMismatch {
                expected: self.nu.len() + 1,
                got: full.len(),
            });
        }
        let max_violation = self
            .nu
            .iter()
            .enumerate()
            .map(|(j, &v)| (v - full[j]).max(full[j + 1] - v))
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(InterlacingReport {
            max_violation,
            holds: max_violation <= tol,
        })
    }

    /// Resolves a start choice to a distribution on the surviving states.
    pub fn start_distribution(&self, start: &Start) -> Result<DVector<f64>> {
        let m = self.states.len();
        let v = match start {
            Start::Uniform => DVector::from_element(m, 1.0 / m as f64),
            Start::RestrictedPi => {
                let w = self.sqrt_pi.map(|s| s * s);
                let total = w.sum();
                w / total
            }
            Start::QuasiStationary => {
                let w = self.sqrt_pi.component_mul(&self.u.column(0));
                let total = w.sum();
                if total == 0.0 {
                    return Err(RelaxError::BadStart("quasi-stationary vector has zero mass".into()));
                }
                (w / total).map(|x| x.max(0.0))
            }
            Start::Custom(full) => {
                let n = m + 1;
                if full.len() != n {
                    return Err(RelaxError::BadStart(format!("expected {n} entries, got {}", full.len())));
                }
                if full.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
                    return Err(RelaxError::BadStart("entries must be finite and nonnegative".into()));
                }
                if full[self.target] > START_TOL {
                    return Err(RelaxError::BadStart(format!(
                        "mass {} on the target state {}",
                        full[self.target], self.target
                    )));
                }
                let total: f64 = full.iter().sum();
                if (total - 1.0).abs() > START_TOL {
                    return Err(RelaxError::BadStart(format!("total mass {total} is not 1")));
                }
                DVector::from_iterator(m, self.states.iter().map(|&x| full[x]))
            }
        };
        Ok(v)
    }

    /// Tail coefficients `α_i = (μᵀD^{−1/2}u_i)(u_iᵀD^{1/2}1)`, aligned with the spectrum.
    pub fn tail_coefficients(&self, start: &Start) -> Result<Vec<f64>> {
        let mu = self.start_distribution(start)?;
        let left = mu.component_div(&self.sqrt_pi);
        Ok((0..self.nu.len())
            .map(|i| {
                let col = self.u.column(i);
                left.dot(&col) * self.sqrt_pi.dot(&col)
            })
            .collect())
    }

    /// `P(τ_a > k)` computed through the block and through the spectrum.
    pub fn fpt_tail(&self, start: &Start, k: u64) -> Result<TailPoint> {
        self.tail_series(start, k).map(|mut s| s.pop().expect("series includes k"))
    }

    /// Tail at `k = 0..=kmax`.
    pub fn tail_series(&self, start: &Start, kmax: u64) -> Result<Vec<TailPoint>> {
        let alphas = self.tail_coefficients(start)?;
        let mut row = self.start_distribution(start)?.transpose();
        let mut out = Vec::with_capacity(kmax as usize + 1);
        for k in 0..=kmax {
            if k > 0 {
                row = &row * &self.block;
            }
            let spectral = if k == 0 {
                1.0
            } else {
                alphas.iter().zip(&self.nu).map(|(a, v)| a * v.powi(k as i32)).sum()
            };
            out.push(TailPoint {
                k,
                matrix: row.sum(),
                spectral,
            });
        }
        Ok(out)
    }
}

/// `(Σ_{i≥3} |α_i|/|α₂|)(max_{i≥3} |ν_i|/ν₂)^k`, a rigorous bound on
/// `|P(τ>k)/(α₂ν₂^k) − 1|`.
pub fn tail_ratio_bound(alphas: &[f64], nu: &[f64], k: u64) -> Result<f64> {
    if alphas.len() != nu.len() || nu.is_empty() {
        return Err(RelaxError::DimensionMismatch {
            expected: nu.len(),
            got: alphas.len(),
        });
    }
    if alphas[0] == 0.0 || nu[0] <= 0.0 {
        return Err(RelaxError::Degenerate("leading tail mode is absent".into()));
    }
    let spread: f64 = alphas[1..].iter().map(|a| a.abs()).sum::<f64>() / alphas[0].abs();
    let rate = nu[1..].iter().map(|v| v.abs()).fold(0.0, f64::max) / nu[0];
    Ok(spread * rate.powi(k as i32))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailBound {
    /// `C(λ₂, λ₃) = (1 − λ₃²)/(λ₂² − λ₃²)`.
    pub constant: f64,
    /// `C · (δ + init_ratio · (λ₃/λ₂)^{2k})`.
    pub relative_error_bound: f64,
    /// `|P(τ>k)/(α₂ν₂^k) − 1|`.
    pub actual_relative_error: f64,
}

impl TailBound {
    pub fn holds(&self) -> bool {
        self.actual_relative_error <= self.relative_error_bound
    }
}

/// Relative error of the single-exponential tail approximation and its bound.
#[allow(clippy::too_many_arguments)]
pub fn exponential_tail_bound(
    lambda2: f64,
    lambda3: f64,
    delta: f64,
    init_ratio: f64,
    k: u64,
    tail: f64,
    nu2: f64,
    alpha2_coef: f64,
) -> Result<TailBound> {
    if !(lambda2 > lambda3.abs()) {
        return Err(RelaxError::Degenerate(format!(
            "need lambda2 > |lambda3| (got {lambda2}, {lambda3})"
        )));
    }
    if !(nu2 > 0.0) || alpha2_coef == 0.0 {
        return Err(RelaxError::Degenerate("leading tail mode is absent".into()));
    }
    let l3 = lambda3 * lambda3;
    let constant = (1.0 - l3) / (lambda2 * lambda2 - l3);
    let decay = (lambda3.abs() / lambda2).powi(2 * k as i32);
    let approx = alpha2_coef * nu2.powi(k as i32);
    Ok(TailBound {
        constant,
        relative_error_bound: constant * (delta + init_ratio * decay),
        actual_relative_error: (tail / approx - 1.0).abs(),
    })
}

/// `Σ_{i≥3} α_i² / α_2²` over the absorbed tail coefficients.
pub fn absorbed_init_ratio(alphas: &[f64]) -> Result<f64> {
    let lead = alphas.first().copied().unwrap_or(0.0);
    if lead == 0.0 {
        return Err(RelaxError::Degenerate("leading tail mode is absent".into()));
    }
    Ok(alphas[1..].iter().map(|a| a * a).sum::<f64>() / (lead * lead))
}

/// Steps checked against the single-exponential tail bound and the ones that broke it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailMonitor {
    pub delta: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub init_ratio: f64,
    /// First step checked: the rigidity time of the absorbed modal profile.
    pub k_start: u64,
    pub checked: usize,
    pub violations: Vec<(u64, TailBound)>,
}

/// Checks the tail bound for `k ∈ [T, T + span]`, with `T` the rigidity time
/// at `δ` of the profile `(ν_i, α_i²)` and `λ₂, λ₃` taken from the full spectrum.
pub fn monitor_tail_bound(
    model: &AbsorbingModel,
    full: &[f64],
    start: &Start,
    delta: f64,
    span: u64,
) -> Result<TailMonitor> {
    if full.len() < 3 {
        return Err(RelaxError::InvalidSize(full.len()));
    }
    let lambda2 = full[1];
    let lambda3 = full[2..].iter().map(|l| l.abs()).fold(0.0, f64::max);
    let alphas = model.tail_coefficients(start)?;
    let init_ratio = absorbed_init_ratio(&alphas)?;
    let pairs: Vec<(f64, f64)> = model
        .nu
        .iter()
        .zip(&alphas)
        .filter(|(_, a)| **a != 0.0)
        .map(|(&v, &a)| (v, a * a))
        .collect();
    let profile = SpectralProfile::from_weights(&pairs)?;
    let k_start = rigidity_time(&profile, delta, None)?
        .t_rigid()
        .ok_or_else(|| RelaxError::Degenerate("absorbed profile never becomes rigid".into()))?;
    let series = model.tail_series(start, k_start + span)?;
    let mut violations = Vec::new();
    for p in &series[k_start as usize..] {
        let b = exponential_tail_bound(
            lambda2, lambda3, delta, init_ratio, p.k, p.spectral, model.nu2(), alphas[0],
        )?;
        if !b.holds() {
            violations.push((p.k, b));
        }
    }
    Ok(TailMonitor {
        delta,
        lambda2,
        lambda3,
        init_ratio,
        k_start,
        checked: span as usize + 1,
        violations,
    })
}
