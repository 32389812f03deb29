//! Polynomial acceleration.
//!
//! One accelerated step applies `Q_m(P)` with `Q_m(1) = 1`. Among degree-`m`
//! polynomials normalized at 1, the rescaled Chebyshev polynomial
//! `Q_m(λ) = T_m(φ(λ))/T_m(φ(1))`, with `φ` mapping `[a, b]` onto `[−1, 1]`,
//! has the smallest maximum modulus `ε_m = 1/|T_m(φ(1))|` on `[a, b]`.
//! Accelerated trajectories are ordinary spectral profiles with eigenvalues
//! `Q_m(λ_i)`, so every rigidity and entropy tool applies to them unchanged.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{RelaxError, Result};
use crate::rigidity::l_from_split;
use crate::trajectory::SpectralProfile;

/// `T_m(x)` by the three-term recurrence.
pub fn chebyshev_t(m: usize, x: f64) -> f64 {
    match m {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut prev, mut cur) = (1.0, x);
            for _ in 1..m {
                let next = 2.0 * x * cur - prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// `Σ_j c_j T_j(x)` by Clenshaw's recurrence.
pub fn chebyshev_series(coefficients: &[f64], x: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &c in coefficients.iter().skip(1).rev() {
        let b0 = 2.0 * x * b1 - b2 + c;
        b2 = b1;
        b1 = b0;
    }
    coefficients.first().copied().unwrap_or(0.0) + x * b1 - b2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PlanMode {
    /// Minimax on a general interval `[a, b]`.
    Interval { a: f64, b: f64 },
    /// `T_m(λ/λ₂)/T_m(1/λ₂)`; the bound `ε_m` only holds on `[−λ₂, λ₂]`.
    PaperSimple { lambda2: f64 },
}

/// Rescaled Chebyshev polynomial normalized at 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccelPlan {
    pub m: usize,
    pub a: f64,
    pub b: f64,
    pub mode: PlanMode,
    /// Coefficients of `Q_m` in the Chebyshev basis of `[a, b]`.
    pub coefficients: Vec<f64>,
    /// `max_{[a,b]} |Q_m| = 1/|T_m(φ(1))|`.
    pub eps: f64,
}

impl AccelPlan {
    /// Affine map of `[a, b]` onto `[−1, 1]`.
    pub fn map(&self, lambda: f64) -> f64 {
        (2.0 * lambda - (self.a + self.b)) / (self.b - self.a)
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        chebyshev_series(&self.coefficients, self.map(lambda))
    }

    /// `λ₂/(λ₂ − λ₃)` for the plan's upper edge.
    pub fn condition_number(&self, lambda2: f64) -> f64 {
        lambda2 / (lambda2 - self.b)
    }

    /// Points of `[a, b]` where `|Q_m| = ε_m`.
    pub fn extremal_points(&self) -> Vec<f64> {
        if self.m == 0 {
            return vec![self.a, self.b];
        }
        (0..=self.m)
            .map(|j| {
                let c = (std::f64::consts::PI * j as f64 / self.m as f64).cos();
                0.5 * ((self.b - self.a) * c + (self.a + self.b))
            })
            .collect()
    }
}

/// Builds `Q_m` for the given interval.
pub fn build_qm(m: usize, mode: PlanMode) -> Result<AccelPlan> {
    let (a, b) = match mode {
        PlanMode::Interval { a, b } => {
            if !(a.is_finite() && b.is_finite() && a < b && b < 1.0) {
                return Err(RelaxError::InvalidInterval { a, b });
            }
            (a, b)
        }
        PlanMode::PaperSimple { lambda2 } => {
            if !(lambda2 > 0.0 && lambda2 < 1.0) {
                return Err(RelaxError::OutOfRange {
                    value: lambda2,
                    range: "(0, 1)",
                });
            }
            (-lambda2, lambda2)
        }
    };
    let at_one = chebyshev_t(m, (2.0 - (a + b)) / (b - a));
    let mut coefficients = vec![0.0; m + 1];
    coefficients[m] = 1.0 / at_one;
    Ok(AccelPlan {
        m,
        a,
        b,
        mode,
        coefficients,
        eps: 1.0 / at_one.abs(),
    })
}

/// Default plan: interval from the smallest fast eigenvalue (or −1) up to the
/// largest fast eigenvalue.
pub fn default_plan(m: usize, profile: &SpectralProfile) -> Result<AccelPlan> {
    let fast = profile.fast();
    let b = fast.iter().map(|f| f.lambda).fold(f64::NEG_INFINITY, f64::max);
    let a = fast.iter().map(|f| f.lambda).fold(f64::INFINITY, f64::min);
    let (a, b) = if fast.is_empty() {
        (-1.0, 0.0)
    } else if a < b {
        (a, b)
    } else {
        (-1.0, b)
    };
    build_qm(m, PlanMode::Interval { a, b })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimaxReport {
    pub grid_max: f64,
    pub eps: f64,
    /// Alternating-sign groups of grid points where `|Q_m|` reaches `ε_m`.
    pub equioscillation: usize,
    /// Smallest grid maximum over all rival polynomials.
    pub best_rival: f64,
    /// `best_rival/ε_m − 1`; negative means a rival won.
    pub optimality_margin: f64,
    /// Rivals whose grid maximum fell below `ε_m(1 − 1e-8)`.
    pub rivals_beating: usize,
}

/// Uniform grid of `[a, b]` merged with the extremal points.
fn verification_grid(plan: &AccelPlan, grid_size: usize) -> Vec<f64> {
    let n = grid_size.max(2);
    let mut grid: Vec<f64> = (0..n)
        .map(|i| plan.a + (plan.b - plan.a) * i as f64 / (n - 1) as f64)
        .collect();
    grid.extend(plan.extremal_points());
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|x, y| (*x - *y).abs() <= 1e-15);
    grid
}

/// `max |Q_m|` over the verification grid of `[a, b]`.
pub fn grid_max(plan: &AccelPlan, grid_size: usize) -> f64 {
    verification_grid(plan, grid_size)
        .iter()
        .map(|&x| plan.eval(x).abs())
        .fold(0.0, f64::max)
}

/// Checks `|Q_m| ≤ ε_m` on a grid and probes optimality against random rivals
/// normalized at 1.
///
/// Half of the rivals are random Chebyshev series, half are small random
/// perturbations of `Q_m` that keep the value 1 at `λ = 1`.
pub fn minimax_verify<R: Rng + ?Sized>(
    plan: &AccelPlan,
    grid_size: usize,
    rival_samples: usize,
    rng: &mut R,
) -> MinimaxReport {
    let grid = verification_grid(plan, grid_size);
    let values: Vec<f64> = grid.iter().map(|&x| plan.eval(x)).collect();
    let grid_max = values.iter().map(|v| v.abs()).fold(0.0, f64::max);

    let level = plan.eps * (1.0 - 1e-10);
    let mut equioscillation = 0;
    let mut last_sign = 0.0;
    for v in &values {
        if v.abs() >= level {
            let s = v.signum();
            if s != last_sign {
                equioscillation += 1;
                last_sign = s;
            }
        }
    }

    let one = plan.map(1.0);
    let mut best_rival = f64::INFINITY;
    let mut rivals_beating = 0;
    for r in 0..rival_samples {
        let noise: Vec<f64> = (0..=plan.m).map(|_| StandardNormal.sample(rng)).collect();
        let coeffs: Vec<f64> = if r % 2 == 0 {
            let at_one = chebyshev_series(&noise, one);
            noise.iter().map(|c| c / at_one).collect()
        } else {
            let scale = 10f64.powf(-rng.random_range(1.0..5.0));
            let shift = chebyshev_series(&noise, one);
            let mut c: Vec<f64> = plan
                .coefficients
                .iter()
                .zip(&noise)
                .map(|(q, h)| q + scale * h)
                .collect();
            c[0] -= scale * shift;
            c
        };
        let rival_max = grid
            .iter()
            .map(|&x| chebyshev_series(&coeffs, plan.map(x)).abs())
            .fold(0.0, f64::max);
        if rival_max < plan.eps * (1.0 - 1e-8) {
            rivals_beating += 1;
        }
        best_rival = best_rival.min(rival_max);
    }
    MinimaxReport {
        grid_max,
        eps: plan.eps,
        equioscillation,
        best_rival,
        optimality_margin: best_rival / plan.eps - 1.0,
        rivals_beating,
    }
}

/// Profile whose eigenvalues are `Q_m(λ_i)`: its step `k` is `k` accelerated steps.
///
/// Fails with `ModeAmplified` if some `|Q_m(λ_i)| ≥ 1`.
pub fn accelerated_profile_step(profile: &SpectralProfile, plan: &AccelPlan) -> Result<SpectralProfile> {
    for m in profile.modes() {
        let q = plan.eval(m.lambda);
        if q.abs() >= 1.0 || !q.is_finite() {
            return Err(RelaxError::ModeAmplified { lambda: m.lambda, q });
        }
    }
    profile.map_lambdas(|l| plan.eval(l))
}

/// `β* = ((1 − √(1 − λ₂²))/λ₂)²`, the heavy-ball parameter giving a double root.
pub fn momentum_beta_star(lambda2: f64) -> Result<f64> {
    if !(lambda2 > 0.0 && lambda2 < 1.0) {
        return Err(RelaxError::OutOfRange {
            value: lambda2,
            range: "(0, 1)",
        });
    }
    let s = (1.0 - lambda2 * lambda2).sqrt();
    let r = (1.0 - s) / lambda2;
    Ok(r * r)
}

/// `(1 + β)²λ² − 4β` for the characteristic equation `r² − (1+β)λr + β = 0`.
pub fn momentum_discriminant(beta: f64, lambda: f64) -> f64 {
    let t = (1.0 + beta) * lambda;
    t * t - 4.0 * beta
}

/// Moduli of the two roots of `r² − (1+β)λ r + β = 0`.
pub fn momentum_root_moduli(beta: f64, lambda: f64) -> (f64, f64) {
    let t = (1.0 + beta) * lambda;
    let disc = momentum_discriminant(beta, lambda);
    if disc.abs() <= 1e-12 {
        let r = (0.5 * t).abs();
        (r, r)
    } else if disc < 0.0 {
        let r = beta.sqrt();
        (r, r)
    } else {
        let s = disc.sqrt();
        let r1 = 0.5 * (t + s);
        let r2 = 0.5 * (t - s);
        (r1.abs().max(r2.abs()), r1.abs().min(r2.abs()))
    }
}

/// Scalar heavy-ball recurrence `x_{k+1} = (1+β)λ x_k − β x_{k−1}` from `x_{-1} = x_0 = 1`.
pub fn momentum_sequence(beta: f64, lambda: f64, steps: usize) -> Vec<f64> {
    let mut xs = vec![1.0, 1.0];
    for _ in 0..steps {
        let n = xs.len();
        xs.push((1.0 + beta) * lambda * xs[n - 1] - beta * xs[n - 2]);
    }
    xs.remove(0);
    xs
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AcceleratedBound {
    /// `|Q_m(λ₂)|`.
    pub q_slow: f64,
    /// Grid maximum of `|Q_m|` over the plan interval.
    pub q_fast: f64,
    /// `ln(R₀/(|c₂|²δ)) / (2 ln(|Q_m(λ₂)|/q_fast))`.
    pub l_accel: f64,
    /// `l_accel + 1`, in accelerated steps.
    pub bound: f64,
    /// `m · l_accel`, in plain-step equivalents.
    pub equivalent_plain_steps: f64,
    /// `(1/m) ln(R₀/(|c₂|²δ)) / (2 ln(1/q_fast)) + 1`, ignoring the slow mode's own decay.
    pub crude_bound: f64,
}

/// Upper bound on the accelerated rigidity time when every fast eigenvalue
/// lies in the plan interval.
pub fn accelerated_rigidity_bound(
    plan: &AccelPlan,
    lambda2: f64,
    c2_sq: f64,
    r0: f64,
    delta: f64,
) -> Result<AcceleratedBound> {
    if !(delta > 0.0 && delta < 0.5) || !(c2_sq > 0.0) || !(r0 >= 0.0) {
        return Err(RelaxError::InvalidArguments(format!(
            "need delta in (0, 1/2), c2_sq > 0, R0 >= 0 (got {delta}, {c2_sq}, {r0})"
        )));
    }
    let q_fast = grid_max(plan, 10_000);
    let q_slow = plan.eval(lambda2).abs();
    if q_slow <= q_fast {
        return Err(RelaxError::SlowModeSuppressed {
            slow: q_slow,
            fast: q_fast,
        });
    }
    let num = (r0 / (c2_sq * delta)).ln().max(0.0);
    let l_accel = if q_fast == 0.0 { 0.0 } else { num / (2.0 * (q_slow / q_fast).ln()) };
    let crude_bound = if plan.m == 0 || q_fast == 0.0 {
        f64::INFINITY
    } else {
        num / (2.0 * (1.0 / q_fast).ln()) / plan.m as f64 + 1.0
    };
    Ok(AcceleratedBound {
        q_slow,
        q_fast,
        l_accel,
        bound: l_accel + 1.0,
        equivalent_plain_steps: plan.m as f64 * l_accel,
        crude_bound,
    })
}

/// Plain `L(δ)` of a profile, for comparison with the accelerated bound.
pub fn plain_bound(profile: &SpectralProfile, delta: f64) -> f64 {
    l_from_split(&profile.split(), delta)
}
