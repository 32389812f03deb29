//! Reversible chains, their stationary law, and the spectral decomposition in
//! the `L²(π)` inner product.
//!
//! A kernel `P` is accepted only if it is row-stochastic, irreducible and
//! reversible with respect to its stationary distribution `π`. Reversibility
//! makes `P` self-adjoint on `L²(π)`, so the similarity transform
//! `S = D^{1/2} P D^{-1/2}` (with `D = diag(π)`) is symmetric and the spectrum
//! is real. Eigenvectors of `S` map back to π-orthonormal eigenvectors of `P`
//! through `u ↦ D^{-1/2} u`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{RelaxError, Result};

/// Numerical tolerances used when validating a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Allowed deviation of each row sum from 1.
    pub row_sum: f64,
    /// Relative tolerance for `π(x)P(x,y) = π(y)P(y,x)`.
    pub detailed_balance: f64,
    /// Stationary masses at or below this value are rejected.
    pub pi_floor: f64,
    /// Eigenvalues closer than this are treated as one cluster.
    pub cluster: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            row_sum: 1e-12,
            detailed_balance: 1e-10,
            pi_floor: 1e-300,
            cluster: 1e-10,
        }
    }
}

/// A validated reversible Markov kernel together with its stationary law.
#[derive(Debug, Clone, PartialEq)]
pub struct ReversibleChain {
    kernel: DMatrix<f64>,
    pi: DVector<f64>,
}

impl ReversibleChain {
    /// Validates `kernel` with default tolerances and solves for `π`.
    pub fn new(kernel: DMatrix<f64>) -> Result<Self> {
        build_chain(kernel, &Tolerances::default())
    }

    /// Builds a chain from row-major rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        for row in rows {
            if row.len() != n {
                return Err(RelaxError::NotSquare {
                    rows: n,
                    cols: row.len(),
                });
            }
        }
        let kernel = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::new(kernel)
    }

    pub fn n(&self) -> usize {
        self.pi.len()
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn pi(&self) -> &DVector<f64> {
        &self.pi
    }

    /// Row-major copy of the kernel.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n())
            .map(|i| self.kernel.row(i).iter().copied().collect())
            .collect()
    }

    fn check_len(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.n() {
            return Err(RelaxError::DimensionMismatch {
                expected: self.n(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// `⟨f, g⟩_π = Σ f(x) g(x) π(x)`.
    pub fn pi_inner(&self, f: &DVector<f64>, g: &DVector<f64>) -> Result<f64> {
        self.check_len(f)?;
        self.check_len(g)?;
        Ok(f.iter()
            .zip(g.iter())
            .zip(self.pi.iter())
            .map(|((a, b), p)| a * b * p)
            .sum())
    }

    pub fn pi_norm_sq(&self, f: &DVector<f64>) -> Result<f64> {
        self.pi_inner(f, f)
    }

    /// `π(f) = ⟨f, 1⟩_π`.
    pub fn pi_mean(&self, f: &DVector<f64>) -> Result<f64> {
        self.check_len(f)?;
        Ok(f.dot(&self.pi))
    }

    /// `f - π(f)·1`.
    pub fn center(&self, f: &DVector<f64>) -> Result<DVector<f64>> {
        let m = self.pi_mean(f)?;
        Ok(f.add_scalar(-m))
    }

    /// Dense product `P g`.
    pub fn apply(&self, g: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(g)?;
        Ok(&self.kernel * g)
    }

    /// The Dirichlet form `ℰ(f,f)`, evaluated both as an edge sum and as
    /// `⟨f, (I - P) f⟩_π`.
    pub fn dirichlet_form(&self, f: &DVector<f64>) -> Result<DirichletForm> {
        self.check_len(f)?;
        let n = self.n();
        let mut edge = 0.0;
        for x in 0..n {
            for y in 0..n {
                let diff = f[x] - f[y];
                edge += self.pi[x] * self.kernel[(x, y)] * diff * diff;
            }
        }
        let pf = &self.kernel * f;
        let operator = self.pi_inner(f, &(f - pf))?;
        Ok(DirichletForm {
            edge_form: 0.5 * edge,
            operator_form: operator,
        })
    }
}

/// Both evaluations of the Dirichlet form; they agree to rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirichletForm {
    pub edge_form: f64,
    pub operator_form: f64,
}

impl DirichletForm {
    pub fn value(&self) -> f64 {
        self.edge_form
    }

    pub fn relative_gap(&self) -> f64 {
        let scale = self.edge_form.abs().max(self.operator_form.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.edge_form - self.operator_form).abs() / scale
        }
    }
}

/// Validates a nonnegative square kernel and returns the reversible chain.
///
/// Checks run in order: shape, entries, row sums, irreducibility, stationary
/// law, detailed balance.
pub fn build_chain(kernel: DMatrix<f64>, tol: &Tolerances) -> Result<ReversibleChain> {
    let (rows, cols) = kernel.shape();
    if rows != cols {
        return Err(RelaxError::NotSquare { rows, cols });
    }
    let n = rows;
    if n == 0 {
        return Err(RelaxError::InvalidSize(0));
    }
    for i in 0..n {
        for j in 0..n {
            let v = kernel[(i, j)];
            if !v.is_finite() || v < 0.0 {
                return Err(RelaxError::InvalidEntry {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
    }
    for i in 0..n {
        let sum: f64 = kernel.row(i).sum();
        if (sum - 1.0).abs() > tol.row_sum {
            return Err(RelaxError::RowSumError { row: i, sum });
        }
    }
    if let Some(unreachable) = unreachable_state(&kernel) {
        return Err(RelaxError::Reducible { unreachable });
    }

    let pi = stationary_distribution(&kernel);
    for (x, &p) in pi.iter().enumerate() {
        if !p.is_finite() || p <= tol.pi_floor {
            return Err(RelaxError::DegeneratePi { state: x, value: p });
        }
    }

    for x in 0..n {
        for y in (x + 1)..n {
            let forward = pi[x] * kernel[(x, y)];
            let backward = pi[y] * kernel[(y, x)];
            if (forward - backward).abs() > tol.detailed_balance * forward.max(backward) {
                return Err(RelaxError::NotReversible {
                    x,
                    y,
                    forward,
                    backward,
                });
            }
        }
    }

    Ok(ReversibleChain { kernel, pi })
}

/// Returns a state that is not mutually reachable from state 0, if any.
fn unreachable_state(kernel: &DMatrix<f64>) -> Option<usize> {
    let n = kernel.nrows();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(x) = queue.pop_front() {
            for y in 0..n {
                let w = if forward {
                    kernel[(x, y)]
                } else {
                    kernel[(y, x)]
                };
                if w > 0.0 && !seen[y] {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        seen
    };
    let fwd = reach(true);
    let bwd = reach(false);
    (0..n).find(|&x| !(fwd[x] && bwd[x]))
}

/// Normalized left fixed vector of an irreducible stochastic kernel.
///
/// Solves `(Pᵀ - I) π = 0` with one equation replaced by `Σ π = 1`, falling
/// back to lazy power iteration if the factorization breaks down.
fn stationary_distribution(kernel: &DMatrix<f64>) -> DVector<f64> {
    let n = kernel.nrows();
    let mut a = kernel.transpose() - DMatrix::<f64>::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let solved = a.lu().solve(&b).filter(|pi| pi.iter().all(|v| v.is_finite()));
    let mut pi = match solved {
        Some(pi) => pi,
        None => lazy_power_stationary(kernel),
    };
    let total = pi.sum();
    pi /= total;
    pi
}

fn lazy_power_stationary(kernel: &DMatrix<f64>) -> DVector<f64> {
    let n = kernel.nrows();
    let pt = kernel.transpose();
    let mut pi = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..1_000_000 {
        let next = (&pt * &pi + &pi) * 0.5;
        let delta = (&next - &pi).amax();
        pi = next;
        if delta < 1e-14 {
            break;
        }
    }
    pi
}

/// Eigenpairs of a reversible kernel, sorted by descending eigenvalue, with
/// π-orthonormal eigenvectors stored as columns.
///
/// Inside a cluster of (numerically) equal eigenvalues the individual vectors
/// are an arbitrary orthonormal basis of the eigenspace.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `1 = λ_1 ≥ λ_2 ≥ … ≥ λ_n ≥ -1`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Column `i` is `φ_{i+1}`.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, i: usize) -> DVector<f64> {
        self.eigenvectors.column(i).into_owned()
    }

    /// `μ_i = 1 - λ_i`.
    pub fn relaxation_spectrum(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|l| 1.0 - l).collect()
    }

    /// Largest deviation of the Gram matrix `⟨φ_i, φ_j⟩_π` from the identity.
    pub fn orthonormality_residual(&self, chain: &ReversibleChain) -> f64 {
        let n = self.n();
        let weighted = DMatrix::from_fn(n, n, |x, i| self.eigenvectors[(x, i)] * chain.pi()[x]);
        let gram = self.eigenvectors.transpose() * weighted;
        (gram - DMatrix::<f64>::identity(n, n)).amax()
    }

    /// `max_i ‖P φ_i − λ_i φ_i‖_π`.
    pub fn eigen_residual(&self, chain: &ReversibleChain) -> f64 {
        (0..self.n())
            .map(|i| {
                let phi = self.eigenvector(i);
                let r = chain.kernel() * &phi - &phi * self.eigenvalues[i];
                chain.pi_norm_sq(&r).unwrap_or(f64::NAN).sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// Eigen-decomposition of `P` through the symmetric similarity `D^{1/2} P D^{-1/2}`.
pub fn spectral_decomposition(chain: &ReversibleChain) -> Result<SpectralDecomposition> {
    let n = chain.n();
    let sqrt_pi: Vec<f64> = chain.pi().iter().map(|p| p.sqrt()).collect();
    let s = DMatrix::from_fn(n, n, |x, y| sqrt_pi[x] * chain.kernel()[(x, y)] / sqrt_pi[y]);
    let sym = (&s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| RelaxError::EigensolveFailure(format!("no convergence for n = {n}")))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenvectors = DMatrix::<f64>::zeros(n, n);
    for (col, &idx) in order.iter().enumerate() {
        eigenvalues.push(eig.eigenvalues[idx]);
        let mut phi = DVector::from_fn(n, |x, _| eig.eigenvectors[(x, idx)] / sqrt_pi[x]);
        // deterministic sign: largest-magnitude entry positive (φ_1 comes out positive)
        let pivot = phi.iamax();
        if phi[pivot] < 0.0 {
            phi.neg_mut();
        }
        eigenvectors.set_column(col, &phi);
    }
    if eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(RelaxError::EigensolveFailure("non-finite eigenvalue".into()));
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn chain(rows: &[&[f64]]) -> Result<ReversibleChain> {
        ReversibleChain::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
    }

    #[test]
    fn symmetric_two_state() {
        let c = chain(&[&[0.5, 0.5], &[0.5, 0.5]]).unwrap();
        assert_abs_diff_eq!(c.pi()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(c.pi()[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn asymmetric_two_state_pi() {
        let c = chain(&[&[0.9, 0.1], &[0.3, 0.7]]).unwrap();
        assert_abs_diff_eq!(c.pi()[0], 0.75, epsilon = 1e-14);
        assert_abs_diff_eq!(c.pi()[1], 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(c.pi()[0] * 0.1, c.pi()[1] * 0.3, epsilon = 1e-15);
    }

    #[test]
    fn rotation_is_not_reversible() {
        let err = chain(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]]).unwrap_err();
        assert!(matches!(err, RelaxError::NotReversible { .. }), "{err:?}");
    }

    #[test]
    fn rejects_bad_rows_and_entries() {
        assert!(matches!(
            chain(&[&[0.5, 0.4], &[0.5, 0.5]]),
            Err(RelaxError::RowSumError { row: 0, .. })
        ));
        assert!(matches!(
            chain(&[&[1.5, -0.5], &[0.5, 0.5]]),
            Err(RelaxError::InvalidEntry { .. })
        ));
        assert!(matches!(
            ReversibleChain::from_rows(&[vec![1.0], vec![0.5, 0.5]]),
            Err(RelaxError::NotSquare { .. })
        ));
    }

    #[test]
    fn rejects_reducible() {
        let err = chain(&[&[1.0, 0.0], &[0.0, 1.0]]).unwrap_err();
        assert!(matches!(err, RelaxError::Reducible { unreachable: 1 }));
        // absorbing state: 1 reachable from 0 but not back
        let err = chain(&[&[0.5, 0.5], &[0.0, 1.0]]).unwrap_err();
        assert!(matches!(err, RelaxError::Reducible { .. }));
    }

    #[test]
    fn two_state_spectrum() {
        let c = chain(&[&[0.9, 0.1], &[0.3, 0.7]]).unwrap();
        let d = spectral_decomposition(&c).unwrap();
        assert_abs_diff_eq!(d.eigenvalues()[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d.eigenvalues()[1], 0.6, epsilon = 1e-14);
        assert!(d.orthonormality_residual(&c) < 1e-12);
        assert!(d.eigen_residual(&c) < 1e-12);
        let phi1 = d.eigenvector(0);
        assert_abs_diff_eq!(phi1[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(phi1[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pi_inner_examples() {
        let c = chain(&[&[0.9, 0.1], &[0.3, 0.7]]).unwrap();
        let one = DVector::from_element(2, 1.0);
        assert_abs_diff_eq!(c.pi_inner(&one, &one).unwrap(), 1.0, epsilon = 1e-15);
        let f = DVector::from_vec(vec![1.0, -3.0]);
        assert_abs_diff_eq!(c.pi_inner(&f, &f).unwrap(), 3.0, epsilon = 1e-14);
        assert!(matches!(
            c.pi_inner(&f, &DVector::zeros(3)),
            Err(RelaxError::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn dirichlet_examples() {
        let c = chain(&[&[0.5, 0.5], &[0.5, 0.5]]).unwrap();
        let f = DVector::from_vec(vec![1.0, -1.0]);
        let form = c.dirichlet_form(&f).unwrap();
        assert_abs_diff_eq!(form.edge_form, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(form.operator_form, 1.0, epsilon = 1e-15);
        let constant = DVector::from_element(2, 3.0);
        assert_eq!(c.dirichlet_form(&constant).unwrap().value(), 0.0);
    }

    #[test]
    fn dirichlet_of_eigenvector_is_relaxation_rate() {
        let c = chain(&[&[0.9, 0.1], &[0.3, 0.7]]).unwrap();
        let d = spectral_decomposition(&c).unwrap();
        let form = c.dirichlet_form(&d.eigenvector(1)).unwrap();
        assert_abs_diff_eq!(form.value(), d.relaxation_spectrum()[1], epsilon = 1e-13);
    }
}
