//! Example chains and synthetic spectra.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::function::gamma::ln_gamma;

use crate::chain::{build_chain, ReversibleChain, SpectralDecomposition, Tolerances};
use crate::error::{RelaxError, Result};
use crate::trajectory::{Mode, SpectralProfile};

/// Default number of basis draws tried by [`chain_from_spectrum`].
pub const DEFAULT_MAX_RESAMPLE: usize = 1000;

/// Uniform kernel `P(x, y) = 1/n`.
pub fn complete_graph(n: usize) -> Result<ReversibleChain> {
    if n < 2 {
        return Err(RelaxError::InvalidSize(n));
    }
    ReversibleChain::new(DMatrix::from_element(n, n, 1.0 / n as f64))
}

/// Simple random walk on the n-cycle.
pub fn cycle_graph(n: usize) -> Result<ReversibleChain> {
    if n < 2 {
        return Err(RelaxError::InvalidSize(n));
    }
    let mut p = DMatrix::zeros(n, n);
    for x in 0..n {
        p[(x, (x + 1) % n)] += 0.5;
        p[(x, (x + n - 1) % n)] += 0.5;
    }
    ReversibleChain::new(p)
}

/// `P_a = (1 − a) I + a P`; same π, relaxation rates scaled by `a`.
pub fn lazy_transform(chain: &ReversibleChain, a: f64) -> Result<ReversibleChain> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(RelaxError::InvalidLaziness(a));
    }
    let n = chain.n();
    let p = chain.kernel() * a + DMatrix::<f64>::identity(n, n) * (1.0 - a);
    ReversibleChain::new(p)
}

/// Symmetric kernel with uniform π and the requested spectrum.
///
/// The conjugating basis is a randomized hierarchical Haar-type basis: states
/// are shuffled, then recursively split into two near-balanced blocks, each
/// split contributing the vector `(1/|A|)·1_A − (1/|B|)·1_B` (normalized).
/// Eigenvalues are assigned in order of decreasing block size, which keeps
/// every off-diagonal entry nonnegative for a descending spectrum; draws
/// with a negative diagonal are rejected and redrawn.
pub fn chain_from_spectrum(
    eigenvalues: &[f64],
    seed: u64,
    max_resample: usize,
) -> Result<ReversibleChain> {
    let n = eigenvalues.len();
    if n < 2 {
        return Err(RelaxError::InvalidSpectrum("need at least two eigenvalues".into()));
    }
    let mut sorted = eigenvalues.to_vec();
    if sorted.iter().any(|l| !l.is_finite() || l.abs() > 1.0) {
        return Err(RelaxError::InvalidSpectrum("eigenvalues must lie in [-1, 1]".into()));
    }
    sorted.sort_by(|a, b| b.total_cmp(a));
    if (sorted[0] - 1.0).abs() > 1e-12 {
        return Err(RelaxError::InvalidSpectrum("largest eigenvalue must be 1".into()));
    }
    if sorted[1] >= 1.0 {
        return Err(RelaxError::InvalidSpectrum("eigenvalue 1 must be simple".into()));
    }
    sorted[0] = 1.0;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..max_resample {
        let basis = hierarchical_basis(n, &mut rng);
        let mut p = DMatrix::<f64>::zeros(n, n);
        for (col, lambda) in basis.iter().zip(&sorted) {
            p += col * col.transpose() * *lambda;
        }
        let p = (&p + p.transpose()) * 0.5;
        if let Some(kernel) = clean_symmetric_kernel(p) {
            return build_chain(kernel, &Tolerances::default());
        }
    }
    Err(RelaxError::NonRealizable {
        attempts: max_resample,
    })
}

/// Orthonormal basis whose first vector is `1/√n`, remaining vectors ordered
/// by decreasing support size.
fn hierarchical_basis(n: usize, rng: &mut ChaCha8Rng) -> Vec<DVector<f64>> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut splits: Vec<(usize, f64, DVector<f64>)> = Vec::with_capacity(n - 1);
    let mut stack = vec![perm];
    while let Some(set) = stack.pop() {
        let size = set.len();
        if size < 2 {
            continue;
        }
        let left = if size == 2 {
            1
        } else {
            let frac: f64 = rng.random_range(0.4..0.6);
            ((frac * size as f64).round() as usize).clamp(1, size - 1)
        };
        let (a, b) = set.split_at(left);
        let mut v = DVector::zeros(n);
        for &x in a {
            v[x] = 1.0 / a.len() as f64;
        }
        for &x in b {
            v[x] = -1.0 / b.len() as f64;
        }
        let norm = v.norm();
        splits.push((size, rng.random::<f64>(), v / norm));
        stack.push(a.to_vec());
        stack.push(b.to_vec());
    }
    splits.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.total_cmp(&y.1)));
    let mut basis = vec![DVector::from_element(n, 1.0 / (n as f64).sqrt())];
    basis.extend(splits.into_iter().map(|(_, _, v)| v));
    basis
}

/// Clears roundoff-level negatives and resets the diagonal so rows sum to 1.
/// Returns `None` if any entry is genuinely negative.
fn clean_symmetric_kernel(mut p: DMatrix<f64>) -> Option<DMatrix<f64>> {
    const SLACK: f64 = 1e-13;
    let n = p.nrows();
    for x in 0..n {
        for y in 0..n {
            if p[(x, y)] < -SLACK {
                return None;
            }
            if x != y && p[(x, y)] < 0.0 {
                p[(x, y)] = 0.0;
            }
        }
    }
    for x in 0..n {
        let off: f64 = (0..n).filter(|&y| y != x).map(|y| p[(x, y)]).sum();
        p[(x, x)] = (1.0 - off).max(0.0);
    }
    Some(p)
}

/// Random reversible chain from symmetric log-normal conductances on a
/// connected random graph, made lazy with the given holding probability.
pub fn random_reversible_chain<R: Rng + ?Sized>(
    n: usize,
    laziness: f64,
    rng: &mut R,
) -> Result<ReversibleChain> {
    if n < 2 {
        return Err(RelaxError::InvalidSize(n));
    }
    if !(0.0..1.0).contains(&laziness) {
        return Err(RelaxError::InvalidLaziness(laziness));
    }
    let spread = Normal::<f64>::new(0.0, 1.0).expect("unit normal");
    let density = rng.random_range(0.2..1.0);
    let mut w = DMatrix::<f64>::zeros(n, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    // spanning path keeps the graph connected
    for pair in order.windows(2) {
        let c = spread.sample(rng).exp();
        w[(pair[0], pair[1])] = c;
        w[(pair[1], pair[0])] = c;
    }
    for x in 0..n {
        for y in (x + 1)..n {
            if w[(x, y)] == 0.0 && rng.random::<f64>() < density {
                let c = spread.sample(rng).exp();
                w[(x, y)] = c;
                w[(y, x)] = c;
            }
        }
    }
    let mut p = DMatrix::<f64>::zeros(n, n);
    for x in 0..n {
        let total: f64 = w.row(x).sum();
        for y in 0..n {
            p[(x, y)] = (1.0 - laziness) * w[(x, y)] / total;
        }
        p[(x, x)] += laziness;
    }
    ReversibleChain::new(p)
}

/// Standard normal observable on `n` states.
pub fn random_observable<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| Normal::<f64>::new(0.0, 1.0).expect("unit normal").sample(rng))
}

/// Random profile with a strictly separated slow mode.
///
/// `λ₂ ~ U(0.3, 0.98)`, `λ₃ = λ₂·U(0.1, 0.95)`, one fast mode at `±λ₃` and up
/// to `max_fast − 1` more uniform in `[−λ₃, λ₃]`. Weights are log-uniform over
/// `[e^{−5}, e^{3}]`.
pub fn random_separated_profile<R: Rng + ?Sized>(max_fast: usize, rng: &mut R) -> SpectralProfile {
    let lambda2 = rng.random_range(0.3..0.98);
    let lambda3 = lambda2 * rng.random_range(0.1..0.95);
    let n_fast = rng.random_range(1..=max_fast.max(1));
    let weight = |rng: &mut R| rng.random_range(-5.0f64..3.0).exp();
    let mut pairs = vec![(lambda2, weight(rng))];
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    pairs.push((sign * lambda3, weight(rng)));
    for _ in 1..n_fast {
        let l = rng.random_range(-lambda3..=lambda3);
        pairs.push((l, weight(rng)));
    }
    SpectralProfile::from_weights(&pairs).expect("random profile is valid")
}

/// Two triangles joined by a weak bridge: one eigenvalue near 1, the rest small.
pub fn barbell_metastable() -> ReversibleChain {
    let mut w = DMatrix::<f64>::zeros(6, 6);
    for block in [[0, 1, 2], [3, 4, 5]] {
        for &x in &block {
            for &y in &block {
                if x != y {
                    w[(x, y)] = 1.0;
                }
            }
            w[(x, x)] = 1.0;
        }
    }
    w[(2, 3)] = 0.01;
    w[(3, 2)] = 0.01;
    let mut p = w.clone();
    for x in 0..6 {
        let total: f64 = w.row(x).sum();
        for y in 0..6 {
            p[(x, y)] = w[(x, y)] / total;
        }
    }
    ReversibleChain::new(p).expect("barbell kernel is reversible")
}

/// One eigenvalue level of the hypercube walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypercubeLevel {
    pub j: usize,
    pub lambda: f64,
    pub log_multiplicity: f64,
}

/// Spectrum of the simple random walk on `{0,1}^n`: `λ_j = 1 − 2j/n` with
/// multiplicity `C(n, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HypercubeProfile {
    pub n: usize,
    pub levels: Vec<HypercubeLevel>,
}

impl HypercubeProfile {
    /// `ln Σ_j C(n, j)`, equal to `n ln 2`.
    pub fn log_total_multiplicity(&self) -> f64 {
        crate::logspace::log_sum_exp(
            &self.levels.iter().map(|l| l.log_multiplicity).collect::<Vec<_>>(),
        )
    }

    /// Nontrivial levels as a spectral profile whose weights are the multiplicities.
    pub fn spectral_profile(&self) -> Result<SpectralProfile> {
        SpectralProfile::new(
            self.levels
                .iter()
                .filter(|l| l.j >= 1)
                .map(|l| Mode {
                    lambda: l.lambda,
                    log_weight: l.log_multiplicity,
                })
                .collect(),
        )
    }

    /// Step `round((n/4) ln n + αn)`, clamped at zero.
    pub fn cutoff_step(&self, alpha: f64) -> u64 {
        let n = self.n as f64;
        (0.25 * n * n.ln() + alpha * n).round().max(0.0) as u64
    }

    /// Entropy, energy and slow fraction at the cutoff step for each `α`.
    pub fn collapse(&self, alphas: &[f64]) -> Result<Vec<CollapsePoint>> {
        let profile = self.spectral_profile()?;
        alphas
            .iter()
            .map(|&alpha| {
                let k = self.cutoff_step(alpha);
                let ledger = crate::trajectory::active_ledger(&profile, k)?;
                Ok(CollapsePoint {
                    alpha,
                    k,
                    s_spec: ledger.entropy(),
                    log_energy: ledger.log_e,
                    alpha2: ledger.alpha2(),
                })
            })
            .collect()
    }
}

/// One row of the hypercube entropy-collapse experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapsePoint {
    pub alpha: f64,
    pub k: u64,
    pub s_spec: f64,
    /// `ln E_k`; `E_0 = 2^n − 1` overflows a double beyond `n ≈ 1023`.
    pub log_energy: f64,
    pub alpha2: f64,
}

impl CollapsePoint {
    pub fn energy(&self) -> f64 {
        self.log_energy.exp()
    }
}

/// `ln C(n, k)` through log-gamma.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

pub fn hypercube_profile(n: usize) -> Result<HypercubeProfile> {
    if n < 1 {
        return Err(RelaxError::InvalidSize(n));
    }
    let levels = (0..=n)
        .map(|j| HypercubeLevel {
            j,
            lambda: 1.0 - 2.0 * j as f64 / n as f64,
            log_multiplicity: if j == 0 || j == n { 0.0 } else { ln_binomial(n, j) },
        })
        .collect();
    Ok(HypercubeProfile { n, levels })
}

/// Spectrum of the synthetic 50-state example: `1, 0.95, 0.70` and 47 draws
/// from `Uniform(−0.3, 0.5)`, sorted descending.
pub fn synthetic_spectrum(seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spectrum: Vec<f64> = vec![1.0, 0.95, 0.70];
    spectrum.extend((0..47).map(|_| rng.random_range(-0.3..0.5)));
    spectrum.sort_by(|a, b| b.total_cmp(a));
    spectrum
}

/// Weights of the synthetic example: 0.1 on the slow mode, 90% of the
/// remaining energy on `λ = 0.70`, the rest split evenly across the others.
pub fn synthetic_weights(spectrum: &[f64]) -> Vec<f64> {
    let others = spectrum.len().saturating_sub(3).max(1) as f64;
    spectrum[1..]
        .iter()
        .enumerate()
        .map(|(i, _)| match i {
            0 => 0.1,
            1 => 0.81,
            _ => 0.09 / others,
        })
        .collect()
}

/// Spectral profile of the synthetic example, usable without realizing a kernel.
pub fn synthetic_profile(seed: u64) -> SpectralProfile {
    let spectrum = synthetic_spectrum(seed);
    let weights = synthetic_weights(&spectrum);
    let pairs: Vec<(f64, f64)> = spectrum[1..].iter().copied().zip(weights).collect();
    SpectralProfile::from_weights(&pairs)
        .expect("synthetic profile is valid")
        .with_reference_slow_lambda(0.95)
}

/// Synthetic example realized as a 50-state chain, with the initial vector
/// `Σ √w_i φ_i` reproducing [`synthetic_profile`].
pub fn synthetic_chain(seed: u64) -> Result<(ReversibleChain, DVector<f64>)> {
    let spectrum = synthetic_spectrum(seed);
    let chain = chain_from_spectrum(&spectrum, seed, DEFAULT_MAX_RESAMPLE)?;
    let decomp = crate::chain::spectral_decomposition(&chain)?;
    let weights = synthetic_weights(&spectrum);
    Ok((chain, initial_vector(&decomp, &weights)))
}

/// `Σ_i √w_i φ_{i+1}` over the nontrivial eigenvectors.
pub fn initial_vector(decomp: &SpectralDecomposition, weights: &[f64]) -> DVector<f64> {
    let n = decomp.n();
    let mut g = DVector::zeros(n);
    for (i, w) in weights.iter().enumerate().take(n - 1) {
        g += decomp.eigenvector(i + 1) * w.sqrt();
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::spectral_decomposition;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn complete_graph_spectrum() {
        let d = spectral_decomposition(&complete_graph(4).unwrap()).unwrap();
        assert_abs_diff_eq!(d.eigenvalues()[0], 1.0, epsilon = 1e-12);
        for l in &d.eigenvalues()[1..] {
            assert_abs_diff_eq!(*l, 0.0, epsilon = 1e-12);
        }
        let d = spectral_decomposition(&complete_graph(5).unwrap()).unwrap();
        for mu in &d.relaxation_spectrum()[1..] {
            assert_abs_diff_eq!(*mu, 1.0, epsilon = 1e-12);
        }
        assert_eq!(complete_graph(1), Err(RelaxError::InvalidSize(1)));
    }

    #[test]
    fn cycle_degenerate_pair() {
        let d = spectral_decomposition(&cycle_graph(5).unwrap()).unwrap();
        let c = (2.0 * PI / 5.0).cos();
        assert_abs_diff_eq!(d.eigenvalues()[1], c, epsilon = 1e-12);
        assert_abs_diff_eq!(d.eigenvalues()[2], c, epsilon = 1e-12);
        assert_abs_diff_eq!(c, 0.309017, epsilon = 1e-6);
    }

    #[test]
    fn laziness_scales_relaxation_rates() {
        let chain = random_reversible_chain(8, 0.0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let lazy = lazy_transform(&chain, 0.5).unwrap();
        let d = spectral_decomposition(&chain).unwrap();
        let dl = spectral_decomposition(&lazy).unwrap();
        for (mu, mul) in d.relaxation_spectrum().iter().zip(dl.relaxation_spectrum()) {
            assert_abs_diff_eq!(mul, 0.5 * mu, epsilon = 1e-10);
        }
        assert!((lazy.pi() - chain.pi()).amax() < 1e-12);
        assert!(matches!(lazy_transform(&chain, 0.0), Err(RelaxError::InvalidLaziness(_))));
        assert!(matches!(lazy_transform(&chain, 1.5), Err(RelaxError::InvalidLaziness(_))));
    }

    #[test]
    fn two_state_from_spectrum() {
        let c = chain_from_spectrum(&[1.0, 0.0], 1, 10).unwrap();
        for x in 0..2 {
            for y in 0..2 {
                assert_abs_diff_eq!(c.kernel()[(x, y)], 0.5, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn synthetic_spectrum_is_realized() {
        let spectrum = synthetic_spectrum(7);
        let c = chain_from_spectrum(&spectrum, 7, DEFAULT_MAX_RESAMPLE).unwrap();
        let d = spectral_decomposition(&c).unwrap();
        for (a, b) in d.eigenvalues().iter().zip(&spectrum) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-9);
        }
        for p in c.pi().iter() {
            assert_abs_diff_eq!(*p, 1.0 / 50.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn negative_trace_is_not_realizable() {
        let err = chain_from_spectrum(&[1.0, -0.99, -0.99, -0.99], 0, DEFAULT_MAX_RESAMPLE).unwrap_err();
        assert_eq!(err, RelaxError::NonRealizable { attempts: DEFAULT_MAX_RESAMPLE });
    }

    #[test]
    fn hypercube_levels() {
        let h = hypercube_profile(2).unwrap();
        let lambdas: Vec<f64> = h.levels.iter().map(|l| l.lambda).collect();
        assert_eq!(lambdas, vec![1.0, 0.0, -1.0]);
        let mult: Vec<f64> = h.levels.iter().map(|l| l.log_multiplicity.exp()).collect();
        assert_abs_diff_eq!(mult[1], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mult[0], 1.0, epsilon = 0.0);
        let h = hypercube_profile(10).unwrap();
        assert_abs_diff_eq!(h.levels[5].log_multiplicity, 252f64.ln(), epsilon = 1e-10);
        let h = hypercube_profile(20).unwrap();
        assert_abs_diff_eq!(h.log_total_multiplicity(), 20.0 * 2f64.ln(), epsilon = 1e-10);
    }

    #[test]
    fn synthetic_initial_vector_reproduces_profile() {
        let (chain, g0) = synthetic_chain(11).unwrap();
        let d = spectral_decomposition(&chain).unwrap();
        let p = crate::trajectory::project_initial(&d, &chain, &g0).unwrap();
        let expected = synthetic_profile(11);
        assert_eq!(p.len(), expected.len());
        for (a, b) in p.modes().iter().zip(expected.modes()) {
            assert_abs_diff_eq!(a.lambda, b.lambda, epsilon = 1e-9);
            assert_abs_diff_eq!(a.log_weight, b.log_weight, epsilon = 1e-8);
        }
    }

    #[test]
    fn barbell_has_one_near_unit_eigenvalue() {
        let d = spectral_decomposition(&barbell_metastable()).unwrap();
        assert!(d.eigenvalues()[1] > 0.99);
        assert!(d.eigenvalues()[2] < 0.5);
    }
}
