#![allow(dead_code)]

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use spectral_relax::zoo;
use spectral_relax::{ReversibleChain, SpectralProfile};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random chain with `3 ≤ n ≤ max_n` and random laziness.
pub fn random_chain(rng: &mut ChaCha8Rng, max_n: usize) -> ReversibleChain {
    let n = rng.random_range(3..=max_n);
    let lazy = rng.random_range(0.0..0.6);
    zoo::random_reversible_chain(n, lazy, rng).unwrap()
}

/// `π`-centered random observable.
pub fn centered(chain: &ReversibleChain, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let g = zoo::random_observable(chain.n(), rng);
    chain.center(&g).unwrap()
}

/// Profile as plain `(λ, w)` pairs, slow mode first.
pub fn pairs(profile: &SpectralProfile) -> Vec<(f64, f64)> {
    profile.modes().iter().map(|m| (m.lambda, m.log_weight.exp())).collect()
}

/// `α₂(k) = 1/(1 + Σ_fast (w_i/w_2)(λ_i/λ_2)^{2k})`, summed directly.
pub fn oracle_alpha2(pairs: &[(f64, f64)], k: u64) -> f64 {
    let (l2, w2) = pairs[0];
    let r: f64 = pairs[1..]
        .iter()
        .map(|&(l, w)| w / w2 * (l / l2).powi(2 * k as i32))
        .sum();
    1.0 / (1.0 + r)
}

/// First `k` with `α₂(k) ≥ 1 − δ` by linear scan.
pub fn oracle_t_rigid(pairs: &[(f64, f64)], delta: f64, cap: u64) -> Option<u64> {
    (0..=cap).find(|&k| oracle_alpha2(pairs, k) >= 1.0 - delta)
}

/// Modal distribution at step `k` computed directly.
pub fn oracle_p(pairs: &[(f64, f64)], k: u64) -> Vec<f64> {
    let n: Vec<f64> = pairs.iter().map(|&(l, w)| w * l.powi(2 * k as i32)).collect();
    let e: f64 = n.iter().sum();
    n.iter().map(|x| x / e).collect()
}

pub fn oracle_entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

/// `E_k = ‖P^k g‖²_π` by repeated dense products.
pub fn oracle_energies(chain: &ReversibleChain, g: &DVector<f64>, steps: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut v = g.clone();
    for _ in 0..=steps {
        out.push(chain.pi_norm_sq(&v).unwrap());
        v = chain.kernel() * v;
    }
    out
}
