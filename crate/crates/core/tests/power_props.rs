mod common;

use proptest::prelude::*;
use rand::Rng;
use spectral_relax::power::{
    adaptive_stop, alpha_bounds_from_variance, eigenvector_error_sq, error_identity,
    observable_variance, run_power, StoppingConfig,
};
use spectral_relax::trajectory::{active_ledger, project_initial};
use spectral_relax::zoo::{random_reversible_chain, random_separated_profile};
use spectral_relax::{spectral_decomposition, ReversibleChain};

fn variance_of_lambda_sq(p: &[f64], lambdas: &[f64]) -> f64 {
    let mean: f64 = p.iter().zip(lambdas).map(|(p, l)| p * l * l).sum();
    p.iter().zip(lambdas).map(|(p, l)| p * (l * l - mean).powi(2)).sum()
}

/// `1 − (λ₃/λ₂)²` with `λ₃` the largest modulus below the slow eigenvalue.
fn true_tau(chain: &ReversibleChain) -> Option<f64> {
    let eig = spectral_decomposition(chain).unwrap();
    let ev = eig.eigenvalues();
    let l2 = ev[1];
    let l3 = ev[2..].iter().map(|l| l.abs()).fold(0.0, f64::max);
    (l2 > l3 + 1e-6).then(|| 1.0 - (l3 / l2).powi(2))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn error_identity_on_matrix_path(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let chain = common::random_chain(&mut rng, 25);
        let g = common::centered(&chain, &mut rng);
        let decomp = spectral_decomposition(&chain).unwrap();
        let phi2 = decomp.eigenvector(1);
        let profile = project_initial(&decomp, &chain, &g).unwrap();
        prop_assume!(profile.slow().lambda == decomp.eigenvalues()[1]);
        let run = run_power(&chain, &g, 60).unwrap();
        for k in 0..run.steps().min(60) {
            let alpha = active_ledger(&profile, k as u64).unwrap().alpha2();
            let actual = eigenvector_error_sq(&chain, run.iterate(k).unwrap(), &phi2).unwrap();
            prop_assert!((actual - error_identity(alpha).unwrap()).abs() <= 1e-10, "k={k}");
        }
    }

    #[test]
    fn rho_and_variance_match_spectral_path(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let chain = common::random_chain(&mut rng, 20);
        let g = common::centered(&chain, &mut rng);
        let decomp = spectral_decomposition(&chain).unwrap();
        let profile = project_initial(&decomp, &chain, &g).unwrap();
        let run = run_power(&chain, &g, 40).unwrap();
        let lambdas = profile.lambdas();
        for k in 0..run.rho.len().saturating_sub(1) {
            let ledger = active_ledger(&profile, k as u64).unwrap();
            prop_assert!((run.rho[k] - ledger.rho).abs() <= 1e-10);
            let v = observable_variance(run.rho[k], run.rho[k + 1]).unwrap();
            prop_assert!((v - variance_of_lambda_sq(&ledger.p, &lambdas)).abs() <= 1e-10);
        }
    }

    #[test]
    fn spectral_variance_identity(seed in any::<u64>()) {
        let profile = random_separated_profile(49, &mut common::rng(seed));
        let lambdas = profile.lambdas();
        for k in 0..100u64 {
            let now = active_ledger(&profile, k).unwrap();
            let next = active_ledger(&profile, k + 1).unwrap();
            let vhat = observable_variance(now.rho, next.rho).unwrap();
            prop_assert!((vhat - variance_of_lambda_sq(&now.p, &lambdas)).abs() <= 1e-12, "k={k}");
        }
    }

    #[test]
    fn variance_brackets_alpha_deficit(seed in any::<u64>(), k in 0u64..60) {
        let profile = random_separated_profile(10, &mut common::rng(seed));
        let s = profile.split();
        let now = active_ledger(&profile, k).unwrap();
        // modal variance directly; the ρ-difference form loses it to roundoff once 1 − α₂ ≲ 1e-14
        let vhat = variance_of_lambda_sq(&now.p, &profile.lambdas());
        let b = alpha_bounds_from_variance(vhat, s.lambda2, s.lambda3).unwrap();
        let deficit = 1.0 - now.alpha2();
        prop_assert!(b.lower <= deficit * (1.0 + 1e-9) + 1e-15);
        if now.alpha2() >= 0.5 {
            prop_assert!(deficit <= b.upper_if_majority * (1.0 + 1e-9) + 1e-15);
        }
    }
}

#[test]
fn stopping_rule_is_sound_with_true_tau() {
    let mut rng = common::rng(2024);
    let mut stops = 0;
    let mut chains = 0;
    while chains < 100 {
        let n = rng.random_range(4..=20);
        let chain = random_reversible_chain(n, 0.5, &mut rng).unwrap();
        let tau = match true_tau(&chain) {
            Some(t) => t,
            None => continue,
        };
        chains += 1;
        let g = common::centered(&chain, &mut rng);
        let phi2 = spectral_decomposition(&chain).unwrap().eigenvector(1);
        let run = run_power(&chain, &g, 2_000).unwrap();
        for eps in [0.2, 0.1, 0.05] {
            let state = match adaptive_stop(run.rho.iter().copied(), eps, Some(tau), StoppingConfig::default()) {
                Ok(s) => s,
                Err(_) => continue,
            };
            let k = state.stopped_at().expect("verdict is a stop");
            let err = eigenvector_error_sq(&chain, run.iterate(k).unwrap(), &phi2).unwrap().sqrt();
            assert!(err <= eps, "n={n} eps={eps} k={k} err={err}");
            stops += 1;
        }
    }
    assert!(stops >= 250, "only {stops} stops");
}
