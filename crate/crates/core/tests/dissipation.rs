mod common;

use proptest::prelude::*;
use spectral_relax::trajectory::{active_ledger, dissipation_step, project_initial, transport_residual};
use spectral_relax::spectral_decomposition;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn matrix_dissipation_matches_quadratic_form(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let chain = common::random_chain(&mut rng, 30);
        let mut g = common::centered(&chain, &mut rng);
        let e0 = chain.pi_norm_sq(&g).unwrap();
        for _ in 0..=200 {
            let pg = chain.kernel() * &g;
            let gen = &g - &pg;
            let gen2 = &gen - chain.kernel() * &gen;
            let form = chain.pi_inner(&g, &(gen * 2.0 - gen2)).unwrap();
            let drop = chain.pi_norm_sq(&g).unwrap() - chain.pi_norm_sq(&pg).unwrap();
            prop_assert!((drop - form).abs() <= 1e-12 * e0);
            g = pg;
        }
    }

    #[test]
    fn spectral_dissipation_matches_matrix_path(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let chain = common::random_chain(&mut rng, 30);
        let g = common::centered(&chain, &mut rng);
        let decomp = spectral_decomposition(&chain).unwrap();
        let profile = project_initial(&decomp, &chain, &g).unwrap();
        let energies = common::oracle_energies(&chain, &g, 200);
        let e0 = energies[0];
        for k in 0..200u64 {
            let step = match dissipation_step(&profile, k) {
                Ok(s) => s,
                Err(_) => break,
            };
            prop_assert!((step.delta_e - (step.e_k - step.e_k1)).abs() <= 1e-12 * e0);
            prop_assert!((step.e_k - energies[k as usize]).abs() <= 1e-10 * e0);
            let d = (step.e_k - step.e_k1) / step.e_k;
            prop_assert!((step.relative - d).abs() <= 1e-10 * d.abs().max(1e-300) + 1e-15);
        }
    }

    #[test]
    fn modewise_terms_and_second_moment(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let chain = common::random_chain(&mut rng, 30);
        let g = common::centered(&chain, &mut rng);
        let decomp = spectral_decomposition(&chain).unwrap();
        let profile = project_initial(&decomp, &chain, &g).unwrap();
        for k in 0..200u64 {
            let (now, later) = match (active_ledger(&profile, k), active_ledger(&profile, k + 2)) {
                (Ok(a), Ok(b)) => (a, b),
                _ => break,
            };
            let step = dissipation_step(&profile, k).unwrap();
            for (i, m) in profile.modes().iter().enumerate() {
                let n_k = m.log_energy_at(k).exp();
                let n_k1 = m.log_energy_at(k + 1).exp();
                let direct = n_k - n_k1;
                prop_assert!((step.modewise_terms[i] - direct).abs() <= 1e-12 * n_k + 1e-300, "k={} lambda={} term={} direct={} n_k={}", k, m.lambda, step.modewise_terms[i], direct, n_k);
            }
            let ratio = (later.log_e - now.log_e).exp();
            let moment: f64 = now.p.iter().zip(profile.modes()).map(|(p, m)| p * m.lambda.powi(4)).sum();
            prop_assert!((ratio - moment).abs() <= 1e-12 * moment);
            prop_assert!(transport_residual(&profile, k).unwrap() <= 1e-12);
        }
    }
}
