mod common;

use proptest::prelude::*;
use rand::Rng;
use spectral_relax::first_passage::{absorb, tail_ratio_bound, Start};
use spectral_relax::spectral_decomposition;
use spectral_relax::zoo::barbell_metastable;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn absorbed_spectrum_interlaces(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let chain = common::random_chain(&mut rng, 25);
        let full = spectral_decomposition(&chain).unwrap();
        for a in 0..chain.n() {
            let model = absorb(&chain, a).unwrap();
            let report = model.interlacing(full.eigenvalues(), 1e-9).unwrap();
            prop_assert!(report.holds, "a={a} {report:?}");
            prop_assert!(model.spectrum().iter().all(|v| v.abs() < 1.0));
            prop_assert!(model.nu2() > 0.0);
        }
    }

    #[test]
    fn tail_two_ways_agree(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let chain = common::random_chain(&mut rng, 25);
        let a = rng.random_range(0..chain.n());
        let model = absorb(&chain, a).unwrap();
        let mut custom: Vec<f64> = (0..chain.n()).map(|x| if x == a { 0.0 } else { rng.random::<f64>() + 0.01 }).collect();
        let total: f64 = custom.iter().sum();
        custom.iter_mut().for_each(|x| *x /= total);
        for start in [Start::Uniform, Start::RestrictedPi, Start::QuasiStationary, Start::Custom(custom)] {
            let alphas = model.tail_coefficients(&start).unwrap();
            prop_assert!((alphas.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
            for p in model.tail_series(&start, 200).unwrap() {
                prop_assert!((p.matrix - p.spectral).abs() <= 1e-10, "{start:?} {p:?}");
                prop_assert!(p.matrix <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn log_tail_becomes_linear(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let chain = common::random_chain(&mut rng, 15);
        let model = absorb(&chain, 0).unwrap();
        let nu = model.spectrum();
        prop_assume!(nu.len() >= 2);
        let gap = nu[1..].iter().map(|v| v.abs()).fold(0.0, f64::max) / nu[0];
        prop_assume!(gap < 0.97);
        let alphas = model.tail_coefficients(&Start::RestrictedPi).unwrap();
        let k0 = ((1e-9f64).ln() / gap.ln()).ceil().max(1.0) as u64;
        prop_assume!(nu[0].powi(k0 as i32 + 20) > 1e-250);
        let series = model.tail_series(&Start::RestrictedPi, k0 + 20).unwrap();
        let shifted: Vec<f64> = series[k0 as usize..]
            .iter()
            .map(|p| p.spectral.ln() - p.k as f64 * nu[0].ln())
            .collect();
        let spread = shifted.iter().fold(f64::NEG_INFINITY, |m, x| m.max(*x))
            - shifted.iter().fold(f64::INFINITY, |m, x| m.min(*x));
        prop_assert!(spread <= 1e-6, "{spread}");
        prop_assert!((shifted[20] - alphas[0].ln()).abs() <= 1e-6);
    }

    #[test]
    fn ratio_bound_dominates_relative_error(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let chain = common::random_chain(&mut rng, 20);
        let model = absorb(&chain, rng.random_range(0..chain.n())).unwrap();
        let alphas = model.tail_coefficients(&Start::Uniform).unwrap();
        prop_assume!(alphas[0].abs() > 1e-12);
        for p in model.tail_series(&Start::Uniform, 120).unwrap() {
            let approx = alphas[0] * model.nu2().powi(p.k as i32);
            if approx <= 1e-280 {
                break;
            }
            let actual = (p.spectral / approx - 1.0).abs();
            let bound = tail_ratio_bound(&alphas, model.spectrum(), p.k).unwrap();
            prop_assert!(actual <= bound * (1.0 + 1e-9) + 1e-12, "k={} {actual} {bound}", p.k);
        }
    }
}

/// Absorbing inside one well leaves a within-well mode `ν₃ ≈ 2/3`, far above
/// the full chain's `λ₃ ≈ 0.002`; the tail converges at `ν₃/ν₂`, not `λ₃/ν₂`.
#[test]
fn barbell_tail_converges_at_absorbed_gap() {
    let chain = barbell_metastable();
    let full = spectral_decomposition(&chain).unwrap();
    let l3 = full.eigenvalues()[2..].iter().map(|l| l.abs()).fold(0.0, f64::max);
    assert!(l3 < 0.01);
    let model = absorb(&chain, 0).unwrap();
    let nu = model.spectrum();
    let nu2 = nu[0];
    let nu3 = nu[1..].iter().map(|v| v.abs()).fold(0.0, f64::max);
    assert!(nu2 > 0.99);
    assert!((nu3 - 2.0 / 3.0).abs() < 0.01);
    let alphas = model.tail_coefficients(&Start::Uniform).unwrap();
    let init = tail_ratio_bound(&alphas, nu, 0).unwrap();
    let series = model.tail_series(&Start::Uniform, 100).unwrap();
    for p in &series {
        let actual = (p.spectral / (alphas[0] * nu2.powi(p.k as i32)) - 1.0).abs();
        assert!(actual <= init * (nu3 / nu2).powi(p.k as i32) * (1.0 + 1e-9) + 1e-12, "k={}", p.k);
    }
    let p = &series[5];
    let actual = (p.spectral / (alphas[0] * nu2.powi(5)) - 1.0).abs();
    assert!(actual > init * (l3 / nu2).powi(5));
}
