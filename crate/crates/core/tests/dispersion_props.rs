use std::f64::consts::PI;

use phantom::dispersion::{
    evaluate_point, tissue_spectrum, ColeColeParams, FrequencyGrid, Pole, TissueId, TissueLibrary, TissueModel,
};
use proptest::prelude::*;

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.log10()..hi.log10()).prop_map(|e| 10f64.powf(e))
}

/// Broadening limited to 0.2: with stronger broadening the relaxation tails
/// decay too slowly for the fixed-offset limit frequencies.
fn pole() -> impl Strategy<Value = Pole> {
    (log_uniform(1.0, 1e4), log_uniform(1e-9, 1e-3), 0.0..0.2f64).prop_map(|(d, t, a)| Pole::new(d, t, a))
}

fn params(max_poles: usize) -> impl Strategy<Value = ColeColeParams> {
    (
        1.0..100.0f64,
        prop::collection::vec(pole(), 1..=max_poles),
        0.01..2.0f64,
    )
        .prop_map(|(e, p, s)| ColeColeParams::new(e, p, s).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn static_limit(p in params(4)) {
        let max_tau = p.poles.iter().map(|q| q.tau).fold(0.0, f64::max);
        let f = 1e-4 / (2.0 * PI * max_tau);
        let pt = evaluate_point(&p, f).unwrap();
        let expect = p.eps_inf + p.poles.iter().map(|q| q.delta_eps).sum::<f64>();
        prop_assert!((pt.rel_permittivity / expect - 1.0).abs() < 1e-3);
        prop_assert!((pt.conductivity / p.sigma_ionic - 1.0).abs() < 1e-3);
    }

    #[test]
    fn high_frequency_limit(eps_inf in 1.0..100.0f64, ratio in 0.01..20.0f64, tau in log_uniform(1e-9, 1e-3), alpha in 0.0..0.2f64) {
        let p = ColeColeParams::new(eps_inf, vec![Pole::new(ratio * eps_inf, tau, alpha)], 0.1).unwrap();
        let pt = evaluate_point(&p, 1e4 / (2.0 * PI * tau)).unwrap();
        prop_assert!((pt.rel_permittivity / eps_inf - 1.0).abs() < 1e-2);
    }

    #[test]
    fn debye_permittivity_non_increasing(eps_inf in 1.0..100.0f64, d in log_uniform(1.0, 1e5), tau in log_uniform(1e-10, 1e-2)) {
        let p = ColeColeParams::new(eps_inf, vec![Pole::new(d, tau, 0.0)], 0.1).unwrap();
        let grid = FrequencyGrid::default();
        let eps: Vec<f64> = grid.points().iter().map(|&f| evaluate_point(&p, f).unwrap().rel_permittivity).collect();
        for w in eps.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn conductivity_non_decreasing(
        eps_inf in 1.0..100.0f64,
        poles in prop::collection::vec((log_uniform(1.0, 1e7), log_uniform(1e-12, 1e-1), 0.0..0.95f64), 1..=4),
        sigma in 1e-4..2.0f64,
    ) {
        let p = ColeColeParams::new(eps_inf, poles.into_iter().map(|(d, t, a)| Pole::new(d, t, a)).collect(), sigma).unwrap();
        let grid = FrequencyGrid::default();
        let s: Vec<f64> = grid.points().iter().map(|&f| evaluate_point(&p, f).unwrap().conductivity).collect();
        for w in s.windows(2) {
            prop_assert!(w[1] >= w[0] * (1.0 - 1e-12), "{} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn debye_midpoint_is_exact() {
    let p = ColeColeParams::new(4.0, vec![Pole::new(50.0, 1e-7, 0.0)], 0.2).unwrap();
    let pt = evaluate_point(&p, 1.0 / (2.0 * PI * 1e-7)).unwrap();
    assert!((pt.rel_permittivity - 29.0).abs() <= 4.0 * f64::EPSILON * 29.0);
}

#[test]
fn spectrum_equals_pointwise_evaluation() {
    let library = TissueLibrary::bundled();
    let grid = FrequencyGrid::default();
    for model in library.iter() {
        let s = tissue_spectrum(model, &grid).unwrap();
        for (i, &f) in grid.points().iter().enumerate() {
            let pt = evaluate_point(&model.params, f).unwrap();
            assert_eq!(s.rel_permittivity()[i], pt.rel_permittivity);
            assert_eq!(s.conductivity()[i], pt.conductivity);
        }
    }
}

#[test]
fn bundled_library_has_all_tissues() {
    let library = TissueLibrary::bundled();
    assert_eq!(library.ids().collect::<Vec<_>>(), TissueId::ALL);
}

#[test]
fn bundled_tissues_follow_expected_trends() {
    // Over the working band every tissue's permittivity falls and its
    // conductivity rises with frequency.
    let grid = FrequencyGrid::default();
    for model in TissueLibrary::bundled().iter() {
        let s = tissue_spectrum(model, &grid).unwrap();
        assert!(
            s.rel_permittivity().windows(2).all(|w| w[1] <= w[0]),
            "{}",
            model.tissue_id
        );
        assert!(s.conductivity().windows(2).all(|w| w[1] >= w[0]), "{}", model.tissue_id);
    }
}

#[test]
fn user_library_round_trips() {
    let models: Vec<TissueModel> = TissueLibrary::bundled().iter().cloned().collect();
    let lib = TissueLibrary::from_models(models).unwrap();
    let again = TissueLibrary::from_json_str(&lib.to_json_string()).unwrap();
    assert_eq!(lib, again);
}
