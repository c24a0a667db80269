use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use uinfc::clf::{dini_derivative_fd, NormClf};
use uinfc::endi::{CalibrationConfig, EndiClf, ThetaGrid};
use uinfc::infconv::{
    check_prox_subgradient, check_sandwich, moreau_envelope, reference_envelope, InfConvSolver, ReferenceOptions,
};
use uinfc::linalg::{dist, BoxSet};
use uinfc::sampling;

fn abs1() -> NormClf {
    NormClf::new(1, 0.5).unwrap()
}

/// Moreau envelope of `|·|`: the Huber function.
fn huber(x: f64, alpha: f64) -> f64 {
    let a2 = alpha * alpha;
    if x.abs() <= a2 {
        x * x / (2.0 * a2)
    } else {
        x.abs() - a2 / 2.0
    }
}

fn endi_clf() -> EndiClf {
    EndiClf::calibrated(ThetaGrid::default(), &BoxSet::symmetric(2, 3.0).unwrap(), &CalibrationConfig::default())
        .unwrap()
}

#[test]
fn huber_example() {
    let r = moreau_envelope(&abs1(), &[1.0], 0.5, 0.0, 0).unwrap();
    assert_abs_diff_eq!(r.y_eps[0], 0.75, epsilon = 1e-6);
    assert_abs_diff_eq!(r.envelope_value, 0.875, epsilon = 1e-9);
    assert_abs_diff_eq!(r.zeta[0], 1.0, epsilon = 1e-5);
    let z = moreau_envelope(&NormClf::new(3, 1.0).unwrap(), &[0.0; 3], 0.3, 0.0, 0).unwrap();
    assert_eq!(z.envelope_value, 0.0);
    assert!(z.zeta.norm() == 0.0 && z.y_eps.norm() == 0.0);
}

#[test]
fn reference_examples() {
    let opts = ReferenceOptions::default();
    assert_abs_diff_eq!(reference_envelope(&abs1(), &[1.0], 0.5, 1e-4, &opts).unwrap(), 0.875, epsilon = 1e-4);
    assert_eq!(reference_envelope(&abs1(), &[0.0], 0.5, 1e-4, &opts).unwrap(), 0.0);
}

#[test]
fn sandwich_examples() {
    let opts = ReferenceOptions::default();
    assert!(check_sandwich(&abs1(), &[1.0], 0.5, 0.2, 1e-6, &opts).unwrap());
    assert!(check_sandwich(&abs1(), &[0.0], 0.5, 0.2, 1e-6, &opts).unwrap());
    assert!(!check_sandwich(&abs1(), &[1.0], 0.5, 0.1, 1e-6, &opts).unwrap());
}

#[test]
fn prox_examples() {
    let clf = abs1();
    let r = moreau_envelope(&clf, &[1.0], 0.5, 0.0, 0).unwrap();
    let grid: Vec<Vec<f64>> = (0..=600).map(|i| vec![-3.0 + 0.01 * i as f64]).collect();
    assert!(check_prox_subgradient(&clf, &r, &grid, 1e-6));
    assert!(check_prox_subgradient(&clf, &r, &[r.y_eps.to_vec()], 0.0));
    let mut bad = r.clone();
    bad.zeta = uinfc::StateVec::new(vec![r.zeta[0] + 1.0]).unwrap();
    assert!(!check_prox_subgradient(&clf, &bad, &grid, 1e-6));
}

#[test]
fn endi_initial_state_envelope_brackets_the_reference() {
    let clf = endi_clf();
    let x0 = [-1.0, 0.5, 0.2, 0.1, 0.1];
    let r = moreau_envelope(&clf, &x0, 0.1, 1e-6, 1).unwrap();
    let opts = ReferenceOptions::default();
    let coarse = reference_envelope(&clf, &x0, 0.1, 1e-3, &opts).unwrap();
    let fine = reference_envelope(&clf, &x0, 0.1, 1e-7, &opts).unwrap();
    assert!(fine <= coarse);
    assert!(r.envelope_value <= coarse + 1e-6, "{} vs {coarse}", r.envelope_value);
    assert!(r.envelope_value >= fine - 1e-9, "{} vs {fine}", r.envelope_value);
    assert!(r.envelope_value <= fine + 1e-6);
}

#[test]
fn localization_holds_for_endi_cold_solves() {
    let clf = endi_clf();
    let solver = InfConvSolver::for_working_ball(&clf, 1.0, 2000, 3).unwrap();
    let alpha = 0.1;
    let bound = (2.0 * solver.v_bar).sqrt() * alpha;
    for (i, x) in sampling::ball_points(&[0.0; 5], 1.0, 30, 8).unwrap().iter().enumerate() {
        let r = solver.solve(&clf, x, alpha, 1e-4, i as u64).unwrap();
        assert!(dist(&r.y_eps, x) <= bound);
        assert!(r.eps_achieved <= 1e-4);
    }
}

proptest! {
    #[test]
    fn abs_envelope_matches_huber(x in -2.0f64..2.0, alpha in 0.05f64..0.95) {
        let r = moreau_envelope(&abs1(), &[x], alpha, 0.0, 0).unwrap();
        prop_assert!((r.envelope_value - huber(x, alpha)).abs() <= 1e-9);
    }

    #[test]
    fn envelope_is_monotone_in_alpha(x in -2.0f64..2.0, a in 0.05f64..0.9, b in 0.05f64..0.9) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let v_lo = moreau_envelope(&abs1(), &[x], lo, 0.0, 0).unwrap().envelope_value;
        let v_hi = moreau_envelope(&abs1(), &[x], hi, 0.0, 0).unwrap().envelope_value;
        prop_assert!(v_hi <= v_lo + 1e-9);
        prop_assert!(v_lo <= x.abs() + 1e-12);
    }

    #[test]
    fn injected_gap_is_within_target(x in -2.0f64..2.0, eps in 1e-8f64..1e-2, seed in 0u64..1000) {
        let r = moreau_envelope(&abs1(), &[x], 0.3, eps, seed).unwrap();
        let gap = r.envelope_value - huber(x, 0.3);
        prop_assert!(gap <= eps + 1e-9);
        prop_assert!(r.eps_achieved <= eps);
    }

    #[test]
    fn zeta_is_a_proximal_subgradient_direction(x in -2.0f64..2.0, theta in prop_oneof![Just(1.0f64), Just(-1.0f64)]) {
        let clf = abs1();
        let r = moreau_envelope(&clf, &[x], 0.3, 0.0, 0).unwrap();
        prop_assume!(r.y_eps[0].abs() > 1e-3);
        let d = dini_derivative_fd(&clf, &r.y_eps, &[theta], &[1e-5, 1e-6]).unwrap();
        prop_assert!(r.zeta[0] * theta <= d + 1e-3);
    }
}
