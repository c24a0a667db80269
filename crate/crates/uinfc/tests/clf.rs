use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use uinfc::clf::{dini_derivative_fd, dini_fd, lambda_v, regularize_point, rho_v, Clf, NormClf, DEFAULT_MU_SCHEDULE};
use uinfc::endi::{v_tilde, CalibrationConfig, EndiClf, ThetaGrid};
use uinfc::linalg::{dist, BoxSet};
use uinfc::sampling;

/// `alpha1(s) = s²`, `alpha2(s) = 2s²` with no closed-form inverses, so the
/// bisection paths are exercised.
struct Quadratic;

impl Clf for Quadratic {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, x: &[f64]) -> f64 {
        x[0] * x[0]
    }
    fn decay(&self, x: &[f64]) -> f64 {
        x[0] * x[0]
    }
    fn alpha1(&self, s: f64) -> f64 {
        s * s
    }
    fn alpha2(&self, s: f64) -> f64 {
        2.0 * s * s
    }
    fn nonsmooth_distance(&self, _: &[f64]) -> f64 {
        f64::INFINITY
    }
}

fn abs1() -> NormClf {
    NormClf::new(1, 0.5).unwrap()
}

#[test]
fn dini_examples() {
    let v = abs1();
    assert_eq!(dini_derivative_fd(&v, &[0.0], &[1.0], &DEFAULT_MU_SCHEDULE).unwrap(), 1.0);
    assert_abs_diff_eq!(dini_derivative_fd(&v, &[2.0], &[-1.0], &[0.1, 0.01]).unwrap(), -1.0, epsilon = 1e-12);
    let d = dini_fd(|p| v_tilde([p[0], p[1], p[2]]), &[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0], &DEFAULT_MU_SCHEDULE).unwrap();
    assert!((d + 2.0).abs() <= 0.05, "{d}");
}

#[test]
fn dini_rejects_nonfinite_values() {
    let err = dini_fd(|p| if p[0] > 0.0 { f64::NAN } else { 0.0 }, &[0.0], &[1.0], &[0.1]);
    assert!(matches!(err, Err(uinfc::Error::Evaluation(_))));
}

#[test]
fn radius_map_examples() {
    assert_eq!(rho_v(&abs1(), 0.5).unwrap(), 0.5);
    assert_eq!(rho_v(&Quadratic, 2.0).unwrap(), 4.0);
    assert_eq!(lambda_v(&abs1(), 0.25).unwrap(), 0.25);
    let s = lambda_v(&Quadratic, 2.0).unwrap();
    assert!(s <= 1.0 && s > 1.0 - 1e-12, "{s}");
}

#[test]
fn radius_maps_are_consistent_on_endi_samples() {
    let clf =
        EndiClf::calibrated(ThetaGrid::default(), &BoxSet::symmetric(2, 3.0).unwrap(), &CalibrationConfig::default())
            .unwrap();
    let pts = sampling::ball_points(&[0.0; 5], 1.0, 500, 3).unwrap();
    for x in &pts {
        let n = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        let v = clf.value(x);
        if n > 1e-6 {
            assert!(v >= rho_v(&clf, n).unwrap() * (1.0 - 1e-9), "alpha1 above V at {x:?}");
        }
        if v > 1e-9 {
            assert!(lambda_v(&clf, v).unwrap() <= n * (1.0 + 1e-9), "lambda_V above ‖x‖ at {x:?}");
        }
    }
}

#[test]
fn regularize_examples() {
    let y = regularize_point(&abs1(), &[0.01], 0.1).unwrap();
    assert!(y[0].abs() > 0.05 && (y[0] - 0.01).abs() <= 0.1, "{y:?}");
    assert_eq!(regularize_point(&abs1(), &[5.0], 0.1).unwrap().as_slice(), &[5.0]);

    let clf =
        EndiClf::calibrated(ThetaGrid::default(), &BoxSet::symmetric(2, 3.0).unwrap(), &CalibrationConfig::default())
            .unwrap();
    let y0 = [0.0, 0.0, 0.3, 0.1, 0.1];
    let y = regularize_point(&clf, &y0, 0.02).unwrap();
    assert!(y[0].hypot(y[1]) > 0.01, "{y:?}");
    assert!(dist(&y, &y0) <= 0.02 * (1.0 + 1e-12));
}

proptest! {
    #[test]
    fn regularized_abs_points_leave_the_kink(y in -1.0f64..1.0, chi in 1e-6f64..0.5) {
        let t = regularize_point(&abs1(), &[y], chi).unwrap();
        prop_assert!(t[0].abs() > chi / 2.0);
        prop_assert!((t[0] - y).abs() <= chi * (1.0 + 1e-12));
    }

    #[test]
    fn dini_of_norm_is_bounded_by_one(x in prop::array::uniform3(-2.0f64..2.0), th in prop::array::uniform3(-1.0f64..1.0)) {
        let v = NormClf::new(3, 1.0).unwrap();
        let n = th.iter().map(|c| c * c).sum::<f64>().sqrt();
        prop_assume!(n > 1e-3);
        let theta: Vec<f64> = th.iter().map(|c| c / n).collect();
        let d = dini_derivative_fd(&v, &x, &theta, &DEFAULT_MU_SCHEDULE).unwrap();
        prop_assert!(d.abs() <= 1.0 + 1e-9);
    }
}
