//! Control Lyapunov function abstraction, finite-difference Dini derivatives,
//! class-K radius maps and regularization of points off the nonsmooth set.

use crate::error::{Error, Result};
use crate::linalg::{norm, StateVec};

/// Default step schedule for finite-difference Dini derivatives.
/// Escape steps have length `ESCAPE_STEP·chi`, leaving room below `chi` for
/// rounding.
pub const ESCAPE_STEP: f64 = 0.75;

pub const DEFAULT_MU_SCHEDULE: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// A control Lyapunov function together with its decay rate, class-K∞
/// envelope and an oracle for the set where `V` is not locally homogeneous.
///
/// Implementations must be pure; they are shared across threads.
pub trait Clf: Send + Sync {
    fn dim(&self) -> usize;

    /// `V(x)`.
    fn value(&self, x: &[f64]) -> f64;

    /// Decay rate `w(x) > 0` for `x ≠ 0`.
    fn decay(&self, x: &[f64]) -> f64;

    /// Lower class-K∞ bound: `alpha1(‖x‖) ≤ V(x)`.
    fn alpha1(&self, s: f64) -> f64;

    /// Upper class-K∞ bound: `V(x) ≤ alpha2(‖x‖)`.
    fn alpha2(&self, s: f64) -> f64;

    /// Closed-form inverse of `alpha1`, when available.
    fn alpha1_inv(&self, _v: f64) -> Option<f64> {
        None
    }

    /// Closed-form inverse of `alpha2`, when available.
    fn alpha2_inv(&self, _v: f64) -> Option<f64> {
        None
    }

    /// Distance from `x` to the set where difference quotients of `V` fail
    /// to stabilize.
    fn nonsmooth_distance(&self, x: &[f64]) -> f64;

    /// A point within `chi` of `y` that is farther than `chi / 2` from the
    /// nonsmooth set. The default moves by [`ESCAPE_STEP`]`·chi` along the signed coordinate
    /// direction that increases the distance most; ties go to the lowest
    /// index and to the positive sign.
    fn nonsmooth_escape(&self, y: &[f64], chi: f64) -> Vec<f64> {
        coordinate_escape(self, y, chi)
    }
}

fn coordinate_escape<C: Clf + ?Sized>(clf: &C, y: &[f64], chi: f64) -> Vec<f64> {
    let mut best = y.to_vec();
    let mut best_d = f64::NEG_INFINITY;
    let mut trial = y.to_vec();
    for i in 0..y.len() {
        for sign in [1.0, -1.0] {
            trial[i] = y[i] + sign * ESCAPE_STEP * chi;
            let d = clf.nonsmooth_distance(&trial);
            if d > best_d {
                best_d = d;
                best.copy_from_slice(&trial);
            }
            trial[i] = y[i];
        }
    }
    best
}

/// `min` over the schedule of `(V(x + μθ) − V(x)) / μ`, a finite-difference
/// surrogate for the lower Dini derivative of `V` at `x` along `θ`.
pub fn dini_derivative_fd<C: Clf + ?Sized>(clf: &C, x: &[f64], theta: &[f64], mu_schedule: &[f64]) -> Result<f64> {
    dini_fd(|y| clf.value(y), x, theta, mu_schedule)
}

/// [`dini_derivative_fd`] for a bare function.
pub fn dini_fd<F: Fn(&[f64]) -> f64>(value: F, x: &[f64], theta: &[f64], mu_schedule: &[f64]) -> Result<f64> {
    if mu_schedule.is_empty() {
        return Err(Error::param("mu schedule is empty"));
    }
    if mu_schedule.iter().any(|m| !(*m > 0.0)) || mu_schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::param("mu schedule must be positive and strictly decreasing"));
    }
    if x.len() != theta.len() {
        return Err(Error::param("direction dimension differs from state dimension"));
    }
    let v0 = value(x);
    if !v0.is_finite() {
        return Err(Error::Evaluation(format!("V is not finite at {x:?}")));
    }
    let mut shifted = x.to_vec();
    let mut best = f64::INFINITY;
    for &mu in mu_schedule {
        for i in 0..x.len() {
            shifted[i] = x[i] + mu * theta[i];
        }
        let v = value(&shifted);
        if !v.is_finite() {
            return Err(Error::Evaluation(format!("V is not finite at {shifted:?}")));
        }
        best = best.min((v - v0) / mu);
    }
    Ok(best)
}

/// `ρ_V(r) = alpha1(r)`: `V(x) ≤ ρ_V(r)` implies `‖x‖ ≤ r`.
pub fn rho_v<C: Clf + ?Sized>(clf: &C, r: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::param(format!("rho_V needs r > 0, got {r}")));
    }
    Ok(clf.alpha1(r))
}

/// `λ_V(v) = alpha2⁻¹(v)`: `V(x) ≥ v` implies `‖x‖ ≥ λ_V(v)`.
///
/// Without a closed-form inverse the value is bracketed by bisection and the
/// lower end of the final bracket is returned, which keeps the implication
/// valid.
pub fn lambda_v<C: Clf + ?Sized>(clf: &C, v: f64) -> Result<f64> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::param(format!("lambda_V needs v > 0, got {v}")));
    }
    if let Some(s) = clf.alpha2_inv(v) {
        return Ok(s);
    }
    let (lo, _) = bracket_inverse(|s| clf.alpha2(s), v)?;
    Ok(lo)
}

/// `alpha1⁻¹(v)`, rounded up when computed by bisection so that
/// `V(x) ≤ v` still implies `‖x‖ ≤ alpha1⁻¹(v)`.
pub fn alpha1_inverse<C: Clf + ?Sized>(clf: &C, v: f64) -> Result<f64> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::param(format!("alpha1 inverse needs v ≥ 0, got {v}")));
    }
    if v == 0.0 {
        return Ok(0.0);
    }
    if let Some(s) = clf.alpha1_inv(v) {
        return Ok(s);
    }
    let (_, hi) = bracket_inverse(|s| clf.alpha1(s), v)?;
    Ok(hi)
}

fn bracket_inverse<F: Fn(f64) -> f64>(g: F, v: f64) -> Result<(f64, f64)> {
    let mut lo = 0.0;
    let mut hi = 1.0;
    while !(g(hi) >= v) {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::config(format!("class-K bound never reaches {v}; cannot bracket its inverse")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) >= v {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo, hi))
}

/// Returns a point `ỹ` with `‖ỹ − y‖ ≤ chi` and `nonsmooth_distance(ỹ) > chi/2`.
/// Points that already satisfy the distance condition are returned unchanged.
///
/// The CLF's own escape is tried first; if it does not satisfy both
/// conditions, pairwise diagonal steps of length [`ESCAPE_STEP`]`·chi` are tried in a
/// fixed order.
pub fn regularize_point<C: Clf + ?Sized>(clf: &C, y: &[f64], chi: f64) -> Result<StateVec> {
    if !(chi > 0.0) || !chi.is_finite() {
        return Err(Error::param(format!("chi must be positive, got {chi}")));
    }
    let half = 0.5 * chi;
    if clf.nonsmooth_distance(y) > half {
        return StateVec::try_from(y);
    }
    let ok = |c: &[f64]| {
        let step: Vec<f64> = c.iter().zip(y).map(|(a, b)| a - b).collect();
        norm(&step) <= chi && clf.nonsmooth_distance(c) > half
    };
    let first = clf.nonsmooth_escape(y, chi);
    if first.len() == y.len() && ok(&first) {
        return StateVec::new(first);
    }
    let s = ESCAPE_STEP * chi / std::f64::consts::SQRT_2;
    let n = y.len();
    let mut trial = y.to_vec();
    for i in 0..n {
        for j in (i + 1)..n {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                trial.copy_from_slice(y);
                trial[i] += si * s;
                trial[j] += sj * s;
                if ok(&trial) {
                    return StateVec::new(trial);
                }
            }
        }
    }
    Err(Error::Regularization(format!("no point within {chi} of {y:?} is farther than {half} from the nonsmooth set")))
}

/// `V(x) = ‖x‖` with decay `w(x) = gain·‖x‖` and identity class-K bounds.
/// In one dimension this is `|x|`, whose only nonsmooth point is the origin.
#[derive(Clone, Debug)]
pub struct NormClf {
    dim: usize,
    decay_gain: f64,
}

impl NormClf {
    pub fn new(dim: usize, decay_gain: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dimension must be at least 1"));
        }
        if !(decay_gain > 0.0) || !decay_gain.is_finite() {
            return Err(Error::param(format!("decay gain must be positive, got {decay_gain}")));
        }
        Ok(Self { dim, decay_gain })
    }
}

impl Clf for NormClf {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        norm(x)
    }

    fn decay(&self, x: &[f64]) -> f64 {
        self.decay_gain * norm(x)
    }

    fn alpha1(&self, s: f64) -> f64 {
        s
    }

    fn alpha2(&self, s: f64) -> f64 {
        s
    }

    fn alpha1_inv(&self, v: f64) -> Option<f64> {
        Some(v)
    }

    fn alpha2_inv(&self, v: f64) -> Option<f64> {
        Some(v)
    }

    fn nonsmooth_distance(&self, x: &[f64]) -> f64 {
        norm(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Squared;

    impl Clf for Squared {
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
        fn nonsmooth_distance(&self, _x: &[f64]) -> f64 {
            f64::INFINITY
        }
    }

    #[test]
    fn dini_of_abs() {
        let v = NormClf::new(1, 0.5).unwrap();
        assert_eq!(dini_derivative_fd(&v, &[0.0], &[1.0], &DEFAULT_MU_SCHEDULE).unwrap(), 1.0);
        let d = dini_derivative_fd(&v, &[2.0], &[-1.0], &[0.1, 0.01]).unwrap();
        assert!((d + 1.0).abs() < 1e-12);
    }

    #[test]
    fn dini_rejects_bad_schedules() {
        let v = NormClf::new(1, 0.5).unwrap();
        assert!(dini_derivative_fd(&v, &[0.0], &[1.0], &[]).is_err());
        assert!(dini_derivative_fd(&v, &[0.0], &[1.0], &[0.1, 0.1]).is_err());
        assert!(dini_derivative_fd(&v, &[0.0], &[1.0], &[0.01, 0.1]).is_err());
    }

    #[test]
    fn radius_maps() {
        let v = NormClf::new(1, 0.5).unwrap();
        assert_eq!(rho_v(&v, 0.5).unwrap(), 0.5);
        assert_eq!(lambda_v(&v, 0.25).unwrap(), 0.25);
        assert_eq!(rho_v(&Squared, 2.0).unwrap(), 4.0);
        let l = lambda_v(&Squared, 2.0).unwrap();
        assert!(l <= 1.0 && 1.0 - l < 1e-12, "{l}");
        let a = alpha1_inverse(&Squared, 4.0).unwrap();
        assert!(a >= 2.0 && a - 2.0 < 1e-12);
        assert!(rho_v(&v, 0.0).is_err());
        assert!(lambda_v(&v, -1.0).is_err());
    }

    #[test]
    fn unbracketable_inverse_is_config_error() {
        struct Flat;
        impl Clf for Flat {
            fn dim(&self) -> usize {
                1
            }
            fn value(&self, x: &[f64]) -> f64 {
                x[0].abs()
            }
            fn decay(&self, _x: &[f64]) -> f64 {
                1.0
            }
            fn alpha1(&self, s: f64) -> f64 {
                s / (1.0 + s)
            }
            fn alpha2(&self, s: f64) -> f64 {
                s / (1.0 + s)
            }
            fn nonsmooth_distance(&self, x: &[f64]) -> f64 {
                x[0].abs()
            }
        }
        assert!(matches!(lambda_v(&Flat, 2.0), Err(Error::Config(_))));
    }

    #[test]
    fn regularize_abs_examples() {
        let v = NormClf::new(1, 0.5).unwrap();
        let y = regularize_point(&v, &[0.01], 0.1).unwrap();
        assert!(y[0].abs() > 0.05 && (y[0] - 0.01).abs() <= 0.1);
        assert_eq!(regularize_point(&v, &[5.0], 0.1).unwrap().as_slice(), &[5.0]);
        assert!(regularize_point(&v, &[5.0], 0.0).is_err());
    }

    #[test]
    fn regularize_reports_inconsistent_oracle() {
        struct Hopeless;
        impl Clf for Hopeless {
            fn dim(&self) -> usize {
                2
            }
            fn value(&self, x: &[f64]) -> f64 {
                norm(x)
            }
            fn decay(&self, x: &[f64]) -> f64 {
                norm(x)
            }
            fn alpha1(&self, s: f64) -> f64 {
                s
            }
            fn alpha2(&self, s: f64) -> f64 {
                s
            }
            fn nonsmooth_distance(&self, _x: &[f64]) -> f64 {
                0.0
            }
        }
        assert!(matches!(regularize_point(&Hopeless, &[0.0, 0.0], 0.1), Err(Error::Regularization(_))));
    }
}
