//! The inf-convolution feedback: envelope minimizer, regularization, and an
//! accuracy-controlled choice of the control minimizing `⟨ζ̃, f(ỹ, u)⟩`.

use rand::Rng;

use crate::clf::{regularize_point, Clf};
use crate::error::{Error, Result};
use crate::infconv::InfConvSolver;
use crate::linalg::{dot, BoxSet, ControlVec, StateVec};
use crate::sampling;
use crate::systems::Dynamics;

const STREAM_ETA: u64 = 0x2B;

/// Points per axis of the reference grid for controls entering nonaffinely.
pub const CONTROL_GRID_PER_AXIS: usize = 101;

#[derive(Clone, Debug, PartialEq)]
pub struct UinfcParams {
    pub alpha: f64,
    /// Accuracy of the envelope minimization.
    pub eps_target: f64,
    /// Accuracy of the control selection.
    pub eta_target: f64,
    /// Regularization radius.
    pub chi: f64,
    pub input_set: BoxSet,
    pub seed: u64,
    /// Control coefficients of magnitude at most this are treated as zero.
    pub flat_tol: f64,
}

impl UinfcParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        for (name, v) in [("eps_target", self.eps_target), ("eta_target", self.eta_target), ("flat_tol", self.flat_tol)]
        {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::param(format!("{name} must be finite and ≥ 0, got {v}")));
            }
        }
        if !(self.chi > 0.0) || !self.chi.is_finite() {
            return Err(Error::param(format!("chi must be positive, got {}", self.chi)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepDiagnostics {
    /// Approximate envelope minimizer.
    pub y: StateVec,
    /// Regularized minimizer.
    pub y_tilde: StateVec,
    /// `(x̂ − ỹ)/α²`.
    pub zeta_tilde: StateVec,
    pub eps_achieved: f64,
    pub eta_achieved: f64,
    pub envelope_value: f64,
    /// Objective `⟨ζ̃, f(ỹ, u)⟩` at the applied control.
    pub control_objective: f64,
}

/// Chooses `u` in the box with `⟨ζ, f(ỹ, u)⟩ ≤ inf_box + eta_achieved` and
/// `eta_achieved ≤ eta_target`.
///
/// For control-affine dynamics the infimum sits at a vertex determined by
/// the signs of the control coefficients; axes with coefficient magnitude at
/// most `flat_tol` take the box midpoint. Otherwise the infimum is taken over
/// a [`CONTROL_GRID_PER_AXIS`] grid. A positive `eta_target` moves the control
/// along a segment from the optimum until the objective gap lies in
/// `[eta/2, eta]`; if no admissible control is that suboptimal, the worst
/// candidate is returned instead.
pub fn select_control<D: Dynamics + ?Sized>(
    zeta: &[f64],
    dyn_: &D,
    y_tilde: &[f64],
    input_set: &BoxSet,
    eta_target: f64,
    flat_tol: f64,
    seed: u64,
) -> Result<(ControlVec, f64)> {
    let n = dyn_.state_dim();
    let m = dyn_.control_dim();
    if zeta.len() != n || y_tilde.len() != n || input_set.dim() != m {
        return Err(Error::param("select_control: dimension mismatch"));
    }
    if !(eta_target >= 0.0) || !eta_target.is_finite() {
        return Err(Error::param(format!("eta_target must be finite and ≥ 0, got {eta_target}")));
    }
    let mut f = vec![0.0; n];
    let mut objective = |u: &[f64]| {
        dyn_.rhs_into(y_tilde, u, &mut f);
        dot(zeta, &f)
    };
    let (lo, hi) = (input_set.lower(), input_set.upper());

    let (u_best, u_worst) = if dyn_.control_affine() {
        let mid = input_set.midpoint();
        let base = objective(&mid);
        let mut best = mid.clone();
        let mut worst = mid.clone();
        let mut probe = mid.clone();
        for j in 0..m {
            let half = 0.5 * (hi[j] - lo[j]);
            if half == 0.0 {
                continue;
            }
            probe[j] = hi[j];
            let c = (objective(&probe) - base) / half;
            probe[j] = mid[j];
            if c > flat_tol {
                best[j] = lo[j];
                worst[j] = hi[j];
            } else if c < -flat_tol {
                best[j] = hi[j];
                worst[j] = lo[j];
            }
        }
        (best, worst)
    } else {
        if m > 3 {
            return Err(Error::Resource(format!("grid control search in {m} dimensions is too large")));
        }
        let k = CONTROL_GRID_PER_AXIS;
        let mut idx = vec![0usize; m];
        let mut u = vec![0.0; m];
        let mut best = (Vec::new(), f64::INFINITY);
        let mut worst = (Vec::new(), f64::NEG_INFINITY);
        for _ in 0..k.pow(m as u32) {
            for j in 0..m {
                u[j] = lo[j] + (hi[j] - lo[j]) * idx[j] as f64 / (k - 1) as f64;
            }
            let v = objective(&u);
            if v < best.1 {
                best = (u.clone(), v);
            }
            if v > worst.1 {
                worst = (u.clone(), v);
            }
            for d in idx.iter_mut() {
                *d += 1;
                if *d < k {
                    break;
                }
                *d = 0;
            }
        }
        (best.0, worst.0)
    };

    let v_best = objective(&u_best);
    if eta_target == 0.0 {
        return Ok((ControlVec::new(u_best)?, 0.0));
    }
    let (band_lo, band_hi) = (0.5 * eta_target, eta_target);
    let mut rng = sampling::rng(seed, STREAM_ETA);
    let random_target: Vec<f64> = (0..m).map(|j| lo[j] + (hi[j] - lo[j]) * rng.gen::<f64>()).collect();
    let mut point = vec![0.0; m];
    for target in [&random_target, &u_worst] {
        let mut gap_at = |t: f64, p: &mut [f64]| {
            for j in 0..m {
                p[j] = u_best[j] + t * (target[j] - u_best[j]);
            }
            objective(p) - v_best
        };
        let g1 = gap_at(1.0, &mut point);
        if g1 < band_lo {
            continue;
        }
        if g1 <= band_hi {
            return Ok((ControlVec::new(point)?, g1));
        }
        let (mut t_lo, mut t_hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (t_lo + t_hi);
            let g = gap_at(mid, &mut point);
            if g < band_lo {
                t_lo = mid;
            } else if g > band_hi {
                t_hi = mid;
            } else {
                input_set.clamp(&mut point);
                return Ok((ControlVec::new(point)?, g));
            }
        }
    }
    let gap = objective(&u_worst) - v_best;
    if gap <= band_hi {
        Ok((ControlVec::new(u_worst)?, gap.max(0.0)))
    } else {
        Ok((ControlVec::new(u_best)?, 0.0))
    }
}

/// One controller evaluation at the measured state `x_hat`: envelope
/// minimizer with accuracy `eps_target`, regularization by `chi`,
/// `ζ̃ = (x̂ − ỹ)/α²` and control selection with accuracy `eta_target`.
///
/// `warm_start`, when given, is a predicted minimizer used to seed a local
/// solve instead of a cold multistart.
pub fn uinfc_step<C, D>(
    clf: &C,
    dyn_: &D,
    solver: &InfConvSolver,
    x_hat: &[f64],
    p: &UinfcParams,
    warm_start: Option<&[f64]>,
) -> Result<(ControlVec, StepDiagnostics)>
where
    C: Clf + ?Sized,
    D: Dynamics + ?Sized,
{
    p.validate()?;
    if x_hat.iter().any(|c| !c.is_finite()) {
        return Err(Error::param("measured state is not finite"));
    }
    let res = match warm_start {
        Some(h) => solver.solve_warm(clf, x_hat, p.alpha, p.eps_target, p.seed, h)?,
        None => solver.solve(clf, x_hat, p.alpha, p.eps_target, p.seed)?,
    };
    let y_tilde = regularize_point(clf, &res.y_eps, p.chi)?;
    let a2 = p.alpha * p.alpha;
    let zeta_tilde: Vec<f64> = x_hat.iter().zip(y_tilde.iter()).map(|(x, y)| (x - y) / a2).collect();
    let (u, eta_achieved) =
        select_control(&zeta_tilde, dyn_, &y_tilde, &p.input_set, p.eta_target, p.flat_tol, p.seed)?;
    let mut f = vec![0.0; x_hat.len()];
    dyn_.rhs_into(&y_tilde, &u, &mut f);
    let control_objective = dot(&zeta_tilde, &f);
    Ok((
        u,
        StepDiagnostics {
            y: res.y_eps,
            y_tilde,
            zeta_tilde: StateVec::new(zeta_tilde)?,
            eps_achieved: res.eps_achieved,
            eta_achieved,
            envelope_value: res.envelope_value,
            control_objective,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clf::NormClf;
    use crate::systems::{Endi, SingleIntegrator};

    #[test]
    fn endi_vertex_choice_and_injection() {
        let b = BoxSet::symmetric(2, 3.0).unwrap();
        let zeta = [0.0, 0.0, 0.0, 1.0, -2.0];
        let y = [0.3, -0.2, 0.1, 0.0, 0.5];
        let (u, eta) = select_control(&zeta, &Endi, &y, &b, 0.0, 0.0, 1).unwrap();
        assert_eq!(u.as_slice(), &[-3.0, 3.0]);
        assert_eq!(eta, 0.0);
        let (u, eta) = select_control(&zeta, &Endi, &y, &b, 0.5, 0.0, 1).unwrap();
        let gap = (u[0] - 2.0 * u[1]) - (-3.0 - 6.0);
        assert!((0.25..=0.5).contains(&gap), "{gap}");
        assert!((gap - eta).abs() < 1e-12);
        assert!(b.contains(&u));
    }

    #[test]
    fn flat_objective_takes_midpoint() {
        let b = BoxSet::new(vec![-1.0, 0.0], vec![3.0, 2.0]).unwrap();
        let (u, eta) = select_control(&[1.0, 2.0, 0.0, 0.0, 0.0], &Endi, &[0.0; 5], &b, 0.0, 0.0, 0).unwrap();
        assert_eq!(u.as_slice(), &[1.0, 1.0]);
        assert_eq!(eta, 0.0);
    }

    #[test]
    fn one_dimensional_step() {
        let clf = NormClf::new(1, 0.5).unwrap();
        let p = UinfcParams {
            alpha: 0.5,
            eps_target: 0.0,
            eta_target: 0.0,
            chi: 1e-3,
            input_set: BoxSet::symmetric(1, 1.0).unwrap(),
            seed: 3,
            flat_tol: 1e-9,
        };
        let solver = InfConvSolver::new(1.1);
        let (u, d) = uinfc_step(&clf, &SingleIntegrator { n: 1 }, &solver, &[1.0], &p, None).unwrap();
        assert_eq!(u.as_slice(), &[-1.0]);
        assert!((d.zeta_tilde[0] - 1.0).abs() < 1e-6);
        let p0 = UinfcParams { chi: 1e-12, ..p };
        let (u, d) = uinfc_step(&clf, &SingleIntegrator { n: 1 }, &solver, &[0.0], &p0, None).unwrap();
        assert_eq!(u.as_slice(), &[0.0]);
        assert!(d.zeta_tilde[0].abs() < 1e-9);
    }
}
