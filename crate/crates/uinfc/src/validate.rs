//! Built-in property suite run by `uinfc validate`.

use std::sync::Arc;

use crate::bounds::{compute_bounds, BoundsReport, EstimationConfig};
use crate::clf::{Clf, NormClf};
use crate::controller::UinfcParams;
use crate::endi::{f_tilde_grid_min, v_tilde, CalibrationConfig, EndiClf, ThetaGrid};
use crate::error::Result;
use crate::infconv::{
    check_prox_subgradient, check_sandwich, lemma2_alpha, InfConvResult, InfConvSolver, ReferenceOptions,
};
use crate::linalg::{dist, BoxSet, StateVec};
use crate::sampling;
use crate::sim::{decay_audit, simulate, ShRunConfig};
use crate::systems::{NoiseModel, SingleIntegrator};

/// Fault injection for exercising the suite itself.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ValidationHooks {
    /// Added to every component of `ζ` before the proximal checks.
    pub zeta_offset: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Case = fn(&ValidationHooks) -> Result<(bool, String)>;

const CASES: &[(&str, Case)] = &[
    ("localization_abs", localization_abs),
    ("localization_endi", localization_endi),
    ("sandwich_abs", sandwich_abs),
    ("prox_inequality_abs", prox_abs),
    ("prox_inequality_endi", prox_endi),
    ("decay_audit_abs", decay_audit_abs),
    ("endi_clf_closed_form", endi_closed_form),
];

/// Names of the suite's checks in execution order.
pub fn list() -> Vec<&'static str> {
    CASES.iter().map(|c| c.0).collect()
}

/// Runs every check. Errors inside a check count as failures.
pub fn run_suite(hooks: &ValidationHooks) -> Vec<ValidationOutcome> {
    CASES
        .iter()
        .map(|(name, case)| match case(hooks) {
            Ok((passed, detail)) => ValidationOutcome { name, passed, detail },
            Err(e) => ValidationOutcome { name, passed: false, detail: format!("error: {e}") },
        })
        .collect()
}

fn abs_clf() -> NormClf {
    NormClf::new(1, 0.5).expect("valid gain")
}

/// ENDI CLF calibrated on the default case-study input box.
pub fn default_endi_clf() -> Result<EndiClf> {
    EndiClf::calibrated(ThetaGrid::default(), &BoxSet::symmetric(2, 3.0)?, &CalibrationConfig::default())
}

fn localization<C: Clf>(clf: &C, radius: f64, count: usize, alpha: f64) -> Result<(bool, String)> {
    let solver = InfConvSolver::for_working_ball(clf, radius, 2000, 3)?;
    let bound = (2.0 * solver.v_bar).sqrt() * alpha;
    let pts = sampling::ball_points(&vec![0.0; clf.dim()], radius, count, 17)?;
    let mut worst = 0.0f64;
    for (i, x) in pts.iter().enumerate() {
        let eps = 1e-3 * (i % 4) as f64;
        let res = solver.solve(clf, x, alpha, eps, i as u64)?;
        worst = worst.max(dist(&res.y_eps, x) / bound);
    }
    Ok((worst <= 1.0, format!("max ‖y − x‖/(√(2V̄)α) = {worst:.4}")))
}

fn localization_abs(_: &ValidationHooks) -> Result<(bool, String)> {
    localization(&abs_clf(), 1.0, 200, 0.1)
}

fn localization_endi(_: &ValidationHooks) -> Result<(bool, String)> {
    localization(&default_endi_clf()?, 1.0, 20, 0.1)
}

fn sandwich_abs(_: &ValidationHooks) -> Result<(bool, String)> {
    let clf = abs_clf();
    let eps1 = 0.01;
    let alpha = lemma2_alpha(1.1, 1.0, eps1);
    let opts = ReferenceOptions { v_bar: 1.1, lattice_budget: 33 };
    let pts = sampling::ball_points(&[0.0], 1.0, 200, 5)?;
    let mut fails = 0;
    for x in &pts {
        if !check_sandwich(&clf, x, alpha, eps1, 1e-6, &opts)? {
            fails += 1;
        }
    }
    Ok((fails == 0, format!("α = {alpha:.3e}, {fails} of {} states violate", pts.len())))
}

fn corrupt(mut res: InfConvResult, hooks: &ValidationHooks) -> Result<InfConvResult> {
    if hooks.zeta_offset != 0.0 {
        let z: Vec<f64> = res.zeta.iter().map(|c| c + hooks.zeta_offset).collect();
        res.zeta = StateVec::new(z)?;
    }
    Ok(res)
}

fn prox<C: Clf>(clf: &C, count: usize, alpha: f64, hooks: &ValidationHooks) -> Result<(bool, String)> {
    let n = clf.dim();
    let solver = InfConvSolver::for_working_ball(clf, 1.0, 2000, 3)?;
    let pts = sampling::ball_points(&vec![0.0; n], 1.0, count, 23)?;
    let mut rng = sampling::rng(29, 0);
    let mut fails = 0;
    for (i, x) in pts.iter().enumerate() {
        let res = corrupt(solver.solve(clf, x, alpha, 0.0, i as u64)?, hooks)?;
        let probes: Vec<Vec<f64>> = (0..100)
            .map(|_| {
                let d = sampling::uniform_in_ball(&mut rng, n, 0.5);
                res.y_eps.iter().zip(d).map(|(y, d)| y + d).collect()
            })
            .collect();
        if !check_prox_subgradient(clf, &res, &probes, 1e-6) {
            fails += 1;
        }
    }
    Ok((fails == 0, format!("{fails} of {} results violate at 100 probes each", pts.len())))
}

fn prox_abs(hooks: &ValidationHooks) -> Result<(bool, String)> {
    prox(&abs_clf(), 200, 0.1, hooks)
}

fn prox_endi(hooks: &ValidationHooks) -> Result<(bool, String)> {
    prox(&default_endi_clf()?, 20, 0.1, hooks)
}

/// Closed loop for `ẋ = u`, `V = |x|`, `w = |x|/2`, `𝕌 = [−1, 1]` run
/// at the certified sampling time, accuracies and regularization radius.
/// `eps_scale` multiplies the certified envelope accuracy `ε̄²`.
pub fn certified_abs_run(x0: f64, horizon: usize, eps_scale: f64) -> Result<(ShRunConfig, BoundsReport)> {
    let clf = abs_clf();
    let input_set = BoxSet::symmetric(1, 1.0)?;
    let rep = compute_bounds(
        &clf,
        &SingleIntegrator { n: 1 },
        1.0,
        0.25,
        0.0,
        0.0,
        None,
        &input_set,
        &EstimationConfig::default(),
    )?;
    let solver = InfConvSolver::for_working_ball(&clf, 1.0, 2000, 3)?;
    let cfg = ShRunConfig {
        dyn_: Arc::new(SingleIntegrator { n: 1 }),
        clf: Arc::new(clf),
        params: UinfcParams {
            alpha: rep.alpha,
            eps_target: eps_scale * rep.eps_bar * rep.eps_bar,
            eta_target: rep.eta_bar,
            chi: rep.chi_bar,
            input_set,
            seed: 41,
            flat_tol: 0.0,
        },
        reference: ReferenceOptions { v_bar: solver.v_bar, lattice_budget: 33 },
        solver,
        delta: rep.delta_bar,
        substeps: 10,
        horizon_samples: horizon,
        x0: StateVec::new(vec![x0])?,
        meas_noise: NoiseModel::zero(),
        dist_noise: NoiseModel::zero(),
        r: 0.25,
        big_r: 1.0,
        audit_stride: 0,
        audit_grid_step: 1e-3,
    };
    Ok((cfg, rep))
}

fn decay_audit_abs(_: &ValidationHooks) -> Result<(bool, String)> {
    let (cfg, rep) = certified_abs_run(0.9, 2000, 1.0)?;
    let log = simulate(&cfg)?;
    let audit = decay_audit(&log, &cfg, rep.w_bar, 1e-10)?;
    Ok((
        !audit.rows.is_empty() && audit.passed == audit.rows.len(),
        format!("{} of {} case-1 transitions decay", audit.passed, audit.rows.len()),
    ))
}

fn endi_closed_form(_: &ValidationHooks) -> Result<(bool, String)> {
    let grid = ThetaGrid::default();
    let pts = sampling::ball_points(&[0.0; 3], 2.0, 1000, 31)?;
    let worst = pts
        .iter()
        .map(|p| (v_tilde([p[0], p[1], p[2]]) - f_tilde_grid_min([p[0], p[1], p[2]], &grid)).abs())
        .fold(0.0, f64::max);
    Ok((worst <= 1e-6, format!("max |Ṽ − grid min| = {worst:.2e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique() {
        let names = list();
        for (i, a) in names.iter().enumerate() {
            assert!(!names[..i].contains(a));
        }
    }
}
