//! Constructive bounds on sampling time, optimization accuracies,
//! regularization radius and tolerable noise that guarantee practical
//! stabilization, with a re-checkable list of every inequality used.

use std::fmt::Write as _;

use crate::clf::{alpha1_inverse, lambda_v, rho_v, Clf};
use crate::error::{Error, Result};
use crate::linalg::{dist, BoxSet};
use crate::sampling;
use crate::systems::Dynamics;

const STREAM_PAIRS: u64 = 0x3C;

/// Sampling budget and safety factors for the estimated constants.
#[derive(Clone, Debug)]
pub struct EstimationConfig {
    pub samples: usize,
    /// Inflation of sampled Lipschitz ratios.
    pub lipschitz_safety: f64,
    /// Inflation of sampled suprema.
    pub sup_safety: f64,
    /// Deflation of sampled infima.
    pub inf_safety: f64,
    /// `Θ = (1 + theta_margin)·V̂`.
    pub theta_margin: f64,
    pub seed: u64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self { samples: 4000, lipschitz_safety: 1.25, sup_safety: 1.25, inf_safety: 0.8, theta_margin: 0.125, seed: 11 }
    }
}

/// Sampled Lipschitz constant of `f` on the ball, times `safety`.
///
/// Each quasi-random point is paired with a random neighbour at a
/// log-uniform distance between `1e-4·radius` and `radius`, and with the
/// next point of the sequence. Point and neighbour sequences are prefixes of
/// each other for increasing `samples`, so more samples never lower the
/// estimate before inflation.
pub fn estimate_lipschitz<F>(f: F, center: &[f64], radius: f64, samples: usize, safety: f64, seed: u64) -> Result<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if samples < 100 {
        return Err(Error::param(format!("at least 100 samples are required, got {samples}")));
    }
    if !(safety >= 1.0) {
        return Err(Error::param(format!("Lipschitz safety factor must be ≥ 1, got {safety}")));
    }
    if !(radius > 0.0) {
        return Err(Error::param(format!("radius must be positive, got {radius}")));
    }
    let n = center.len();
    let unit = sampling::unit_ball_points(n, samples, seed)?;
    let pts: Vec<Vec<f64>> = unit.iter().map(|p| p.iter().zip(center).map(|(a, c)| c + radius * a).collect()).collect();
    let vals: Vec<Vec<f64>> = pts.iter().map(|p| f(p)).collect();
    let mut rng = sampling::rng(seed, STREAM_PAIRS);
    let mut best = 0.0f64;
    let ratio = |fa: &[f64], fb: &[f64], a: &[f64], b: &[f64]| {
        let d = dist(a, b);
        if d > 0.0 {
            dist(fa, fb) / d
        } else {
            0.0
        }
    };
    for i in 0..pts.len() {
        let dir = sampling::random_direction(&mut rng, n);
        let scale = radius * 10f64.powf(-4.0 * rand::Rng::gen::<f64>(&mut rng));
        let mut b: Vec<f64> = pts[i].iter().zip(&dir).map(|(a, d)| a + scale * d).collect();
        let off = dist(&b, center);
        if off > radius {
            for (bj, cj) in b.iter_mut().zip(center) {
                *bj = cj + (*bj - cj) * radius / off;
            }
        }
        let fb = f(&b);
        best = best.max(ratio(&vals[i], &fb, &pts[i], &b));
        if i + 1 < pts.len() {
            best = best.max(ratio(&vals[i], &vals[i + 1], &pts[i], &pts[i + 1]));
        }
    }
    Ok(best * safety)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// `inner ≤ ‖x‖ ≤ outer` in `dim` dimensions.
    Annulus {
        dim: usize,
        inner: f64,
        outer: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extremum {
    Sup,
    Inf,
}

/// Sampled supremum or infimum of `f` over the domain, scaled by `safety`
/// (`≥ 1` for suprema, `≤ 1` for infima of nonnegative functions).
pub fn estimate_extrema<F>(f: F, domain: &Domain, mode: Extremum, samples: usize, safety: f64, seed: u64) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    if samples < 100 {
        return Err(Error::param(format!("at least 100 samples are required, got {samples}")));
    }
    match mode {
        Extremum::Sup if !(safety >= 1.0) => {
            return Err(Error::param(format!("sup safety factor must be ≥ 1, got {safety}")));
        }
        Extremum::Inf if !(safety > 0.0 && safety <= 1.0) => {
            return Err(Error::param(format!("inf safety factor must lie in (0, 1], got {safety}")));
        }
        _ => {}
    }
    let pts = match domain {
        Domain::Ball { center, radius } => sampling::ball_points(center, *radius, samples, seed)?,
        Domain::Annulus { dim, inner, outer } => sampling::annulus_points(*dim, *inner, *outer, samples, seed)?,
    };
    let vals = pts.iter().map(|p| f(p));
    let ext = match mode {
        Extremum::Sup => vals.fold(f64::NEG_INFINITY, f64::max),
        Extremum::Inf => vals.fold(f64::INFINITY, f64::min),
    };
    Ok(ext * safety)
}

/// One inequality `lhs ≤ rhs` (or `lhs < rhs` when strict) with its
/// substituted sides.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

/// Every constant of the bound construction.
#[allow(non_snake_case)]
#[derive(Clone, Debug, PartialEq)]
pub struct BoundsReport {
    pub R: f64,
    pub r: f64,
    pub e_bar: f64,
    pub q_bar: f64,
    pub alpha: f64,
    pub R_hat: f64,
    pub r_hat: f64,
    pub V_hat: f64,
    pub R_hat_star: f64,
    pub V_hat_star: f64,
    pub Theta: f64,
    pub v_hat: f64,
    pub r_hat_star: f64,
    pub f_bar: f64,
    pub w_bar: f64,
    pub L_f: f64,
    pub L_V: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub delta_bar: f64,
    pub eps_bar: f64,
    pub eta_bar: f64,
    pub chi_bar: f64,
    pub e_bar_max: f64,
    pub T_alpha: f64,
    pub samples: usize,
    pub checks: Vec<Check>,
}

const FIELD_NAMES: [&str; 25] = [
    "R",
    "r",
    "e_bar",
    "q_bar",
    "alpha",
    "R_hat",
    "r_hat",
    "V_hat",
    "R_hat_star",
    "V_hat_star",
    "Theta",
    "v_hat",
    "r_hat_star",
    "f_bar",
    "w_bar",
    "L_f",
    "L_V",
    "eps1",
    "eps2",
    "delta_bar",
    "eps_bar",
    "eta_bar",
    "chi_bar",
    "e_bar_max",
    "T_alpha",
];

impl BoundsReport {
    fn fields(&self) -> [f64; 25] {
        [
            self.R,
            self.r,
            self.e_bar,
            self.q_bar,
            self.alpha,
            self.R_hat,
            self.r_hat,
            self.V_hat,
            self.R_hat_star,
            self.V_hat_star,
            self.Theta,
            self.v_hat,
            self.r_hat_star,
            self.f_bar,
            self.w_bar,
            self.L_f,
            self.L_V,
            self.eps1,
            self.eps2,
            self.delta_bar,
            self.eps_bar,
            self.eta_bar,
            self.chi_bar,
            self.e_bar_max,
            self.T_alpha,
        ]
    }

    fn fields_mut(&mut self) -> [&mut f64; 25] {
        [
            &mut self.R,
            &mut self.r,
            &mut self.e_bar,
            &mut self.q_bar,
            &mut self.alpha,
            &mut self.R_hat,
            &mut self.r_hat,
            &mut self.V_hat,
            &mut self.R_hat_star,
            &mut self.V_hat_star,
            &mut self.Theta,
            &mut self.v_hat,
            &mut self.r_hat_star,
            &mut self.f_bar,
            &mut self.w_bar,
            &mut self.L_f,
            &mut self.L_V,
            &mut self.eps1,
            &mut self.eps2,
            &mut self.delta_bar,
            &mut self.eps_bar,
            &mut self.eta_bar,
            &mut self.chi_bar,
            &mut self.e_bar_max,
            &mut self.T_alpha,
        ]
    }

    fn empty() -> Self {
        Self {
            R: f64::NAN,
            r: f64::NAN,
            e_bar: f64::NAN,
            q_bar: f64::NAN,
            alpha: f64::NAN,
            R_hat: f64::NAN,
            r_hat: f64::NAN,
            V_hat: f64::NAN,
            R_hat_star: f64::NAN,
            V_hat_star: f64::NAN,
            Theta: f64::NAN,
            v_hat: f64::NAN,
            r_hat_star: f64::NAN,
            f_bar: f64::NAN,
            w_bar: f64::NAN,
            L_f: f64::NAN,
            L_V: f64::NAN,
            eps1: f64::NAN,
            eps2: f64::NAN,
            delta_bar: f64::NAN,
            eps_bar: f64::NAN,
            eta_bar: f64::NAN,
            chi_bar: f64::NAN,
            e_bar_max: f64::NAN,
            T_alpha: f64::NAN,
            samples: 0,
            checks: Vec::new(),
        }
    }

    /// One `name = value` line per field, then one
    /// `check: name lhs<=rhs OK|FAIL` line per inequality.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (name, v) in FIELD_NAMES.iter().zip(self.fields()) {
            let _ = writeln!(s, "{name} = {v:e}");
        }
        let _ = writeln!(s, "samples = {}", self.samples);
        for c in &self.checks {
            let _ =
                writeln!(s, "check: {} {:e}<={:e} {}", c.name, c.lhs, c.rhs, if c.satisfied { "OK" } else { "FAIL" });
        }
        s
    }

    /// Parses [`BoundsReport::to_text`] output. Check lines are re-derived
    /// from the parsed constants rather than trusted.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut rep = Self::empty();
        let mut seen = [false; 25];
        let mut samples = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("check:") {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected `name = value`", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if k == "samples" {
                samples = Some(v.parse::<usize>().map_err(|e| Error::config(format!("line {}: {e}", lineno + 1)))?);
                continue;
            }
            let idx = FIELD_NAMES
                .iter()
                .position(|n| *n == k)
                .ok_or_else(|| Error::config(format!("line {}: unknown field `{k}`", lineno + 1)))?;
            let val = v.parse::<f64>().map_err(|e| Error::config(format!("line {}: field `{k}`: {e}", lineno + 1)))?;
            *rep.fields_mut()[idx] = val;
            seen[idx] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::config(format!("missing field `{}`", FIELD_NAMES[i])));
        }
        rep.samples = samples.ok_or_else(|| Error::config("missing field `samples`"))?;
        rep.checks = build_checks(&rep);
        Ok(rep)
    }

    pub fn all_satisfied(&self) -> bool {
        self.checks.iter().all(|c| c.satisfied)
    }
}

fn le(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs || lhs <= rhs + 1e-12 * rhs.abs()
}

/// Every inequality of the construction, substituted from the report's
/// constants.
pub fn build_checks(b: &BoundsReport) -> Vec<Check> {
    let a2 = b.alpha * b.alpha;
    let sv = (2.0 * b.V_hat_star).sqrt();
    let w36 = b.w_bar / 36.0;
    let drift = b.delta_bar * b.L_f * b.f_bar + b.q_bar;
    let rows: Vec<(&str, f64, f64, bool)> = vec![
        ("noise_below_target", b.e_bar + b.q_bar, b.r, true),
        ("e_bar_le_r_over_8", b.e_bar, b.r / 8.0, false),
        ("q_bar_le_r_over_8", b.q_bar, b.r / 8.0, false),
        ("w_bar_positive", 0.0, b.w_bar, true),
        ("theta_covers_v_hat", b.V_hat + b.eps1, b.Theta, false),
        ("bounds_1", 4.0 * b.L_f * b.eps1, w36, false),
        ("eps1_case2", b.eps1, b.v_hat / 8.0, false),
        ("alpha_core", sv * b.alpha, b.r_hat_star / 2.0, false),
        ("alpha_eps1", sv * b.alpha, b.eps1 / b.L_V, false),
        ("bounds_2_eta", b.eta_bar, w36, false),
        ("bounds_2_case2", b.delta_bar * b.w_bar / 2.0, b.v_hat / 4.0, false),
        ("bounds_2_quadratic", b.delta_bar * (b.f_bar + b.q_bar).powi(2) / (2.0 * a2), w36, false),
        ("delta_drift", drift * sv / b.alpha, w36, false),
        ("delta_eps2", b.delta_bar * b.f_bar, b.eps2 / b.L_V, false),
        ("eps2_case2", b.eps2, b.v_hat / 8.0, false),
        ("delta_below_one", b.delta_bar, 1.0, false),
        ("bounds_3_delta", b.eps_bar * b.eps_bar, b.delta_bar * w36, false),
        ("bounds_3_lipschitz", 4.0 * b.L_f * b.eps_bar * b.eps_bar, w36, false),
        ("bounds_4_quadratic", 2.0 / a2 * b.L_f * b.chi_bar * b.chi_bar, w36, false),
        ("bounds_4_drift", drift * b.chi_bar / a2, w36, false),
        ("bounds_4_flow", b.chi_bar * (b.f_bar + b.q_bar) / a2, w36, false),
        (
            "bound_5",
            b.eps_bar,
            (b.w_bar * a2 / 10.0 - 2.0 * b.chi_bar * b.f_bar) / (2.0 * a2 + b.f_bar * b.f_bar),
            false,
        ),
        ("e_bar_decay", b.e_bar, b.w_bar / (16.0 * b.L_V), true),
        ("e_bar_max_decay", b.e_bar_max, b.w_bar / (16.0 * b.L_V), false),
    ];
    rows.into_iter()
        .map(|(name, lhs, rhs, strict)| Check {
            name: name.to_string(),
            lhs,
            rhs,
            satisfied: if strict { lhs < rhs } else { le(lhs, rhs) },
        })
        .collect()
}

/// Re-derives every inequality from the stored constants; true iff all hold.
pub fn verify_bounds(report: &BoundsReport) -> bool {
    build_checks(report).iter().all(|c| c.satisfied)
}

/// Largest `α` satisfying `√(2V̂*)·α ≤ min(r̂*/2, ε₁/L_V)`.
pub fn alpha_limit(r_hat_star: f64, eps1: f64, l_v: f64, v_hat_star: f64) -> f64 {
    (r_hat_star / 2.0).min(eps1 / l_v) / (2.0 * v_hat_star).sqrt()
}

/// Runs the bound construction for starting radius `R`, target radius `r`
/// and noise bounds `ē`, `q̄`.
///
/// With `alpha = None` the largest admissible `α` is used. If any inequality
/// fails for the given inputs the error names the first failing check and
/// carries the full report.
#[allow(non_snake_case, clippy::too_many_arguments)]
pub fn compute_bounds<C, D>(
    clf: &C,
    dyn_: &D,
    R: f64,
    r: f64,
    e_bar: f64,
    q_bar: f64,
    alpha: Option<f64>,
    input_set: &BoxSet,
    est: &EstimationConfig,
) -> Result<BoundsReport>
where
    C: Clf + ?Sized,
    D: Dynamics + ?Sized,
{
    if !(r > 0.0 && r < R && R.is_finite()) {
        return Err(Error::param(format!("radii must satisfy 0 < r < R, got r = {r}, R = {R}")));
    }
    if !(e_bar >= 0.0 && q_bar >= 0.0) {
        return Err(Error::param("noise bounds must be nonnegative"));
    }
    if let Some(a) = alpha {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::param(format!("alpha must lie in (0, 1), got {a}")));
        }
    }
    if input_set.dim() != dyn_.control_dim() || clf.dim() != dyn_.state_dim() {
        return Err(Error::param("CLF, dynamics and input box dimensions disagree"));
    }
    let n = dyn_.state_dim();
    let origin = vec![0.0; n];
    let mut rep = BoundsReport::empty();
    rep.R = R;
    rep.r = r;
    rep.e_bar = e_bar;
    rep.q_bar = q_bar;
    rep.samples = est.samples;
    rep.r_hat = r - e_bar - q_bar;
    if !(rep.r_hat > 0.0) {
        return Err(Error::Infeasible { constraint: "noise_below_target".into(), report: Some(Box::new(rep)) });
    }
    let value = |x: &[f64]| clf.value(x);

    rep.R_hat = R + e_bar + q_bar;
    rep.V_hat = estimate_extrema(
        value,
        &Domain::Ball { center: origin.clone(), radius: rep.R_hat },
        Extremum::Sup,
        est.samples,
        est.sup_safety,
        est.seed,
    )?;
    rep.R_hat_star = alpha1_inverse(clf, (1.0 + est.theta_margin) * rep.V_hat)?;
    rep.Theta = clf.alpha1(rep.R_hat_star);
    rep.V_hat_star = estimate_extrema(
        value,
        &Domain::Ball { center: origin.clone(), radius: rep.R_hat_star },
        Extremum::Sup,
        est.samples,
        est.sup_safety,
        est.seed,
    )?
    .max(rep.V_hat);
    rep.v_hat = rho_v(clf, rep.r_hat)?;
    rep.r_hat_star = lambda_v(clf, rep.v_hat / 4.0)?;

    let outer = rep.R_hat_star + (2.0 * rep.V_hat_star).sqrt();
    let vertices = input_set.vertices();
    let mut candidates = vertices.clone();
    candidates.push(input_set.midpoint());
    let mut l_f = 0.0f64;
    for u in &vertices {
        let fu = |x: &[f64]| {
            let mut out = vec![0.0; n];
            dyn_.rhs_into(x, u, &mut out);
            out
        };
        l_f = l_f.max(estimate_lipschitz(fu, &origin, outer, est.samples, est.lipschitz_safety, est.seed)?);
    }
    rep.L_f = l_f;
    rep.L_V = estimate_lipschitz(|x| vec![clf.value(x)], &origin, outer, est.samples, est.lipschitz_safety, est.seed)?;
    rep.f_bar = estimate_extrema(
        |x| {
            let mut out = vec![0.0; n];
            candidates
                .iter()
                .map(|u| {
                    dyn_.rhs_into(x, u, &mut out);
                    crate::linalg::norm(&out)
                })
                .fold(0.0, f64::max)
        },
        &Domain::Ball { center: origin.clone(), radius: outer },
        Extremum::Sup,
        est.samples,
        est.sup_safety,
        est.seed,
    )?;
    rep.w_bar = estimate_extrema(
        |x| clf.decay(x),
        &Domain::Annulus { dim: n, inner: rep.r_hat_star / 2.0, outer },
        Extremum::Inf,
        est.samples,
        est.inf_safety,
        est.seed,
    )?;

    let w = rep.w_bar;
    rep.eps1 = (w / (144.0 * rep.L_f)).min(rep.Theta - rep.V_hat).min(rep.v_hat / 8.0);
    let a_lim = alpha_limit(rep.r_hat_star, rep.eps1, rep.L_V, rep.V_hat_star);
    let a = alpha.unwrap_or_else(|| a_lim.min(0.999));
    rep.alpha = a;
    let a2 = a * a;
    let sv = (2.0 * rep.V_hat_star).sqrt();
    rep.eps2 = rep.v_hat / 8.0;
    rep.eta_bar = w / 36.0;

    let lf_fbar = rep.L_f * rep.f_bar;
    let drift_num = w * a / (36.0 * sv) - q_bar;
    // A nonpositive numerator is reported by the `delta_drift` check.
    let drift_limit = if drift_num <= 0.0 || lf_fbar == 0.0 {
        f64::INFINITY
    } else {
        drift_num / lf_fbar
    };
    rep.delta_bar = (rep.v_hat / (2.0 * w))
        .min(w * a2 / (18.0 * (rep.f_bar + q_bar).powi(2)))
        .min(rep.eps2 / (rep.L_V * rep.f_bar))
        .min(drift_limit)
        .min(1.0);

    let eps_sq = (rep.delta_bar * w / 36.0).min(w / (144.0 * rep.L_f));
    rep.chi_bar = (a * (w / (72.0 * rep.L_f)).sqrt())
        .min(w * a2 / (36.0 * (rep.delta_bar * lf_fbar + q_bar)))
        .min(w * a2 / (36.0 * (rep.f_bar + q_bar)));
    let bound5 = (w * a2 / 10.0 - 2.0 * rep.chi_bar * rep.f_bar) / (2.0 * a2 + rep.f_bar * rep.f_bar);
    rep.eps_bar = eps_sq.sqrt().min(bound5);
    rep.e_bar_max = w / (16.0 * rep.L_V);
    rep.T_alpha = 2.0 * (rep.V_hat_star - rep.v_hat / 2.0) / (rep.delta_bar * w);
    rep.checks = build_checks(&rep);

    if let Some(c) = rep.checks.iter().find(|c| !c.satisfied) {
        return Err(Error::Infeasible { constraint: c.name.clone(), report: Some(Box::new(rep)) });
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_lipschitz_and_constant_extrema() {
        let l = estimate_lipschitz(|x| x.to_vec(), &[0.0, 0.0, 0.0], 1.0, 200, 1.25, 1).unwrap();
        assert!((l - 1.25).abs() < 1e-9);
        let c =
            estimate_extrema(|_| 3.0, &Domain::Ball { center: vec![0.0; 2], radius: 1.0 }, Extremum::Sup, 100, 1.25, 0)
                .unwrap();
        assert_eq!(c, 3.75);
        let s = estimate_extrema(
            crate::linalg::norm,
            &Domain::Ball { center: vec![0.0; 3], radius: 2.0 },
            Extremum::Sup,
            500,
            1.0,
            0,
        )
        .unwrap();
        assert!((s - 2.0).abs() < 1e-12);
    }

    #[test]
    fn argument_validation() {
        assert!(estimate_lipschitz(|x| x.to_vec(), &[0.0], 1.0, 99, 1.25, 0).is_err());
        assert!(estimate_extrema(
            |_| 1.0,
            &Domain::Ball { center: vec![0.0], radius: 1.0 },
            Extremum::Inf,
            100,
            1.2,
            0
        )
        .is_err());
        let empty = Domain::Annulus { dim: 2, inner: 2.0, outer: 1.0 };
        assert!(matches!(estimate_extrema(|_| 1.0, &empty, Extremum::Inf, 100, 0.8, 0), Err(Error::Config(_))));
    }
}
