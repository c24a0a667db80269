//! Nonsmooth backstepping CLF for the extended nonholonomic integrator.
//!
//! With `x = (φ, η)`, `φ ∈ ℝ³`, `η ∈ ℝ²`:
//! `V(x) = min_θ F̃(φ; θ) + ½‖η − κ(φ; θ)‖²`, where `F̃` is a family of
//! quadratic CLFs for the nonholonomic integrator and `κ` its feedback.

use std::f64::consts::PI;

use crate::clf::{dini_fd, Clf, DEFAULT_MU_SCHEDULE};
use crate::error::{Error, Result};
use crate::linalg::{norm, BoxSet};
use crate::optim::golden_section;
use crate::sampling;
use crate::systems::Dynamics;

const TAU: f64 = 2.0 * PI;

/// `φ₁² + φ₂² + 2φ₃² − 2φ₃(φ₁cosθ + φ₂sinθ)`.
pub fn f_tilde(phi: [f64; 3], theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    f_tilde_cs(phi, c, s)
}

fn f_tilde_cs(phi: [f64; 3], c: f64, s: f64) -> f64 {
    let [p1, p2, p3] = phi;
    p1 * p1 + p2 * p2 + 2.0 * p3 * p3 - 2.0 * p3 * (p1 * c + p2 * s)
}

/// Gradient of [`f_tilde`] in `φ`.
pub fn grad_f_tilde(phi: [f64; 3], theta: f64) -> [f64; 3] {
    let (s, c) = theta.sin_cos();
    grad_cs(phi, c, s)
}

fn grad_cs(phi: [f64; 3], c: f64, s: f64) -> [f64; 3] {
    let [p1, p2, p3] = phi;
    [2.0 * p1 - 2.0 * p3 * c, 2.0 * p2 - 2.0 * p3 * s, 4.0 * p3 - 2.0 * (p1 * c + p2 * s)]
}

fn kappa_cs(phi: [f64; 3], c: f64, s: f64) -> [f64; 2] {
    let z = grad_cs(phi, c, s);
    [-(z[0] - phi[1] * z[2]), -(z[1] + phi[0] * z[2])]
}

/// `−(⟨ζ, g₁(φ)⟩, ⟨ζ, g₂(φ)⟩)` with `ζ = ∇F̃`, `g₁ = (1, 0, −φ₂)`, `g₂ = (0, 1, φ₁)`.
pub fn kappa_ni(phi: [f64; 3], theta: f64) -> [f64; 2] {
    let (s, c) = theta.sin_cos();
    kappa_cs(phi, c, s)
}

/// Closed-form minimum of [`f_tilde`] over `θ`:
/// `φ₁² + φ₂² + 2φ₃² − 2|φ₃|√(φ₁² + φ₂²)`.
pub fn v_tilde(phi: [f64; 3]) -> f64 {
    let [p1, p2, p3] = phi;
    p1 * p1 + p2 * p2 + 2.0 * p3 * p3 - 2.0 * p3.abs() * (p1 * p1 + p2 * p2).sqrt()
}

/// A minimizing `θ` of [`f_tilde`]: the direction of `sign(φ₃)(φ₁, φ₂)`.
pub fn theta_star(phi: [f64; 3]) -> f64 {
    let sg = if phi[2] < 0.0 { -1.0 } else { 1.0 };
    let t = (sg * phi[1]).atan2(sg * phi[0]);
    if t < 0.0 {
        t + TAU
    } else {
        t
    }
}

fn objective(x: &[f64], c: f64, s: f64) -> f64 {
    let phi = [x[0], x[1], x[2]];
    let k = kappa_cs(phi, c, s);
    let d1 = x[3] - k[0];
    let d2 = x[4] - k[1];
    f_tilde_cs(phi, c, s) + 0.5 * (d1 * d1 + d2 * d2)
}

/// `F̃(φ; θ) + ½‖η − κ(φ; θ)‖²`.
pub fn endi_objective(x: &[f64], theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    objective(x, c, s)
}

/// Uniform grid over `[0, 2π)` with cached trigonometric values.
#[derive(Clone, Debug)]
pub struct ThetaGrid {
    points: Vec<f64>,
    cos: Vec<f64>,
    sin: Vec<f64>,
    refinement_iters: usize,
}

impl ThetaGrid {
    pub fn new(count: usize, refinement_iters: usize) -> Result<Self> {
        if count < 8 {
            return Err(Error::param(format!("theta grid needs at least 8 points, got {count}")));
        }
        let points: Vec<f64> = (0..count).map(|i| TAU * i as f64 / count as f64).collect();
        let cos = points.iter().map(|t| t.cos()).collect();
        let sin = points.iter().map(|t| t.sin()).collect();
        Ok(Self { points, cos, sin, refinement_iters })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn refinement_iters(&self) -> usize {
        self.refinement_iters
    }

    fn spacing(&self) -> f64 {
        TAU / self.points.len() as f64
    }
}

impl Default for ThetaGrid {
    fn default() -> Self {
        Self::new(64, 40).expect("default grid is valid")
    }
}

/// Most grid local minima refined per evaluation.
const MAX_REFINED_MINIMA: usize = 4;

/// Scans `values` (the function on the grid) for its cyclic local minima,
/// refines the lowest [`MAX_REFINED_MINIMA`] of them by golden-section search
/// over the neighbouring cells and returns the best `(θ, value)`. Refining
/// every basin matters where two minima are close in value: their grid
/// values need not be ordered like their refined values.
fn refined_min<F: Fn(f64) -> f64>(values: &[f64], grid: &ThetaGrid, f: F) -> (f64, f64) {
    let n = values.len();
    let mut minima: Vec<usize> =
        (0..n).filter(|&i| values[i] <= values[(i + n - 1) % n] && values[i] <= values[(i + 1) % n]).collect();
    minima.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    minima.truncate(MAX_REFINED_MINIMA);
    let mut best = (grid.points[minima[0]], values[minima[0]]);
    for &i in &minima {
        if values[i] < best.1 {
            best = (grid.points[i], values[i]);
        }
        if grid.refinement_iters > 0 {
            let h = grid.spacing();
            let t0 = grid.points[i];
            let (t, v) = golden_section(&f, t0 - h, t0 + h, 0.0, grid.refinement_iters);
            let t = t.rem_euclid(TAU);
            if v < best.1 || (v == best.1 && t < best.0) {
                best = (t, v);
            }
        }
    }
    best
}

/// Minimizing `θ ∈ [0, 2π)` and minimum value of [`endi_objective`].
///
/// The grid is scanned first, then every basin found on the grid (up to a
/// small cap) is refined by golden-section search over its neighbouring
/// cells. Among equal minima the smallest `θ` wins.
pub fn endi_clf_argmin(x: &[f64], grid: &ThetaGrid) -> (f64, f64) {
    let values: Vec<f64> = (0..grid.points.len()).map(|i| objective(x, grid.cos[i], grid.sin[i])).collect();
    refined_min(&values, grid, |t| endi_objective(x, t))
}

/// Minimum of [`f_tilde`] over `θ` by grid scan and golden-section
/// refinement; an independent check of [`v_tilde`].
pub fn f_tilde_grid_min(phi: [f64; 3], grid: &ThetaGrid) -> f64 {
    let values: Vec<f64> = (0..grid.points.len()).map(|i| f_tilde_cs(phi, grid.cos[i], grid.sin[i])).collect();
    refined_min(&values, grid, |t| f_tilde(phi, t)).1
}

/// `V(x) = min_θ F̃(φ; θ) + ½‖η − κ(φ; θ)‖²`, evaluated on `grid`.
pub fn endi_clf_value(x: &[f64], grid: &ThetaGrid) -> f64 {
    endi_clf_argmin(x, grid).1
}

/// Quadratic class-K bounds `c₁s² ≤ V ≤ c₂s²` and decay `w = c_w‖x‖²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticEnvelope {
    pub c1: f64,
    pub c2: f64,
    pub c_w: f64,
}

#[derive(Clone, Debug)]
pub struct CalibrationConfig {
    /// Outer radius of the calibration region.
    pub radius: f64,
    /// Inner radius of the decay annulus as a fraction of `radius`.
    pub inner_fraction: f64,
    pub samples: usize,
    pub seed: u64,
    /// Initial decay gain; halved until every sample satisfies the decay condition.
    pub c_w_start: f64,
    /// Multipliers applied to the sampled minimum and maximum of `V/‖x‖²`.
    pub c1_safety: f64,
    pub c2_safety: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            radius: 1.0,
            inner_fraction: 0.01,
            samples: 1000,
            seed: 7,
            c_w_start: 1.0,
            c1_safety: 0.9,
            c2_safety: 1.1,
        }
    }
}

/// Fits `c₁, c₂` from sampled `V(x)/‖x‖²` over the ball and the largest
/// `c_w = c_w_start / 2^k` such that at every annulus sample some box vertex
/// `u` gives a finite-difference Dini derivative of `V` along `f(x, u)` of at
/// most `−c_w‖x‖²`.
pub fn calibrate_quadratic<F, D>(
    value: F,
    dyn_: &D,
    input_set: &BoxSet,
    cfg: &CalibrationConfig,
) -> Result<QuadraticEnvelope>
where
    F: Fn(&[f64]) -> f64,
    D: Dynamics + ?Sized,
{
    let n = dyn_.state_dim();
    if !(cfg.radius > 0.0) || !(cfg.inner_fraction > 0.0 && cfg.inner_fraction < 1.0) {
        return Err(Error::config("calibration radius must be positive and inner fraction in (0, 1)"));
    }
    let ball = sampling::ball_points(&vec![0.0; n], cfg.radius, cfg.samples, cfg.seed)?;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for p in &ball {
        let r2 = p.iter().map(|c| c * c).sum::<f64>();
        if r2 < 1e-12 * cfg.radius * cfg.radius {
            continue;
        }
        let q = value(p) / r2;
        lo = lo.min(q);
        hi = hi.max(q);
    }
    if !(lo > 0.0) || !hi.is_finite() {
        return Err(Error::config(format!("V/‖x‖² ranges over [{lo}, {hi}]; V is not positive definite on samples")));
    }

    let annulus =
        sampling::annulus_points(n, cfg.inner_fraction * cfg.radius, cfg.radius, cfg.samples, cfg.seed ^ 0xD1CA)?;
    let vertices = input_set.vertices();
    let mut f = vec![0.0; n];
    let mut ratio = f64::INFINITY;
    for p in &annulus {
        let mut d_min = f64::INFINITY;
        for u in &vertices {
            dyn_.rhs_into(p, u, &mut f);
            let fl = norm(&f);
            if fl == 0.0 {
                d_min = d_min.min(0.0);
                continue;
            }
            let dir: Vec<f64> = f.iter().map(|c| c / fl).collect();
            d_min = d_min.min(fl * dini_fd(&value, p, &dir, &DEFAULT_MU_SCHEDULE)?);
        }
        let r2 = p.iter().map(|c| c * c).sum::<f64>();
        ratio = ratio.min(-d_min / r2);
    }
    if !(ratio > 0.0) {
        return Err(Error::config(format!(
            "decay condition fails on the calibration annulus [{}, {}]: some sample has no decreasing vertex direction",
            cfg.inner_fraction * cfg.radius,
            cfg.radius
        )));
    }
    let mut c_w = cfg.c_w_start;
    let mut halvings = 0;
    while c_w > ratio {
        c_w *= 0.5;
        halvings += 1;
        if halvings > 200 {
            return Err(Error::config("decay gain calibration did not terminate"));
        }
    }
    Ok(QuadraticEnvelope { c1: cfg.c1_safety * lo, c2: cfg.c2_safety * hi, c_w })
}

fn phi_distance(x: &[f64]) -> f64 {
    (x[0] * x[0] + x[1] * x[1]).sqrt().min(x[2].abs())
}

/// The ENDI backstepping CLF as a [`Clf`].
#[derive(Clone, Debug)]
pub struct EndiClf {
    grid: ThetaGrid,
    env: QuadraticEnvelope,
}

impl EndiClf {
    pub fn new(grid: ThetaGrid, env: QuadraticEnvelope) -> Result<Self> {
        if !(env.c1 > 0.0 && env.c1 <= env.c2 && env.c_w > 0.0) {
            return Err(Error::param(format!("invalid quadratic envelope {env:?}")));
        }
        Ok(Self { grid, env })
    }

    /// Calibrates the envelope against the ENDI dynamics over `input_set`.
    pub fn calibrated(grid: ThetaGrid, input_set: &BoxSet, cfg: &CalibrationConfig) -> Result<Self> {
        let env = calibrate_quadratic(|x| endi_clf_value(x, &grid), &crate::systems::Endi, input_set, cfg)?;
        Self::new(grid, env)
    }

    pub fn envelope(&self) -> QuadraticEnvelope {
        self.env
    }

    pub fn grid(&self) -> &ThetaGrid {
        &self.grid
    }
}

impl Clf for EndiClf {
    fn dim(&self) -> usize {
        5
    }

    fn value(&self, x: &[f64]) -> f64 {
        endi_clf_value(x, &self.grid)
    }

    fn decay(&self, x: &[f64]) -> f64 {
        self.env.c_w * x.iter().map(|c| c * c).sum::<f64>()
    }

    fn alpha1(&self, s: f64) -> f64 {
        self.env.c1 * s * s
    }

    fn alpha2(&self, s: f64) -> f64 {
        self.env.c2 * s * s
    }

    fn alpha1_inv(&self, v: f64) -> Option<f64> {
        Some((v / self.env.c1).sqrt())
    }

    fn alpha2_inv(&self, v: f64) -> Option<f64> {
        Some((v / self.env.c2).sqrt())
    }

    /// `min(√(φ₁² + φ₂²), |φ₃|)`.
    fn nonsmooth_distance(&self, x: &[f64]) -> f64 {
        phi_distance(x)
    }
}

/// The closed-form nonholonomic-integrator CLF [`v_tilde`] as a [`Clf`].
#[derive(Clone, Debug)]
pub struct NiClf {
    env: QuadraticEnvelope,
}

impl NiClf {
    pub fn new(env: QuadraticEnvelope) -> Result<Self> {
        if !(env.c1 > 0.0 && env.c1 <= env.c2 && env.c_w > 0.0) {
            return Err(Error::param(format!("invalid quadratic envelope {env:?}")));
        }
        Ok(Self { env })
    }

    pub fn calibrated(input_set: &BoxSet, cfg: &CalibrationConfig) -> Result<Self> {
        let env = calibrate_quadratic(
            |x| v_tilde([x[0], x[1], x[2]]),
            &crate::systems::NonholonomicIntegrator,
            input_set,
            cfg,
        )?;
        Self::new(env)
    }

    pub fn envelope(&self) -> QuadraticEnvelope {
        self.env
    }
}

impl Clf for NiClf {
    fn dim(&self) -> usize {
        3
    }

    fn value(&self, x: &[f64]) -> f64 {
        v_tilde([x[0], x[1], x[2]])
    }

    fn decay(&self, x: &[f64]) -> f64 {
        self.env.c_w * x.iter().map(|c| c * c).sum::<f64>()
    }

    fn alpha1(&self, s: f64) -> f64 {
        self.env.c1 * s * s
    }

    fn alpha2(&self, s: f64) -> f64 {
        self.env.c2 * s * s
    }

    fn alpha1_inv(&self, v: f64) -> Option<f64> {
        Some((v / self.env.c1).sqrt())
    }

    fn alpha2_inv(&self, v: f64) -> Option<f64> {
        Some((v / self.env.c2).sqrt())
    }

    fn nonsmooth_distance(&self, x: &[f64]) -> f64 {
        phi_distance(x)
    }
}
