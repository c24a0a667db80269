//! Moreau envelope `V_α(x) = inf_y V(y) + ‖y − x‖²/(2α²)` with an
//! accuracy-controlled approximate minimizer, plus brute-force oracles.

use crate::clf::Clf;
use crate::error::{Error, Result};
use crate::linalg::{dist_sq, dot, StateVec};
use crate::optim::{coordinate_descent, DescentOptions};
use crate::sampling;

/// Declared accuracy of the exact-mode solver, in envelope value.
pub const SOLVER_FLOOR: f64 = 1e-9;

const STREAM_INJECT: u64 = 0x1A;

#[derive(Clone, Debug, PartialEq)]
pub struct InfConvResult {
    /// Approximate minimizer.
    pub y_eps: StateVec,
    /// `(x − y_eps) / α²`.
    pub zeta: StateVec,
    /// Objective value at `y_eps`.
    pub envelope_value: f64,
    /// Bound on `envelope_value − V_α(x)`.
    pub eps_achieved: f64,
    pub alpha: f64,
    /// Radius of the ball around `x` the search was confined to.
    pub search_radius: f64,
}

/// Multistart minimizer for the envelope objective.
#[derive(Clone, Debug)]
pub struct InfConvSolver {
    /// Upper estimate of `sup V` over the working ball; sets the search radius.
    pub v_bar: f64,
    /// Lattice points per axis for cold starts.
    pub lattice_per_axis: usize,
    /// Number of best lattice points refined by descent (the centre is always refined).
    pub descent_starts: usize,
    pub descent: DescentOptions,
    pub floor: f64,
}

impl InfConvSolver {
    pub fn new(v_bar: f64) -> Self {
        Self {
            v_bar: v_bar.max(0.0),
            lattice_per_axis: 5,
            descent_starts: 3,
            descent: DescentOptions { x_tol: 1e-8, max_sweeps: 200 },
            floor: SOLVER_FLOOR,
        }
    }

    /// Sets `v_bar` to 1.1 times the sampled maximum of `V` over the ball of
    /// the given radius around the origin.
    pub fn for_working_ball<C: Clf + ?Sized>(clf: &C, radius: f64, samples: usize, seed: u64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::param(format!("working radius must be positive, got {radius}")));
        }
        let origin = vec![0.0; clf.dim()];
        let pts = sampling::ball_points(&origin, radius, samples.max(1), seed)?;
        let sup = pts.iter().map(|p| clf.value(p)).fold(0.0f64, f64::max);
        Ok(Self::new(1.1 * sup))
    }

    /// `α √(2 max(v_bar, V(x) + eps_target))`; every `eps_target`-minimizer
    /// lies in this ball.
    pub fn search_radius<C: Clf + ?Sized>(&self, clf: &C, x: &[f64], alpha: f64, eps_target: f64) -> f64 {
        alpha * (2.0 * self.v_bar.max(clf.value(x) + eps_target)).sqrt()
    }

    /// Cold solve: lattice over the search ball, descent from the best
    /// lattice points and from `x`, then accuracy injection.
    pub fn solve<C: Clf + ?Sized>(
        &self,
        clf: &C,
        x: &[f64],
        alpha: f64,
        eps_target: f64,
        seed: u64,
    ) -> Result<InfConvResult> {
        check_inputs(clf, x, alpha, eps_target)?;
        let radius = self.search_radius(clf, x, alpha, eps_target);
        let obj = |y: &[f64]| clf.value(y) + dist_sq(y, x) / (2.0 * alpha * alpha);
        let (y_star, j_star) = if radius == 0.0 {
            (x.to_vec(), obj(x))
        } else {
            let l = self.lattice_per_axis.max(2);
            let spacing = 2.0 * radius / (l - 1) as f64;
            let mut starts = lattice_best(&obj, x, radius, l, self.descent_starts)?;
            if !starts.iter().any(|s| s.0 == x) {
                starts.push((x.to_vec(), obj(x)));
            }
            let mut best: Option<(Vec<f64>, f64)> = None;
            for (s, _) in starts {
                let mut f = |y: &[f64]| obj(y);
                let cand = coordinate_descent(&mut f, &s, x, radius, spacing, &self.descent);
                if best.as_ref().is_none_or(|b| cand.1 < b.1) {
                    best = Some(cand);
                }
            }
            best.expect("at least one start")
        };
        self.finish(clf, x, alpha, eps_target, seed, y_star, j_star, radius)
    }

    /// Warm solve: descent from `hint` (projected into the search ball) and
    /// from `x`, then accuracy injection. Used in closed loop where the
    /// previous minimizer is a good predictor of the next one.
    pub fn solve_warm<C: Clf + ?Sized>(
        &self,
        clf: &C,
        x: &[f64],
        alpha: f64,
        eps_target: f64,
        seed: u64,
        hint: &[f64],
    ) -> Result<InfConvResult> {
        check_inputs(clf, x, alpha, eps_target)?;
        if hint.len() != x.len() || hint.iter().any(|c| !c.is_finite()) {
            return Err(Error::param("warm-start hint must be finite with the state dimension"));
        }
        let radius = self.search_radius(clf, x, alpha, eps_target);
        let obj = |y: &[f64]| clf.value(y) + dist_sq(y, x) / (2.0 * alpha * alpha);
        let (y_star, j_star) = if radius == 0.0 {
            (x.to_vec(), obj(x))
        } else {
            let mut h = hint.to_vec();
            let d = dist_sq(&h, x).sqrt();
            if d > radius {
                for (hi, xi) in h.iter_mut().zip(x) {
                    *hi = xi + (*hi - xi) * radius / d;
                }
            }
            let mut f = |y: &[f64]| obj(y);
            let warm = coordinate_descent(&mut f, &h, x, radius, (0.02 * radius).max(1e-6), &self.descent);
            let spacing = 2.0 * radius / (self.lattice_per_axis.max(2) - 1) as f64;
            let centre = coordinate_descent(&mut f, x, x, radius, spacing, &self.descent);
            if centre.1 < warm.1 {
                centre
            } else {
                warm
            }
        };
        self.finish(clf, x, alpha, eps_target, seed, y_star, j_star, radius)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish<C: Clf + ?Sized>(
        &self,
        clf: &C,
        x: &[f64],
        alpha: f64,
        eps_target: f64,
        seed: u64,
        y_star: Vec<f64>,
        j_star: f64,
        radius: f64,
    ) -> Result<InfConvResult> {
        if !j_star.is_finite() || y_star.iter().any(|c| !c.is_finite()) {
            return Err(Error::Solver(format!("envelope objective diverged at x = {x:?}")));
        }
        let obj = |y: &[f64]| clf.value(y) + dist_sq(y, x) / (2.0 * alpha * alpha);
        let (y_eps, gap) = if eps_target >= 2.0 * self.floor {
            inject(&obj, x, radius, &y_star, j_star, 0.5 * eps_target, eps_target - self.floor, seed)
        } else {
            (y_star, 0.0)
        };
        let envelope_value = obj(&y_eps);
        let a2 = alpha * alpha;
        let zeta: Vec<f64> = x.iter().zip(&y_eps).map(|(xi, yi)| (xi - yi) / a2).collect();
        Ok(InfConvResult {
            y_eps: StateVec::new(y_eps).map_err(|e| Error::Solver(e.to_string()))?,
            zeta: StateVec::new(zeta).map_err(|e| Error::Solver(e.to_string()))?,
            envelope_value,
            eps_achieved: gap.max(0.0) + self.floor,
            alpha,
            search_radius: radius,
        })
    }
}

fn check_inputs<C: Clf + ?Sized>(clf: &C, x: &[f64], alpha: f64, eps_target: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(eps_target >= 0.0) || !eps_target.is_finite() {
        return Err(Error::param(format!("eps_target must be finite and ≥ 0, got {eps_target}")));
    }
    if x.len() != clf.dim() {
        return Err(Error::param(format!("state has dimension {}, CLF expects {}", x.len(), clf.dim())));
    }
    if x.iter().any(|c| !c.is_finite()) {
        return Err(Error::param("state is not finite"));
    }
    Ok(())
}

/// The `keep` lowest-objective points of a `per_axis^n` lattice over the
/// ball of `radius` around `x`.
fn lattice_best<F: Fn(&[f64]) -> f64>(
    obj: &F,
    x: &[f64],
    radius: f64,
    per_axis: usize,
    keep: usize,
) -> Result<Vec<(Vec<f64>, f64)>> {
    let n = x.len();
    let total = (per_axis as u64)
        .checked_pow(n as u32)
        .filter(|t| *t <= 5_000_000)
        .ok_or_else(|| Error::Resource(format!("lattice of {per_axis}^{n} points is too large")))?;
    let step = 2.0 * radius / (per_axis - 1) as f64;
    let mut idx = vec![0usize; n];
    let mut p = vec![0.0; n];
    let mut best: Vec<(Vec<f64>, f64)> = Vec::with_capacity(keep + 1);
    for _ in 0..total {
        let mut r2 = 0.0;
        for i in 0..n {
            let off = -radius + step * idx[i] as f64;
            p[i] = x[i] + off;
            r2 += off * off;
        }
        if r2 <= radius * radius * (1.0 + 1e-12) {
            let v = obj(&p);
            if best.len() < keep || v < best[best.len() - 1].1 {
                let pos = best.partition_point(|b| b.1 <= v);
                best.insert(pos, (p.clone(), v));
                best.truncate(keep.max(1));
            }
        }
        for d in idx.iter_mut() {
            *d += 1;
            if *d < per_axis {
                break;
            }
            *d = 0;
        }
    }
    Ok(best)
}

/// Moves away from `y_star` along seeded random directions until the
/// objective gap `J(y) − J(y_star)` lies in `[lo, hi]`, staying inside the
/// search ball. Returns the point and its gap; if no direction reaches the
/// band, the largest gap not exceeding `hi` that was seen.
#[allow(clippy::too_many_arguments)]
fn inject<F: Fn(&[f64]) -> f64>(
    obj: &F,
    x: &[f64],
    radius: f64,
    y_star: &[f64],
    j_star: f64,
    lo: f64,
    hi: f64,
    seed: u64,
) -> (Vec<f64>, f64) {
    let n = x.len();
    let mut rng = sampling::rng(seed, STREAM_INJECT);
    let mut fallback = (y_star.to_vec(), 0.0);
    let mut p = vec![0.0; n];
    for _ in 0..32 {
        let d = sampling::random_direction(&mut rng, n);
        let t_max = {
            let mut pd = 0.0;
            let mut pp = 0.0;
            for i in 0..n {
                let o = y_star[i] - x[i];
                pd += o * d[i];
                pp += o * o;
            }
            let disc = (pd * pd - (pp - radius * radius)).max(0.0);
            (-pd + disc.sqrt()).max(0.0)
        };
        if t_max == 0.0 {
            continue;
        }
        let gap = |t: f64, p: &mut [f64]| {
            for i in 0..n {
                p[i] = y_star[i] + t * d[i];
            }
            obj(p) - j_star
        };
        let g_max = gap(t_max, &mut p);
        if g_max <= hi {
            if g_max >= lo {
                return (p.clone(), g_max);
            }
            if g_max > fallback.1 {
                fallback = (p.clone(), g_max);
            }
            continue;
        }
        let (mut t_lo, mut t_hi) = (0.0, t_max);
        for _ in 0..200 {
            let mid = 0.5 * (t_lo + t_hi);
            let g = gap(mid, &mut p);
            if g < lo {
                t_lo = mid;
                if g > fallback.1 {
                    fallback = (p.clone(), g);
                }
            } else if g > hi {
                t_hi = mid;
            } else {
                return (p.clone(), g);
            }
        }
    }
    fallback
}

/// Free-function form of [`InfConvSolver::solve`] with a solver whose search
/// radius is `α √(2 (V(x) + eps_target))`.
pub fn moreau_envelope<C: Clf + ?Sized>(
    clf: &C,
    x: &[f64],
    alpha: f64,
    eps_target: f64,
    seed: u64,
) -> Result<InfConvResult> {
    InfConvSolver::new(0.0).solve(clf, x, alpha, eps_target, seed)
}

#[derive(Clone, Debug)]
pub struct ReferenceOptions {
    /// Lower bound on `V̄` used for the search radius.
    pub v_bar: f64,
    /// Maximum number of lattice points for the initial scan.
    pub lattice_budget: usize,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        Self { v_bar: 0.0, lattice_budget: 4096 }
    }
}

/// Upper bound on `V_α(x)` from a dyadic lattice scan followed by compass
/// search with step halving down to `grid_step`.
///
/// With search radius `ρ`, level `j` uses spacing `ρ/2^j`. The lattice uses
/// the finest level whose `(2^{j+1}+1)^n` points fit the budget; compass
/// levels then continue until the spacing is at most `grid_step`. The level
/// sequence for a smaller `grid_step` extends the one for a larger step, so
/// refining never increases the result.
pub fn reference_envelope<C: Clf + ?Sized>(
    clf: &C,
    x: &[f64],
    alpha: f64,
    grid_step: f64,
    opts: &ReferenceOptions,
) -> Result<f64> {
    check_inputs(clf, x, alpha, 0.0)?;
    if !(grid_step > 0.0) {
        return Err(Error::param(format!("grid step must be positive, got {grid_step}")));
    }
    let n = x.len();
    let a2 = 2.0 * alpha * alpha;
    let obj = |y: &[f64]| clf.value(y) + dist_sq(y, x) / a2;
    let radius = alpha * (2.0 * opts.v_bar.max(clf.value(x))).sqrt();
    if radius == 0.0 {
        return Ok(obj(x));
    }
    let per_axis = |j: u32| (1u64 << (j + 1)) + 1;
    let fits = |j: u32| per_axis(j).checked_pow(n as u32).is_some_and(|t| t <= opts.lattice_budget as u64);
    if !fits(0) {
        return Err(Error::Resource(format!(
            "a 3^{n} lattice exceeds the reference budget of {} points",
            opts.lattice_budget
        )));
    }
    let mut j0 = 0;
    while j0 < 40 && fits(j0 + 1) {
        j0 += 1;
    }
    let j_end = (radius / grid_step).log2().ceil().max(0.0);
    if j_end > 80.0 {
        return Err(Error::Resource(format!("grid step {grid_step} is too fine for search radius {radius}")));
    }
    let j_end = j_end as u32;

    let half = 1i64 << j0;
    let h0 = radius / half as f64;
    let pa = per_axis(j0) as usize;
    let mut idx = vec![0usize; n];
    let mut p = vec![0.0; n];
    let mut best = x.to_vec();
    let mut best_v = obj(x);
    for _ in 0..pa.pow(n as u32) {
        let mut r2 = 0.0;
        for i in 0..n {
            let off = h0 * (idx[i] as i64 - half) as f64;
            p[i] = x[i] + off;
            r2 += off * off;
        }
        if r2 <= radius * radius {
            let v = obj(&p);
            if v < best_v {
                best_v = v;
                best.copy_from_slice(&p);
            }
        }
        for d in idx.iter_mut() {
            *d += 1;
            if *d < pa {
                break;
            }
            *d = 0;
        }
    }

    for j in (j0 + 1)..=j_end {
        let h = radius / (1u64 << j) as f64;
        let mut moves = 0usize;
        loop {
            let mut improved = false;
            for i in 0..n {
                for s in [h, -h] {
                    p.copy_from_slice(&best);
                    p[i] += s;
                    if dist_sq(&p, x) > radius * radius {
                        continue;
                    }
                    let v = obj(&p);
                    if v < best_v {
                        best_v = v;
                        best.copy_from_slice(&p);
                        improved = true;
                    }
                }
            }
            moves += 1;
            if !improved || moves > 100_000 {
                break;
            }
        }
    }
    Ok(best_v)
}

/// `α` from the sandwich lemma's proof: `√(2V̄)·α = ε₁/(2L_V)`.
pub fn lemma2_alpha(v_bar: f64, l_v: f64, eps1: f64) -> f64 {
    eps1 / (2.0 * l_v * (2.0 * v_bar).sqrt())
}

/// `V_α(x) ≤ V(x) ≤ V_α(x) + ε₁` with `V_α` from [`reference_envelope`].
pub fn check_sandwich<C: Clf + ?Sized>(
    clf: &C,
    x: &[f64],
    alpha: f64,
    eps1: f64,
    grid_step: f64,
    opts: &ReferenceOptions,
) -> Result<bool> {
    if !(eps1 > 0.0) {
        return Err(Error::param(format!("eps1 must be positive, got {eps1}")));
    }
    let va = reference_envelope(clf, x, alpha, grid_step, opts)?;
    let v = clf.value(x);
    Ok(va <= v && v <= va + eps1)
}

/// Checks the proximal subgradient inequality
/// `V(z) ≥ V(y) + ⟨ζ, z − y⟩ − ‖z − y‖²/(2α²) − tol` at every probe, with
/// `y` and `ζ` taken from `result`.
pub fn check_prox_subgradient<C: Clf + ?Sized>(clf: &C, result: &InfConvResult, probes: &[Vec<f64>], tol: f64) -> bool {
    let y = result.y_eps.as_slice();
    let vy = clf.value(y);
    let a2 = 2.0 * result.alpha * result.alpha;
    let mut diff = vec![0.0; y.len()];
    probes.iter().all(|z| {
        for i in 0..y.len() {
            diff[i] = z[i] - y[i];
        }
        let rhs = vy + dot(&result.zeta, &diff) - dot(&diff, &diff) / a2;
        clf.value(z) >= rhs - tol
    })
}
