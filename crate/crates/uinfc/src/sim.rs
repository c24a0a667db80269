//! Sample-and-hold closed-loop simulation with bounded noise, practical
//! stability verdicts and the per-sample decay audit.

use std::io::Write;
use std::sync::Arc;

use crate::clf::{rho_v, Clf};
use crate::controller::{uinfc_step, UinfcParams};
use crate::error::{Error, Result};
use crate::infconv::{reference_envelope, InfConvSolver, ReferenceOptions};
use crate::linalg::{norm, StateVec};
use crate::sampling::stream_seed;
use crate::systems::{Dynamics, NoiseModel, NoiseSource};

const STREAM_MEAS: u64 = 0x51;
const STREAM_DIST: u64 = 0x52;

/// Runs diverge once the state norm exceeds this multiple of the start radius.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

/// Slack added to the decay threshold in [`decay_audit`].
pub const AUDIT_TOL: f64 = 1e-8;

/// Fraction of the horizon that must remain after entry for a stable verdict.
pub const MIN_REMAINING_FRACTION: f64 = 0.1;

/// Everything needed for one closed-loop run.
#[derive(Clone)]
pub struct ShRunConfig {
    pub dyn_: Arc<dyn Dynamics>,
    pub clf: Arc<dyn Clf>,
    pub params: UinfcParams,
    pub solver: InfConvSolver,
    /// Sampling time.
    pub delta: f64,
    /// RK4 steps per sample.
    pub substeps: usize,
    pub horizon_samples: usize,
    pub x0: StateVec,
    pub meas_noise: NoiseModel,
    pub dist_noise: NoiseModel,
    /// Target radius of the verdict.
    pub r: f64,
    /// Start radius of the verdict.
    pub big_r: f64,
    /// `V_α(x̂)` is logged every this many samples; 0 disables it.
    pub audit_stride: usize,
    pub audit_grid_step: f64,
    pub reference: ReferenceOptions,
}

impl std::fmt::Debug for ShRunConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShRunConfig")
            .field("params", &self.params)
            .field("delta", &self.delta)
            .field("substeps", &self.substeps)
            .field("horizon_samples", &self.horizon_samples)
            .field("x0", &self.x0)
            .field("meas_noise", &self.meas_noise)
            .field("dist_noise", &self.dist_noise)
            .field("r", &self.r)
            .field("big_r", &self.big_r)
            .finish_non_exhaustive()
    }
}

impl ShRunConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.dyn_.state_dim();
        if self.clf.dim() != n || self.x0.dim() != n || self.params.input_set.dim() != self.dyn_.control_dim() {
            return Err(Error::param("CLF, dynamics, initial state and input box dimensions disagree"));
        }
        self.params.validate()?;
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::param(format!("sampling time must be positive, got {}", self.delta)));
        }
        if self.substeps == 0 {
            return Err(Error::param("substeps must be at least 1"));
        }
        if !(self.r > 0.0 && self.r < self.big_r && self.big_r.is_finite()) {
            return Err(Error::param(format!("radii must satisfy 0 < r < R, got r = {}, R = {}", self.r, self.big_r)));
        }
        if self.x0.norm() > self.big_r {
            return Err(Error::param(format!("‖x0‖ = {} exceeds R = {}", self.x0.norm(), self.big_r)));
        }
        if self.audit_stride > 0 && !(self.audit_grid_step > 0.0) {
            return Err(Error::param("audit grid step must be positive"));
        }
        Ok(())
    }

    /// `α₁(r − ē − q̄)`; envelope values at or above half of it are outside
    /// the core ball.
    pub fn core_level(&self) -> Result<f64> {
        let r_hat = self.r - self.meas_noise.effective_bound() - self.dist_noise.effective_bound();
        if r_hat > 0.0 {
            rho_v(self.clf.as_ref(), r_hat)
        } else {
            Ok(0.0)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    /// Outside the core ball.
    Case1,
    /// Inside the core ball.
    Case2,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::Case1 => "case1",
            Region::Case2 => "case2",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub k: usize,
    pub t: f64,
    pub x: Vec<f64>,
    pub x_hat: Vec<f64>,
    /// Control held over `[t, t + δ]`.
    pub u: Vec<f64>,
    pub eps_used: f64,
    pub eta_used: f64,
    /// `V(x̂)`.
    pub v: f64,
    /// Reference `V_α(x̂)` on audit samples.
    pub v_alpha: Option<f64>,
    pub region: Region,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryLog {
    pub state_dim: usize,
    pub control_dim: usize,
    pub rows: Vec<TrajectoryRow>,
    /// Set when the run was aborted by the divergence guard.
    pub diverged: bool,
}

impl TrajectoryLog {
    pub fn header(n: usize, m: usize) -> Vec<String> {
        let mut h = vec!["k".to_string(), "t".to_string()];
        h.extend((1..=n).map(|i| format!("x{i}")));
        h.extend((1..=n).map(|i| format!("xhat{i}")));
        h.extend((1..=m).map(|i| format!("u{i}")));
        h.extend(["eps_used", "eta_used", "V", "V_alpha", "region"].map(String::from));
        h
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(Self::header(self.state_dim, self.control_dim))?;
        for row in &self.rows {
            let mut rec = vec![row.k.to_string(), row.t.to_string()];
            rec.extend(row.x.iter().map(f64::to_string));
            rec.extend(row.x_hat.iter().map(f64::to_string));
            rec.extend(row.u.iter().map(f64::to_string));
            rec.push(row.eps_used.to_string());
            rec.push(row.eta_used.to_string());
            rec.push(row.v.to_string());
            rec.push(row.v_alpha.map(|v| v.to_string()).unwrap_or_default());
            rec.push(row.region.as_str().to_string());
            wr.write_record(rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn final_norm(&self) -> f64 {
        self.rows.last().map(|r| norm(&r.x)).unwrap_or(f64::NAN)
    }

    /// Smallest logged `V(x̂)`.
    pub fn min_v(&self) -> f64 {
        self.rows.iter().map(|r| r.v).fold(f64::INFINITY, f64::min)
    }
}

/// RK4 over one sample with the control held. Random disturbances are
/// drawn once per sample and held, so the realized `q(t)` does not depend on
/// `substeps`; deterministic ones are evaluated at the stage times.
fn advance<D: Dynamics + ?Sized>(
    dyn_: &D,
    x: &mut [f64],
    u: &[f64],
    t0: f64,
    delta: f64,
    substeps: usize,
    dist: &mut NoiseSource,
) {
    let n = x.len();
    let h = delta / substeps as f64;
    let held = dist.is_random();
    let mut q = vec![0.0; n];
    if held {
        dist.emit_into(t0, &mut q);
    }
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut eval = |y: &[f64], t: f64, out: &mut [f64]| {
        if !held {
            dist.emit_into(t, &mut q);
        }
        dyn_.rhs_into(y, u, out);
        for (o, qi) in out.iter_mut().zip(&q) {
            *o += qi;
        }
    };
    for s in 0..substeps {
        let t = t0 + s as f64 * h;
        eval(x, t, &mut k1);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        eval(&tmp, t + 0.5 * h, &mut k2);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        eval(&tmp, t + 0.5 * h, &mut k3);
        for i in 0..n {
            tmp[i] = x[i] + h * k3[i];
        }
        eval(&tmp, t + h, &mut k4);
        for i in 0..n {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

/// Runs the sampled closed loop for `horizon_samples` samples.
///
/// Row `k` holds the state at `t = kδ`, its measurement, and the control
/// applied over the following sample; the last row also carries the control
/// that would be applied next. A run whose state leaves the ball of radius
/// [`DIVERGENCE_FACTOR`]`·R` stops early with `diverged` set.
pub fn simulate(cfg: &ShRunConfig) -> Result<TrajectoryLog> {
    cfg.validate()?;
    let n = cfg.dyn_.state_dim();
    let m = cfg.dyn_.control_dim();
    let core = cfg.core_level()?;
    let mut meas = NoiseSource::new(cfg.meas_noise, STREAM_MEAS)?;
    let mut dist = NoiseSource::new(cfg.dist_noise, STREAM_DIST)?;
    let mut log = TrajectoryLog {
        state_dim: n,
        control_dim: m,
        rows: Vec::with_capacity(cfg.horizon_samples + 1),
        diverged: false,
    };
    let mut x = cfg.x0.as_slice().to_vec();
    let mut e = vec![0.0; n];
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let limit = DIVERGENCE_FACTOR * cfg.big_r;
    let mut params = cfg.params.clone();

    for k in 0..=cfg.horizon_samples {
        let t = k as f64 * cfg.delta;
        meas.emit_into(t, &mut e);
        let x_hat: Vec<f64> = x.iter().zip(&e).map(|(a, b)| a + b).collect();
        params.seed = stream_seed(cfg.params.seed, k as u64);
        let hint =
            prev.as_ref().map(|(y, xh)| y.iter().zip(&x_hat).zip(xh).map(|((y, a), b)| y + a - b).collect::<Vec<_>>());
        let (u, diag) = uinfc_step(cfg.clf.as_ref(), cfg.dyn_.as_ref(), &cfg.solver, &x_hat, &params, hint.as_deref())?;
        let v_alpha = if cfg.audit_stride > 0 && k % cfg.audit_stride == 0 {
            Some(reference_envelope(cfg.clf.as_ref(), &x_hat, params.alpha, cfg.audit_grid_step, &cfg.reference)?)
        } else {
            None
        };
        let region = if diag.envelope_value >= 0.5 * core { Region::Case1 } else { Region::Case2 };
        log.rows.push(TrajectoryRow {
            k,
            t,
            x: x.clone(),
            x_hat: x_hat.clone(),
            u: u.as_slice().to_vec(),
            eps_used: diag.eps_achieved,
            eta_used: diag.eta_achieved,
            v: cfg.clf.value(&x_hat),
            v_alpha,
            region,
        });
        if k == cfg.horizon_samples {
            break;
        }
        advance(cfg.dyn_.as_ref(), &mut x, &u, t, cfg.delta, cfg.substeps, &mut dist);
        let nx = norm(&x);
        if !nx.is_finite() || nx > limit {
            log.diverged = true;
            break;
        }
        prev = Some((diag.y.into_inner(), x_hat));
    }
    Ok(log)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Verdict {
    /// Entered the target ball at this time and stayed there.
    StableAt(f64),
    Unstable,
    Inconclusive,
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::StableAt(_) => "stable",
            Verdict::Unstable => "unstable",
            Verdict::Inconclusive => "inconclusive",
        }
    }

    pub fn entry_time(&self) -> Option<f64> {
        match self {
            Verdict::StableAt(t) => Some(*t),
            _ => None,
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::StableAt(t) => write!(f, "stable_at({t})"),
            other => f.write_str(other.label()),
        }
    }
}

/// Finds the start of the final stretch of rows with `‖x‖ ≤ r`.
///
/// Stable if that stretch starts no later than `t_max` and at least
/// [`MIN_REMAINING_FRACTION`] of the horizon follows it; inconclusive if it
/// starts too late to tell; unstable if the run ends outside the ball,
/// diverged, or entered after `t_max`.
pub fn check_practical_stability(log: &TrajectoryLog, r: f64, t_max: f64) -> Verdict {
    let Some(last) = log.rows.last() else {
        return Verdict::Inconclusive;
    };
    if log.diverged || norm(&last.x) > r {
        return Verdict::Unstable;
    }
    let entry = log.rows.iter().rposition(|row| norm(&row.x) > r).map_or(0, |i| i + 1);
    let horizon = last.k;
    let remaining = horizon - log.rows[entry].k;
    if (remaining as f64) < MIN_REMAINING_FRACTION * horizon as f64 {
        return Verdict::Inconclusive;
    }
    let t_entry = log.rows[entry].t;
    if t_entry <= t_max {
        Verdict::StableAt(t_entry)
    } else {
        Verdict::Unstable
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditRow {
    pub k: usize,
    pub v_alpha: f64,
    pub v_alpha_next: f64,
    /// `V_α(x_{k+1}) − V_α(x_k)`.
    pub delta_v: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditReport {
    /// Case-1 transitions only.
    pub rows: Vec<AuditRow>,
    /// `−(3/8)·δ·w̄ + AUDIT_TOL`.
    pub threshold: f64,
    pub passed: usize,
}

impl AuditReport {
    /// Passing fraction of audited transitions; 1 when nothing was audited.
    pub fn pass_rate(&self) -> f64 {
        if self.rows.is_empty() {
            1.0
        } else {
            self.passed as f64 / self.rows.len() as f64
        }
    }
}

/// Recomputes `V_α` of the true state at every sample with the reference
/// envelope at `grid_step` and checks `Δ ≤ −(3/8)δw̄ + AUDIT_TOL` on every
/// transition starting outside the core ball (`V_α(x_k) ≥ v̂/2`).
pub fn decay_audit(log: &TrajectoryLog, cfg: &ShRunConfig, w_bar: f64, grid_step: f64) -> Result<AuditReport> {
    let core = cfg.core_level()?;
    let alpha = cfg.params.alpha;
    let va: Vec<f64> = log
        .rows
        .iter()
        .map(|row| reference_envelope(cfg.clf.as_ref(), &row.x, alpha, grid_step, &cfg.reference))
        .collect::<Result<_>>()?;
    let threshold = -0.375 * cfg.delta * w_bar + AUDIT_TOL;
    let mut rows = Vec::new();
    let mut passed = 0;
    for k in 0..va.len().saturating_sub(1) {
        if va[k] < 0.5 * core {
            continue;
        }
        let delta_v = va[k + 1] - va[k];
        let pass = delta_v <= threshold;
        passed += usize::from(pass);
        rows.push(AuditRow { k: log.rows[k].k, v_alpha: va[k], v_alpha_next: va[k + 1], delta_v, pass });
    }
    Ok(AuditReport { rows, threshold, passed })
}
