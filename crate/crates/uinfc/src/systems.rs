//! System dynamics `ẋ = f(x, u)` and bounded noise generators.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{ControlVec, StateVec};
use crate::sampling;

/// Right-hand side of `ẋ = f(x, u)`.
pub trait Dynamics: Send + Sync {
    fn state_dim(&self) -> usize;

    fn control_dim(&self) -> usize;

    /// Writes `f(x, u)` into `out`. Slices must have the declared dimensions.
    fn rhs_into(&self, x: &[f64], u: &[f64], out: &mut [f64]);

    /// Whether `f` is affine in `u`.
    fn control_affine(&self) -> bool;
}

/// Dimension-checked evaluation of `f(x, u)`.
pub fn rhs<D: Dynamics + ?Sized>(dyn_: &D, x: &StateVec, u: &ControlVec) -> Result<StateVec> {
    if x.dim() != dyn_.state_dim() || u.dim() != dyn_.control_dim() {
        return Err(Error::param(format!(
            "expected state/control dimensions {}/{}, got {}/{}",
            dyn_.state_dim(),
            dyn_.control_dim(),
            x.dim(),
            u.dim()
        )));
    }
    let mut out = vec![0.0; x.dim()];
    dyn_.rhs_into(x, u, &mut out);
    StateVec::new(out).map_err(|e| Error::Evaluation(e.to_string()))
}

/// Nonholonomic integrator with integrators on both inputs:
/// `x = (φ₁, φ₂, φ₃, η₁, η₂)`, `ẋ = (η₁, η₂, φ₁η₂ − η₁φ₂, u₁, u₂)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Endi;

impl Dynamics for Endi {
    fn state_dim(&self) -> usize {
        5
    }

    fn control_dim(&self) -> usize {
        2
    }

    fn rhs_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        out[0] = x[3];
        out[1] = x[4];
        out[2] = x[0] * x[4] - x[3] * x[1];
        out[3] = u[0];
        out[4] = u[1];
    }

    fn control_affine(&self) -> bool {
        true
    }
}

/// Nonholonomic integrator `φ̇ = (ω₁, ω₂, −φ₂ω₁ + φ₁ω₂)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct NonholonomicIntegrator;

impl Dynamics for NonholonomicIntegrator {
    fn state_dim(&self) -> usize {
        3
    }

    fn control_dim(&self) -> usize {
        2
    }

    fn rhs_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        out[0] = u[0];
        out[1] = u[1];
        out[2] = -x[1] * u[0] + x[0] * u[1];
    }

    fn control_affine(&self) -> bool {
        true
    }
}

/// `ẋ = u` in `n` dimensions.
#[derive(Clone, Copy, Debug)]
pub struct SingleIntegrator {
    pub n: usize,
}

impl Dynamics for SingleIntegrator {
    fn state_dim(&self) -> usize {
        self.n
    }

    fn control_dim(&self) -> usize {
        self.n
    }

    fn rhs_into(&self, _x: &[f64], u: &[f64], out: &mut [f64]) {
        out.copy_from_slice(u);
    }

    fn control_affine(&self) -> bool {
        true
    }
}

pub fn endi_rhs(x: &StateVec, u: &ControlVec) -> Result<StateVec> {
    rhs(&Endi, x, u)
}

pub fn ni_rhs(phi: &StateVec, omega: &ControlVec) -> Result<StateVec> {
    rhs(&NonholonomicIntegrator, phi, omega)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseKind {
    Zero,
    UniformBall,
    WorstCaseSine,
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(NoiseKind::Zero),
            "uniform_ball" => Ok(NoiseKind::UniformBall),
            "worst_case_sine" => Ok(NoiseKind::WorstCaseSine),
            other => Err(Error::config(format!(
                "unknown noise kind `{other}` (expected zero, uniform_ball or worst_case_sine)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub bound: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn zero() -> Self {
        Self { kind: NoiseKind::Zero, bound: 0.0, seed: 0 }
    }

    pub fn uniform_ball(bound: f64, seed: u64) -> Self {
        Self { kind: NoiseKind::UniformBall, bound, seed }
    }

    /// Norm bound actually guaranteed by this model.
    pub fn effective_bound(&self) -> f64 {
        match self.kind {
            NoiseKind::Zero => 0.0,
            _ => self.bound,
        }
    }
}

/// Stateful emitter for one noise channel. One instance per run.
#[derive(Clone, Debug)]
pub struct NoiseSource {
    model: NoiseModel,
    rng: ChaCha8Rng,
}

impl NoiseSource {
    /// `stream` separates channels that share a seed.
    pub fn new(model: NoiseModel, stream: u64) -> Result<Self> {
        if !(model.bound >= 0.0) || !model.bound.is_finite() {
            return Err(Error::param(format!("noise bound must be finite and ≥ 0, got {}", model.bound)));
        }
        Ok(Self { model, rng: sampling::rng(model.seed, stream) })
    }

    pub fn model(&self) -> &NoiseModel {
        &self.model
    }

    /// True when successive calls draw fresh random values rather than
    /// evaluating a fixed function of time.
    pub fn is_random(&self) -> bool {
        self.model.kind == NoiseKind::UniformBall && self.model.bound > 0.0
    }

    /// Writes one noise vector for time `t` into `out`.
    pub fn emit_into(&mut self, t: f64, out: &mut [f64]) {
        let n = out.len();
        let b = self.model.bound;
        match self.model.kind {
            NoiseKind::Zero => out.fill(0.0),
            NoiseKind::UniformBall => {
                if b == 0.0 {
                    out.fill(0.0);
                    return;
                }
                let dir = sampling::random_direction(&mut self.rng, n);
                let s = b * self.rng.gen::<f64>().powf(1.0 / n as f64);
                for (o, d) in out.iter_mut().zip(dir) {
                    *o = s * d;
                }
            }
            NoiseKind::WorstCaseSine => {
                out.fill(0.0);
                let phase = t - t.floor();
                if n == 1 {
                    out[0] = b * (2.0 * std::f64::consts::PI * phase).cos();
                    return;
                }
                // Full-norm vector sweeping through the coordinate axes once per time unit.
                let s = phase * n as f64;
                let i = (s.floor() as usize).min(n - 1);
                let frac = s - i as f64;
                let ang = 0.5 * std::f64::consts::PI * frac;
                out[i] = b * ang.cos();
                out[(i + 1) % n] += b * ang.sin();
            }
        }
    }

    pub fn emit(&mut self, t: f64, n: usize) -> Result<StateVec> {
        if n == 0 {
            return Err(Error::param("noise dimension must be at least 1"));
        }
        let mut out = vec![0.0; n];
        self.emit_into(t, &mut out);
        StateVec::new(out)
    }
}

pub fn emit_noise(source: &mut NoiseSource, t: f64, n: usize) -> Result<StateVec> {
    source.emit(t, n)
}
