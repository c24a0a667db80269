//! Flat `key = value` run configuration with dotted keys.
//!
//! Blank lines and lines starting with `#` are ignored. Vectors are
//! comma-separated. See the README for the full key list.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use crate::bounds::EstimationConfig;
use crate::clf::{Clf, NormClf};
use crate::controller::UinfcParams;
use crate::endi::{CalibrationConfig, EndiClf, NiClf, ThetaGrid};
use crate::error::{Error, Result};
use crate::infconv::{InfConvSolver, ReferenceOptions};
use crate::linalg::{BoxSet, StateVec};
use crate::sampling::stream_seed;
use crate::sim::ShRunConfig;
use crate::systems::{Dynamics, Endi, NoiseKind, NoiseModel, NonholonomicIntegrator, SingleIntegrator};

/// Environment variable overriding every seed in a configuration.
pub const SEED_ENV: &str = "UINFC_SEED";

const KNOWN_KEYS: &[&str] = &[
    "system",
    "system.dim",
    "clf",
    "clf.decay_gain",
    "clf.calibration_radius",
    "clf.samples",
    "clf.seed",
    "clf.theta_points",
    "clf.theta_iters",
    "x0",
    "input.lower",
    "input.upper",
    "controller.alpha",
    "controller.eps",
    "controller.eta",
    "controller.chi",
    "controller.seed",
    "controller.flat_tol",
    "solver.working_radius",
    "solver.samples",
    "sim.delta",
    "sim.substeps",
    "sim.horizon",
    "sim.audit_stride",
    "sim.audit_grid_step",
    "sim.reference_budget",
    "noise.meas.kind",
    "noise.meas.bound",
    "noise.meas.seed",
    "noise.dist.kind",
    "noise.dist.bound",
    "noise.dist.seed",
    "verdict.r",
    "verdict.R",
    "verdict.t_max",
    "bounds.samples",
    "bounds.seed",
    "bounds.alpha",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SystemKind {
    Endi,
    Ni,
    SingleIntegrator(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClfKind {
    Endi,
    Ni,
    Norm,
}

/// Typed run configuration. Cheap to clone and edit; [`RunSpec::build`]
/// turns it into a simulation configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub system: SystemKind,
    pub clf: ClfKind,
    pub decay_gain: f64,
    pub calibration: CalibrationConfigSpec,
    pub theta_points: usize,
    pub theta_iters: usize,
    pub x0: Vec<f64>,
    pub input_lower: Vec<f64>,
    pub input_upper: Vec<f64>,
    pub alpha: f64,
    pub eps: f64,
    pub eta: f64,
    pub chi: f64,
    pub controller_seed: u64,
    pub flat_tol: f64,
    /// Radius of the ball used to size the minimizer search; defaults to `R`.
    pub working_radius: Option<f64>,
    pub solver_samples: usize,
    pub delta: f64,
    pub substeps: usize,
    pub horizon: usize,
    pub audit_stride: usize,
    pub audit_grid_step: f64,
    pub reference_budget: usize,
    pub meas_noise: NoiseModel,
    pub dist_noise: NoiseModel,
    pub r: f64,
    pub big_r: f64,
    /// Latest admissible entry time; defaults to the run length.
    pub t_max: Option<f64>,
    pub bounds_samples: usize,
    pub bounds_seed: u64,
    /// `None` selects the largest admissible `α`.
    pub bounds_alpha: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationConfigSpec {
    pub radius: f64,
    pub samples: usize,
    pub seed: u64,
}

struct Raw {
    entries: BTreeMap<String, (usize, String)>,
}

impl Raw {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = i + 1;
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {lineno}: expected `key = value`, got `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            if !KNOWN_KEYS.contains(&k) {
                return Err(Error::config(format!("line {lineno}: unknown key `{k}`")));
            }
            if let Some((prev, _)) = entries.insert(k.to_string(), (lineno, v.to_string())) {
                return Err(Error::config(format!("line {lineno}: key `{k}` already set on line {prev}")));
            }
        }
        Ok(Self { entries })
    }

    fn get(&self, key: &str) -> Option<&(usize, String)> {
        self.entries.get(key)
    }

    fn required(&self, key: &str) -> Result<&(usize, String)> {
        self.get(key).ok_or_else(|| Error::config(format!("missing required key `{key}`")))
    }

    fn parse_as<T: std::str::FromStr>(key: &str, entry: &(usize, String)) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        entry
            .1
            .parse::<T>()
            .map_err(|e| Error::config(format!("line {}: key `{key}`: cannot parse `{}`: {e}", entry.0, entry.1)))
    }

    fn req<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Self::parse_as(key, self.required(key)?)
    }

    fn opt<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            Some(e) => Self::parse_as(key, e),
            None => Ok(default),
        }
    }

    fn vector(&self, key: &str) -> Result<Vec<f64>> {
        let (lineno, v) = self.required(key)?;
        parse_list(v).map_err(|e| Error::config(format!("line {lineno}: key `{key}`: {e}")))
    }

    fn noise(&self, channel: &str) -> Result<NoiseModel> {
        let kind_key = format!("noise.{channel}.kind");
        let kind = match self.get(&kind_key) {
            Some(e) => e.1.parse::<NoiseKind>().map_err(|err| Error::config(format!("line {}: {err}", e.0)))?,
            None => NoiseKind::Zero,
        };
        let bound: f64 = self.opt(&format!("noise.{channel}.bound"), 0.0)?;
        let seed: u64 = self.opt(&format!("noise.{channel}.seed"), 0)?;
        Ok(NoiseModel { kind, bound, seed })
    }
}

/// Parses a comma-separated list of finite reals.
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    let vals = s
        .split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>().map_err(|e| Error::config(format!("cannot parse `{t}` as a number: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::config("list entries must be finite"));
    }
    Ok(vals)
}

impl RunSpec {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read `{}`: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw = Raw::parse(text)?;
        let system = match raw.required("system")?.1.as_str() {
            "endi" => SystemKind::Endi,
            "ni" => SystemKind::Ni,
            "single_integrator" => SystemKind::SingleIntegrator(raw.opt("system.dim", 1usize)?),
            other => {
                return Err(Error::config(format!(
                    "line {}: unknown system `{other}` (expected endi, ni or single_integrator)",
                    raw.required("system")?.0
                )))
            }
        };
        let clf = match raw.required("clf")?.1.as_str() {
            "endi" => ClfKind::Endi,
            "ni" => ClfKind::Ni,
            "norm" => ClfKind::Norm,
            other => {
                return Err(Error::config(format!(
                    "line {}: unknown clf `{other}` (expected endi, ni or norm)",
                    raw.required("clf")?.0
                )))
            }
        };
        let cal_default = CalibrationConfig::default();
        let t_max = match raw.get("verdict.t_max") {
            Some(e) => Some(Raw::parse_as::<f64>("verdict.t_max", e)?),
            None => None,
        };
        let working_radius = match raw.get("solver.working_radius") {
            Some(e) => Some(Raw::parse_as::<f64>("solver.working_radius", e)?),
            None => None,
        };
        let bounds_alpha = match raw.get("bounds.alpha") {
            Some((_, v)) if v == "auto" => None,
            Some(e) => Some(Raw::parse_as::<f64>("bounds.alpha", e)?),
            None => None,
        };
        let spec = RunSpec {
            system,
            clf,
            decay_gain: raw.opt("clf.decay_gain", 0.5)?,
            calibration: CalibrationConfigSpec {
                radius: raw.opt("clf.calibration_radius", cal_default.radius)?,
                samples: raw.opt("clf.samples", cal_default.samples)?,
                seed: raw.opt("clf.seed", cal_default.seed)?,
            },
            theta_points: raw.opt("clf.theta_points", 64)?,
            theta_iters: raw.opt("clf.theta_iters", 40)?,
            x0: raw.vector("x0")?,
            input_lower: raw.vector("input.lower")?,
            input_upper: raw.vector("input.upper")?,
            alpha: raw.req("controller.alpha")?,
            eps: raw.req("controller.eps")?,
            eta: raw.req("controller.eta")?,
            chi: raw.req("controller.chi")?,
            controller_seed: raw.opt("controller.seed", 1)?,
            flat_tol: raw.opt("controller.flat_tol", 1e-12)?,
            working_radius,
            solver_samples: raw.opt("solver.samples", 2000)?,
            delta: raw.req("sim.delta")?,
            substeps: raw.opt("sim.substeps", 10)?,
            horizon: raw.req("sim.horizon")?,
            audit_stride: raw.opt("sim.audit_stride", 10)?,
            audit_grid_step: raw.opt("sim.audit_grid_step", 1e-3)?,
            reference_budget: raw.opt("sim.reference_budget", 4096)?,
            meas_noise: raw.noise("meas")?,
            dist_noise: raw.noise("dist")?,
            r: raw.req("verdict.r")?,
            big_r: raw.req("verdict.R")?,
            t_max,
            bounds_samples: raw.opt("bounds.samples", EstimationConfig::default().samples)?,
            bounds_seed: raw.opt("bounds.seed", EstimationConfig::default().seed)?,
            bounds_alpha,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Structural checks that do not require building the CLF.
    pub fn validate(&self) -> Result<()> {
        let n = self.state_dim();
        if self.x0.len() != n {
            return Err(Error::config(format!("`x0` has {} entries, the system has {n} states", self.x0.len())));
        }
        let m = self.control_dim();
        if self.input_lower.len() != m || self.input_upper.len() != m {
            return Err(Error::config(format!("`input.lower`/`input.upper` must have {m} entries")));
        }
        let clf_dim = match self.clf {
            ClfKind::Endi => 5,
            ClfKind::Ni => 3,
            ClfKind::Norm => n,
        };
        if clf_dim != n {
            return Err(Error::config(format!("clf has dimension {clf_dim}, the system has {n} states")));
        }
        if !(self.r > 0.0 && self.r < self.big_r) {
            return Err(Error::config(format!(
                "`verdict.r` must satisfy 0 < r < R, got r = {}, R = {}",
                self.r, self.big_r
            )));
        }
        if !(self.delta > 0.0) {
            return Err(Error::config(format!("`sim.delta` must be positive, got {}", self.delta)));
        }
        if self.substeps == 0 {
            return Err(Error::config("`sim.substeps` must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(format!("`controller.alpha` must lie in (0, 1), got {}", self.alpha)));
        }
        for (key, v) in [("controller.eps", self.eps), ("controller.eta", self.eta)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("`{key}` must be finite and ≥ 0, got {v}")));
            }
        }
        if !(self.chi > 0.0) {
            return Err(Error::config(format!("`controller.chi` must be positive, got {}", self.chi)));
        }
        for (key, m) in [("noise.meas.bound", &self.meas_noise), ("noise.dist.bound", &self.dist_noise)] {
            if !(m.bound >= 0.0 && m.bound.is_finite()) {
                return Err(Error::config(format!("`{key}` must be finite and ≥ 0, got {}", m.bound)));
            }
        }
        let x0_norm = crate::linalg::norm(&self.x0);
        if x0_norm > self.big_r {
            return Err(Error::config(format!("‖x0‖ = {x0_norm} exceeds `verdict.R` = {}", self.big_r)));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        match self.system {
            SystemKind::Endi => 5,
            SystemKind::Ni => 3,
            SystemKind::SingleIntegrator(n) => n,
        }
    }

    pub fn control_dim(&self) -> usize {
        match self.system {
            SystemKind::Endi | SystemKind::Ni => 2,
            SystemKind::SingleIntegrator(n) => n,
        }
    }

    /// Replaces every seed with an independent stream derived from `seed`.
    pub fn override_seeds(&mut self, seed: u64) {
        self.controller_seed = stream_seed(seed, 1);
        self.meas_noise.seed = stream_seed(seed, 2);
        self.dist_noise.seed = stream_seed(seed, 3);
        self.calibration.seed = stream_seed(seed, 4);
        self.bounds_seed = stream_seed(seed, 5);
    }

    /// Applies [`SEED_ENV`] if it is set.
    pub fn apply_seed_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            let seed = v
                .trim()
                .parse::<u64>()
                .map_err(|e| Error::config(format!("{SEED_ENV} = `{v}` is not an unsigned integer: {e}")))?;
            self.override_seeds(seed);
        }
        Ok(())
    }

    pub fn input_set(&self) -> Result<BoxSet> {
        BoxSet::new(self.input_lower.clone(), self.input_upper.clone())
    }

    pub fn build_dynamics(&self) -> Arc<dyn Dynamics> {
        match self.system {
            SystemKind::Endi => Arc::new(Endi),
            SystemKind::Ni => Arc::new(NonholonomicIntegrator),
            SystemKind::SingleIntegrator(n) => Arc::new(SingleIntegrator { n }),
        }
    }

    /// Builds and, for the nonholonomic CLFs, calibrates the CLF.
    pub fn build_clf(&self) -> Result<Arc<dyn Clf>> {
        let cal = CalibrationConfig {
            radius: self.calibration.radius,
            samples: self.calibration.samples,
            seed: self.calibration.seed,
            ..CalibrationConfig::default()
        };
        let input_set = self.input_set()?;
        Ok(match self.clf {
            ClfKind::Endi => {
                Arc::new(EndiClf::calibrated(ThetaGrid::new(self.theta_points, self.theta_iters)?, &input_set, &cal)?)
            }
            ClfKind::Ni => Arc::new(NiClf::calibrated(&input_set, &cal)?),
            ClfKind::Norm => Arc::new(NormClf::new(self.state_dim(), self.decay_gain)?),
        })
    }

    pub fn estimation_config(&self) -> EstimationConfig {
        EstimationConfig { samples: self.bounds_samples, seed: self.bounds_seed, ..EstimationConfig::default() }
    }

    pub fn controller_params(&self) -> Result<UinfcParams> {
        let p = UinfcParams {
            alpha: self.alpha,
            eps_target: self.eps,
            eta_target: self.eta,
            chi: self.chi,
            input_set: self.input_set()?,
            seed: self.controller_seed,
            flat_tol: self.flat_tol,
        };
        p.validate()?;
        Ok(p)
    }

    /// Simulation configuration sharing an already built CLF.
    pub fn build_with(&self, clf: Arc<dyn Clf>) -> Result<ShRunConfig> {
        self.validate()?;
        let working = self.working_radius.unwrap_or(self.big_r);
        let solver =
            InfConvSolver::for_working_ball(clf.as_ref(), working, self.solver_samples, self.calibration.seed)?;
        let reference = ReferenceOptions { v_bar: solver.v_bar, lattice_budget: self.reference_budget };
        Ok(ShRunConfig {
            dyn_: self.build_dynamics(),
            clf,
            params: self.controller_params()?,
            solver,
            delta: self.delta,
            substeps: self.substeps,
            horizon_samples: self.horizon,
            x0: StateVec::new(self.x0.clone())?,
            meas_noise: self.meas_noise,
            dist_noise: self.dist_noise,
            r: self.r,
            big_r: self.big_r,
            audit_stride: self.audit_stride,
            audit_grid_step: self.audit_grid_step,
            reference,
        })
    }

    pub fn build(&self) -> Result<ShRunConfig> {
        self.build_with(self.build_clf()?)
    }

    /// Entry-time limit for verdicts.
    pub fn t_max(&self) -> f64 {
        self.t_max.unwrap_or(self.horizon as f64 * self.delta)
    }
}
