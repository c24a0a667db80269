//! Subcommand implementations behind the `uinfc` binary. Each returns the
//! process exit code.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::bounds::compute_bounds;
use crate::config::{parse_list, RunSpec};
use crate::error::{Error, Result};
use crate::sim::{check_practical_stability, simulate, TrajectoryLog, Verdict};
use crate::validate::{self, ValidationHooks};

pub const EXIT_STABLE: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_UNSTABLE: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

pub fn verdict_exit_code(v: &Verdict) -> i32 {
    match v {
        Verdict::StableAt(_) => EXIT_STABLE,
        Verdict::Unstable => EXIT_UNSTABLE,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

fn load_spec(config: &Path) -> Result<RunSpec> {
    let mut spec = RunSpec::from_file(config)?;
    spec.apply_seed_env()?;
    Ok(spec)
}

fn write_log(log: &TrajectoryLog, path: &Path) -> Result<()> {
    log.write_csv(BufWriter::new(File::create(path)?))
}

/// Runs one configuration, writes its trajectory and returns the verdict.
pub fn simulate_spec(spec: &RunSpec, out: &Path) -> Result<(TrajectoryLog, Verdict)> {
    let cfg = spec.build()?;
    let log = simulate(&cfg)?;
    write_log(&log, out)?;
    let verdict = check_practical_stability(&log, spec.r, spec.t_max());
    Ok((log, verdict))
}

pub fn run_simulate(config: &Path, out: &Path) -> i32 {
    match load_spec(config).and_then(|s| simulate_spec(&s, out)) {
        Ok((log, verdict)) => {
            let diverged = if log.diverged { " (diverged)" } else { "" };
            println!("verdict: {verdict}{diverged} final_norm={} min_V={}", log.final_norm(), log.min_v());
            verdict_exit_code(&verdict)
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

/// The configuration entry a sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    Eps,
    Eta,
    EpsAndEta,
    EBar,
    QBar,
    EAndQ,
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "eps" => SweepParam::Eps,
            "eta" => SweepParam::Eta,
            "eps_and_eta" => SweepParam::EpsAndEta,
            "e_bar" => SweepParam::EBar,
            "q_bar" => SweepParam::QBar,
            "e_and_q" => SweepParam::EAndQ,
            other => {
                return Err(Error::config(format!(
                    "unknown sweep parameter `{other}` (expected eps, eta, eps_and_eta, e_bar, q_bar or e_and_q)"
                )))
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParam,
    pub values: Vec<f64>,
    pub base: RunSpec,
}

impl SweepSpec {
    pub fn new(parameter: SweepParam, values: Vec<f64>, base: RunSpec) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::config("sweep values list is empty"));
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::config(format!("sweep values must be positive and finite, got {v}")));
        }
        Ok(Self { parameter, values, base })
    }

    /// The base configuration with the swept entry set to `value`.
    pub fn apply(&self, value: f64) -> RunSpec {
        let mut s = self.base.clone();
        match self.parameter {
            SweepParam::Eps => s.eps = value,
            SweepParam::Eta => s.eta = value,
            SweepParam::EpsAndEta => {
                s.eps = value;
                s.eta = value;
            }
            SweepParam::EBar => s.meas_noise.bound = value,
            SweepParam::QBar => s.dist_noise.bound = value,
            SweepParam::EAndQ => {
                s.meas_noise.bound = value;
                s.dist_noise.bound = value;
            }
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub verdict: Verdict,
    pub final_norm: f64,
    pub min_v: f64,
}

/// Runs every sweep value on a pool of `jobs` threads (all cores if
/// `None`), writing `run_<index>.csv` per value and `summary.csv`. Rows
/// follow the input value order.
pub fn sweep(spec: &SweepSpec, out_dir: &Path, jobs: Option<usize>) -> Result<Vec<SweepRow>> {
    std::fs::create_dir_all(out_dir)?;
    let clf = spec.base.build_clf()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool.build().map_err(|e| Error::Resource(format!("cannot start worker pool: {e}")))?;
    let rows: Vec<Result<SweepRow>> = pool.install(|| {
        spec.values
            .par_iter()
            .enumerate()
            .map(|(i, &value)| {
                let run = spec.apply(value);
                let cfg = run.build_with(clf.clone())?;
                let log = simulate(&cfg)?;
                write_log(&log, &out_dir.join(format!("run_{i}.csv")))?;
                Ok(SweepRow {
                    value,
                    verdict: check_practical_stability(&log, run.r, run.t_max()),
                    final_norm: log.final_norm(),
                    min_v: log.min_v(),
                })
            })
            .collect()
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let mut wr = csv::Writer::from_path(out_dir.join("summary.csv"))?;
    wr.write_record(["value", "verdict", "T_entry", "final_norm", "min_V"])?;
    for r in &rows {
        wr.write_record([
            r.value.to_string(),
            r.verdict.label().to_string(),
            r.verdict.entry_time().map(|t| t.to_string()).unwrap_or_default(),
            r.final_norm.to_string(),
            r.min_v.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(rows)
}

pub fn run_sweep(config: &Path, param: &str, values: &str, out_dir: &Path, jobs: Option<usize>) -> i32 {
    let result = (|| {
        let spec = SweepSpec::new(param.parse()?, parse_list(values)?, load_spec(config)?)?;
        sweep(&spec, out_dir, jobs)
    })();
    match result {
        Ok(rows) => {
            for r in rows {
                println!("{}: {} final_norm={} min_V={}", r.value, r.verdict, r.final_norm, r.min_v);
            }
            EXIT_STABLE
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

/// Computes bounds for the configuration's radii, noise bounds and input
/// box and writes the report, including on infeasibility when one exists.
pub fn run_bounds(config: &Path, out: &Path) -> i32 {
    let spec = match load_spec(config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    let result = (|| {
        let clf = spec.build_clf()?;
        let dyn_ = spec.build_dynamics();
        compute_bounds(
            clf.as_ref(),
            dyn_.as_ref(),
            spec.big_r,
            spec.r,
            spec.meas_noise.effective_bound(),
            spec.dist_noise.effective_bound(),
            spec.bounds_alpha,
            &spec.input_set()?,
            &spec.estimation_config(),
        )
    })();
    match result {
        Ok(rep) => match std::fs::write(out, rep.to_text()) {
            Ok(()) => {
                println!("bounds: feasible delta_bar={:e} eps_bar={:e}", rep.delta_bar, rep.eps_bar);
                EXIT_STABLE
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_ERROR
            }
        },
        Err(Error::Infeasible { constraint, report }) => {
            if let Some(rep) = report {
                if let Err(e) = std::fs::write(out, rep.to_text()) {
                    eprintln!("error: {e}");
                    return EXIT_ERROR;
                }
            }
            println!("bounds: infeasible, binding constraint `{constraint}`");
            EXIT_INFEASIBLE
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

pub fn run_validate(list_only: bool, hooks: &ValidationHooks) -> i32 {
    if list_only {
        for name in validate::list() {
            println!("{name}");
        }
        return EXIT_STABLE;
    }
    let outcomes = validate::run_suite(hooks);
    let width = outcomes.iter().map(|o| o.name.len()).max().unwrap_or(0);
    for o in &outcomes {
        println!("{:width$}  {}  {}", o.name, if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    if outcomes.iter().all(|o| o.passed) {
        EXIT_STABLE
    } else {
        EXIT_ERROR
    }
}
