//! Acceptance criteria for the library. Prints one `criterion N: PASS|FAIL`
//! line per criterion; a failing criterion is reported, not panicked on.

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use uinfc::bounds::{compute_bounds, estimate_lipschitz, verify_bounds, BoundsReport};
use uinfc::clf::{dini_derivative_fd, regularize_point, Clf, NormClf};
use uinfc::cli::{SweepParam, SweepSpec};
use uinfc::config::RunSpec;
use uinfc::endi::{f_tilde, f_tilde_grid_min, grad_f_tilde, v_tilde, ThetaGrid};
use uinfc::infconv::{check_prox_subgradient, check_sandwich, lemma2_alpha, InfConvSolver, ReferenceOptions};
use uinfc::linalg::{dist, dot};
use uinfc::sampling;
use uinfc::sim::{check_practical_stability, decay_audit, simulate, TrajectoryLog, Verdict};
use uinfc::validate::{certified_abs_run, default_endi_clf};
use uinfc::Error;

type Outcome = Result<(bool, String), Error>;

fn nominal() -> RunSpec {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/endi_nominal.cfg");
    RunSpec::from_file(&path).expect("nominal configuration parses")
}

struct SweepRun {
    verdict: Verdict,
    min_v: f64,
    log: TrajectoryLog,
}

fn run_sweep(param: SweepParam, values: &[f64], base: RunSpec) -> Result<Vec<SweepRun>, Error> {
    let spec = SweepSpec::new(param, values.to_vec(), base)?;
    let clf = spec.base.build_clf()?;
    values
        .par_iter()
        .map(|&v| {
            let run = spec.apply(v);
            let log = simulate(&run.build_with(clf.clone())?)?;
            Ok(SweepRun { verdict: check_practical_stability(&log, run.r, run.t_max()), min_v: log.min_v(), log })
        })
        .collect()
}

fn describe(runs: &[SweepRun], values: &[f64]) -> String {
    values
        .iter()
        .zip(runs)
        .map(|(v, r)| format!("{v:e}: {} min_V={:.6}", r.verdict, r.min_v))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Accuracy sweep. Returns the log of the `ε = η = 10⁻⁶` run for reuse.
fn criterion_1() -> Result<((bool, String), TrajectoryLog), Error> {
    let values = [1e-2, 1e-4, 1e-6, 1e-8];
    let mut runs = run_sweep(SweepParam::EpsAndEta, &values, nominal())?;
    let verdicts_ok = matches!(runs[0].verdict, Verdict::Unstable)
        && matches!(runs[1].verdict, Verdict::Unstable)
        && matches!(runs[2].verdict, Verdict::StableAt(_))
        && matches!(runs[3].verdict, Verdict::StableAt(_));
    let min_v_ok = runs.windows(2).all(|w| w[1].min_v < w[0].min_v);
    let detail = describe(&runs, &values);
    Ok(((verdicts_ok && min_v_ok, detail), runs.swap_remove(2).log))
}

fn criterion_2() -> Outcome {
    let values = [0.5e-2, 0.5e-3, 0.5e-4, 0.5e-5];
    let mut holds = 0;
    let mut details = Vec::new();
    for seed in [1u64, 2, 3] {
        let mut base = nominal();
        base.override_seeds(seed);
        let runs = run_sweep(SweepParam::EAndQ, &values, base)?;
        let entries: Vec<Option<f64>> = runs[1..].iter().map(|r| r.verdict.entry_time()).collect();
        let ordered = matches!(runs[0].verdict, Verdict::Unstable)
            && entries.iter().all(Option::is_some)
            && entries.windows(2).all(|w| w[1] <= w[0]);
        holds += usize::from(ordered);
        details.push(format!("seed {seed} [{}]", describe(&runs, &values)));
    }
    Ok((holds >= 2, format!("ordering holds for {holds} of 3 seeds; {}", details.join(" "))))
}

fn criterion_3() -> Outcome {
    let spec = nominal();
    let clf = spec.build_clf()?;
    let dyn_ = spec.build_dynamics();
    let result = compute_bounds(
        clf.as_ref(),
        dyn_.as_ref(),
        spec.big_r,
        spec.r,
        0.5e-3,
        0.5e-3,
        Some(spec.alpha),
        &spec.input_set()?,
        &spec.estimation_config(),
    );
    let (rep, binding): (BoundsReport, Option<String>) = match result {
        Ok(rep) => (rep, None),
        Err(Error::Infeasible { constraint, report: Some(rep) }) => (*rep, Some(constraint)),
        Err(e) => return Err(e),
    };
    let within = |got: f64, want: f64| got > 0.0 && (got / want).log10().abs() <= 1.0;
    let ok = within(rep.delta_bar, 0.23e-6) && within(rep.eps_bar, 0.18e-6) && verify_bounds(&rep);
    Ok((
        ok,
        format!(
            "delta_bar={:e} (target 2.3e-7) eps_bar={:e} (target 1.8e-7) verify={} binding={} w_bar={:e} L_V={:e} V_hat_star={:e}",
            rep.delta_bar,
            rep.eps_bar,
            verify_bounds(&rep),
            binding.as_deref().unwrap_or("none"),
            rep.w_bar,
            rep.L_V,
            rep.V_hat_star,
        ),
    ))
}

#[derive(Default)]
struct LemmaTally {
    localization: usize,
    sandwich: usize,
    prox: usize,
    surrogate: usize,
    surrogate_checked: usize,
    states: usize,
}

impl LemmaTally {
    fn merge(mut self, o: LemmaTally) -> LemmaTally {
        self.localization += o.localization;
        self.sandwich += o.sandwich;
        self.prox += o.prox;
        self.surrogate += o.surrogate;
        self.surrogate_checked += o.surrogate_checked;
        self.states += o.states;
        self
    }

    fn all(&self) -> bool {
        self.localization == self.states
            && self.sandwich == self.states
            && self.prox == self.states
            && self.surrogate == self.surrogate_checked
    }

    fn summary(&self) -> String {
        format!(
            "localization {}/{} sandwich {}/{} prox {}/{} surrogate {}/{}",
            self.localization,
            self.states,
            self.sandwich,
            self.states,
            self.prox,
            self.states,
            self.surrogate,
            self.surrogate_checked
        )
    }
}

/// Lemma checks on 10³ quasi-random states of the ball of radius `radius`.
fn lemma_suite<C: Clf>(clf: &C, radius: f64, alpha: f64, eps1: f64, chi: f64) -> Result<LemmaTally, Error> {
    let n = clf.dim();
    let solver = InfConvSolver::for_working_ball(clf, radius, 2000, 3)?;
    let bound = (2.0 * solver.v_bar).sqrt() * alpha;
    let l_v = estimate_lipschitz(|x| vec![clf.value(x)], &vec![0.0; n], 2.0 * radius, 4000, 1.25, 13)?;
    let alpha2 = lemma2_alpha(solver.v_bar, l_v, eps1);
    let opts = ReferenceOptions { v_bar: solver.v_bar, lattice_budget: 3usize.pow(n as u32) };
    let states = sampling::ball_points(&vec![0.0; n], radius, 1000, 19)?;
    states
        .par_iter()
        .enumerate()
        .map(|(i, x)| -> Result<LemmaTally, Error> {
            let mut t = LemmaTally { states: 1, ..Default::default() };
            let eps = [0.0, 1e-6, 1e-4, 1e-3][i % 4];
            let res = solver.solve(clf, x, alpha, eps, i as u64)?;
            t.localization += usize::from(dist(&res.y_eps, x) <= bound);
            t.sandwich += usize::from(check_sandwich(clf, x, alpha2, eps1, 1e-9, &opts)?);

            let exact = solver.solve(clf, x, alpha, 0.0, i as u64)?;
            let mut rng = sampling::rng(29, i as u64);
            let probes: Vec<Vec<f64>> = (0..100)
                .map(|_| {
                    let d = sampling::uniform_in_ball(&mut rng, n, 2.0 * alpha);
                    exact.y_eps.iter().zip(d).map(|(y, d)| y + d).collect()
                })
                .collect();
            t.prox += usize::from(check_prox_subgradient(clf, &exact, &probes, 1e-6));

            if clf.nonsmooth_distance(&exact.y_eps) > chi / 2.0 {
                t.surrogate_checked += 1;
                let ok = (0..8).all(|_| {
                    let theta = sampling::random_direction(&mut rng, n);
                    dini_derivative_fd(clf, &exact.y_eps, &theta, &[1e-5, 1e-6])
                        .is_ok_and(|d| dot(&exact.zeta, &theta) <= d + 1e-3)
                });
                t.surrogate += usize::from(ok);
            }
            Ok(t)
        })
        .try_reduce(LemmaTally::default, |a, b| Ok(a.merge(b)))
}

fn criterion_4() -> Outcome {
    let endi = lemma_suite(&default_endi_clf()?, 1.2, 0.1, 0.01, 1e-3)?;
    let abs = lemma_suite(&NormClf::new(1, 0.5)?, 1.0, 0.1, 0.01, 1e-3)?;
    Ok((endi.all() && abs.all(), format!("ENDI: {}; |x|: {}", endi.summary(), abs.summary())))
}

fn criterion_5() -> Outcome {
    let (_, rep) = certified_abs_run(0.26, 0, 1.0)?;
    let horizon = (0.02 / rep.delta_bar).ceil() as usize;
    let (cfg, rep) = certified_abs_run(0.26, horizon, 1.0)?;
    let log = simulate(&cfg)?;
    let audit = decay_audit(&log, &cfg, rep.w_bar, 1e-10)?;
    let verdict = check_practical_stability(&log, cfg.r, rep.T_alpha);
    let entered = verdict.entry_time().is_some_and(|t| t <= rep.T_alpha);
    Ok((
        entered && !audit.rows.is_empty() && audit.passed == audit.rows.len(),
        format!(
            "delta_bar={:e} samples={horizon} case-1 decay {}/{} ({:.1}%) verdict={verdict} T_alpha={:e}",
            rep.delta_bar,
            audit.passed,
            audit.rows.len(),
            100.0 * audit.pass_rate(),
            rep.T_alpha
        ),
    ))
}

fn criterion_6() -> Outcome {
    let grid = ThetaGrid::default();
    let mut rng = sampling::rng(61, 0);
    let mut worst_v = 0.0f64;
    let mut worst_g = 0.0f64;
    for _ in 0..1000 {
        let p = sampling::uniform_in_ball(&mut rng, 3, 2.0);
        let phi = [p[0], p[1], p[2]];
        worst_v = worst_v.max((v_tilde(phi) - f_tilde_grid_min(phi, &grid)).abs());
        let theta = std::f64::consts::TAU * sampling::uniform_in_ball(&mut rng, 1, 1.0)[0].abs();
        let g = grad_f_tilde(phi, theta);
        let h = 1e-5;
        for i in 0..3 {
            let (mut a, mut b) = (phi, phi);
            a[i] += h;
            b[i] -= h;
            let fd = (f_tilde(a, theta) - f_tilde(b, theta)) / (2.0 * h);
            worst_g = worst_g.max((g[i] - fd).abs());
        }
    }
    Ok((
        worst_v <= 1e-6 && worst_g <= 1e-6,
        format!("max |Ṽ − grid min| = {worst_v:.2e}, max gradient error = {worst_g:.2e}"),
    ))
}

fn csv_bytes(log: &TrajectoryLog) -> Result<Vec<u8>, Error> {
    let mut out = Vec::new();
    log.write_csv(&mut out)?;
    Ok(out)
}

fn criterion_7(nominal_log: &TrajectoryLog) -> Outcome {
    let mut short = nominal();
    short.horizon = 2000;
    let a = csv_bytes(&simulate(&short.build()?)?)?;
    let b = csv_bytes(&simulate(&short.build()?)?)?;
    let identical = a == b;

    let mut fine = nominal();
    fine.substeps *= 2;
    let fine_log = simulate(&fine.build()?)?;
    let x10 = &nominal_log.rows.last().expect("nonempty log").x;
    let x20 = &fine_log.rows.last().expect("nonempty log").x;
    let rel = dist(x10, x20) / uinfc::linalg::norm(x10);
    Ok((identical && rel < 1e-6, format!("bit-identical={identical}, substep doubling relative change = {rel:.3e}")))
}

fn criterion_8() -> Outcome {
    let clf = NormClf::new(1, 0.5)?;
    let mut checked = 0;
    let mut failed = 0;
    for chi in [1e-9, 1e-6, 1e-3, 0.01, 0.1, 0.5, 1.0] {
        for i in -1000..=1000 {
            for y in [i as f64 * 1e-3, i as f64 * chi / 500.0] {
                checked += 1;
                let ok =
                    regularize_point(&clf, &[y], chi).is_ok_and(|t| t[0].abs() > chi / 2.0 && (t[0] - y).abs() <= chi);
                failed += usize::from(!ok);
            }
        }
    }
    Ok((failed == 0, format!("{} of {checked} (y, χ) pairs satisfy |ỹ| > χ/2 and |ỹ − y| ≤ χ", checked - failed)))
}

fn report(n: usize, outcome: Outcome, started: Instant) -> bool {
    let secs = started.elapsed().as_secs_f64();
    let (pass, detail) = match outcome {
        Ok(o) => o,
        Err(e) => (false, format!("error: {e}")),
    };
    println!("criterion {n}: {} [{secs:.1}s] {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

/// Criteria to run, from the comma-separated `UINFC_ACCEPTANCE` variable
/// (all by default).
fn selected() -> Vec<usize> {
    match std::env::var("UINFC_ACCEPTANCE") {
        Ok(v) => v.split(',').filter_map(|s| s.trim().parse().ok()).collect(),
        Err(_) => (1..=8).collect(),
    }
}

fn main() {
    // Listing mode from `cargo test -- --list` has nothing to enumerate.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let which = selected();
    let mut passed = 0;
    let mut nominal_log = None;
    for n in which.iter().copied() {
        let t = Instant::now();
        let outcome = match n {
            1 => criterion_1().map(|(o, log)| {
                nominal_log = Some(log);
                o
            }),
            2 => criterion_2(),
            3 => criterion_3(),
            4 => criterion_4(),
            5 => criterion_5(),
            6 => criterion_6(),
            7 => {
                if nominal_log.is_none() {
                    nominal_log = simulate(&nominal().build().expect("nominal configuration builds")).ok();
                }
                match &nominal_log {
                    Some(log) => criterion_7(log),
                    None => Err(Error::Resource("nominal run failed".into())),
                }
            }
            8 => criterion_8(),
            _ => continue,
        };
        passed += usize::from(report(n, outcome, t));
    }
    println!("acceptance: {passed} of {} criteria pass", which.len());
}
