//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use soliton_flow::asymptotics::{
    check_lambda_limits, check_scaling_laws, einstein_convergence, fit_cone_slopes_columns, j_identity, phase_radii,
    TailWindow,
};
use soliton_flow::integrator::{integrate, IntegratorConfig, StepRamp};
use soliton_flow::monitors::{run_physical_monitors, MonitorOptions, MonitorReport};
use soliton_flow::phase::{
    critical_points, finite_difference_jacobian, linearize, residual_norm, CriticalFamily, PLaunch, PhaseLayout,
    PhaseParams, PhaseSample, PhaseState, PhaseSystem,
};
use soliton_flow::physical::{PhysicalRecord, PhysicalSystem};
use soliton_flow::series::StartupSeries;
use soliton_flow::{OrbitModel, SolitonNormalization, WarpedFactor};
use soliton_flow_cli::config::RunConfig;
use soliton_flow_cli::runner;

const T0: f64 = 1e-4;
const H: f64 = 1e-3;
const LAUNCH_RUNS: u64 = 10;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn circle_model(r: usize) -> OrbitModel {
    let factors = (0..r).map(|i| WarpedFactor::new(i + 1, i as f64)).collect();
    OrbitModel::warped(factors, 1.0, 0.0, 1)
}

fn max_abs(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(0.0, |m, x| m.max(x.abs()))
}

fn critical_point_exactness() -> Outcome {
    let mut worst_res = 0.0f64;
    let mut worst_e = 0.0f64;
    let mut count = 0;
    for r in [2, 3] {
        let m = circle_model(r);
        let n = m.total_dim() as f64;
        let points = critical_points(&m).unwrap();
        for p in &points {
            worst_res = worst_res.max(residual_norm(&p.coords, &m).unwrap());
        }
        count += points.len();
        let e = points.iter().find(|p| p.family == CriticalFamily::Eplus).unwrap();
        let dims = m.dims();
        for i in 0..r {
            worst_e = worst_e.max((e.coords.x[i] - (dims[i] as f64).sqrt() / n).abs());
            worst_e = worst_e.max(e.coords.y[i].abs());
        }
        worst_e = worst_e.max((e.coords.w - (2.0 / (n * m.epsilon)).sqrt()).abs());
    }
    outcome(
        worst_res <= 1e-12 && worst_e <= 1e-14,
        format!("{count} points, max residual {worst_res:.2e}, E+ error {worst_e:.2e}"),
    )
}

fn linearization() -> Outcome {
    let mut worst_ev = 0.0f64;
    let mut worst_jac = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for r in [2, 3] {
        let m = circle_model(r);
        let p = PhaseParams::new(&m).unwrap().p_point();
        let lin = linearize(&p, &m).unwrap();
        let mut expected = vec![2.0];
        expected.extend(std::iter::repeat_n(1.0, r));
        expected.extend(std::iter::repeat_n(0.0, r));
        for (z, e) in lin.eigenvalues.iter().zip(&expected) {
            worst_ev = worst_ev.max((z.re - e).abs().max(z.im.abs()));
        }
        if lin.eigenvalues.len() != expected.len() {
            worst_ev = f64::INFINITY;
        }
        let params = PhaseParams::new(&m).unwrap();
        for _ in 0..20 {
            let x = (0..r).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y = (0..r).map(|_| rng.random_range(-1.0..1.0)).collect();
            let st = PhaseState::new(x, y, rng.random_range(-1.0..1.0));
            let fd = finite_difference_jacobian(&st, &m, 1e-6).unwrap();
            let an = params.jacobian(&st);
            worst_jac = worst_jac.max((an - fd).abs().max());
        }
    }
    outcome(
        worst_ev <= 1e-10 && worst_jac <= 1e-6,
        format!("eigenvalue error {worst_ev:.2e}, Jacobian vs finite differences {worst_jac:.2e} (40 states)"),
    )
}

fn example_records(h: f64, end: f64) -> (Vec<PhysicalRecord>, bool) {
    let m = OrbitModel::example1(1);
    let series = StartupSeries::solve(&m, &[6.0], -1.0, 4).unwrap();
    let cfg = IntegratorConfig { ramp: Some(StepRamp { origin: 0.0, scale: 1.0 }), ..IntegratorConfig::new(h, end) };
    let traj = series.integrate(T0, &cfg);
    let clean = traj.events.is_empty() && traj.reached(end);
    (PhysicalSystem::new(&m).records(&traj), clean)
}

fn beyond_startup(recs: &[PhysicalRecord]) -> impl Iterator<Item = &PhysicalRecord> {
    recs.iter().filter(|r| r.t >= 2.0 * T0)
}

fn integrator_order() -> Outcome {
    let coarse = max_abs(beyond_startup(&example_records(2e-3, 20.0).0).map(|r| r.conserved.cons1_residual));
    let fine = max_abs(beyond_startup(&example_records(1e-3, 20.0).0).map(|r| r.conserved.cons1_residual));
    let ratio = coarse / fine;
    outcome((12.0..=20.0).contains(&ratio), format!("max cons1 {coarse:.3e} -> {fine:.3e}, ratio {ratio:.2}"))
}

fn conservation(recs: &[PhysicalRecord], clean: bool) -> Outcome {
    let cons1 = max_abs(beyond_startup(recs).map(|r| r.conserved.cons1_residual));
    let ham = max_abs(beyond_startup(recs).map(|r| r.conserved.ham_value));
    let end = recs.last().map_or(f64::NAN, |r| r.t);
    outcome(
        clean && cons1 <= 1e-6 && ham <= 1e-5,
        format!("reached t = {end}, max |cons1| {cons1:.3e}, max |ham| {ham:.3e}"),
    )
}

fn proposition_suite(recs: &[PhysicalRecord]) -> Outcome {
    let m = OrbitModel::example1(1);
    let opts = MonitorOptions::for_run(H, T0);
    let reports: Vec<MonitorReport> =
        run_physical_monitors(recs, &m, SolitonNormalization::CZero, -1.0, &opts, &[]);
    let bound = (m.total_dim() as f64 * m.epsilon / 2.0).sqrt();
    let all = reports.len() == 7 && reports.iter().all(|r| r.passed());
    let f0 = reports.iter().find(|r| r.name == "F0-lyapunov").map(|r| r.notes.clone()).unwrap_or_default();
    let line: Vec<String> = reports.iter().map(|r| format!("{}={}", r.name, r.verdict)).collect();
    outcome(
        all && (bound - 3f64.sqrt()).abs() < 1e-15,
        format!("{}; mean-curvature bound {bound:.6}; {f0}", line.join(" ")),
    )
}

struct LaunchRun {
    samples: Vec<PhaseSample>,
    clean: bool,
}

fn launch_runs(model: &OrbitModel) -> Vec<LaunchRun> {
    let sys = PhaseSystem::new(model, PhaseLayout::Full).unwrap();
    let cfg = IntegratorConfig { record_every: 10, ..IntegratorConfig::new(H, 400.0) };
    (0..LAUNCH_RUNS)
        .map(|seed| {
            let x0 = PLaunch::random(2, seed, 1e-6, -1.0).state(model).unwrap().to_vector();
            let traj = integrate(&sys, x0, 0.0, &cfg, &[]);
            LaunchRun { clean: traj.events.is_empty() && traj.reached(400.0), samples: sys.samples(&traj, 0.0) }
        })
        .collect()
}

fn region_invariance(runs: &[LaunchRun]) -> Outcome {
    let (mut q, mut h) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut covered = true;
    for run in runs {
        let s0 = run.samples[0].state.s;
        let window: Vec<&PhaseSample> = run.samples.iter().filter(|p| p.state.s <= s0 + 50.0).collect();
        covered &= window.last().is_some_and(|p| p.state.s >= s0 + 50.0 - 1e-9);
        for p in window {
            q = q.max(p.derived.q);
            h = h.max(p.derived.h - 1.0);
        }
    }
    outcome(
        covered && q < 1e-8 && h < 1e-8,
        format!("{} runs on s in [0, 50]: max Q {q:.2e}, max H - 1 {h:.2e}", runs.len()),
    )
}

fn asymptotics(model: &OrbitModel, runs: &[LaunchRun]) -> Outcome {
    let params = PhaseParams::new(model).unwrap();
    let window = TailWindow::default();
    let mut worst: Vec<(String, f64)> = Vec::new();
    let mut all = true;
    let mut note = |name: &str, dev: f64, ok: bool| {
        all &= ok;
        match worst.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = slot.1.max(dev),
            None => worst.push((name.to_string(), dev)),
        }
    };
    for run in runs {
        note("events", if run.clean { 0.0 } else { 1.0 }, run.clean);
        let laws = check_scaling_laws(&run.samples, model.epsilon, window);
        for f in laws.iter().take(2) {
            note(&f.quantity, f.deviation.unwrap(), f.deviation.unwrap() <= 0.1);
        }
        for f in check_lambda_limits(&run.samples, &params, window) {
            note(&f.quantity, f.deviation.unwrap(), f.deviation.unwrap() <= 0.1);
        }
        let t: Vec<f64> = run.samples.iter().map(|p| p.t).collect();
        for f in fit_cone_slopes_columns(&t, &phase_radii(&run.samples, &params), window) {
            let ok = f.deviation.unwrap() <= 1e-2 && f.fitted_params[0] > 0.0;
            note(&format!("{} linear", f.quantity), f.deviation.unwrap(), ok);
        }
    }
    let parts: Vec<String> = worst.iter().filter(|(n, _)| n != "events").map(|(n, d)| format!("{n} {d:.4}")).collect();
    outcome(all, format!("worst over {} runs (s_end 400): {}", runs.len(), parts.join(", ")))
}

fn einstein_locus() -> Outcome {
    let m = circle_model(2);
    let launch = PLaunch { direction: vec![1e-4, 1.0], delta: 1e-6, energy: 0.0 };
    let sys = PhaseSystem::new(&m, PhaseLayout::Einstein).unwrap();
    let traj = integrate(&sys, launch.state(&m).unwrap().to_vector(), 0.0, &IntegratorConfig::new(H, 60.0), &[]);
    let samples = sys.samples(&traj, 0.0);
    let resid = max_abs(samples.iter().map(|p| p.derived.q.abs().max((p.derived.h - 1.0).abs())));
    let j = j_identity(&samples);
    let j_ok = j.max_increase <= 100.0 * H.powi(4) && j.max_identity_error <= 10.0 * H * H && j.min >= -1e-12 && j.max <= 1.0 + 1e-12;
    let fits = einstein_convergence(&samples, &PhaseParams::new(&m).unwrap(), TailWindow::default());
    let dist = fits[0].deviation.unwrap();
    let rates: Vec<String> = fits[1..].iter().map(|f| format!("{:.6} ({:.2e})", f.fitted_params[0], f.deviation.unwrap())).collect();
    let pass = traj.events.is_empty()
        && resid <= 1e-8
        && j_ok
        && dist < 1e-6
        && fits[1..].iter().all(|f| f.deviation.unwrap() <= 0.05);
    outcome(
        pass,
        format!(
            "locus residual {resid:.2e}, dist(E+) {dist:.2e}, J increase {:.1e}, |J' - 2J(J-1)| {:.2e}, rates {} vs {:.6}",
            j.max_increase,
            j.max_identity_error,
            rates.join(", "),
            (1.0f64 / 6.0).sqrt()
        ),
    )
}

fn figure_suite() -> Outcome {
    let mut all = true;
    let mut parts = Vec::new();
    for preset in ["example1-m1", "example1-m2", "example2-m1"] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::parse("", Some(preset)).unwrap();
        let o = runner::run(&cfg, dir.path()).unwrap();
        let plots = ["metric.svg", "phase.svg", "ratios.svg"].iter().all(|f| dir.path().join(f).exists());
        let figure: Vec<_> = o.fits.iter().filter(|f| f.quantity.starts_with("Xt") || f.quantity.starts_with("Yt")).collect();
        let ok = o.exit_code == 0 && plots && figure.len() == 6 && figure.iter().all(|f| f.ok == Some(true));
        all &= ok;
        let dev = |q: &str| figure.iter().find(|f| f.quantity == q).and_then(|f| f.deviation).unwrap_or(f64::NAN);
        let decay = figure.iter().take(4).filter_map(|f| f.deviation).fold(0.0, f64::max);
        parts.push(format!(
            "{preset}: max final {decay:.4}, |X1/X2 - 1| {:.4}, Y1/Y2 std/mean {:.2e}",
            dev("Xt1/Xt2 final"),
            dev("Yt1/Yt2 tail")
        ));
    }
    outcome(all, parts.join("; "))
}

fn determinism() -> Outcome {
    let cfg = RunConfig::parse("output.plots = false", Some("example1-m1")).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    runner::run(&cfg, a.path()).unwrap();
    runner::run(&cfg, b.path()).unwrap();
    let fa = std::fs::read(a.path().join("trajectory.csv")).unwrap();
    let fb = std::fs::read(b.path().join("trajectory.csv")).unwrap();
    outcome(fa == fb && !fa.is_empty(), format!("trajectory.csv {} bytes, identical: {}", fa.len(), fa == fb))
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();
    let mut timed = |n: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        results.push((n, name, o, start.elapsed().as_secs_f64()));
    };

    timed(1, "critical-point exactness", &mut critical_point_exactness);
    timed(2, "linearization at P", &mut linearization);
    timed(3, "integrator order", &mut integrator_order);
    let (recs, clean) = example_records(H, 20.0);
    timed(4, "conservation", &mut || conservation(&recs, clean));
    timed(5, "proposition suite", &mut || proposition_suite(&recs));
    let model = circle_model(2);
    let start = Instant::now();
    let runs = launch_runs(&model);
    let launch_time = start.elapsed().as_secs_f64();
    timed(6, "region invariance", &mut || region_invariance(&runs));
    timed(7, "asymptotics", &mut || asymptotics(&model, &runs));
    timed(8, "Einstein locus", &mut einstein_locus);
    timed(9, "figure suite", &mut figure_suite);
    timed(10, "determinism", &mut determinism);

    let mut failed = 0;
    for (n, name, o, secs) in &results {
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!o.pass);
        println!("{verdict} criterion {n:>2} ({name}, {secs:.2}s): {}", o.detail);
    }
    println!("launch runs integrated in {launch_time:.2}s");
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
