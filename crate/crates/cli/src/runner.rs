//! One run: startup or launch, integration, monitors, fits and artifacts.

use std::fmt::Write as _;
use std::path::Path;

use soliton_flow::asymptotics::{
    check_lambda_limits, check_scaling_laws, einstein_convergence, figure_suite, fit_cone_slopes,
    fit_cone_slopes_columns, j_identity, phase_radii, scaled_phase, estimate_sigma, AsymptoticFit, FitForm,
};
use soliton_flow::integrator::{integrate, Event, Sample, Trajectory};
use soliton_flow::monitors::{
    check_e_negative_phase, check_region_invariance, run_physical_monitors, MonitorOptions, MonitorReport, Verdict,
};
use soliton_flow::phase::{
    physical_from_phase, reconstruct_y1, PLaunch, PhaseLayout, PhaseParams, PhaseSample, PhaseSystem, Reconstructed,
};
use soliton_flow::physical::{PhysicalRecord, PhysicalSystem};
use soliton_flow::series::StartupSeries;
use soliton_flow::{Error, OrbitModel};

use crate::config::{Mode, RunConfig};
use crate::output::{write_fits, write_monitors, write_table};
use crate::plot::{Chart, Series};
use crate::CliError;

/// Tolerance on `Q` and `H - 1` for the region and Einstein-locus checks.
pub const LOCUS_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: u8,
    pub monitors: Vec<MonitorReport>,
    pub fits: Vec<AsymptoticFit>,
    pub events: Vec<Event>,
    pub final_time: f64,
    pub steps: usize,
}

impl RunOutcome {
    pub fn monitors_failed(&self) -> usize {
        self.monitors.iter().filter(|m| m.verdict == Verdict::Fail).count()
    }

    pub fn fits_failed(&self) -> usize {
        self.fits.iter().filter(|f| f.ok == Some(false)).count()
    }
}

fn core_error(e: Error) -> CliError {
    match e {
        Error::InvalidArgument(m) => CliError::Config(m),
        Error::ModelMismatch(m) => CliError::Validation(m),
        other => CliError::Internal(other.to_string()),
    }
}

fn validation(model: &OrbitModel, u0: f64, skip_energy: bool) -> Result<(), CliError> {
    let v: Vec<String> = model
        .validate(u0)
        .into_iter()
        .filter(|v| !(skip_energy && v.tag() == "E-nonnegative"))
        .map(|v| format!("{}: {v}", v.tag()))
        .collect();
    if v.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(v.join("; ")))
    }
}

/// Data behind the three plots.
struct PlotData {
    t: Vec<f64>,
    g: Vec<Vec<f64>>,
    u: Option<Vec<f64>>,
    x: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    t_label: &'static str,
}

struct Product {
    traj: Trajectory,
    monitors: Vec<MonitorReport>,
    fits: Vec<AsymptoticFit>,
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
    plots: PlotData,
}

/// Executes one configured run and writes its artifacts into `out_dir`.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<RunOutcome, CliError> {
    let product = match cfg.mode {
        Mode::Physical => physical(cfg)?,
        Mode::Phase | Mode::Einstein => phase(cfg)?,
    };
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::Internal(format!("{}: {e}", out_dir.display())))?;

    write_table(&out_dir.join("trajectory.csv"), &product.header, product.rows.into_iter())?;
    write_monitors(&out_dir.join("monitors.csv"), &product.monitors)?;
    write_fits(&out_dir.join("fits.csv"), &product.fits)?;
    if cfg.plots {
        write_plots(out_dir, &product.plots, &product.fits)?;
    }

    let traj = &product.traj;
    let final_time = traj.last().map_or(f64::NAN, |s| s.t);
    let early = !traj.events.is_empty() && final_time < cfg.min_horizon;
    let outcome = RunOutcome {
        exit_code: if early { 4 } else { 0 },
        monitors: product.monitors,
        fits: product.fits,
        events: traj.events.clone(),
        final_time,
        steps: traj.meta.steps,
    };
    let summary = summary(cfg, &outcome, traj);
    std::fs::write(out_dir.join("summary.txt"), summary).map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(outcome)
}

fn physical(cfg: &RunConfig) -> Result<Product, CliError> {
    let model = &cfg.model;
    let s = &cfg.startup;
    validation(model, s.ubar, false)?;
    let series = StartupSeries::solve(model, &cfg.hbar_values(), s.ubar, s.order).map_err(core_error)?;
    let traj = series.integrate(s.t0, &cfg.integrator);
    let recs = PhysicalSystem::new(model).records(&traj);

    let opts = MonitorOptions::for_run(cfg.integrator.h, s.t0);
    let monitors = run_physical_monitors(&recs, model, cfg.normalization, s.ubar, &opts, &cfg.monitors);
    let mut fits = Vec::new();
    if recs.len() >= 2 {
        fits.extend(fit_cone_slopes(&recs, cfg.window));
        fits.extend(figure_suite(&recs, cfg.window));
    }

    let r = model.factor_count();
    let mut header = vec!["t".to_string()];
    header.extend((1..=r).map(|i| format!("g{i}")));
    header.extend((1..=r).map(|i| format!("gdot{i}")));
    header.extend(["u", "udot", "xi", "trL", "S", "E", "cons1_residual", "ham_value"].map(String::from));
    let rows = recs.iter().map(physical_row).collect();
    Ok(Product { monitors, fits, header, rows, plots: physical_plot_data(&recs), traj })
}

fn physical_row(r: &PhysicalRecord) -> Vec<f64> {
    let c = &r.conserved;
    let mut row = vec![r.t];
    row.extend(&r.g);
    row.extend(&r.gdot);
    row.extend([r.u, r.udot, c.xi, c.tr_l, c.s, c.e, c.cons1_residual, c.ham_value]);
    row
}

fn physical_plot_data(recs: &[PhysicalRecord]) -> PlotData {
    let r = recs.first().map_or(0, |r| r.g.len());
    let scaled: Vec<(Vec<f64>, Vec<f64>)> = recs.iter().map(scaled_phase).collect();
    PlotData {
        t: recs.iter().map(|r| r.t).collect(),
        g: (0..r).map(|i| recs.iter().map(|rec| rec.g[i]).collect()).collect(),
        u: Some(recs.iter().map(|r| r.u).collect()),
        x: (0..r).map(|i| scaled.iter().map(|s| s.0[i]).collect()).collect(),
        y: (0..r).map(|i| scaled.iter().map(|s| s.1[i]).collect()).collect(),
        t_label: "t",
    }
}

/// Launch state and the integration vector for the chosen layout.
pub fn launch_vector(cfg: &RunConfig) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let params = PhaseParams::new(&cfg.model).map_err(core_error)?;
    let r = params.r();
    let l = &cfg.launch;
    let direction = match &l.direction {
        Some(d) => d.clone(),
        None => PLaunch::random(r, l.seed, l.delta, l.energy).direction,
    };
    let full = PLaunch { direction, delta: l.delta, energy: l.energy }.state(&cfg.model).map_err(core_error)?.to_vector();
    let mut v = full.clone();
    if l.layout == PhaseLayout::Subsystem {
        v.remove(r);
    }
    Ok((full, v))
}

/// A subsystem trajectory with `Y_1` restored, so it reads like a full one.
fn restore_y1(traj: &Trajectory, model: &OrbitModel, y1_start: f64, r: usize) -> Result<Trajectory, CliError> {
    let y1 = reconstruct_y1(traj, model, y1_start, traj.samples[0].t).map_err(core_error)?;
    let samples = traj
        .samples
        .iter()
        .zip(y1)
        .map(|(s, y)| {
            let mut x = s.x.clone();
            x.insert(r, y);
            Sample { t: s.t, x }
        })
        .collect();
    Ok(Trajectory { samples, events: traj.events.clone(), meta: traj.meta.clone() })
}

fn phase(cfg: &RunConfig) -> Result<Product, CliError> {
    let model = &cfg.model;
    validation(model, cfg.startup.ubar, true)?;
    let params = PhaseParams::new(model).map_err(core_error)?;
    let r = params.r();
    let (full0, x0) = launch_vector(cfg)?;
    let layout = cfg.launch.layout;
    let sys = PhaseSystem::new(model, layout).map_err(core_error)?;
    let raw = integrate(&sys, x0, 0.0, &cfg.integrator, &[]);
    let traj = if layout == PhaseLayout::Subsystem { restore_y1(&raw, model, full0[r], r)? } else { raw };

    let full = PhaseSystem::new(model, PhaseLayout::Full).map_err(core_error)?;
    let samples = full.samples(&traj, 0.0);
    let opts = MonitorOptions { startup_end: 0.0, tol: 100.0 * cfg.integrator.h.powi(4) };
    let mut monitors = vec![check_region_invariance(&samples, LOCUS_TOL), check_e_negative_phase(&samples, &opts)];
    if cfg.mode == Mode::Einstein {
        monitors.push(locus_report(&samples));
    }

    let mut fits = Vec::new();
    if samples.len() >= 3 {
        if cfg.mode == Mode::Einstein {
            fits.extend(einstein_convergence(&samples, &params, cfg.window));
            fits.push(j_fit(&samples, cfg.integrator.h));
        } else {
            fits.extend(check_scaling_laws(&samples, model.epsilon, cfg.window));
            fits.extend(check_lambda_limits(&samples, &params, cfg.window));
            let t: Vec<f64> = samples.iter().map(|p| p.t).collect();
            fits.extend(fit_cone_slopes_columns(&t, &phase_radii(&samples, &params), cfg.window));
            fits.extend((0..r).map(|i| estimate_sigma(&samples, i, cfg.window)));
        }
    }

    let g0: Vec<f64> = (0..r).map(|i| params.sqrt_d[i] * full0[2 * r] / full0[r + i]).collect();
    let physical = match physical_from_phase(&traj, model, &g0, 0.0, 0.0) {
        Ok(p) => Some(p),
        Err(e) => {
            log::warn!("no physical reconstruction: {e}");
            None
        }
    };

    let mut header = vec!["s".to_string(), "t".to_string()];
    header.extend((1..=r).map(|i| format!("X{i}")));
    header.extend((1..=r).map(|i| format!("Y{i}")));
    header.extend(["W", "G", "H", "Q", "J"].map(String::from));
    header.extend((1..=r).map(|i| format!("g{i}")));
    header.push("u".into());
    let rows = samples
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let mut row = vec![p.state.s, p.t];
            row.extend(&p.state.x);
            row.extend(&p.state.y);
            let d = &p.derived;
            row.extend([p.state.w, d.g, d.h, d.q, d.j]);
            row.extend((0..r).map(|i| params.sqrt_d[i] * p.state.w / p.state.y[i]));
            row.push(physical.as_ref().map_or(f64::NAN, |ph| ph[k].state.u));
            row
        })
        .collect();
    let plots = phase_plot_data(&samples, &params, physical.as_deref());
    Ok(Product { monitors, fits, header, rows, plots, traj })
}

fn locus_report(samples: &[PhaseSample]) -> MonitorReport {
    let (mut worst, mut at) = (0.0f64, f64::NAN);
    for p in samples {
        let dev = p.derived.q.abs().max((p.derived.h - 1.0).abs());
        if dev >= worst {
            worst = dev;
            at = p.state.s;
        }
    }
    let margin = LOCUS_TOL - worst;
    MonitorReport {
        name: "einstein-locus".into(),
        verdict: if margin >= 0.0 { Verdict::Pass } else { Verdict::Fail },
        worst_margin: margin,
        worst_location: at,
        notes: format!("max |Q|, |H - 1| = {worst:.3e}"),
    }
}

/// `J` decreasing, inside `[0, 1]` and obeying `J' = 2J(J - 1)`.
pub fn j_fit(samples: &[PhaseSample], h: f64) -> AsymptoticFit {
    let j = j_identity(samples);
    let ok = j.max_increase <= 100.0 * h.powi(4)
        && j.max_identity_error <= 10.0 * h * h
        && j.min >= -1e-12
        && j.max <= 1.0 + 1e-12;
    AsymptoticFit {
        quantity: "J".into(),
        model_form: FitForm::ConstantLimit,
        fitted_params: vec![j.min, j.max, j.max_increase],
        window: (samples[0].state.s, samples[samples.len() - 1].state.s),
        residual_rms: 0.0,
        target: Some(0.0),
        deviation: Some(j.max_identity_error),
        ok: Some(ok),
    }
}

fn phase_plot_data(samples: &[PhaseSample], params: &PhaseParams, physical: Option<&[Reconstructed]>) -> PlotData {
    let r = params.r();
    let col = |f: &dyn Fn(&PhaseSample) -> f64| samples.iter().map(f).collect::<Vec<f64>>();
    PlotData {
        t: col(&|p| p.t),
        g: phase_radii(samples, params),
        u: physical.map(|ph| ph.iter().map(|p| p.state.u).collect()),
        x: (0..r).map(|i| col(&|p| p.state.x[i] / params.sqrt_d[i])).collect(),
        y: (0..r).map(|i| col(&|p| p.state.y[i] / params.sqrt_d[i])).collect(),
        t_label: "t (from launch)",
    }
}

fn fit_notes(fits: &[AsymptoticFit], prefix: &[&str]) -> Vec<String> {
    fits.iter()
        .filter(|f| prefix.iter().any(|p| f.quantity.starts_with(p)))
        .map(|f| {
            let params: Vec<String> = f.fitted_params.iter().map(|v| format!("{v:.4}")).collect();
            let verdict = match f.ok {
                Some(true) => "ok",
                Some(false) => "FAIL",
                None => "-",
            };
            format!("{}: {} [{verdict}]", f.quantity, params.join(", "))
        })
        .collect()
}

fn write_plots(dir: &Path, d: &PlotData, fits: &[AsymptoticFit]) -> Result<(), CliError> {
    let r = d.g.len();
    let mut series: Vec<Series> = (0..r).map(|i| Series::new(format!("g{}", i + 1), d.t.clone(), d.g[i].clone())).collect();
    if let Some(u) = &d.u {
        series.push(Series::new("u", d.t.clone(), u.clone()));
    }
    let metric = Chart {
        title: "metric functions and potential".into(),
        x_label: d.t_label.into(),
        series,
        notes: fit_notes(fits, &["g", "log g", "dist"]),
    };

    let mut series = Vec::new();
    for i in 0..r {
        series.push(Series::new(format!("X~{}", i + 1), d.t.clone(), d.x[i].clone()));
        series.push(Series::new(format!("Y~{}", i + 1), d.t.clone(), d.y[i].clone()));
    }
    let scaled = Chart {
        title: "rescaled phase variables".into(),
        x_label: d.t_label.into(),
        series,
        notes: fit_notes(fits, &["Xt", "Yt"]),
    };

    let mut series = Vec::new();
    if r >= 2 {
        let ratio = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p / q).collect::<Vec<f64>>();
        series.push(Series::new("X~1/X~2", d.t.clone(), ratio(&d.x[0], &d.x[1])));
        series.push(Series::new("Y~1/Y~2", d.t.clone(), ratio(&d.y[0], &d.y[1])));
    }
    let ratios = Chart {
        title: "ratios".into(),
        x_label: d.t_label.into(),
        series,
        notes: fit_notes(fits, &["Xt1/", "Yt1/"]),
    };

    for (name, chart) in [("metric.svg", metric), ("phase.svg", scaled), ("ratios.svg", ratios)] {
        std::fs::write(dir.join(name), chart.to_svg()).map_err(|e| CliError::Internal(e.to_string()))?;
    }
    Ok(())
}

fn summary(cfg: &RunConfig, o: &RunOutcome, traj: &Trajectory) -> String {
    let mut s = String::new();
    let mode = match cfg.mode {
        Mode::Physical => "physical",
        Mode::Phase => "phase",
        Mode::Einstein => "einstein",
    };
    let _ = writeln!(s, "soliton-flow run summary");
    let _ = writeln!(s, "model: {} ({})", cfg.preset.as_deref().unwrap_or("explicit"), cfg.model.fingerprint());
    let _ = writeln!(s, "mode: {mode}");
    let _ = writeln!(s, "field hash: {}", traj.meta.field_hash);
    let _ = writeln!(s, "config hash: {}", traj.meta.config_hash);
    let _ = writeln!(s, "steps: {}", o.steps);
    let _ = writeln!(s, "final {}: {}", if cfg.mode == Mode::Physical { "t" } else { "s" }, o.final_time);
    if o.events.is_empty() {
        let _ = writeln!(s, "events: none");
    }
    for e in &o.events {
        let _ = writeln!(s, "event: {} at {}", e.kind.tag(), e.location);
    }
    let count = |v: Verdict| o.monitors.iter().filter(|m| m.verdict == v).count();
    let _ = writeln!(
        s,
        "monitors: {} requested, {} pass, {} fail, {} not applicable",
        o.monitors.len(),
        count(Verdict::Pass),
        count(Verdict::Fail),
        count(Verdict::NotApplicable)
    );
    for m in &o.monitors {
        let _ = writeln!(s, "  {:<22} {:<13} margin {:.3e}  {}", m.name, m.verdict.to_string(), m.worst_margin, m.notes);
    }
    let _ = writeln!(s, "fits: {} total, {} failed", o.fits.len(), o.fits_failed());
    for f in &o.fits {
        let verdict = match f.ok {
            Some(true) => "ok",
            Some(false) => "FAIL",
            None => "-",
        };
        let _ = writeln!(s, "  {:<22} {:<4} deviation {}", f.quantity, verdict, f.deviation.map_or("-".into(), |d| format!("{d:.3e}")));
    }
    let _ = writeln!(s, "exit code: {}", o.exit_code);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> RunConfig {
        RunConfig::parse(text, None).unwrap()
    }

    #[test]
    fn short_physical_run_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let o = run(&cfg("integrator.end = 2\nintegrator.h = 2e-3"), dir.path()).unwrap();
        assert_eq!(o.exit_code, 0);
        assert_eq!(o.monitors.len(), 7);
        for f in ["trajectory.csv", "monitors.csv", "fits.csv", "summary.txt", "metric.svg", "phase.svg", "ratios.svg"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
        assert_eq!(
            csv.lines().next().unwrap(),
            "t,g1,g2,gdot1,gdot2,u,udot,xi,trL,S,E,cons1_residual,ham_value"
        );
        let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
        assert!(summary.contains("monitors: 7 requested"));
    }

    #[test]
    fn monitor_selection_is_respected() {
        let dir = tempfile::tempdir().unwrap();
        let o = run(&cfg("integrator.end = 1\nmonitors.names = potential, E-negative\noutput.plots = false"), dir.path())
            .unwrap();
        assert_eq!(o.monitors.iter().map(|m| m.name.as_str()).collect::<Vec<_>>(), ["potential", "E-negative"]);
        assert!(!dir.path().join("metric.svg").exists());
    }

    #[test]
    fn invalid_model_is_a_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = run(&cfg("startup.ubar = 0.5"), dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("E-nonnegative"));
    }

    #[test]
    fn early_event_exit_code() {
        let dir = tempfile::tempdir().unwrap();
        let o = run(&cfg("integrator.end = 5\nintegrator.max_steps = 100"), dir.path()).unwrap();
        assert_eq!(o.exit_code, 4);
        assert!(dir.path().join("trajectory.csv").exists());
        let relaxed = run(&cfg("integrator.end = 5\nintegrator.max_steps = 100\nintegrator.min_horizon = 0"), dir.path());
        assert_eq!(relaxed.unwrap().exit_code, 0);
    }

    #[test]
    fn phase_runs() {
        let dir = tempfile::tempdir().unwrap();
        let base = "model.dims = 1,2\nmodel.lambdas = 0,1\nintegrator.end = 10\noutput.plots = false\n";
        let full = run(&cfg(&format!("{base}run.mode = phase\nlaunch.seed = 4")), dir.path()).unwrap();
        assert_eq!(full.exit_code, 0);
        assert!(full.monitors.iter().all(|m| m.passed()), "{:?}", full.monitors);
        let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
        assert_eq!(csv.lines().next().unwrap(), "s,t,X1,X2,Y1,Y2,W,G,H,Q,J,g1,g2,u");

        let sub = tempfile::tempdir().unwrap();
        let o = run(&cfg(&format!("{base}run.mode = phase\nlaunch.seed = 4\nlaunch.layout = subsystem")), sub.path())
            .unwrap();
        assert_eq!(o.exit_code, 0);
        let a = std::fs::read_to_string(sub.path().join("trajectory.csv")).unwrap();
        let last = |s: &str| -> Vec<f64> {
            s.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect()
        };
        let (p, q) = (last(&csv), last(&a));
        for k in 0..p.len() {
            assert!((p[k] - q[k]).abs() <= 1e-6 * (1.0 + p[k].abs()), "column {k}: {} vs {}", p[k], q[k]);
        }

        let e = run(&cfg(&format!("{base}run.mode = einstein\nlaunch.direction = 1e-4, 1")), dir.path()).unwrap();
        assert!(e.monitors.iter().any(|m| m.name == "einstein-locus" && m.passed()));
    }

    #[test]
    fn phase_mode_rejects_two_summand() {
        let dir = tempfile::tempdir().unwrap();
        let err = run(&cfg("run.mode = phase"), dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
