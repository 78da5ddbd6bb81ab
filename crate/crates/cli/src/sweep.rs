//! Grid sweeps over startup data or launch seeds.

use std::path::Path;

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::output::num;
use crate::runner::{run, RunOutcome};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub hbar: f64,
    pub ubar: f64,
    pub seed: u64,
}

/// Grid points in row-major order (`hbar` slowest, `seed` fastest).
/// Axes left out of the sweep take the base config value.
pub fn grid(cfg: &RunConfig) -> Result<Vec<GridPoint>, CliError> {
    let Some(g) = &cfg.sweep else {
        return Err(CliError::Config("no sweep.* keys given".into()));
    };
    if g.is_empty() {
        return Err(CliError::Config("sweep grid is empty".into()));
    }
    let axis = |given: &[f64], base: f64| if given.is_empty() { vec![base] } else { given.to_vec() };
    let hbar = axis(&g.hbar, cfg.startup.hbar[0]);
    let ubar = axis(&g.ubar, cfg.startup.ubar);
    let seeds = if g.seed.is_empty() { vec![cfg.launch.seed] } else { g.seed.clone() };
    let mut out = Vec::with_capacity(hbar.len() * ubar.len() * seeds.len());
    for &h in &hbar {
        for &u in &ubar {
            for &s in &seeds {
                out.push(GridPoint { hbar: h, ubar: u, seed: s });
            }
        }
    }
    Ok(out)
}

fn point_config(base: &RunConfig, p: GridPoint) -> RunConfig {
    let mut cfg = base.clone();
    cfg.sweep = None;
    if base.sweep.as_ref().is_some_and(|g| !g.hbar.is_empty()) {
        cfg.startup.hbar = vec![p.hbar];
    }
    cfg.startup.ubar = p.ubar;
    cfg.launch.seed = p.seed;
    cfg
}

pub struct SweepResult {
    pub points: Vec<GridPoint>,
    pub outcomes: Vec<Result<RunOutcome, CliError>>,
}

impl SweepResult {
    /// 0 when every run succeeded, otherwise the first failing code in grid
    /// order.
    pub fn exit_code(&self) -> u8 {
        self.outcomes
            .iter()
            .map(|o| match o {
                Ok(o) => o.exit_code,
                Err(e) => e.exit_code(),
            })
            .find(|&c| c != 0)
            .unwrap_or(0)
    }
}

/// Runs every grid point on a pool of `workers` threads and writes
/// `index.csv` in grid order.
pub fn sweep(cfg: &RunConfig, out_dir: &Path, workers: usize) -> Result<SweepResult, CliError> {
    let points = grid(cfg)?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::Internal(format!("{}: {e}", out_dir.display())))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let outcomes: Vec<Result<RunOutcome, CliError>> = pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(k, &p)| {
                let res = run(&point_config(cfg, p), &out_dir.join(run_dir(k)));
                if let Err(e) = &res {
                    log::warn!("grid point {k} failed: {e}");
                }
                res
            })
            .collect()
    });
    write_index(&out_dir.join("index.csv"), &points, &outcomes)?;
    Ok(SweepResult { points, outcomes })
}

fn run_dir(k: usize) -> String {
    format!("run-{k:04}")
}

fn write_index(path: &Path, points: &[GridPoint], outcomes: &[Result<RunOutcome, CliError>]) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Internal(format!("{}: {e}", path.display()));
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path).map_err(io)?;
    w.write_record([
        "index",
        "hbar",
        "ubar",
        "seed",
        "dir",
        "exit_code",
        "verdict",
        "monitors_pass",
        "monitors_fail",
        "fits_failed",
        "final_time",
        "error",
    ])
    .map_err(io)?;
    for (k, (p, o)) in points.iter().zip(outcomes).enumerate() {
        let mut row = vec![k.to_string(), num(p.hbar), num(p.ubar), p.seed.to_string(), run_dir(k)];
        match o {
            Ok(o) => {
                let pass = o.monitors.iter().filter(|m| m.passed()).count();
                let fail = o.monitors_failed();
                let verdict = if o.exit_code == 0 && fail == 0 && o.fits_failed() == 0 { "Pass" } else { "Fail" };
                row.extend([
                    o.exit_code.to_string(),
                    verdict.into(),
                    pass.to_string(),
                    fail.to_string(),
                    o.fits_failed().to_string(),
                    num(o.final_time),
                    String::new(),
                ]);
            }
            Err(e) => row.extend([
                e.exit_code().to_string(),
                "Fail".into(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                e.to_string(),
            ]),
        }
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Internal(e.to_string()))
}
