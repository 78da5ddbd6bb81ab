//! Flat `key = value` run configuration.
//!
//! Lines are `section.key = value`; `#` starts a comment. Lists are
//! comma-separated. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use soliton_flow::asymptotics::TailWindow;
use soliton_flow::integrator::{IntegratorConfig, StepRamp};
use soliton_flow::monitors::MONITOR_NAMES;
use soliton_flow::phase::PhaseLayout;
use soliton_flow::{OrbitModel, SolitonNormalization, WarpedFactor};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Series startup at the singular orbit, then the physical system in `t`.
    Physical,
    /// Launch near `P` along its unstable manifold, phase system in `s`.
    Phase,
    /// Launch near `P` inside `{Q = 0, H = 1}`.
    Einstein,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Startup {
    pub hbar: Vec<f64>,
    pub ubar: f64,
    pub order: usize,
    pub t0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Launch {
    pub delta: f64,
    pub energy: f64,
    /// Explicit `(b_2, .., b_r, w)` weights; drawn from `seed` when absent.
    pub direction: Option<Vec<f64>>,
    pub seed: u64,
    pub layout: PhaseLayout,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepGrid {
    pub hbar: Vec<f64>,
    pub ubar: Vec<f64>,
    pub seed: Vec<u64>,
}

impl SweepGrid {
    pub fn is_empty(&self) -> bool {
        self.hbar.is_empty() && self.ubar.is_empty() && self.seed.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub model: OrbitModel,
    pub normalization: SolitonNormalization,
    pub mode: Mode,
    pub startup: Startup,
    pub launch: Launch,
    pub integrator: IntegratorConfig,
    /// Events before this time (or `s`) count as failures.
    pub min_horizon: f64,
    pub monitors: Vec<String>,
    pub window: TailWindow,
    pub out_dir: PathBuf,
    pub plots: bool,
    pub sweep: Option<SweepGrid>,
}

/// Every accepted key with its default, in README order.
pub const KEYS: &[(&str, &str)] = &[
    ("model.preset", "example1-m1"),
    ("model.kind", "(from preset)"),
    ("model.dims", ""),
    ("model.lambdas", ""),
    ("model.k", "1 for warped, d1 for two-summand"),
    ("model.d1", ""),
    ("model.d2", ""),
    ("model.a2", ""),
    ("model.a3", ""),
    ("model.epsilon", "1"),
    ("model.c", "0"),
    ("normalization", "c-zero"),
    ("run.mode", "physical"),
    ("startup.hbar", "6"),
    ("startup.ubar", "-1"),
    ("startup.order", "4"),
    ("startup.t0", "1e-4"),
    ("launch.delta", "1e-6"),
    ("launch.energy", "-1 (0 in einstein mode)"),
    ("launch.direction", "(random from launch.seed)"),
    ("launch.seed", "0"),
    ("launch.layout", "full"),
    ("integrator.h", "1e-3"),
    ("integrator.end", "20"),
    ("integrator.min_horizon", "integrator.end"),
    ("integrator.adaptive", "false"),
    ("integrator.rel_tol", "1e-10"),
    ("integrator.h_min", "1e-12"),
    ("integrator.max_steps", "50000000"),
    ("integrator.blowup_norm", "1e12"),
    ("integrator.ramp_scale", "1 in physical mode, 0 otherwise"),
    ("integrator.record_every", "1"),
    ("monitors.names", "all"),
    ("fits.tail_fraction", "0.2"),
    ("fits.min_points", "50"),
    ("output.dir", "out"),
    ("output.plots", "true"),
    ("sweep.hbar", ""),
    ("sweep.ubar", ""),
    ("sweep.seed", ""),
];

/// Raw key/value pairs, last assignment wins.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Config(format!("line {}: expected `key = value`", lineno + 1)));
        };
        let key = k.trim();
        if !KEYS.iter().any(|(name, _)| *name == key) {
            return Err(CliError::Config(format!("line {}: unknown key `{key}`", lineno + 1)));
        }
        out.insert(key.to_string(), v.trim().to_string());
    }
    Ok(out)
}

struct Pairs(BTreeMap<String, String>);

impl Pairs {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|_| CliError::Config(format!("{key}: cannot parse `{v}`"))))
            .transpose()
    }

    fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError> {
        let Some(v) = self.raw(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<T>().map_err(|_| CliError::Config(format!("{key}: cannot parse `{s}`"))))
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    fn flag(&self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some("true" | "yes" | "1") => Ok(true),
            Some("false" | "no" | "0") => Ok(false),
            Some(v) => Err(CliError::Config(format!("{key}: expected true or false, got `{v}`"))),
        }
    }
}

const STRUCTURE_KEYS: &[&str] =
    &["model.kind", "model.dims", "model.lambdas", "model.k", "model.d1", "model.d2", "model.a2", "model.a3"];

fn build_model(p: &Pairs, preset_override: Option<&str>) -> Result<(Option<String>, OrbitModel), CliError> {
    let explicit = STRUCTURE_KEYS.iter().any(|k| p.raw(k).is_some());
    let preset = preset_override.map(str::to_string).or_else(|| p.raw("model.preset").map(str::to_string));
    let (preset, mut model) = match (&preset, explicit) {
        (Some(name), true) if preset_override.is_none() => {
            return Err(CliError::Config(format!("model.preset = {name} conflicts with explicit model keys")));
        }
        (Some(name), _) => {
            let m = OrbitModel::preset(name).ok_or_else(|| CliError::Config(format!("unknown preset `{name}`")))?;
            (preset.clone(), m)
        }
        (None, false) => (Some("example1-m1".to_string()), OrbitModel::example1(1)),
        (None, true) => (None, explicit_model(p)?),
    };
    if let Some(eps) = p.parse("model.epsilon")? {
        model.epsilon = eps;
    }
    if let Some(c) = p.parse("model.c")? {
        model.c = c;
    }
    Ok((preset, model))
}

fn explicit_model(p: &Pairs) -> Result<OrbitModel, CliError> {
    let need = |key: &str| CliError::Config(format!("{key} is required"));
    match p.raw("model.kind").unwrap_or("warped") {
        "warped" => {
            let dims: Vec<usize> = p.list("model.dims")?.ok_or_else(|| need("model.dims"))?;
            let lambdas: Vec<f64> = p.list("model.lambdas")?.ok_or_else(|| need("model.lambdas"))?;
            if dims.len() != lambdas.len() {
                return Err(CliError::Config("model.dims and model.lambdas differ in length".into()));
            }
            let factors = dims.iter().zip(&lambdas).map(|(&d, &l)| WarpedFactor::new(d, l)).collect();
            Ok(OrbitModel::warped(factors, 1.0, 0.0, p.get("model.k", 1)?))
        }
        "two-summand" => {
            let d1: usize = p.parse("model.d1")?.ok_or_else(|| need("model.d1"))?;
            let d2 = p.parse("model.d2")?.ok_or_else(|| need("model.d2"))?;
            let a2 = p.parse("model.a2")?.ok_or_else(|| need("model.a2"))?;
            let a3 = p.parse("model.a3")?.ok_or_else(|| need("model.a3"))?;
            let mut m = OrbitModel::two_summand(d1, d2, a2, a3, 1.0, 0.0);
            m.k = p.get("model.k", d1)?;
            Ok(m)
        }
        other => Err(CliError::Config(format!("model.kind: expected warped or two-summand, got `{other}`"))),
    }
}

/// Removes repeated entries, keeping the first occurrence.
pub fn dedup<T: PartialEq + Copy + std::fmt::Display>(key: &str, values: Vec<T>) -> Vec<T> {
    let mut out: Vec<T> = Vec::with_capacity(values.len());
    for v in values {
        if out.contains(&v) {
            log::warn!("{key}: duplicate grid value {v} dropped");
        } else {
            out.push(v);
        }
    }
    out
}

impl RunConfig {
    pub fn from_file(path: &Path, preset: Option<&str>) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, preset)
    }

    /// Parses config text. `preset` (from the command line) replaces any
    /// model given in the file.
    pub fn parse(text: &str, preset: Option<&str>) -> Result<Self, CliError> {
        let p = Pairs(parse_pairs(text)?);
        let (preset, model) = build_model(&p, preset)?;

        let normalization = match p.raw("normalization").unwrap_or("c-zero") {
            "c-zero" => SolitonNormalization::CZero,
            "potential-zero" => SolitonNormalization::PotentialZeroAtOrigin,
            v => return Err(CliError::Config(format!("normalization: expected c-zero or potential-zero, got `{v}`"))),
        };
        let mode = match p.raw("run.mode").unwrap_or("physical") {
            "physical" => Mode::Physical,
            "phase" => Mode::Phase,
            "einstein" => Mode::Einstein,
            v => return Err(CliError::Config(format!("run.mode: expected physical, phase or einstein, got `{v}`"))),
        };

        let startup = Startup {
            hbar: p.list("startup.hbar")?.unwrap_or_else(|| vec![6.0]),
            ubar: p.get("startup.ubar", -1.0)?,
            order: p.get("startup.order", 4)?,
            t0: p.get("startup.t0", 1e-4)?,
        };
        if startup.hbar.is_empty() {
            return Err(CliError::Config("startup.hbar is empty".into()));
        }
        let layout = match p.raw("launch.layout").unwrap_or("full") {
            "full" => PhaseLayout::Full,
            "subsystem" => PhaseLayout::Subsystem,
            v => return Err(CliError::Config(format!("launch.layout: expected full or subsystem, got `{v}`"))),
        };
        let launch = Launch {
            delta: p.get("launch.delta", 1e-6)?,
            energy: p.get("launch.energy", if mode == Mode::Einstein { 0.0 } else { -1.0 })?,
            direction: p.list("launch.direction")?,
            seed: p.get("launch.seed", 0)?,
            layout: if mode == Mode::Einstein { PhaseLayout::Einstein } else { layout },
        };

        let h = p.get("integrator.h", 1e-3)?;
        let end = p.get("integrator.end", 20.0)?;
        if !(h > 0.0) || !(end > 0.0) {
            return Err(CliError::Config("integrator.h and integrator.end must be positive".into()));
        }
        let ramp_scale = p.get("integrator.ramp_scale", if mode == Mode::Physical { 1.0 } else { 0.0 })?;
        let defaults = IntegratorConfig::default();
        let integrator = IntegratorConfig {
            h,
            end,
            adaptive: p.flag("integrator.adaptive", false)?,
            rel_tol: p.get("integrator.rel_tol", defaults.rel_tol)?,
            h_min: p.get("integrator.h_min", defaults.h_min)?,
            max_steps: p.get("integrator.max_steps", defaults.max_steps)?,
            blowup_norm: p.get("integrator.blowup_norm", defaults.blowup_norm)?,
            ramp: (ramp_scale > 0.0).then_some(StepRamp { origin: 0.0, scale: ramp_scale }),
            record_every: p.get("integrator.record_every", 1)?,
            ..defaults
        };
        if integrator.max_steps == 0 {
            return Err(CliError::Config("integrator.max_steps must be at least 1".into()));
        }

        let monitors = match p.raw("monitors.names") {
            None | Some("all") => MONITOR_NAMES.iter().map(|s| s.to_string()).collect(),
            Some(_) => {
                let names: Vec<String> = p.list("monitors.names")?.unwrap_or_default();
                if let Some(bad) = names.iter().find(|n| !MONITOR_NAMES.contains(&n.as_str())) {
                    return Err(CliError::Config(format!("monitors.names: unknown monitor `{bad}`")));
                }
                names
            }
        };
        let window = TailWindow {
            fraction: p.get("fits.tail_fraction", 0.2)?,
            min_points: p.get("fits.min_points", 50)?,
        };
        if !(window.fraction > 0.0 && window.fraction <= 1.0) {
            return Err(CliError::Config("fits.tail_fraction must lie in (0, 1]".into()));
        }

        let sweep_keys = ["sweep.hbar", "sweep.ubar", "sweep.seed"];
        let sweep = if sweep_keys.iter().any(|k| p.raw(k).is_some()) {
            Some(SweepGrid {
                hbar: dedup("sweep.hbar", p.list("sweep.hbar")?.unwrap_or_default()),
                ubar: dedup("sweep.ubar", p.list("sweep.ubar")?.unwrap_or_default()),
                seed: dedup("sweep.seed", p.list("sweep.seed")?.unwrap_or_default()),
            })
        } else {
            None
        };

        Ok(Self {
            preset,
            model,
            normalization,
            mode,
            startup,
            launch,
            min_horizon: p.get("integrator.min_horizon", end)?,
            integrator,
            monitors,
            window,
            out_dir: PathBuf::from(p.raw("output.dir").unwrap_or("out")),
            plots: p.flag("output.plots", true)?,
            sweep,
        })
    }

    /// Non-collapsing radii at the singular orbit, one per factor after the
    /// first. A single value is repeated.
    pub fn hbar_values(&self) -> Vec<f64> {
        let need = self.model.factor_count().saturating_sub(1).max(1);
        if self.startup.hbar.len() == 1 {
            vec![self.startup.hbar[0]; need]
        } else {
            self.startup.hbar.clone()
        }
    }
}
