//! Classical fourth-order Runge-Kutta with optional step doubling.
//!
//! The integrator is agnostic of the independent variable: the same code
//! drives physical runs in `t` and phase-space runs in `s`.

use sha2::{Digest, Sha256};

/// A vector field `ẋ = f(t, x)` on a fixed-length state vector.
pub trait VectorField {
    fn dim(&self) -> usize;

    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]);

    /// Components that must stay above `floor_guard`.
    fn guarded(&self) -> Vec<usize> {
        Vec::new()
    }

    /// Hook applied after every accepted step (e.g. projection onto a
    /// constraint manifold).
    fn project(&self, _x: &mut [f64]) {}

    fn fingerprint(&self) -> String {
        String::new()
    }
}

/// Step size that grows linearly from the origin of a singular problem:
/// `h_eff = h · min(1, (t − origin) / scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRamp {
    pub origin: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub h: f64,
    pub end: f64,
    pub adaptive: bool,
    pub rel_tol: f64,
    pub h_min: f64,
    pub max_steps: usize,
    pub blowup_norm: f64,
    pub floor_guard: f64,
    pub ramp: Option<StepRamp>,
    /// Keep every `record_every`-th step (the last step is always kept).
    pub record_every: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            h: 1e-3,
            end: 20.0,
            adaptive: false,
            rel_tol: 1e-10,
            h_min: 1e-12,
            max_steps: 50_000_000,
            blowup_norm: 1e12,
            floor_guard: 1e-14,
            ramp: None,
            record_every: 1,
        }
    }
}

impl IntegratorConfig {
    pub fn new(h: f64, end: f64) -> Self {
        Self { h, end, ..Self::default() }
    }

    pub fn fingerprint(&self) -> String {
        short_hash(&format!("{self:?}"))
    }
}

pub(crate) fn short_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    StageBlowup,
    NormExceeded,
    FloorGuard { index: usize },
    MonitorAbort(String),
    MaxSteps,
    StepUnderflow,
}

impl EventKind {
    pub fn tag(&self) -> String {
        match self {
            EventKind::StageBlowup => "stage-blowup".into(),
            EventKind::NormExceeded => "norm-exceeded".into(),
            EventKind::FloorGuard { index } => format!("floor-guard[{index}]"),
            EventKind::MonitorAbort(name) => format!("monitor-abort:{name}"),
            EventKind::MaxSteps => "max-steps".into(),
            EventKind::StepUnderflow => "step-underflow".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub kind: EventKind,
    pub location: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Provenance {
    pub field_hash: String,
    pub config_hash: String,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
    pub meta: Provenance,
}

impl Trajectory {
    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn component(&self, i: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.x[i]).collect()
    }

    pub fn reached(&self, end: f64) -> bool {
        self.last().is_some_and(|s| s.t >= end - 1e-9 * end.abs().max(1.0))
    }
}

/// Checked per recorded sample; returning `Some(reason)` stops the run.
pub trait InlineMonitor {
    fn name(&self) -> &str;
    fn check(&self, t: f64, x: &[f64]) -> Option<String>;
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// One classical RK4 step. Non-finite stage values yield
/// [`EventKind::StageBlowup`].
pub fn rk4_step<F: VectorField + ?Sized>(f: &F, x: &[f64], t: f64, h: f64) -> Result<Vec<f64>, EventKind> {
    let n = x.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    f.eval(t, x, &mut k1);
    if !all_finite(&k1) {
        return Err(EventKind::StageBlowup);
    }
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k1[i];
    }
    f.eval(t + 0.5 * h, &tmp, &mut k2);
    if !all_finite(&k2) {
        return Err(EventKind::StageBlowup);
    }
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k2[i];
    }
    f.eval(t + 0.5 * h, &tmp, &mut k3);
    if !all_finite(&k3) {
        return Err(EventKind::StageBlowup);
    }
    for i in 0..n {
        tmp[i] = x[i] + h * k3[i];
    }
    f.eval(t + h, &tmp, &mut k4);
    if !all_finite(&k4) {
        return Err(EventKind::StageBlowup);
    }
    let out: Vec<f64> = (0..n).map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
    if all_finite(&out) {
        Ok(out)
    } else {
        Err(EventKind::StageBlowup)
    }
}

fn sup_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Integrates from `(start, x0)` until `config.end`, an event, or the step
/// budget runs out. The initial point is always the first sample.
pub fn integrate<F: VectorField + ?Sized>(
    f: &F,
    x0: Vec<f64>,
    start: f64,
    config: &IntegratorConfig,
    monitors: &[&dyn InlineMonitor],
) -> Trajectory {
    let mut traj = Trajectory {
        samples: vec![Sample { t: start, x: x0.clone() }],
        events: Vec::new(),
        meta: Provenance { field_hash: f.fingerprint(), config_hash: config.fingerprint(), steps: 0 },
    };
    let guarded = f.guarded();
    let end = config.end;
    let done = |t: f64| t >= end - 1e-12 * end.abs().max(1.0);
    let record_every = config.record_every.max(1);

    let mut t = start;
    let mut x = x0;
    let mut h_adapt = config.h;
    let mut steps = 0usize;

    while !done(t) {
        if steps >= config.max_steps {
            traj.events.push(Event { kind: EventKind::MaxSteps, location: t });
            break;
        }
        let mut h = if config.adaptive { h_adapt } else { config.h };
        if let Some(ramp) = config.ramp {
            let frac = ((t - ramp.origin) / ramp.scale).clamp(1e-300, 1.0);
            h *= frac;
        }
        let last = t + h >= end - 1e-12 * end.abs().max(1.0);
        if last {
            h = end - t;
        }

        let step = if config.adaptive {
            adaptive_step(f, &x, t, h, config).map(|(xn, used, next)| {
                h_adapt = next;
                (xn, used)
            })
        } else {
            rk4_step(f, &x, t, h).map(|xn| (xn, h))
        };
        let (mut xn, used) = match step {
            Ok(v) => v,
            Err(kind) => {
                traj.events.push(Event { kind, location: t });
                break;
            }
        };
        f.project(&mut xn);
        let tn = if last && used == h { end } else { t + used };
        steps += 1;

        if sup_norm(&xn) > config.blowup_norm || !all_finite(&xn) {
            traj.events.push(Event { kind: EventKind::NormExceeded, location: tn });
            break;
        }
        if let Some(&index) = guarded.iter().find(|&&i| xn[i] < config.floor_guard) {
            traj.events.push(Event { kind: EventKind::FloorGuard { index }, location: tn });
            break;
        }
        if let Some(reason) = monitors.iter().find_map(|m| m.check(tn, &xn).map(|r| format!("{}: {r}", m.name()))) {
            traj.events.push(Event { kind: EventKind::MonitorAbort(reason), location: tn });
            break;
        }
        t = tn;
        x = xn;
        if steps.is_multiple_of(record_every) || done(t) {
            traj.samples.push(Sample { t, x: x.clone() });
        }
    }
    if traj.samples.last().map(|s| s.t) != Some(t) && traj.events.iter().all(|e| e.location >= t) {
        traj.samples.push(Sample { t, x });
    }
    traj.meta.steps = steps;
    traj
}

/// Step doubling: compares one step of size `h` with two of size `h/2` and
/// retries with a smaller step until the estimate is below tolerance.
/// Returns `(state, step used, suggested next step)`.
fn adaptive_step<F: VectorField + ?Sized>(
    f: &F,
    x: &[f64],
    t: f64,
    mut h: f64,
    config: &IntegratorConfig,
) -> Result<(Vec<f64>, f64, f64), EventKind> {
    loop {
        if h < config.h_min {
            return Err(EventKind::StepUnderflow);
        }
        let attempt = rk4_step(f, x, t, h).and_then(|big| {
            let half = rk4_step(f, x, t, 0.5 * h)?;
            let two = rk4_step(f, &half, t + 0.5 * h, 0.5 * h)?;
            Ok((big, two))
        });
        match attempt {
            Ok((big, two)) => {
                let err = big.iter().zip(&two).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / 15.0;
                let tol = config.rel_tol * (1.0 + sup_norm(&two));
                if err <= tol {
                    let grow = if err == 0.0 { 2.0 } else { (0.9 * (tol / err).powf(0.2)).min(2.0) };
                    return Ok((two, h, h * grow.max(1.0)));
                }
                h *= (0.9 * (tol / err).powf(0.2)).clamp(0.1, 0.5);
            }
            Err(_) => h *= 0.25,
        }
    }
}

/// Local error estimate used by the adaptive mode.
pub fn doubling_error<F: VectorField + ?Sized>(f: &F, x: &[f64], t: f64, h: f64) -> Result<f64, EventKind> {
    let big = rk4_step(f, x, t, h)?;
    let half = rk4_step(f, x, t, 0.5 * h)?;
    let two = rk4_step(f, &half, t + 0.5 * h, 0.5 * h)?;
    Ok(big.iter().zip(&two).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / 15.0)
}

/// A vector field given by a closure.
pub struct FnField<G> {
    dim: usize,
    f: G,
}

impl<G: Fn(f64, &[f64], &mut [f64])> FnField<G> {
    pub fn new(dim: usize, f: G) -> Self {
        Self { dim, f }
    }
}

impl<G: Fn(f64, &[f64], &mut [f64])> VectorField for FnField<G> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.f)(t, x, out)
    }
}
