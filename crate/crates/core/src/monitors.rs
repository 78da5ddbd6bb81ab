//! Runtime checks of the a-priori properties of complete expanders.
//!
//! Margins are signed so that positive means satisfied. Each check has a
//! slice-based core (usable on synthetic data) and a wrapper taking
//! [`PhysicalRecord`]s or [`PhaseSample`]s.

use std::fmt;

use crate::model::{OrbitModel, SolitonNormalization};
use crate::phase::PhaseSample;
use crate::physical::PhysicalRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "Pass",
            Verdict::Fail => "Fail",
            Verdict::NotApplicable => "NotApplicable",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorReport {
    pub name: String,
    pub verdict: Verdict,
    pub worst_margin: f64,
    pub worst_location: f64,
    pub notes: String,
}

impl MonitorReport {
    fn judged(name: &str, margin: f64, location: f64, tol: f64, notes: String) -> Self {
        let verdict = if margin.is_nan() || margin < -tol { Verdict::Fail } else { Verdict::Pass };
        Self { name: name.into(), verdict, worst_margin: margin, worst_location: location, notes }
    }

    fn not_applicable(name: &str, notes: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            verdict: Verdict::NotApplicable,
            worst_margin: f64::NAN,
            worst_location: f64::NAN,
            notes: notes.into(),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

pub const MONITOR_NAMES: &[&str] = &[
    "potential",
    "mean-curvature",
    "E-negative",
    "potential-bounds",
    "gradient-lower-bound",
    "F0-lyapunov",
    "volume-growth",
];

/// Startup exclusion and strictness tolerance shared by the monitors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorOptions {
    /// Samples with `t` below this are ignored.
    pub startup_end: f64,
    pub tol: f64,
}

impl MonitorOptions {
    /// Window `t < 2·t0`, tolerance `100·h⁴`.
    pub fn for_run(h: f64, t0: f64) -> Self {
        Self { startup_end: 2.0 * t0, tol: 100.0 * h.powi(4) }
    }

    fn window_note(&self) -> String {
        format!("startup window t < {:.3e} excluded", self.startup_end)
    }
}

impl Default for MonitorOptions {
    fn default() -> Self {
        Self::for_run(1e-3, 1e-4)
    }
}

/// Smallest value of `f(k)` over `indices`, with its index.
fn min_over(indices: impl Iterator<Item = usize>, mut f: impl FnMut(usize) -> f64) -> Option<(f64, usize)> {
    indices.fold(None, |acc, k| {
        let v = f(k);
        match acc {
            Some((m, _)) if !(v < m) && !v.is_nan() => acc,
            _ => Some((v, k)),
        }
    })
}

fn first_index(t: &[f64], from: f64) -> usize {
    t.partition_point(|&x| x < from)
}

/// Centered first difference; one-sided at the ends.
fn centered_diff(t: &[f64], y: &[f64], k: usize) -> f64 {
    let n = t.len();
    let (a, b) = match k {
        0 => (0, 1),
        k if k + 1 == n => (k - 1, k),
        k => (k - 1, k + 1),
    };
    (y[b] - y[a]) / (t[b] - t[a])
}

/// `u̇ < 0` and `ü < 0`, with `ü` from centered differences of `u̇`.
pub fn potential_report(t: &[f64], udot: &[f64], opts: &MonitorOptions) -> MonitorReport {
    const NAME: &str = "potential";
    let start = first_index(t, opts.startup_end);
    if t.len() < start + 2 {
        return MonitorReport::not_applicable(NAME, "fewer than two samples after startup");
    }
    let (m, k) = min_over(start..t.len(), |k| (-udot[k]).min(-centered_diff(t, udot, k))).unwrap();
    let slope = (start..t.len()).map(|k| -centered_diff(t, udot, k)).fold(f64::INFINITY, f64::min);
    MonitorReport::judged(
        NAME,
        m,
        t[k],
        opts.tol,
        format!("min -udot/-uddot combined; min -uddot = {slope:.6e}; {}", opts.window_note()),
    )
}

pub fn check_potential(recs: &[PhysicalRecord], opts: &MonitorOptions) -> MonitorReport {
    let (t, udot): (Vec<f64>, Vec<f64>) = recs.iter().map(|r| (r.t, r.udot)).unzip();
    potential_report(&t, &udot, opts)
}

/// Eventually `trL < bound`; passes when the crossing happens before half
/// the run.
pub fn mean_curvature_report(t: &[f64], tr_l: &[f64], bound: f64, opts: &MonitorOptions) -> MonitorReport {
    const NAME: &str = "mean-curvature";
    let start = first_index(t, opts.startup_end);
    if t.len() <= start {
        return MonitorReport::not_applicable(NAME, "no samples after startup");
    }
    // last violating index, then t1 is the next sample
    let last_bad = (start..t.len()).rev().find(|&k| tr_l[k] >= bound + opts.tol);
    let t_end = t[t.len() - 1];
    let first_good = last_bad.map_or(start, |k| k + 1);
    if first_good >= t.len() {
        let (m, k) = min_over(start..t.len(), |k| bound - tr_l[k]).unwrap();
        return MonitorReport::judged(NAME, m, t[k], 0.0, format!("bound {bound:.6} never settles"));
    }
    let t1 = t[first_good];
    let (m, k) = min_over(first_good..t.len(), |k| bound - tr_l[k]).unwrap();
    let mut report =
        MonitorReport::judged(NAME, m, t[k], opts.tol, format!("bound {bound:.6}; t1 = {t1:.6}; {}", opts.window_note()));
    if t1 > 0.5 * t_end {
        report.verdict = Verdict::Fail;
        report.worst_margin = report.worst_margin.min(-(t1 - 0.5 * t_end));
        report.notes = format!("t1 = {t1:.6} later than half the run; {}", report.notes);
    }
    report
}

pub fn check_mean_curvature(recs: &[PhysicalRecord], model: &OrbitModel, opts: &MonitorOptions) -> MonitorReport {
    let bound = (model.total_dim() as f64 * model.epsilon / 2.0).sqrt();
    let (t, tr): (Vec<f64>, Vec<f64>) = recs.iter().map(|r| (r.t, r.conserved.tr_l)).unzip();
    mean_curvature_report(&t, &tr, bound, opts)
}

/// `ℰ < 0` at every sample, including the start.
pub fn e_negative_report(t: &[f64], e: &[f64], opts: &MonitorOptions) -> MonitorReport {
    const NAME: &str = "E-negative";
    if t.is_empty() {
        return MonitorReport::not_applicable(NAME, "empty trajectory");
    }
    let flat = 1e-8f64.max(opts.tol);
    if e.iter().all(|v| v.abs() <= flat) {
        return MonitorReport::not_applicable(NAME, "E vanishes identically (Einstein locus)");
    }
    let (m, k) = min_over(0..t.len(), |k| -e[k]).unwrap();
    let verdict = if m > 0.0 { Verdict::Pass } else { Verdict::Fail };
    MonitorReport { name: NAME.into(), verdict, worst_margin: m, worst_location: t[k], notes: "margin = -max E".into() }
}

pub fn check_e_negative(recs: &[PhysicalRecord], opts: &MonitorOptions) -> MonitorReport {
    let (t, e): (Vec<f64>, Vec<f64>) = recs.iter().map(|r| (r.t, r.conserved.e)).unzip();
    e_negative_report(&t, &e, opts)
}

/// Phase-space reading `ℰ = Q / W²`.
pub fn check_e_negative_phase(samples: &[PhaseSample], opts: &MonitorOptions) -> MonitorReport {
    let (s, e): (Vec<f64>, Vec<f64>) = samples.iter().map(|p| (p.state.s, p.derived.q / (p.state.w * p.state.w))).unzip();
    e_negative_report(&s, &e, opts)
}

/// `0 ≤ −ũ < (ε/4)t² + √(−C̃) t` and `|u̇| < (ε/2)t + √(−C̃)` for a
/// potential already shifted so that `ũ(0) = 0`.
pub fn potential_bounds_report(
    t: &[f64],
    u_shifted: &[f64],
    udot: &[f64],
    epsilon: f64,
    c_tilde: f64,
    opts: &MonitorOptions,
) -> MonitorReport {
    const NAME: &str = "potential-bounds";
    if !(c_tilde <= 0.0) {
        return MonitorReport::not_applicable(NAME, format!("shifted constant {c_tilde} is positive"));
    }
    let root = (-c_tilde).sqrt();
    let start = first_index(t, opts.startup_end);
    if t.len() <= start {
        return MonitorReport::not_applicable(NAME, "no samples after startup");
    }
    let margin = |k: usize| {
        let (tk, mu) = (t[k], -u_shifted[k]);
        let upper = 0.25 * epsilon * tk * tk + root * tk - mu;
        let deriv = 0.5 * epsilon * tk + root - udot[k].abs();
        mu.min(upper).min(deriv)
    };
    let (m, k) = min_over(start..t.len(), margin).unwrap();
    MonitorReport::judged(NAME, m, t[k], opts.tol, format!("C~ = {c_tilde:.6e}; {}", opts.window_note()))
}

pub fn check_potential_bounds(
    recs: &[PhysicalRecord],
    model: &OrbitModel,
    normalization: SolitonNormalization,
    u_at_origin: f64,
    opts: &MonitorOptions,
) -> MonitorReport {
    let (offset, c_tilde) = normalization.shift(model, u_at_origin);
    let t: Vec<f64> = recs.iter().map(|r| r.t).collect();
    let u: Vec<f64> = recs.iter().map(|r| r.u - offset).collect();
    let udot: Vec<f64> = recs.iter().map(|r| r.udot).collect();
    potential_bounds_report(&t, &u, &udot, model.epsilon, c_tilde, opts)
}

/// Linear lower bound on `−u̇` and upper bound on `ü` past `t₁`.
#[allow(clippy::too_many_arguments)]
pub fn gradient_lower_bound_report(
    t: &[f64],
    udot: &[f64],
    uddot: &[f64],
    tr_l: &[f64],
    epsilon: f64,
    n: f64,
    c_tilde: f64,
    opts: &MonitorOptions,
) -> MonitorReport {
    const NAME: &str = "gradient-lower-bound";
    let lambda0 = (n * epsilon / 2.0).sqrt();
    let threshold = 2.0 * (5.0 / epsilon).sqrt();
    let Some(k1) = (0..t.len()).find(|&k| t[k] > threshold && tr_l[k] < lambda0) else {
        return MonitorReport::not_applicable(NAME, format!("no sample beyond t = {threshold:.4} with trL < {lambda0:.4}"));
    };
    if !(c_tilde <= 0.0) {
        return MonitorReport::not_applicable(NAME, format!("shifted constant {c_tilde} is positive"));
    }
    let a = lambda0 + (-c_tilde).sqrt();
    let t1 = t[k1];
    let ratio = -udot[k1] / (0.5 * epsilon * t1 + a);
    let cap = 0.5 * epsilon * (1.0 - 0.9 * ratio);
    let (mi, ki) = min_over(k1..t.len(), |k| -udot[k] - 0.9 * ratio * (0.5 * epsilon * t[k] + a)).unwrap();
    let (mii, kii) = min_over(k1..t.len(), |k| cap - (uddot[k] + 0.5 * epsilon)).unwrap();
    let (m, loc) = if mi <= mii { (mi, t[ki]) } else { (mii, t[kii]) };
    let tail = first_index(t, 0.8 * t[t.len() - 1]);
    let slope = if t.len() - tail >= 2 {
        let (sl, _, _) = crate::asymptotics::linear_fit(&t[tail..], &udot[tail..].iter().map(|v| -v).collect::<Vec<_>>());
        sl
    } else {
        f64::NAN
    };
    MonitorReport::judged(
        NAME,
        m,
        loc,
        opts.tol,
        format!("t1 = {t1:.6}; margin (i) = {mi:.6e}; margin (ii) = {mii:.6e}; tail slope of -udot = {slope:.6}"),
    )
}

pub fn check_gradient_lower_bound(
    recs: &[PhysicalRecord],
    model: &OrbitModel,
    c_tilde: f64,
    opts: &MonitorOptions,
) -> MonitorReport {
    let t: Vec<f64> = recs.iter().map(|r| r.t).collect();
    let udot: Vec<f64> = recs.iter().map(|r| r.udot).collect();
    let uddot: Vec<f64> = recs.iter().map(|r| r.uddot).collect();
    let tr: Vec<f64> = recs.iter().map(|r| r.conserved.tr_l).collect();
    gradient_lower_bound_report(&t, &udot, &uddot, &tr, model.epsilon, model.total_dim() as f64, c_tilde, opts)
}

/// `ℱ₀ = v^{2/n} (S + Σ d_i L_i² − (trL)²/n)` at one sample.
pub fn f0_value(rec: &PhysicalRecord, model: &OrbitModel) -> f64 {
    let n = model.total_dim() as f64;
    let c = &rec.conserved;
    rec.volume.powf(2.0 / n) * (c.s + c.tr_l2 - c.tr_l * c.tr_l / n)
}

/// Finds the onset after which `ℱ₀` never increases by more than the
/// tolerance; passes when the onset lies in the first half of the run.
pub fn f0_report(t: &[f64], f0: &[f64], opts: &MonitorOptions) -> MonitorReport {
    const NAME: &str = "F0-lyapunov";
    let start = first_index(t, opts.startup_end);
    if t.len() < start + 2 {
        return MonitorReport::not_applicable(NAME, "fewer than two samples after startup");
    }
    let allowed = |k: usize| opts.tol + 1e-12 * f0[k].abs().max(f0[k + 1].abs());
    let last_up = (start..t.len() - 1).rev().find(|&k| f0[k + 1] - f0[k] > allowed(k));
    let onset_idx = last_up.map_or(start, |k| k + 1);
    let t_end = t[t.len() - 1];
    let onset = t[onset_idx];
    let (m, k) = if onset_idx + 1 < t.len() {
        min_over(onset_idx..t.len() - 1, |k| f0[k] - f0[k + 1]).unwrap()
    } else {
        (0.0, onset_idx)
    };
    let mut report = MonitorReport::judged(NAME, m, t[k], opts.tol + 1e-12 * f0[k].abs(), format!("onset t = {onset:.6}; {}", opts.window_note()));
    if onset > 0.5 * t_end {
        report.verdict = Verdict::Fail;
        report.worst_margin = report.worst_margin.min(-(onset - 0.5 * t_end));
        report.notes = format!("no onset in the first half; {}", report.notes);
    }
    report
}

pub fn check_f0_lyapunov(recs: &[PhysicalRecord], model: &OrbitModel, opts: &MonitorOptions) -> MonitorReport {
    let t: Vec<f64> = recs.iter().map(|r| r.t).collect();
    let f0: Vec<f64> = recs.iter().map(|r| f0_value(r, model)).collect();
    f0_report(&t, &f0, opts)
}

/// `Q < tol` and `H < 1 + tol` along a phase run that starts inside the region.
pub fn region_report(s: &[f64], q: &[f64], h: &[f64], tol: f64) -> MonitorReport {
    const NAME: &str = "region-invariance";
    if s.is_empty() {
        return MonitorReport::not_applicable(NAME, "empty trajectory");
    }
    if q.iter().all(|v| v.abs() <= tol) {
        return MonitorReport::not_applicable(NAME, "Q vanishes identically (Einstein locus)");
    }
    if !(q[0] < 0.0 && h[0] < 1.0) {
        return MonitorReport::not_applicable(NAME, format!("start not in region: Q = {:.3e}, H - 1 = {:.3e}", q[0], h[0] - 1.0));
    }
    let (m, k) = min_over(0..s.len(), |k| (-q[k]).min(1.0 - h[k])).unwrap();
    let q_max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let h_max = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    MonitorReport::judged(NAME, m, s[k], tol, format!("max Q = {q_max:.6e}; max H - 1 = {:.6e}", h_max - 1.0))
}

pub fn check_region_invariance(samples: &[PhaseSample], tol: f64) -> MonitorReport {
    let s: Vec<f64> = samples.iter().map(|p| p.state.s).collect();
    let q: Vec<f64> = samples.iter().map(|p| p.derived.q).collect();
    let h: Vec<f64> = samples.iter().map(|p| p.derived.h).collect();
    region_report(&s, &q, &h, tol)
}

/// Relative volume `∫ v dt` must grow at least logarithmically on the
/// second half of the run and keep trending upward.
pub fn volume_report(t: &[f64], v: &[f64]) -> MonitorReport {
    const NAME: &str = "volume-growth";
    let n = t.len();
    if n < 4 || !(t[n - 1] >= 10.0) {
        return MonitorReport::not_applicable(NAME, "needs t_end >= 10");
    }
    let mut vol = vec![0.0; n];
    for k in 1..n {
        vol[k] = vol[k - 1] + 0.5 * (t[k] - t[k - 1]) * (v[k] + v[k - 1]);
    }
    let mid = first_index(t, 0.5 * t[n - 1]).min(n - 2);
    let logt: Vec<f64> = t[mid..].iter().map(|x| x.ln()).collect();
    let (beta, _, _) = crate::asymptotics::linear_fit(&logt, &vol[mid..]);
    let growth = vol[n - 1] / vol[mid] - 2.0;
    let rate_mid = t[mid] * v[mid];
    let rate_end = t[n - 1] * v[n - 1];
    let trend = growth.max((rate_end - rate_mid) / rate_mid.abs().max(f64::MIN_POSITIVE));
    let margin = beta.min(trend);
    let verdict = if beta > 0.0 && trend >= 0.0 { Verdict::Pass } else { Verdict::Fail };
    MonitorReport {
        name: NAME.into(),
        verdict,
        worst_margin: margin,
        worst_location: t[n - 1],
        notes: format!("log-fit coefficient {beta:.6e}; final/mid volume {:.6e}", vol[n - 1] / vol[mid]),
    }
}

pub fn check_volume_growth(recs: &[PhysicalRecord]) -> MonitorReport {
    let (t, v): (Vec<f64>, Vec<f64>) = recs.iter().map(|r| (r.t, r.volume)).unzip();
    volume_report(&t, &v)
}

/// All physical monitors in [`MONITOR_NAMES`] order, filtered by `names`.
pub fn run_physical_monitors(
    recs: &[PhysicalRecord],
    model: &OrbitModel,
    normalization: SolitonNormalization,
    u_at_origin: f64,
    opts: &MonitorOptions,
    names: &[String],
) -> Vec<MonitorReport> {
    let (_, c_tilde) = normalization.shift(model, u_at_origin);
    MONITOR_NAMES
        .iter()
        .filter(|n| names.is_empty() || names.iter().any(|m| m == *n))
        .map(|&name| match name {
            "potential" => check_potential(recs, opts),
            "mean-curvature" => check_mean_curvature(recs, model, opts),
            "E-negative" => check_e_negative(recs, opts),
            "potential-bounds" => check_potential_bounds(recs, model, normalization, u_at_origin, opts),
            "gradient-lower-bound" => check_gradient_lower_bound(recs, model, c_tilde, opts),
            "F0-lyapunov" => check_f0_lyapunov(recs, model, opts),
            _ => check_volume_growth(recs),
        })
        .collect()
}
