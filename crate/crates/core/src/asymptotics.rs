//! Tail fits for the asymptotic behaviour of long trajectories.

use std::fmt;

use crate::phase::{PhaseParams, PhaseSample};
use crate::physical::PhysicalRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitForm {
    Linear,
    PowerLaw,
    LogLinear,
    ConstantLimit,
}

impl fmt::Display for FitForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitForm::Linear => "linear",
            FitForm::PowerLaw => "power-law",
            FitForm::LogLinear => "log-linear",
            FitForm::ConstantLimit => "constant-limit",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticFit {
    pub quantity: String,
    pub model_form: FitForm,
    pub fitted_params: Vec<f64>,
    pub window: (f64, f64),
    pub residual_rms: f64,
    /// Value the fit is compared against, when there is one.
    pub target: Option<f64>,
    /// Relative deviation from `target` (or another fit-specific score).
    pub deviation: Option<f64>,
    pub ok: Option<bool>,
}

/// Last `fraction` of the samples, but at least `min_points` of them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailWindow {
    pub fraction: f64,
    pub min_points: usize,
}

impl Default for TailWindow {
    fn default() -> Self {
        Self { fraction: 0.2, min_points: 50 }
    }
}

impl TailWindow {
    pub fn start(&self, n: usize) -> usize {
        let k = ((n as f64) * self.fraction).round() as usize;
        n - k.max(self.min_points).min(n)
    }
}

/// Least squares `y ≈ a x + b`; returns `(a, b, rms residual)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let icpt = my - slope * mx;
    let rms = (x.iter().zip(y).map(|(a, b)| (b - slope * a - icpt).powi(2)).sum::<f64>() / n).sqrt();
    (slope, icpt, rms)
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

/// Linear fit of each `g_i` against `t` on the tail. `ok` when the residual
/// is below 1% of the size of `g_i`.
pub fn fit_cone_slopes_columns(t: &[f64], g: &[Vec<f64>], window: TailWindow) -> Vec<AsymptoticFit> {
    let start = window.start(t.len());
    let tt = &t[start..];
    g.iter()
        .enumerate()
        .map(|(i, gi)| {
            let y = &gi[start..];
            let (a, b, res) = linear_fit(tt, y);
            let rel = res / rms(y);
            AsymptoticFit {
                quantity: format!("g{}", i + 1),
                model_form: FitForm::Linear,
                fitted_params: vec![a, b],
                window: (tt[0], tt[tt.len() - 1]),
                residual_rms: res,
                target: None,
                deviation: Some(rel),
                ok: Some(rel < 1e-2),
            }
        })
        .collect()
}

pub fn fit_cone_slopes(recs: &[PhysicalRecord], window: TailWindow) -> Vec<AsymptoticFit> {
    let t: Vec<f64> = recs.iter().map(|r| r.t).collect();
    let r = recs.first().map_or(0, |r| r.g.len());
    let g: Vec<Vec<f64>> = (0..r).map(|i| recs.iter().map(|rec| rec.g[i]).collect()).collect();
    fit_cone_slopes_columns(&t, &g, window)
}

/// `X̃_i = L_i / ξ` and `Ỹ_i = 1 / (ξ g_i)` at one record.
pub fn scaled_phase(rec: &PhysicalRecord) -> (Vec<f64>, Vec<f64>) {
    let xi = rec.conserved.xi;
    let x = rec.g.iter().zip(&rec.gdot).map(|(g, gd)| gd / (g * xi)).collect();
    let y = rec.g.iter().map(|g| 1.0 / (g * xi)).collect();
    (x, y)
}

/// Decay of `X̃_i`, `Ỹ_i` by the end of the run (below 0.05), the final
/// value of `X̃_1/X̃_2` (within 5% of 1) and the relative spread of
/// `Ỹ_1/Ỹ_2` over the tail (below 2%).
pub fn figure_suite(recs: &[PhysicalRecord], window: TailWindow) -> Vec<AsymptoticFit> {
    let Some(last) = recs.last() else {
        return Vec::new();
    };
    let t_last = last.t;
    let (xl, yl) = scaled_phase(last);
    let mut out = Vec::new();
    for (name, vals) in [("Xt", &xl), ("Yt", &yl)] {
        for (i, v) in vals.iter().enumerate() {
            out.push(AsymptoticFit {
                quantity: format!("{name}{} final", i + 1),
                model_form: FitForm::ConstantLimit,
                fitted_params: vec![*v],
                window: (t_last, t_last),
                residual_rms: 0.0,
                target: Some(0.0),
                deviation: Some(v.abs()),
                ok: Some(v.abs() < 0.05),
            });
        }
    }
    if xl.len() < 2 {
        return out;
    }
    let ratio = xl[0] / xl[1];
    out.push(AsymptoticFit {
        quantity: "Xt1/Xt2 final".into(),
        model_form: FitForm::ConstantLimit,
        fitted_params: vec![ratio],
        window: (t_last, t_last),
        residual_rms: 0.0,
        target: Some(1.0),
        deviation: Some((ratio - 1.0).abs()),
        ok: Some((ratio - 1.0).abs() <= 0.05),
    });
    let start = window.start(recs.len());
    let tail: Vec<f64> = recs[start..].iter().map(|r| r.g[1] / r.g[0]).collect();
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let std = rms(&tail.iter().map(|v| v - mean).collect::<Vec<_>>());
    let rel = std / mean.abs();
    out.push(AsymptoticFit {
        quantity: "Yt1/Yt2 tail".into(),
        model_form: FitForm::ConstantLimit,
        fitted_params: vec![mean, std],
        window: (recs[start].t, t_last),
        residual_rms: std,
        target: None,
        deviation: Some(rel),
        ok: Some(mean > 0.0 && rel < 0.02),
    });
    out
}

/// `g_i = √d_i W / Y_i` along a phase run.
pub fn phase_radii(samples: &[PhaseSample], params: &PhaseParams) -> Vec<Vec<f64>> {
    (0..params.r())
        .map(|i| samples.iter().map(|p| params.sqrt_d[i] * p.state.w / p.state.y[i]).collect())
        .collect()
}

fn constant_limit(quantity: String, s: &[f64], ratio: &[f64], target: f64, tol: f64) -> AsymptoticFit {
    let mean = ratio.iter().sum::<f64>() / ratio.len() as f64;
    let spread = rms(&ratio.iter().map(|v| v - mean).collect::<Vec<_>>());
    let dev = ratio.iter().map(|v| ((v - target) / target).abs()).fold(0.0, f64::max);
    AsymptoticFit {
        quantity,
        model_form: FitForm::ConstantLimit,
        fitted_params: vec![mean, ratio[ratio.len() - 1]],
        window: (s[0], s[s.len() - 1]),
        residual_rms: spread,
        target: Some(target),
        deviation: Some(dev),
        ok: Some(dev <= tol),
    }
}

/// `X_i / W²` on the tail against `(ε/2)√d_i`; the deviation is the largest
/// relative one over the window.
pub fn check_lambda_limits(samples: &[PhaseSample], params: &PhaseParams, window: TailWindow) -> Vec<AsymptoticFit> {
    let start = window.start(samples.len());
    let tail = &samples[start..];
    let s: Vec<f64> = tail.iter().map(|p| p.state.s).collect();
    (0..params.r())
        .map(|i| {
            let ratio: Vec<f64> = tail.iter().map(|p| p.state.x[i] / (p.state.w * p.state.w)).collect();
            constant_limit(format!("X{}/W^2", i + 1), &s, &ratio, 0.5 * params.epsilon * params.sqrt_d[i], 0.1)
        })
        .collect()
}

/// `W √(εs) → 1`, `s / (εt²/4) → 1`, and the envelope `a₁W⁴ ≤ 𝒢 ≤ a₂W⁴`.
pub fn check_scaling_laws(samples: &[PhaseSample], epsilon: f64, window: TailWindow) -> Vec<AsymptoticFit> {
    let start = window.start(samples.len());
    let tail = &samples[start..];
    let s: Vec<f64> = tail.iter().map(|p| p.state.s).collect();
    let w_law: Vec<f64> = tail.iter().map(|p| p.state.w * (epsilon * p.state.s).sqrt()).collect();
    let s_law: Vec<f64> = tail.iter().map(|p| p.state.s / (epsilon * p.t * p.t / 4.0)).collect();
    let g_ratio: Vec<f64> = tail.iter().map(|p| p.derived.g / p.state.w.powi(4)).collect();
    let a1 = g_ratio.iter().copied().fold(f64::INFINITY, f64::min);
    let a2 = g_ratio.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    vec![
        constant_limit("W*sqrt(eps*s)".into(), &s, &w_law, 1.0, 0.1),
        constant_limit("s/(eps*t^2/4)".into(), &s, &s_law, 1.0, 0.1),
        AsymptoticFit {
            quantity: "G/W^4".into(),
            model_form: FitForm::ConstantLimit,
            fitted_params: vec![a1, a2],
            window: (s[0], s[s.len() - 1]),
            residual_rms: a2 - a1,
            target: None,
            deviation: None,
            ok: Some(a1 > 0.0 && a1 <= a2 && a2.is_finite()),
        },
    ]
}

/// Distance to `E₊` at the end of the run and the exponential growth rate
/// of each `g_i`, compared with `√(ε/(2n))`.
pub fn einstein_convergence(samples: &[PhaseSample], params: &PhaseParams, window: TailWindow) -> Vec<AsymptoticFit> {
    let e = params.e_point(1.0).to_vector();
    let last = &samples[samples.len() - 1];
    let dist = last.state.to_vector().iter().zip(&e).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let first = &samples[0];
    let dist0 = first.state.to_vector().iter().zip(&e).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mut out = vec![AsymptoticFit {
        quantity: "dist(E+)".into(),
        model_form: FitForm::ConstantLimit,
        fitted_params: vec![dist, dist0],
        window: (first.state.s, last.state.s),
        residual_rms: 0.0,
        target: Some(0.0),
        deviation: Some(dist),
        ok: Some(dist < 1e-6),
    }];
    let rate = (params.epsilon / (2.0 * params.n)).sqrt();
    let start = window.start(samples.len());
    let t: Vec<f64> = samples[start..].iter().map(|p| p.t).collect();
    for (i, g) in phase_radii(&samples[start..], params).iter().enumerate() {
        let logg: Vec<f64> = g.iter().map(|v| v.ln()).collect();
        let (a, b, res) = linear_fit(&t, &logg);
        let dev = ((a - rate) / rate).abs();
        out.push(AsymptoticFit {
            quantity: format!("log g{}", i + 1),
            model_form: FitForm::LogLinear,
            fitted_params: vec![a, b],
            window: (t[0], t[t.len() - 1]),
            residual_rms: res,
            target: Some(rate),
            deviation: Some(dev),
            ok: Some(dev <= 0.05),
        });
    }
    out
}

/// Behaviour of `J = 𝒢 − (ε/2)W²` on a uniform `s` grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JCheck {
    /// Largest increase between consecutive samples.
    pub max_increase: f64,
    /// Largest `|J′ − 2J(J − 1)|` with `J′` from centered differences.
    pub max_identity_error: f64,
    pub min: f64,
    pub max: f64,
}

pub fn j_identity(samples: &[PhaseSample]) -> JCheck {
    let j: Vec<f64> = samples.iter().map(|p| p.derived.j).collect();
    let s: Vec<f64> = samples.iter().map(|p| p.state.s).collect();
    let max_increase = j.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let max_identity_error = (1..j.len().saturating_sub(1))
        .map(|k| {
            let jp = (j[k + 1] - j[k - 1]) / (s[k + 1] - s[k - 1]);
            (jp - 2.0 * j[k] * (j[k] - 1.0)).abs()
        })
        .fold(0.0, f64::max);
    JCheck {
        max_increase,
        max_identity_error,
        min: j.iter().copied().fold(f64::INFINITY, f64::min),
        max: j.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Tail behaviour of `W / Y_i`. `ok` means "no finite plateau detected":
/// the tail slope is positive and the ratio either grows like a power of
/// `s` with exponent at least 0.1 or ends above ten times its median.
pub fn estimate_sigma_columns(s: &[f64], w: &[f64], y: &[f64], x: &[f64], index: usize, window: TailWindow) -> AsymptoticFit {
    let ratio: Vec<f64> = w.iter().zip(y).map(|(a, b)| a / b).collect();
    let monotone = (1..ratio.len()).all(|k| x[k - 1] <= 0.0 || ratio[k] >= ratio[k - 1] * (1.0 - 1e-12));
    let start = window.start(s.len());
    let (slope, _, res) = linear_fit(&s[start..], &ratio[start..]);
    let mut sorted = ratio.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let positive = s[start..].iter().zip(&ratio[start..]).filter(|(a, b)| **a > 0.0 && **b > 0.0);
    let (ls, lr): (Vec<f64>, Vec<f64>) = positive.map(|(a, b)| (a.ln(), b.ln())).unzip();
    let exponent = if ls.len() >= 2 { linear_fit(&ls, &lr).0 } else { f64::NAN };
    let last = ratio[ratio.len() - 1];
    let divergent = slope > 0.0 && (exponent >= 0.1 || last > 10.0 * median);
    AsymptoticFit {
        quantity: format!("W/Y{}", index + 1),
        model_form: FitForm::PowerLaw,
        fitted_params: vec![last, slope, exponent, median, if monotone { 1.0 } else { 0.0 }],
        window: (s[start], s[s.len() - 1]),
        residual_rms: res,
        target: None,
        deviation: None,
        ok: Some(divergent && monotone),
    }
}

pub fn estimate_sigma(samples: &[PhaseSample], i: usize, window: TailWindow) -> AsymptoticFit {
    let s: Vec<f64> = samples.iter().map(|p| p.state.s).collect();
    let w: Vec<f64> = samples.iter().map(|p| p.state.w).collect();
    let y: Vec<f64> = samples.iter().map(|p| p.state.y[i]).collect();
    let x: Vec<f64> = samples.iter().map(|p| p.state.x[i]).collect();
    estimate_sigma_columns(&s, &w, &y, &x, i, window)
}
