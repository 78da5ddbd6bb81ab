//! The autonomous system in `(X_i, Y_i, W)` with `d/ds = W d/dt`.
//!
//! Phase vectors are laid out as `[X_1..X_r, Y_1..Y_r, W]`. The subsystem
//! that drops `Y_1` (possible because the circle factor has `λ_1 = 0`) uses
//! `[X_1..X_r, Y_2..Y_r, W]`.

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::integrator::{Trajectory, VectorField};
use crate::model::{OrbitKind, OrbitModel};
use crate::physical::PhysicalState;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub w: f64,
    pub s: f64,
}

impl PhaseState {
    pub fn new(x: Vec<f64>, y: Vec<f64>, w: f64) -> Self {
        Self { x, y, w, s: 0.0 }
    }

    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = self.x.clone();
        v.extend_from_slice(&self.y);
        v.push(self.w);
        v
    }

    /// Splits a full-layout vector of length `2r + 1`.
    pub fn from_vector(v: &[f64], s: f64) -> Self {
        let r = (v.len() - 1) / 2;
        Self { x: v[..r].to_vec(), y: v[r..2 * r].to_vec(), w: v[2 * r], s }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedQuantities {
    pub g: f64,
    pub h: f64,
    pub lyap: f64,
    pub q: f64,
    pub j: f64,
    pub e_over_xi2: f64,
}

/// Model constants in the form the phase equations need.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseParams {
    pub sqrt_d: Vec<f64>,
    pub lambda: Vec<f64>,
    pub epsilon: f64,
    pub n: f64,
}

impl PhaseParams {
    pub fn new(model: &OrbitModel) -> Result<Self> {
        let OrbitKind::WarpedProduct(factors) = &model.kind else {
            return Err(Error::ModelMismatch("phase variables need a warped product".into()));
        };
        Ok(Self {
            sqrt_d: factors.iter().map(|f| (f.dim as f64).sqrt()).collect(),
            lambda: factors.iter().map(|f| f.einstein_const).collect(),
            epsilon: model.epsilon,
            n: model.total_dim() as f64,
        })
    }

    pub fn r(&self) -> usize {
        self.sqrt_d.len()
    }

    /// `E₊` (or `E₋` with `sign = −1`).
    pub fn e_point(&self, sign: f64) -> PhaseState {
        PhaseState::new(
            self.sqrt_d.iter().map(|s| s / self.n).collect(),
            vec![0.0; self.r()],
            sign * (2.0 / (self.n * self.epsilon)).sqrt(),
        )
    }

    /// The point `P`: `X_1 = Y_1 = 1`, everything else zero.
    pub fn p_point(&self) -> PhaseState {
        let r = self.r();
        let mut x = vec![0.0; r];
        let mut y = vec![0.0; r];
        x[0] = 1.0;
        y[0] = 1.0;
        PhaseState::new(x, y, 0.0)
    }

    fn rates(&self, x: &[f64], y: &[f64], y_offset: usize, w: f64, dx: &mut [f64], dy: &mut [f64]) -> f64 {
        let eps = self.epsilon;
        let g: f64 = x.iter().map(|v| v * v).sum();
        let w2 = w * w;
        for i in 0..x.len() {
            let yi = if i >= y_offset { y[i - y_offset] } else { 0.0 };
            dx[i] = x[i] * (g - 1.0) + self.lambda[i] / self.sqrt_d[i] * yi * yi + 0.5 * eps * (self.sqrt_d[i] - x[i]) * w2;
        }
        for (k, yk) in y.iter().enumerate() {
            let i = k + y_offset;
            dy[k] = yk * (g - x[i] / self.sqrt_d[i] - 0.5 * eps * w2);
        }
        w * (g - 0.5 * eps * w2)
    }

    pub fn derived(&self, s: &PhaseState) -> DerivedQuantities {
        let g: f64 = s.x.iter().map(|v| v * v).sum();
        let h: f64 = s.x.iter().zip(&self.sqrt_d).map(|(x, d)| x * d).sum();
        let off = self.r() - s.y.len();
        let ly: f64 = s.y.iter().enumerate().map(|(k, y)| self.lambda[k + off] * y * y).sum();
        let w2 = s.w * s.w;
        let lyap = g + ly - 1.0;
        let q = lyap + 0.5 * self.epsilon * (self.n - 1.0) * w2;
        DerivedQuantities { g, h, lyap, q, j: g - 0.5 * self.epsilon * w2, e_over_xi2: q }
    }

    /// Analytic Jacobian of the full system.
    pub fn jacobian(&self, s: &PhaseState) -> DMatrix<f64> {
        let r = self.r();
        let eps = self.epsilon;
        let (x, y, w) = (&s.x, &s.y, s.w);
        let g: f64 = x.iter().map(|v| v * v).sum();
        let w2 = w * w;
        let mut jac = DMatrix::zeros(2 * r + 1, 2 * r + 1);
        for i in 0..r {
            for j in 0..r {
                let delta = if i == j { 1.0 } else { 0.0 };
                jac[(i, j)] = delta * (g - 1.0 - 0.5 * eps * w2) + 2.0 * x[i] * x[j];
                jac[(r + i, j)] = y[i] * (2.0 * x[j] - delta / self.sqrt_d[i]);
            }
            jac[(i, r + i)] = 2.0 * self.lambda[i] / self.sqrt_d[i] * y[i];
            jac[(i, 2 * r)] = eps * (self.sqrt_d[i] - x[i]) * w;
            jac[(r + i, r + i)] = g - x[i] / self.sqrt_d[i] - 0.5 * eps * w2;
            jac[(r + i, 2 * r)] = -eps * w * y[i];
            jac[(2 * r, i)] = 2.0 * w * x[i];
        }
        jac[(2 * r, 2 * r)] = g - 1.5 * eps * w2;
        jac
    }

    /// Newton least-norm projection onto `{Q = 0, H = 1}`.
    pub fn project_einstein(&self, v: &mut [f64]) {
        let r = self.r();
        for _ in 0..6 {
            let s = PhaseState::from_vector(v, 0.0);
            let d = self.derived(&s);
            let (rq, rh) = (d.q, d.h - 1.0);
            if rq.abs() < 1e-16 && rh.abs() < 1e-16 {
                break;
            }
            let mut gq = vec![0.0; 2 * r + 1];
            let mut gh = vec![0.0; 2 * r + 1];
            for i in 0..r {
                gq[i] = 2.0 * v[i];
                gq[r + i] = 2.0 * self.lambda[i] * v[r + i];
                gh[i] = self.sqrt_d[i];
            }
            gq[2 * r] = self.epsilon * (self.n - 1.0) * v[2 * r];
            let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
            let (a, b, c) = (dot(&gq, &gq), dot(&gq, &gh), dot(&gh, &gh));
            let det = a * c - b * b;
            if det.abs() < 1e-300 {
                break;
            }
            let m1 = (c * rq - b * rh) / det;
            let m2 = (a * rh - b * rq) / det;
            for k in 0..v.len() {
                v[k] -= m1 * gq[k] + m2 * gh[k];
            }
        }
    }
}

/// Which phase equations a [`PhaseSystem`] integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseLayout {
    Full,
    /// `Y_1` row removed.
    Subsystem,
    /// Full system projected onto the Einstein locus after every step.
    Einstein,
}

#[derive(Debug, Clone)]
pub struct PhaseSystem {
    pub params: PhaseParams,
    pub layout: PhaseLayout,
    fingerprint: String,
}

impl PhaseSystem {
    pub fn new(model: &OrbitModel, layout: PhaseLayout) -> Result<Self> {
        let params = PhaseParams::new(model)?;
        if layout == PhaseLayout::Subsystem && params.lambda[0] != 0.0 {
            return Err(Error::ModelMismatch("subsystem requires lambda_1 = 0".into()));
        }
        Ok(Self { params, layout, fingerprint: format!("{}:{layout:?}", model.fingerprint()) })
    }

    fn y_offset(&self) -> usize {
        usize::from(self.layout == PhaseLayout::Subsystem)
    }

    pub fn state(&self, s: f64, v: &[f64]) -> PhaseState {
        let r = self.params.r();
        let ny = r - self.y_offset();
        PhaseState { x: v[..r].to_vec(), y: v[r..r + ny].to_vec(), w: v[r + ny], s }
    }

    pub fn derived_vec(&self, v: &[f64]) -> DerivedQuantities {
        self.params.derived(&self.state(0.0, v))
    }

    /// Samples with `t(s) = t0 + ∫ W ds` attached.
    pub fn samples(&self, traj: &Trajectory, t0: f64) -> Vec<PhaseSample> {
        let mut out = Vec::with_capacity(traj.samples.len());
        let mut t = t0;
        for (k, smp) in traj.samples.iter().enumerate() {
            let state = self.state(smp.t, &smp.x);
            if k > 0 {
                let prev: &PhaseSample = &out[k - 1];
                t += 0.5 * (smp.t - prev.state.s) * (prev.state.w + state.w);
            }
            let derived = self.params.derived(&state);
            out.push(PhaseSample { t, state, derived });
        }
        out
    }
}

impl VectorField for PhaseSystem {
    fn dim(&self) -> usize {
        2 * self.params.r() + 1 - self.y_offset()
    }

    fn eval(&self, _s: f64, v: &[f64], out: &mut [f64]) {
        let r = self.params.r();
        let ny = r - self.y_offset();
        let (dx, rest) = out.split_at_mut(r);
        let (dy, dw) = rest.split_at_mut(ny);
        dw[0] = self.params.rates(&v[..r], &v[r..r + ny], self.y_offset(), v[r + ny], dx, dy);
    }

    fn project(&self, v: &mut [f64]) {
        if self.layout == PhaseLayout::Einstein {
            self.params.project_einstein(v);
        }
    }

    fn fingerprint(&self) -> String {
        self.fingerprint.clone()
    }
}

/// A phase sample with its reconstructed arclength and derived scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSample {
    pub t: f64,
    pub state: PhaseState,
    pub derived: DerivedQuantities,
}

/// `(X′, Y′, W′)`; the `s` slot of the result holds `ds/ds = 1`.
pub fn rhs_phase(state: &PhaseState, model: &OrbitModel) -> Result<PhaseState> {
    let p = PhaseParams::new(model)?;
    let r = p.r();
    if state.x.len() != r || state.y.len() != r {
        return Err(Error::InvalidArgument(format!("expected {r} X and Y components")));
    }
    let mut dx = vec![0.0; r];
    let mut dy = vec![0.0; r];
    let dw = p.rates(&state.x, &state.y, 0, state.w, &mut dx, &mut dy);
    Ok(PhaseState { x: dx, y: dy, w: dw, s: 1.0 })
}

/// Subsystem derivative; `state.y` holds `Y_2..Y_r`.
pub fn rhs_subsystem(state: &PhaseState, model: &OrbitModel) -> Result<PhaseState> {
    let p = PhaseParams::new(model)?;
    if p.lambda[0] != 0.0 {
        return Err(Error::ModelMismatch("subsystem requires lambda_1 = 0".into()));
    }
    let r = p.r();
    if state.x.len() != r || state.y.len() + 1 != r {
        return Err(Error::InvalidArgument(format!("expected {r} X and {} Y components", r - 1)));
    }
    let mut dx = vec![0.0; r];
    let mut dy = vec![0.0; r - 1];
    let dw = p.rates(&state.x, &state.y, 1, state.w, &mut dx, &mut dy);
    Ok(PhaseState { x: dx, y: dy, w: dw, s: 1.0 })
}

pub fn derived(state: &PhaseState, model: &OrbitModel) -> Result<DerivedQuantities> {
    Ok(PhaseParams::new(model)?.derived(state))
}

/// `(Q, H − 1)`.
pub fn einstein_residuals(state: &PhaseState, model: &OrbitModel) -> Result<(f64, f64)> {
    let d = derived(state, model)?;
    Ok((d.q, d.h - 1.0))
}

#[derive(Debug, Clone)]
pub struct Linearization {
    pub jacobian: DMatrix<f64>,
    pub eigenvalues: Vec<Complex<f64>>,
}

fn sorted_eigenvalues(m: DMatrix<f64>) -> Vec<Complex<f64>> {
    let mut ev: Vec<Complex<f64>> = m.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    ev
}

pub fn linearize(point: &PhaseState, model: &OrbitModel) -> Result<Linearization> {
    let p = PhaseParams::new(model)?;
    let jacobian = p.jacobian(point);
    let eigenvalues = sorted_eigenvalues(jacobian.clone());
    Ok(Linearization { jacobian, eigenvalues })
}

/// Eigenvalues of the subsystem, obtained by deleting the `Y_1` row and column.
pub fn subsystem_eigenvalues(point: &PhaseState, model: &OrbitModel) -> Result<Vec<Complex<f64>>> {
    let p = PhaseParams::new(model)?;
    let r = p.r();
    let jac = p.jacobian(point).remove_row(r).remove_column(r);
    Ok(sorted_eigenvalues(jac))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CriticalFamily {
    Origin,
    SphereShell,
    /// 1-based factor indices.
    SubsetRhoA(Vec<usize>),
    Y1Line,
    X1Line,
    Eplus,
    Eminus,
}

impl CriticalFamily {
    pub fn tag(&self) -> String {
        match self {
            CriticalFamily::Origin => "origin".into(),
            CriticalFamily::SphereShell => "sphere-shell".into(),
            CriticalFamily::SubsetRhoA(a) => {
                let ids: Vec<String> = a.iter().map(|i| i.to_string()).collect();
                format!("rho-A{{{}}}", ids.join(";"))
            }
            CriticalFamily::Y1Line => "y1-line".into(),
            CriticalFamily::X1Line => "x1-line".into(),
            CriticalFamily::Eplus => "E+".into(),
            CriticalFamily::Eminus => "E-".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CriticalPoint {
    pub coords: PhaseState,
    pub family: CriticalFamily,
    /// Tangent direction for the line families, in the full vector layout.
    pub direction: Option<Vec<f64>>,
    pub eigenvalues: Option<Vec<Complex<f64>>>,
}

fn check_circle_model(p: &PhaseParams) -> Result<()> {
    let ok = (p.sqrt_d[0] - 1.0).abs() < 1e-15
        && p.lambda[0] == 0.0
        && p.sqrt_d.iter().skip(1).all(|s| s * s > 1.0 + 1e-12)
        && p.lambda.iter().skip(1).all(|&l| l > 0.0);
    if ok {
        Ok(())
    } else {
        Err(Error::ModelMismatch("critical points need d_1 = 1, lambda_1 = 0 and d_i > 1, lambda_i > 0 otherwise".into()))
    }
}

/// Stationary points, with shell axis representatives only.
pub fn critical_points(model: &OrbitModel) -> Result<Vec<CriticalPoint>> {
    critical_points_with_shell_samples(model, 0, 0)
}

/// As [`critical_points`], plus `extra_shell` seeded random points on the
/// unit shell `Σ X² = 1`.
pub fn critical_points_with_shell_samples(model: &OrbitModel, extra_shell: usize, seed: u64) -> Result<Vec<CriticalPoint>> {
    let p = PhaseParams::new(model)?;
    check_circle_model(&p)?;
    let r = p.r();
    let zero = || vec![0.0; r];
    let mut out = Vec::new();
    let mut push = |coords: PhaseState, family: CriticalFamily, direction: Option<Vec<f64>>| {
        let eigenvalues = Some(sorted_eigenvalues(p.jacobian(&coords)));
        out.push(CriticalPoint { coords, family, direction, eigenvalues });
    };

    push(PhaseState::new(zero(), zero(), 0.0), CriticalFamily::Origin, None);

    for i in 0..r {
        for sign in [1.0, -1.0] {
            let mut x = zero();
            x[i] = sign;
            push(PhaseState::new(x, zero(), 0.0), CriticalFamily::SphereShell, None);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..extra_shell {
        let mut x: Vec<f64> = (0..r).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        x.iter_mut().for_each(|v| *v /= norm);
        push(PhaseState::new(x, zero(), 0.0), CriticalFamily::SphereShell, None);
    }

    for mask in 1u64..(1u64 << (r - 1)) {
        let members: Vec<usize> = (1..r).filter(|i| mask & (1 << (i - 1)) != 0).collect();
        let rho = 1.0 / members.iter().map(|&i| p.sqrt_d[i] * p.sqrt_d[i]).sum::<f64>();
        let mut x = zero();
        let mut y = zero();
        for &i in &members {
            let d = p.sqrt_d[i] * p.sqrt_d[i];
            x[i] = p.sqrt_d[i] * rho;
            y[i] = (d / p.lambda[i] * rho * (1.0 - rho)).sqrt();
        }
        push(PhaseState::new(x, y, 0.0), CriticalFamily::SubsetRhoA(members.iter().map(|i| i + 1).collect()), None);
    }

    let mut dir = vec![0.0; 2 * r + 1];
    dir[r] = 1.0;
    let mut y = zero();
    y[0] = 1.0;
    push(PhaseState::new(zero(), y.clone(), 0.0), CriticalFamily::Y1Line, Some(dir.clone()));
    let mut x = zero();
    x[0] = 1.0;
    push(PhaseState::new(x, y, 0.0), CriticalFamily::X1Line, Some(dir));

    push(p.e_point(1.0), CriticalFamily::Eplus, None);
    push(p.e_point(-1.0), CriticalFamily::Eminus, None);
    Ok(out)
}

/// Launch data for leaving `P` along its unstable manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct PLaunch {
    /// Weights of `Y_2..Y_r` and `W` (normalised internally). Zero `Y`
    /// weights keep the run inside `{Y_i = 0}`.
    pub direction: Vec<f64>,
    pub delta: f64,
    /// Target value of `ℰ`; 0 gives an Einstein launch.
    pub energy: f64,
}

impl PLaunch {
    /// Random admissible direction with all components in `[0.1, 1]` before
    /// normalisation.
    pub fn random(r: usize, seed: u64, delta: f64, energy: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let direction = (0..r).map(|_| rng.random_range(0.1..1.0)).collect();
        Self { direction, delta, energy }
    }

    /// Initial phase state near `P`. The `Y_2..Y_r, W` part follows the
    /// eigenvalue-1 direction and the `X_1, Y_1` correction is sized so that
    /// `Q ≈ energy · W²`.
    pub fn state(&self, model: &OrbitModel) -> Result<PhaseState> {
        let p = PhaseParams::new(model)?;
        let r = p.r();
        if self.direction.len() != r {
            return Err(Error::InvalidArgument(format!("launch direction needs {r} entries")));
        }
        if self.direction.iter().any(|&v| !(v >= 0.0)) || !(self.direction[r - 1] > 0.0) || !(self.delta > 0.0) {
            return Err(Error::InvalidArgument("launch weights must be non-negative with positive W weight".into()));
        }
        if self.energy > 0.0 {
            return Err(Error::InvalidArgument("launch energy must be non-positive".into()));
        }
        let norm = self.direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        let b: Vec<f64> = self.direction.iter().map(|v| v / norm).collect();
        let w = b[r - 1];
        let k: f64 =
            (1..r).map(|i| p.lambda[i] * b[i - 1] * b[i - 1]).sum::<f64>() + 0.5 * p.epsilon * (p.n - 1.0) * w * w;
        let a = -self.delta * (k - self.energy * w * w) / 2.0;
        let mut s = p.p_point();
        s.x[0] = 1.0 + self.delta * a;
        s.y[0] = 1.0 + self.delta * a / 2.0;
        for i in 1..r {
            s.y[i] = self.delta * b[i - 1];
        }
        s.w = self.delta * w;
        if self.energy == 0.0 {
            let mut v = s.to_vector();
            p.project_einstein(&mut v);
            s = PhaseState::from_vector(&v, 0.0);
        }
        Ok(s)
    }
}

/// `Y_1(s) = Y_1(s0) exp ∫ (G − X_1 − εW²/2)`, trapezoid on the sample grid.
/// Works on full or subsystem trajectories (`X` first, `W` last).
pub fn reconstruct_y1(traj: &Trajectory, model: &OrbitModel, y1_at_s0: f64, s0: f64) -> Result<Vec<f64>> {
    let p = PhaseParams::new(model)?;
    let r = p.r();
    let n = traj.samples.len();
    if n == 0 {
        return Err(Error::OutOfRange("empty trajectory".into()));
    }
    let (first, last) = (traj.samples[0].t, traj.samples[n - 1].t);
    if s0 < first || s0 > last {
        return Err(Error::OutOfRange(format!("s0 = {s0} outside [{first}, {last}]")));
    }
    let integrand: Vec<f64> = traj
        .samples
        .iter()
        .map(|smp| {
            let x = &smp.x[..r];
            let w = smp.x[smp.x.len() - 1];
            x.iter().map(|v| v * v).sum::<f64>() - x[0] / p.sqrt_d[0] - 0.5 * p.epsilon * w * w
        })
        .collect();
    let mut cum = vec![0.0; n];
    for k in 1..n {
        cum[k] = cum[k - 1] + 0.5 * (traj.samples[k].t - traj.samples[k - 1].t) * (integrand[k] + integrand[k - 1]);
    }
    let k = traj.samples.partition_point(|smp| smp.t < s0).min(n - 1);
    let at_s0 = if k == 0 || traj.samples[k].t == s0 {
        cum[k]
    } else {
        let (sa, sb) = (traj.samples[k - 1].t, traj.samples[k].t);
        let theta = (s0 - sa) / (sb - sa);
        let fa = integrand[k - 1];
        let fs = fa + theta * (integrand[k] - fa);
        cum[k - 1] + 0.5 * (s0 - sa) * (fa + fs)
    };
    Ok(cum.iter().map(|c| y1_at_s0 * (c - at_s0).exp()).collect())
}

/// A physical sample recovered from a phase trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstructed {
    pub s: f64,
    pub state: PhysicalState,
}

/// Recovers `t`, `g_i`, `ġ_i`, `u`, `u̇` along a phase trajectory.
///
/// Subsystem trajectories (length `2r`) get `Y_1` from [`reconstruct_y1`]
/// seeded by `g_at_s0[0]`; on full trajectories `g` follows algebraically
/// and `g_at_s0` is only checked for length.
pub fn physical_from_phase(
    traj: &Trajectory,
    model: &OrbitModel,
    g_at_s0: &[f64],
    u_at_s0: f64,
    t_at_s0: f64,
) -> Result<Vec<Reconstructed>> {
    let p = PhaseParams::new(model)?;
    let r = p.r();
    if g_at_s0.len() != r {
        return Err(Error::InvalidArgument(format!("g_at_s0 needs {r} entries")));
    }
    let Some(first) = traj.samples.first() else {
        return Ok(Vec::new());
    };
    let full = first.x.len() == 2 * r + 1;
    let y1 = if full {
        None
    } else {
        let w0 = first.x[first.x.len() - 1];
        Some(reconstruct_y1(traj, model, p.sqrt_d[0] * w0 / g_at_s0[0], first.t)?)
    };

    let mut out: Vec<Reconstructed> = Vec::with_capacity(traj.samples.len());
    let (mut t, mut u) = (t_at_s0, u_at_s0);
    let mut prev: Option<(f64, f64, f64)> = None;
    for (k, smp) in traj.samples.iter().enumerate() {
        let v = &smp.x;
        let w = v[v.len() - 1];
        if !(w > 0.0) {
            return Err(Error::CoordinateBreakdown(format!("W = {w} at s = {}", smp.t)));
        }
        let y: Vec<f64> = match &y1 {
            None => v[r..2 * r].to_vec(),
            Some(y1) => std::iter::once(y1[k]).chain(v[r..2 * r - 1].iter().copied()).collect(),
        };
        if let Some(i) = y.iter().position(|&yi| yi == 0.0) {
            return Err(Error::CoordinateBreakdown(format!("Y_{} = 0 at s = {}", i + 1, smp.t)));
        }
        let h: f64 = v[..r].iter().zip(&p.sqrt_d).map(|(x, d)| x * d).sum();
        if let Some((s_prev, w_prev, h_prev)) = prev {
            let ds = smp.t - s_prev;
            t += 0.5 * ds * (w + w_prev);
            u += 0.5 * ds * ((h - 1.0) + (h_prev - 1.0));
        }
        prev = Some((smp.t, w, h));
        out.push(Reconstructed {
            s: smp.t,
            state: PhysicalState {
                t,
                g: (0..r).map(|i| p.sqrt_d[i] * w / y[i]).collect(),
                gdot: (0..r).map(|i| v[i] / y[i]).collect(),
                u,
                udot: (h - 1.0) / w,
            },
        });
    }
    Ok(out)
}

/// Largest component of the phase vector field at a state.
pub fn residual_norm(state: &PhaseState, model: &OrbitModel) -> Result<f64> {
    Ok(rhs_phase(state, model)?.to_vector().iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// Central finite-difference Jacobian, used as an oracle.
pub fn finite_difference_jacobian(state: &PhaseState, model: &OrbitModel, h: f64) -> Result<DMatrix<f64>> {
    let base = state.to_vector();
    let m = base.len();
    let mut jac = DMatrix::zeros(m, m);
    for j in 0..m {
        let mut plus = base.clone();
        let mut minus = base.clone();
        let step = h * (1.0 + base[j].abs());
        plus[j] += step;
        minus[j] -= step;
        let fp = DVector::from_vec(rhs_phase(&PhaseState::from_vector(&plus, 0.0), model)?.to_vector());
        let fm = DVector::from_vec(rhs_phase(&PhaseState::from_vector(&minus, 0.0), model)?.to_vector());
        jac.set_column(j, &((fp - fm) / (2.0 * step)));
    }
    Ok(jac)
}
