//! Soliton equations in arclength `t`.
//!
//! Integration uses the vector `[g_0.., v_0.., u, u̇]` where `v_i = ġ_i − κ_i`
//! and `κ_i = 1` for the collapsing factor. Storing the deficit rather than
//! `ġ_1 ≈ 1` keeps the round-sphere term `(d−1)(1 − ġ²)/g` free of
//! cancellation near the singular orbit.

use crate::error::{Error, Result};
use crate::integrator::{Trajectory, VectorField};
use crate::model::{OrbitKind, OrbitModel};
use crate::phase::PhaseState;

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalState {
    pub t: f64,
    pub g: Vec<f64>,
    pub gdot: Vec<f64>,
    pub u: f64,
    pub udot: f64,
}

impl PhysicalState {
    /// Two-summand coordinates `(z₁, …, z₆) = (g₁, ġ₁, g₂, ġ₂, u, u̇)`.
    pub fn to_z(&self) -> [f64; 6] {
        [self.g[0], self.gdot[0], self.g[1], self.gdot[1], self.u, self.udot]
    }

    pub fn from_z(t: f64, z: [f64; 6]) -> Self {
        Self { t, g: vec![z[0], z[2]], gdot: vec![z[1], z[3]], u: z[4], udot: z[5] }
    }
}

/// Time derivative of a [`PhysicalState`].
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalRate {
    pub g: Vec<f64>,
    pub gdot: Vec<f64>,
    pub u: f64,
    pub udot: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ConservedSet {
    pub e: f64,
    pub cons1_residual: f64,
    pub cons2_residual: f64,
    pub ham_value: f64,
    pub xi: f64,
    pub tr_l: f64,
    pub tr_l2: f64,
    pub s: f64,
}

/// Everything a monitor or writer needs at one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalRecord {
    pub t: f64,
    pub g: Vec<f64>,
    pub gdot: Vec<f64>,
    pub u: f64,
    pub udot: f64,
    pub uddot: f64,
    pub conserved: ConservedSet,
    /// Relative orbit volume `Π g_i^{d_i}`.
    pub volume: f64,
}

impl PhysicalRecord {
    pub fn mean_curvatures(&self) -> Vec<f64> {
        self.g.iter().zip(&self.gdot).map(|(g, gd)| gd / g).collect()
    }
}

/// The soliton ODE as a [`VectorField`] on the deficit layout.
#[derive(Debug, Clone)]
pub struct PhysicalSystem {
    model: OrbitModel,
    dims: Vec<f64>,
    kappa: Vec<f64>,
}

impl PhysicalSystem {
    pub fn new(model: &OrbitModel) -> Self {
        let dims: Vec<f64> = model.dims().iter().map(|&d| d as f64).collect();
        let mut kappa = vec![0.0; dims.len()];
        if let Some(i) = model.collapsing_factor() {
            kappa[i] = 1.0;
        }
        Self { model: model.clone(), dims, kappa }
    }

    pub fn model(&self) -> &OrbitModel {
        &self.model
    }

    pub fn factors(&self) -> usize {
        self.dims.len()
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn to_vector(&self, s: &PhysicalState) -> Vec<f64> {
        let r = self.factors();
        let mut x = Vec::with_capacity(2 * r + 2);
        x.extend_from_slice(&s.g);
        x.extend((0..r).map(|i| s.gdot[i] - self.kappa[i]));
        x.push(s.u);
        x.push(s.udot);
        x
    }

    pub fn to_state(&self, t: f64, x: &[f64]) -> PhysicalState {
        let r = self.factors();
        PhysicalState {
            t,
            g: x[..r].to_vec(),
            gdot: (0..r).map(|i| x[r + i] + self.kappa[i]).collect(),
            u: x[2 * r],
            udot: x[2 * r + 1],
        }
    }

    /// Second derivatives `g̈_i` and `ü` from the deficit vector.
    fn accelerations(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let r = self.factors();
        let g = &x[..r];
        let v = &x[r..2 * r];
        let (u, udot) = (x[2 * r], x[2 * r + 1]);
        let eps = self.model.epsilon;
        let rho = self.model.ricci_regular(g);
        let gdot: Vec<f64> = (0..r).map(|i| v[i] + self.kappa[i]).collect();
        let l: Vec<f64> = (0..r).map(|i| gdot[i] / g[i]).collect();
        let tr_l: f64 = (0..r).map(|i| self.dims[i] * l[i]).sum();

        let acc = (0..r)
            .map(|i| {
                let d = self.dims[i];
                let own = if self.kappa[i] != 0.0 {
                    (d - 1.0) * (-v[i] * (2.0 + v[i])) / g[i]
                } else {
                    -(d - 1.0) * gdot[i] * gdot[i] / g[i]
                };
                let others: f64 = (0..r).filter(|&j| j != i).map(|j| self.dims[j] * l[j]).sum();
                own + g[i] * rho[i] - others * gdot[i] + udot * gdot[i] + 0.5 * eps * g[i]
            })
            .collect();
        let uddot = self.model.c + eps * u + udot * udot - tr_l * udot;
        (acc, uddot)
    }

    /// Constraint quantities from the deficit vector.
    pub fn conserved_vec(&self, x: &[f64]) -> ConservedSet {
        let r = self.factors();
        let g = &x[..r];
        let v = &x[r..2 * r];
        let (u, udot) = (x[2 * r], x[2 * r + 1]);
        let eps = self.model.epsilon;
        let c = self.model.c;
        let n: f64 = self.dims.iter().sum();
        let rho = self.model.ricci_regular(g);
        let gdot: Vec<f64> = (0..r).map(|i| v[i] + self.kappa[i]).collect();
        let l: Vec<f64> = (0..r).map(|i| gdot[i] / g[i]).collect();
        let tr_l: f64 = (0..r).map(|i| self.dims[i] * l[i]).sum();
        let tr_l2: f64 = (0..r).map(|i| self.dims[i] * l[i] * l[i]).sum();

        // core = S + trL² − (trL)², assembled term by term
        let mut core = 0.0;
        for i in 0..r {
            let d = self.dims[i];
            let own = if self.kappa[i] != 0.0 {
                (d - 1.0) * (-v[i] * (2.0 + v[i])) / (g[i] * g[i])
            } else {
                -(d - 1.0) * l[i] * l[i]
            };
            core += d * (rho[i] + own);
            for j in i + 1..r {
                core -= 2.0 * d * self.dims[j] * l[i] * l[j];
            }
        }
        let (acc, _) = self.accelerations(x);
        let sum_acc: f64 = (0..r).map(|i| self.dims[i] * acc[i] / g[i]).sum();
        let xi = -udot + tr_l;

        ConservedSet {
            e: c + eps * u,
            cons1_residual: sum_acc - 0.5 * eps + xi * udot - eps * u - c,
            cons2_residual: core + 2.0 * udot * tr_l - udot * udot - eps * u + 0.5 * (n - 1.0) * eps - c,
            ham_value: -2.0 * sum_acc + core + udot * udot + eps * u + c + 0.5 * eps * (n + 1.0),
            xi,
            tr_l,
            tr_l2,
            s: self.model.scalar_curvature(g),
        }
    }

    pub fn record(&self, t: f64, x: &[f64]) -> PhysicalRecord {
        let state = self.to_state(t, x);
        let (_, uddot) = self.accelerations(x);
        let volume = state.g.iter().zip(&self.dims).map(|(g, d)| g.powf(*d)).product();
        PhysicalRecord {
            t,
            conserved: self.conserved_vec(x),
            g: state.g,
            gdot: state.gdot,
            u: state.u,
            udot: state.udot,
            uddot,
            volume,
        }
    }

    pub fn records(&self, traj: &Trajectory) -> Vec<PhysicalRecord> {
        traj.samples.iter().map(|s| self.record(s.t, &s.x)).collect()
    }
}

impl VectorField for PhysicalSystem {
    fn dim(&self) -> usize {
        2 * self.factors() + 2
    }

    fn eval(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        let r = self.factors();
        let (acc, uddot) = self.accelerations(x);
        for i in 0..r {
            out[i] = x[r + i] + self.kappa[i];
            out[r + i] = acc[i];
        }
        out[2 * r] = x[2 * r + 1];
        out[2 * r + 1] = uddot;
    }

    fn guarded(&self) -> Vec<usize> {
        (0..self.factors()).collect()
    }

    fn fingerprint(&self) -> String {
        self.model.fingerprint()
    }
}

fn check_positive(g: &[f64]) -> Result<()> {
    match g.iter().position(|&v| !(v > 0.0)) {
        Some(i) => Err(Error::SingularState(format!("g[{i}] = {} is not positive", g[i]))),
        None => Ok(()),
    }
}

/// Warped-product equations written through `L̇_i`.
pub fn rhs_warped(state: &PhysicalState, model: &OrbitModel) -> Result<PhysicalRate> {
    let OrbitKind::WarpedProduct(factors) = &model.kind else {
        return Err(Error::ModelMismatch("rhs_warped needs a warped product".into()));
    };
    check_positive(&state.g)?;
    let eps = model.epsilon;
    let l: Vec<f64> = state.g.iter().zip(&state.gdot).map(|(g, gd)| gd / g).collect();
    let tr_l: f64 = factors.iter().zip(&l).map(|(f, l)| f.dim as f64 * l).sum();
    let gddot = factors
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let r = f.einstein_const / (state.g[i] * state.g[i]);
            let ldot = r - tr_l * l[i] + state.udot * l[i] + 0.5 * eps;
            state.g[i] * (ldot + l[i] * l[i])
        })
        .collect();
    Ok(PhysicalRate {
        g: state.gdot.clone(),
        gdot: gddot,
        u: state.udot,
        udot: model.c + eps * state.u + state.udot * state.udot - tr_l * state.udot,
    })
}

/// The six first-order equations for `(z₁, …, z₆)`.
pub fn rhs_two_summand(z: [f64; 6], model: &OrbitModel) -> Result<[f64; 6]> {
    let OrbitKind::TwoSummand { d1, d2, a2, a3 } = model.kind else {
        return Err(Error::ModelMismatch("rhs_two_summand needs a two-summand model".into()));
    };
    check_positive(&[z[0], z[2]])?;
    let (d1, d2) = (d1 as f64, d2 as f64);
    let eps = model.epsilon;
    let [z1, z2, z3, z4, z5, z6] = z;
    Ok([
        z2,
        -(d1 - 1.0) * z2 * z2 / z1 - d2 * z2 * z4 / z3 + z2 * z6 + (d1 - 1.0) / z1 + (a3 / d1) * z1.powi(3) / z3.powi(4)
            + 0.5 * eps * z1,
        z4,
        -d1 * z2 * z4 / z1 - (d2 - 1.0) * z4 * z4 / z3 + z4 * z6 + (a2 / d2) / z3 - 2.0 * (a3 / d2) * z1 * z1 / z3.powi(3)
            + 0.5 * eps * z3,
        z6,
        -z6 * (d1 * z2 / z1 + d2 * z4 / z3) + z6 * z6 + eps * z5 + model.c,
    ])
}

pub fn conserved(state: &PhysicalState, model: &OrbitModel) -> ConservedSet {
    let sys = PhysicalSystem::new(model);
    sys.conserved_vec(&sys.to_vector(state))
}

/// `X_i = √d_i L_i / ξ`, `Y_i = √d_i / (ξ g_i)`, `W = 1/ξ`. The returned `s`
/// is 0.
pub fn phase_from_physical(state: &PhysicalState, model: &OrbitModel) -> Result<PhaseState> {
    check_positive(&state.g)?;
    let sd: Vec<f64> = model.dims().iter().map(|&d| (d as f64).sqrt()).collect();
    let tr_l: f64 = model.dims().iter().zip(state.g.iter().zip(&state.gdot)).map(|(&d, (g, gd))| d as f64 * gd / g).sum();
    let xi = -state.udot + tr_l;
    if xi == 0.0 || !xi.is_finite() {
        return Err(Error::CoordinateBreakdown(format!("xi = {xi}")));
    }
    Ok(PhaseState {
        x: (0..sd.len()).map(|i| sd[i] * state.gdot[i] / (state.g[i] * xi)).collect(),
        y: (0..sd.len()).map(|i| sd[i] / (xi * state.g[i])).collect(),
        w: 1.0 / xi,
        s: 0.0,
    })
}
