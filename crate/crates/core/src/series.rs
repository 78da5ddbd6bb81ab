//! Power-series start at the singular orbit.
//!
//! With `g_1 = t·p(t)`, every equation is multiplied by `t` so that all terms
//! are regular series; the coefficients then follow order by order from
//! small linear solves.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{OrbitKind, OrbitModel};
use crate::physical::{PhysicalState, PhysicalSystem};
use crate::integrator::{integrate, IntegratorConfig, Trajectory, VectorField};

/// Truncated power series arithmetic on coefficient vectors of equal length.
#[derive(Debug, Clone, PartialEq)]
struct Series(Vec<f64>);

impl Series {
    fn constant(len: usize, c: f64) -> Self {
        let mut v = vec![0.0; len];
        v[0] = c;
        Series(v)
    }

    fn len(&self) -> usize {
        self.0.len()
    }

    fn mul(&self, o: &Series) -> Series {
        let n = self.len();
        Series((0..n).map(|i| (0..=i).map(|j| self.0[j] * o.0[i - j]).sum()).collect())
    }

    fn inv(&self) -> Series {
        let n = self.len();
        let mut c = vec![0.0; n];
        c[0] = 1.0 / self.0[0];
        for i in 1..n {
            c[i] = -(1..=i).map(|j| self.0[j] * c[i - j]).sum::<f64>() / self.0[0];
        }
        Series(c)
    }

    fn der(&self) -> Series {
        let n = self.len();
        let mut c = vec![0.0; n];
        for i in 1..n {
            c[i - 1] = i as f64 * self.0[i];
        }
        Series(c)
    }

    /// Multiplication by `t^k`.
    fn shift(&self, k: usize) -> Series {
        let n = self.len();
        let mut c = vec![0.0; n];
        if k < n {
            c[k..].copy_from_slice(&self.0[..n - k]);
        }
        Series(c)
    }

    fn scale(&self, a: f64) -> Series {
        Series(self.0.iter().map(|v| a * v).collect())
    }

    fn add(&self, o: &Series) -> Series {
        Series(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    fn sub(&self, o: &Series) -> Series {
        Series(self.0.iter().zip(&o.0).map(|(a, b)| a - b).collect())
    }

    fn powi(&self, k: usize) -> Series {
        (1..k).fold(self.clone(), |acc, _| acc.mul(self))
    }
}

fn eval_poly(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * t + v)
}

/// Coefficients of `p` (with `g_1 = t·p`), of the remaining `g_i`, and of `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct StartupSeries {
    pub p: Vec<f64>,
    pub g: Vec<Vec<f64>>,
    pub u: Vec<f64>,
    pub order: usize,
    model: OrbitModel,
}

struct Residuals {
    collapse: Series,
    others: Vec<Series>,
    potential: Series,
}

fn residuals(model: &OrbitModel, p: &Series, g: &[Series], u: &Series) -> Residuals {
    let n = p.len();
    let dims: Vec<f64> = model.dims().iter().map(|&d| d as f64).collect();
    let eps = model.epsilon;
    let t = |s: &Series| s.shift(1);

    let g0 = t(p);
    let g0d = g0.der();
    let ip = p.inv();
    let ig: Vec<Series> = g.iter().map(Series::inv).collect();
    let gd: Vec<Series> = g.iter().map(Series::der).collect();
    let ud = u.der();

    // t·trL
    let mut t_trl = g0d.mul(&ip).scale(dims[0]);
    for i in 0..g.len() {
        t_trl = t_trl.add(&t(&gd[i].mul(&ig[i])).scale(dims[i + 1]));
    }

    // t·g_i·r_i, regularised
    let (tgr0, tgr): (Series, Vec<Series>) = match &model.kind {
        OrbitKind::WarpedProduct(fs) => (
            ip.scale(fs[0].einstein_const),
            (0..g.len()).map(|i| t(&ig[i]).scale(fs[i + 1].einstein_const)).collect(),
        ),
        OrbitKind::TwoSummand { d1, d2, a2, a3 } => {
            let (d1, d2) = (*d1 as f64, *d2 as f64);
            let ig2 = &ig[0];
            let r0 = ip.scale(d1 - 1.0).add(&p.powi(3).mul(&ig2.powi(4)).shift(4).scale(a3 / d1));
            let r1 = t(ig2).scale(a2 / d2).sub(&p.powi(2).mul(&ig2.powi(3)).shift(3).scale(2.0 * a3 / d2));
            (r0, vec![r1])
        }
    };

    let accel_term = |gi: &Series, gid: &Series, tgri: &Series, sq_over_g: Series| {
        tgri.sub(&t_trl.mul(gid)).add(&t(&ud.mul(gid))).add(&t(gi).scale(0.5 * eps)).add(&sq_over_g)
    };
    let collapse = t(&g0d.der()).sub(&accel_term(&g0, &g0d, &tgr0, g0d.mul(&g0d).mul(&ip)));
    let others = (0..g.len())
        .map(|i| t(&gd[i].der()).sub(&accel_term(&g[i], &gd[i], &tgr[i], t(&gd[i].mul(&gd[i]).mul(&ig[i])))))
        .collect();
    let rhs_u = t(&Series::constant(n, model.c).add(&u.scale(eps)).add(&ud.mul(&ud))).sub(&t_trl.mul(&ud));
    let potential = t(&ud.der()).sub(&rhs_u);
    Residuals { collapse, others, potential }
}

impl StartupSeries {
    /// Solves for coefficients through `t^order` (`g_1` through `t^(order+1)`).
    pub fn solve(model: &OrbitModel, hbar: &[f64], ubar: f64, order: usize) -> Result<Self> {
        if !(2..=6).contains(&order) {
            return Err(Error::OutOfRange(format!("series order {order} outside [2, 6]")));
        }
        if model.collapsing_factor().is_none() {
            return Err(Error::ModelMismatch("series startup needs a collapsing factor (k > 0)".into()));
        }
        let r = model.factor_count();
        if hbar.len() != r - 1 {
            return Err(Error::InvalidArgument(format!("expected {} initial radii, got {}", r - 1, hbar.len())));
        }
        if hbar.iter().any(|&h| !(h > 0.0 && h.is_finite())) || !ubar.is_finite() {
            return Err(Error::InvalidArgument("initial radii must be positive and finite".into()));
        }
        if let OrbitKind::WarpedProduct(fs) = &model.kind {
            if fs[0].einstein_const != fs[0].dim as f64 - 1.0 {
                return Err(Error::ModelMismatch("collapsing factor must be a round sphere".into()));
            }
        }

        let len = order + 2;
        let mut p = Series::constant(len, 1.0);
        let mut g: Vec<Series> = hbar.iter().map(|&h| Series::constant(len, h)).collect();
        let mut u = Series::constant(len, ubar);
        let m = r + 1;

        for k in 1..=order {
            let eval = |x: &[f64]| -> Vec<f64> {
                let mut pp = p.clone();
                let mut gg = g.clone();
                let mut uu = u.clone();
                pp.0[k] = x[0];
                for i in 0..r - 1 {
                    gg[i].0[k] = x[1 + i];
                }
                uu.0[k] = x[r];
                let res = residuals(model, &pp, &gg, &uu);
                let mut out = vec![res.collapse.0[k]];
                out.extend(res.others.iter().map(|s| s.0[k - 1]));
                out.push(res.potential.0[k - 1]);
                out
            };
            let r0 = eval(&vec![0.0; m]);
            let mut mat = DMatrix::zeros(m, m);
            for j in 0..m {
                let mut e = vec![0.0; m];
                e[j] = 1.0;
                let rj = eval(&e);
                for i in 0..m {
                    mat[(i, j)] = rj[i] - r0[i];
                }
            }
            let rhs = -DVector::from_vec(r0);
            let sol = mat
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::SingularState(format!("series matching singular at order {k}")))?;
            p.0[k] = sol[0];
            for i in 0..r - 1 {
                g[i].0[k] = sol[1 + i];
            }
            u.0[k] = sol[r];
        }

        let trunc = |s: Series| s.0[..=order].to_vec();
        Ok(Self { p: trunc(p), g: g.into_iter().map(trunc).collect(), u: trunc(u), order, model: model.clone() })
    }

    fn collapse_coeffs(&self) -> Vec<f64> {
        std::iter::once(0.0).chain(self.p.iter().copied()).collect()
    }

    fn derivative(c: &[f64]) -> Vec<f64> {
        c.iter().enumerate().skip(1).map(|(i, v)| i as f64 * v).collect()
    }

    pub fn state_at(&self, t: f64) -> PhysicalState {
        let sys = PhysicalSystem::new(&self.model);
        sys.to_state(t, &self.vector_at(t))
    }

    /// Integration vector at `t`; the collapsing velocity deficit `ġ_1 − 1`
    /// is summed directly from its own coefficients.
    pub fn vector_at(&self, t: f64) -> Vec<f64> {
        let g1 = self.collapse_coeffs();
        let mut dg1 = Self::derivative(&g1);
        dg1[0] = 0.0;
        let mut x = vec![eval_poly(&g1, t)];
        x.extend(self.g.iter().map(|c| eval_poly(c, t)));
        x.push(eval_poly(&dg1, t));
        x.extend(self.g.iter().map(|c| eval_poly(&Self::derivative(c), t)));
        x.push(eval_poly(&self.u, t));
        x.push(eval_poly(&Self::derivative(&self.u), t));
        x
    }

    /// Integrates the soliton equations from the series value at `t0`.
    pub fn integrate(&self, t0: f64, config: &IntegratorConfig) -> Trajectory {
        let sys = PhysicalSystem::new(&self.model);
        integrate(&sys, self.vector_at(t0), t0, config, &[])
    }

    pub fn model(&self) -> &OrbitModel {
        &self.model
    }

    /// `ü(0)`.
    pub fn uddot0(&self) -> f64 {
        2.0 * self.u[2]
    }

    /// Largest mismatch between the series' second derivatives and the
    /// equations of motion evaluated on the series at `t`.
    pub fn defect(&self, t: f64) -> f64 {
        let sys = PhysicalSystem::new(&self.model);
        let x = self.vector_at(t);
        let mut f = vec![0.0; x.len()];
        sys.eval(t, &x, &mut f);
        let r = self.g.len() + 1;
        let second = |c: &[f64]| eval_poly(&Self::derivative(&Self::derivative(c)), t);
        let mut worst = (second(&self.collapse_coeffs()) - f[r]).abs();
        for (i, c) in self.g.iter().enumerate() {
            worst = worst.max((second(c) - f[r + 1 + i]).abs());
        }
        worst.max((second(&self.u) - f[2 * r + 1]).abs())
    }
}

/// Series solution with every non-collapsing radius equal to `hbar`,
/// evaluated at `t0`.
pub fn series_startup(model: &OrbitModel, hbar: f64, ubar: f64, order: usize, t0: f64) -> Result<PhysicalState> {
    if !(t0 > 0.0) {
        return Err(Error::InvalidArgument(format!("t0 = {t0} must be positive")));
    }
    let hbars = vec![hbar; model.factor_count().saturating_sub(1)];
    Ok(StartupSeries::solve(model, &hbars, ubar, order)?.state_at(t0))
}
