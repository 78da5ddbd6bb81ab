//! Orbit geometry and soliton parameters.
//!
//! An [`OrbitModel`] describes the principal orbit of a cohomogeneity-one
//! metric `dt² + Σ g_i(t)² h_i` together with the expansion constant `ε` and
//! the constant `C` of the conservation law. Two families are supported:
//! multiple warped products over Einstein factors, and the two-summand
//! sphere bundles over quaternionic projective space.

use std::fmt;

use sha2::{Digest, Sha256};

/// One Einstein factor `(M_i, h_i)` of a multiple warped product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpedFactor {
    pub dim: usize,
    pub einstein_const: f64,
}

impl WarpedFactor {
    pub fn new(dim: usize, einstein_const: f64) -> Self {
        Self { dim, einstein_const }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OrbitKind {
    WarpedProduct(Vec<WarpedFactor>),
    /// Two inequivalent isotropy summands of dimensions `d1` (the sphere
    /// fibre) and `d2` (the base), with scalar-curvature constants `A₂, A₃`.
    TwoSummand { d1: usize, d2: usize, a2: f64, a3: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitModel {
    pub kind: OrbitKind,
    pub epsilon: f64,
    pub c: f64,
    /// Dimension of the sphere collapsing at `t = 0` (0 when nothing collapses).
    pub k: usize,
}

/// How the additive freedom in the potential is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolitonNormalization {
    /// `u(0) = 0`, `C` free.
    PotentialZeroAtOrigin,
    /// `C = 0`, `u(0)` free.
    #[default]
    CZero,
}

impl SolitonNormalization {
    /// Returns `(offset, C̃)` such that `ũ = u − offset` vanishes at the
    /// singular orbit and `C̃ = C + ε·u(0)` is the matching constant.
    pub fn shift(&self, model: &OrbitModel, u_at_origin: f64) -> (f64, f64) {
        match self {
            SolitonNormalization::PotentialZeroAtOrigin => (0.0, model.c + model.epsilon * u_at_origin),
            SolitonNormalization::CZero => (u_at_origin, model.c + model.epsilon * u_at_origin),
        }
    }
}

/// A failed model invariant. Violations are data, not errors.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonPositiveEpsilon(f64),
    NoFactors,
    ZeroDimension { factor: usize },
    NegativeEinsteinConstant { factor: usize, value: f64 },
    FlatFactorOfHigherDimension { factor: usize, dim: usize },
    DimensionTooSmall { n: usize, min: usize },
    CollapsingFactorMismatch(String),
    NonPositiveConstant { name: &'static str, value: f64 },
    EnergyNonNegative { value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositiveEpsilon(e) => write!(f, "epsilon must be positive (got {e})"),
            Violation::NoFactors => write!(f, "warped product needs at least one factor"),
            Violation::ZeroDimension { factor } => write!(f, "factor {factor} has dimension 0"),
            Violation::NegativeEinsteinConstant { factor, value } => {
                write!(f, "factor {factor} has negative Einstein constant {value}")
            }
            Violation::FlatFactorOfHigherDimension { factor, dim } => {
                write!(f, "factor {factor} is flat but has dimension {dim} (only circles may be flat)")
            }
            Violation::DimensionTooSmall { n, min } => write!(f, "total dimension {n} below {min}"),
            Violation::CollapsingFactorMismatch(msg) => write!(f, "collapsing factor: {msg}"),
            Violation::NonPositiveConstant { name, value } => write!(f, "{name} must be positive (got {value})"),
            Violation::EnergyNonNegative { value } => {
                write!(f, "E(0) = C + eps*u(0) = {value} is not negative")
            }
        }
    }
}

impl Violation {
    /// Short machine-readable tag.
    pub fn tag(&self) -> &'static str {
        match self {
            Violation::NonPositiveEpsilon(_) => "epsilon-nonpositive",
            Violation::NoFactors => "no-factors",
            Violation::ZeroDimension { .. } => "zero-dimension",
            Violation::NegativeEinsteinConstant { .. } => "negative-einstein-constant",
            Violation::FlatFactorOfHigherDimension { .. } => "flat-factor-dimension",
            Violation::DimensionTooSmall { .. } => "dimension-too-small",
            Violation::CollapsingFactorMismatch(_) => "collapsing-factor",
            Violation::NonPositiveConstant { .. } => "nonpositive-constant",
            Violation::EnergyNonNegative { .. } => "E-nonnegative",
        }
    }
}

/// Names accepted by [`OrbitModel::preset`].
pub const PRESET_NAMES: &[&str] = &[
    "example1-m1",
    "example1-m2",
    "example1-m3",
    "example1-m4",
    "example2-m1",
    "example2-m2",
    "example2-m3",
    "example2-m4",
    "circle-sphere",
];

impl OrbitModel {
    pub fn warped(factors: Vec<WarpedFactor>, epsilon: f64, c: f64, k: usize) -> Self {
        Self { kind: OrbitKind::WarpedProduct(factors), epsilon, c, k }
    }

    /// Warped product with a collapsing circle as first factor.
    pub fn circle_bundle(dims_rest: &[usize], lambdas_rest: &[f64], epsilon: f64, c: f64) -> Self {
        let mut factors = vec![WarpedFactor::new(1, 0.0)];
        factors.extend(dims_rest.iter().zip(lambdas_rest).map(|(&d, &l)| WarpedFactor::new(d, l)));
        Self::warped(factors, epsilon, c, 1)
    }

    pub fn two_summand(d1: usize, d2: usize, a2: f64, a3: f64, epsilon: f64, c: f64) -> Self {
        Self { kind: OrbitKind::TwoSummand { d1, d2, a2, a3 }, epsilon, c, k: d1 }
    }

    /// Twistor fibration `CP^{2m+1} → HP^m`: `d₁ = 2`, `d₂ = 4m`.
    pub fn example1(m: usize) -> Self {
        let mf = m as f64;
        Self::two_summand(2, 4 * m, 2.0 * mf * (mf + 2.0), mf / 2.0, 1.0, 0.0)
    }

    /// `Sp(1)` bundle `S^{4m+3} → HP^m`: `d₁ = 3`, `d₂ = 4m`.
    pub fn example2(m: usize) -> Self {
        let mf = m as f64;
        Self::two_summand(3, 4 * m, 4.0 * mf * (mf + 2.0), 3.0 * mf / 4.0, 1.0, 0.0)
    }

    pub fn preset(name: &str) -> Option<Self> {
        let (family, m) = match name {
            "circle-sphere" => return Some(Self::circle_bundle(&[2], &[1.0], 1.0, 0.0)),
            _ => name.split_once("-m")?,
        };
        let m: usize = m.parse().ok().filter(|m| (1..=4).contains(m))?;
        match family {
            "example1" => Some(Self::example1(m)),
            "example2" => Some(Self::example2(m)),
            _ => None,
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        match &self.kind {
            OrbitKind::WarpedProduct(fs) => fs.iter().map(|f| f.dim).collect(),
            OrbitKind::TwoSummand { d1, d2, .. } => vec![*d1, *d2],
        }
    }

    pub fn factor_count(&self) -> usize {
        match &self.kind {
            OrbitKind::WarpedProduct(fs) => fs.len(),
            OrbitKind::TwoSummand { .. } => 2,
        }
    }

    /// Hypersurface dimension `n`.
    pub fn total_dim(&self) -> usize {
        self.dims().iter().sum()
    }

    pub fn is_warped(&self) -> bool {
        matches!(self.kind, OrbitKind::WarpedProduct(_))
    }

    /// Einstein constants of a warped product.
    pub fn einstein_constants(&self) -> Option<Vec<f64>> {
        match &self.kind {
            OrbitKind::WarpedProduct(fs) => Some(fs.iter().map(|f| f.einstein_const).collect()),
            OrbitKind::TwoSummand { .. } => None,
        }
    }

    /// Index of the factor that collapses at the singular orbit.
    pub fn collapsing_factor(&self) -> Option<usize> {
        (self.k > 0).then_some(0)
    }

    /// Ricci eigenvalues `r_i(g)` on each summand.
    pub fn ricci(&self, g: &[f64]) -> Vec<f64> {
        let mut r = self.ricci_regular(g);
        if let Some(i) = self.collapsing_factor() {
            let d = self.dims()[i] as f64;
            r[i] += (d - 1.0) / (g[i] * g[i]);
        }
        r
    }

    /// Ricci eigenvalues with the round-sphere term `(d−1)/g²` of the
    /// collapsing factor removed, computed without cancellation.
    pub fn ricci_regular(&self, g: &[f64]) -> Vec<f64> {
        let collapse = self.collapsing_factor();
        match &self.kind {
            OrbitKind::WarpedProduct(fs) => fs
                .iter()
                .enumerate()
                .map(|(i, f)| {
                    let lambda = if collapse == Some(i) {
                        f.einstein_const - (f.dim as f64 - 1.0)
                    } else {
                        f.einstein_const
                    };
                    lambda / (g[i] * g[i])
                })
                .collect(),
            OrbitKind::TwoSummand { d1, d2, a2, a3 } => {
                let (d1f, d2f) = (*d1 as f64, *d2 as f64);
                let (z1, z3) = (g[0], g[1]);
                let z3sq = z3 * z3;
                let mixed = z1 * z1 / (z3sq * z3sq);
                let mut r1 = (a3 / d1f) * mixed;
                if collapse.is_none() {
                    r1 += (d1f - 1.0) / (z1 * z1);
                }
                let r2 = (a2 / d2f) / z3sq - 2.0 * (a3 / d2f) * mixed;
                vec![r1, r2]
            }
        }
    }

    /// Scalar curvature `S = Σ d_i r_i` of the principal orbit.
    pub fn scalar_curvature(&self, g: &[f64]) -> f64 {
        self.dims().iter().zip(self.ricci(g)).map(|(&d, r)| d as f64 * r).sum()
    }

    /// Checks every model invariant plus `E(0) = C + ε·u0 < 0`.
    pub fn validate(&self, u0: f64) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.epsilon > 0.0) {
            out.push(Violation::NonPositiveEpsilon(self.epsilon));
        }
        match &self.kind {
            OrbitKind::WarpedProduct(fs) => {
                if fs.is_empty() {
                    out.push(Violation::NoFactors);
                }
                for (i, f) in fs.iter().enumerate() {
                    if f.dim == 0 {
                        out.push(Violation::ZeroDimension { factor: i });
                    }
                    if f.einstein_const < 0.0 {
                        out.push(Violation::NegativeEinsteinConstant { factor: i, value: f.einstein_const });
                    }
                    if f.einstein_const == 0.0 && f.dim > 1 {
                        out.push(Violation::FlatFactorOfHigherDimension { factor: i, dim: f.dim });
                    }
                }
                let n = self.total_dim();
                let min = if fs.iter().any(|f| f.einstein_const > 0.0) { 3 } else { 2 };
                if !fs.is_empty() && n < min {
                    out.push(Violation::DimensionTooSmall { n, min });
                }
                if self.k > 0 {
                    match fs.first() {
                        Some(f0) if f0.dim != self.k => out.push(Violation::CollapsingFactorMismatch(format!(
                            "k = {} but first factor has dimension {}",
                            self.k, f0.dim
                        ))),
                        Some(f0) if f0.einstein_const != f0.dim as f64 - 1.0 => {
                            out.push(Violation::CollapsingFactorMismatch(format!(
                                "collapsing sphere of dimension {} needs Einstein constant {}, got {}",
                                f0.dim,
                                f0.dim - 1,
                                f0.einstein_const
                            )))
                        }
                        _ => {}
                    }
                    if self.k == 1 {
                        for (i, f) in fs.iter().enumerate().skip(1) {
                            if !(f.einstein_const > 0.0) {
                                out.push(Violation::CollapsingFactorMismatch(format!(
                                    "circle startup needs positive Einstein constants on the other factors (factor {i})"
                                )));
                            }
                        }
                    }
                }
            }
            OrbitKind::TwoSummand { d1, d2, a2, a3 } => {
                if *d1 == 0 {
                    out.push(Violation::ZeroDimension { factor: 0 });
                }
                if *d2 == 0 {
                    out.push(Violation::ZeroDimension { factor: 1 });
                }
                if !(*a2 > 0.0) {
                    out.push(Violation::NonPositiveConstant { name: "A2", value: *a2 });
                }
                if !(*a3 > 0.0) {
                    out.push(Violation::NonPositiveConstant { name: "A3", value: *a3 });
                }
                if self.k != *d1 {
                    out.push(Violation::CollapsingFactorMismatch(format!("k = {} but d1 = {}", self.k, d1)));
                }
            }
        }
        let energy = self.c + self.epsilon * u0;
        if !(energy < 0.0) {
            out.push(Violation::EnergyNonNegative { value: energy });
        }
        out
    }

    /// Stable content hash used for trajectory provenance.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(format!("{self:?}").as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
