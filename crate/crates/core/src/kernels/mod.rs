//! Interaction kernels `K: R^N -> [0, ∞)`.
//!
//! A [`KernelSpec`] is a symbolic kernel (family, dimension, optional cap
//! `min(K, 1/ε)`); [`KernelSpec::tabulate`] turns it into a [`KernelTable`]
//! of cell-pair averages on the offset lattice of a grid.

mod audit;
mod quadrature;
mod rearrange;
mod table;

pub use audit::{
    check_condition_pos, check_integrability, check_lower_bound, check_positive_definite,
    ConditionPosReport, ConditionPosSample, IntegrabilityReport, LowerBound, PositiveDefiniteReport,
};
pub use quadrature::lens_volume;
pub use rearrange::rearrange_kernel;
pub use table::{KernelTable, L1Norm, Tail, TabulateOptions};

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;

use serde::Serialize;
use statrs::function::gamma::{gamma, gamma_ur};

use crate::error::{Error, Result};
use crate::grid::{norm, Field, GridSpec};

/// Norm `|·|_B` used by the anisotropic fractional family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Anisotropy {
    /// `p`-norm with `p ∈ [1, ∞]` (`f64::INFINITY` for the max norm).
    PNorm(f64),
    /// `sqrt(xᵀ A x)` for a symmetric positive-definite `A`, row-major `N×N`.
    Matrix(Vec<f64>),
}

impl Anisotropy {
    fn norm(&self, x: &[f64]) -> f64 {
        match self {
            Anisotropy::PNorm(p) if p.is_infinite() => x.iter().fold(0.0, |m, v| m.max(v.abs())),
            Anisotropy::PNorm(p) if *p == 1.0 => x.iter().map(|v| v.abs()).sum(),
            Anisotropy::PNorm(p) => x.iter().map(|v| v.abs().powf(*p)).sum::<f64>().powf(1.0 / p),
            Anisotropy::Matrix(a) => {
                let n = x.len();
                let mut q = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        q += x[i] * a[i * n + j] * x[j];
                    }
                }
                q.max(0.0).sqrt()
            }
        }
    }

    /// Volume of the unit ball `{|x|_B ≤ 1}` in `R^dim`.
    fn unit_ball_volume(&self, dim: usize) -> f64 {
        let d = dim as f64;
        match self {
            Anisotropy::PNorm(p) if p.is_infinite() => 2f64.powi(dim as i32),
            Anisotropy::PNorm(p) => (2.0 * gamma(1.0 + 1.0 / p)).powi(dim as i32) / gamma(1.0 + d / p),
            Anisotropy::Matrix(a) => ball_volume(dim) / determinant(a, dim).sqrt(),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Anisotropy::PNorm(p) if *p >= 1.0 => Ok(()),
            Anisotropy::PNorm(p) => Err(Error::domain(format!("p-norm exponent {p} < 1"))),
            Anisotropy::Matrix(a) => {
                if a.len() != dim * dim {
                    return Err(Error::domain(format!(
                        "anisotropy matrix has {} entries, expected {}",
                        a.len(),
                        dim * dim
                    )));
                }
                for i in 0..dim {
                    for j in 0..i {
                        if (a[i * dim + j] - a[j * dim + i]).abs() > 1e-12 * a[i * dim + j].abs().max(1.0) {
                            return Err(Error::domain("anisotropy matrix is not symmetric"));
                        }
                    }
                }
                // Sylvester: leading minors positive.
                for k in 1..=dim {
                    let minor: Vec<f64> = (0..k)
                        .flat_map(|i| (0..k).map(move |j| (i, j)))
                        .map(|(i, j)| a[i * dim + j])
                        .collect();
                    if determinant(&minor, k) <= 0.0 {
                        return Err(Error::domain("anisotropy matrix is not positive definite"));
                    }
                }
                Ok(())
            }
        }
    }
}

fn determinant(a: &[f64], n: usize) -> f64 {
    match n {
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        3 => {
            a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6])
                + a[2] * (a[3] * a[7] - a[4] * a[6])
        }
        _ => unreachable!("dimension <= 3"),
    }
}

/// Built-in bounded modulations `a(x) ∈ [λ, Λ]` for the heterogeneous family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Modulation {
    /// `λ + (Λ-λ) (x₁/|x|)²`, depends on direction only.
    Angular,
    /// `λ + (Λ-λ) ((1 + x₁/|x|)/2)²`, direction only and not even in `x`.
    Skew,
    /// `λ + (Λ-λ) / (1 + |x|²)`.
    RadialDecay,
}

impl Modulation {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "angular" => Some(Self::Angular),
            "skew" => Some(Self::Skew),
            "radial_decay" => Some(Self::RadialDecay),
            _ => None,
        }
    }

    fn weight(&self, x: &[f64], r: f64) -> f64 {
        match self {
            Modulation::Angular => (x[0] / r).powi(2),
            Modulation::Skew => (0.5 * (1.0 + x[0] / r)).powi(2),
            Modulation::RadialDecay => 1.0 / (1.0 + r * r),
        }
    }

    fn is_homogeneous(&self) -> bool {
        !matches!(self, Modulation::RadialDecay)
    }
}

#[derive(Debug, Clone)]
pub enum Family {
    /// `|x|^{-N-s}`.
    Fractional { s: f64 },
    /// `|x|_B^{-N-s}`.
    AnisotropicFractional { s: f64, norm: Anisotropy },
    /// `a(x) |x|^{-N-s}` with `λ ≤ a ≤ Λ`.
    HeterogeneousFractional {
        s: f64,
        lambda: f64,
        upper: f64,
        modulation: Modulation,
    },
    /// `exp(-|x|²/σ²)`.
    Gaussian { sigma: f64 },
    /// `μ χ_{|x| < r}`.
    BallIndicator { mu: f64, r: f64 },
    /// `μ χ_{r_in ≤ |x| ≤ r_out}`.
    AnnulusIndicator { mu: f64, inner: f64, outer: f64 },
    /// Piecewise-constant lookup in a grid dump (zero outside its box),
    /// optionally plus `|x|^{-N-t}`.
    Tabulated {
        data: Arc<Field>,
        path: Option<PathBuf>,
        singular_order: Option<f64>,
    },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Fractional { .. } => "fractional",
            Family::AnisotropicFractional { .. } => "anisotropic_fractional",
            Family::HeterogeneousFractional { .. } => "heterogeneous_fractional",
            Family::Gaussian { .. } => "gaussian",
            Family::BallIndicator { .. } => "ball_indicator",
            Family::AnnulusIndicator { .. } => "annulus_indicator",
            Family::Tabulated { .. } => "tabulated",
        }
    }
}

#[derive(Debug, Clone)]
pub struct KernelSpec {
    family: Family,
    dim: usize,
    cap: Option<f64>,
}

fn check_s(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "fractional exponent s = {s} outside the admissible range: kernels |x|^(-N-s) are defined for s ∈ (0,1)"
        )))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} = {v} must be positive")))
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if (1..=3).contains(&dim) {
        Ok(())
    } else {
        Err(Error::domain(format!("kernel dimension {dim} not in 1..=3")))
    }
}

impl KernelSpec {
    pub fn new(family: Family, dim: usize) -> Result<Self> {
        let spec = Self {
            family,
            dim,
            cap: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn fractional(dim: usize, s: f64) -> Result<Self> {
        Self::new(Family::Fractional { s }, dim)
    }

    pub fn anisotropic_fractional(dim: usize, s: f64, norm: Anisotropy) -> Result<Self> {
        Self::new(Family::AnisotropicFractional { s, norm }, dim)
    }

    pub fn heterogeneous_fractional(
        dim: usize,
        s: f64,
        lambda: f64,
        upper: f64,
        modulation: Modulation,
    ) -> Result<Self> {
        Self::new(
            Family::HeterogeneousFractional {
                s,
                lambda,
                upper,
                modulation,
            },
            dim,
        )
    }

    pub fn gaussian(dim: usize, sigma: f64) -> Result<Self> {
        Self::new(Family::Gaussian { sigma }, dim)
    }

    pub fn ball_indicator(dim: usize, mu: f64, r: f64) -> Result<Self> {
        Self::new(Family::BallIndicator { mu, r }, dim)
    }

    pub fn annulus_indicator(dim: usize, mu: f64, inner: f64, outer: f64) -> Result<Self> {
        Self::new(Family::AnnulusIndicator { mu, inner, outer }, dim)
    }

    pub fn tabulated(data: Field, path: Option<PathBuf>, singular_order: Option<f64>) -> Result<Self> {
        let dim = data.grid().dim();
        Self::new(
            Family::Tabulated {
                data: Arc::new(data),
                path,
                singular_order,
            },
            dim,
        )
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.dim)?;
        match &self.family {
            Family::Fractional { s } => check_s(*s)?,
            Family::AnisotropicFractional { s, norm } => {
                check_s(*s)?;
                norm.validate(self.dim)?;
            }
            Family::HeterogeneousFractional {
                s, lambda, upper, ..
            } => {
                check_s(*s)?;
                check_positive("lambda", *lambda)?;
                check_positive("Lambda", *upper)?;
                if lambda > upper {
                    return Err(Error::domain(format!("lambda = {lambda} > Lambda = {upper}")));
                }
            }
            Family::Gaussian { sigma } => check_positive("sigma", *sigma)?,
            Family::BallIndicator { mu, r } => {
                check_positive("mu", *mu)?;
                check_positive("r", *r)?;
            }
            Family::AnnulusIndicator { mu, inner, outer } => {
                check_positive("mu", *mu)?;
                check_positive("inner radius", *inner)?;
                if outer <= inner {
                    return Err(Error::domain("annulus outer radius must exceed inner radius"));
                }
            }
            Family::Tabulated {
                data,
                singular_order,
                ..
            } => {
                if data.grid().dim() != self.dim {
                    return Err(Error::domain("tabulated kernel dimension mismatch"));
                }
                if data.min() < 0.0 {
                    return Err(Error::domain("tabulated kernel has negative values"));
                }
                if let Some(t) = singular_order {
                    check_positive("singular_order", *t)?;
                }
            }
        }
        if let Some(c) = self.cap {
            check_positive("cap", c)?;
        }
        Ok(())
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Upper cap `1/ε` installed by [`KernelSpec::truncate`].
    pub fn cap(&self) -> Option<f64> {
        self.cap
    }

    /// Short human-readable identifier.
    pub fn label(&self) -> String {
        let base = match &self.family {
            Family::Fractional { s } => format!("fractional(N={}, s={s})", self.dim),
            Family::AnisotropicFractional { s, norm } => {
                format!("anisotropic_fractional(N={}, s={s}, {norm:?})", self.dim)
            }
            Family::HeterogeneousFractional {
                s,
                lambda,
                upper,
                modulation,
            } => format!(
                "heterogeneous_fractional(N={}, s={s}, λ={lambda}, Λ={upper}, {modulation:?})",
                self.dim
            ),
            Family::Gaussian { sigma } => format!("gaussian(N={}, σ={sigma})", self.dim),
            Family::BallIndicator { mu, r } => format!("ball_indicator(N={}, μ={mu}, r={r})", self.dim),
            Family::AnnulusIndicator { mu, inner, outer } => {
                format!("annulus_indicator(N={}, μ={mu}, {inner}..{outer})", self.dim)
            }
            Family::Tabulated {
                path,
                singular_order,
                ..
            } => format!(
                "tabulated(N={}, path={:?}, singular_order={singular_order:?})",
                self.dim, path
            ),
        };
        match self.cap {
            Some(c) => format!("{base} ∧ {c}"),
            None => base,
        }
    }

    /// Kernel `min(K, 1/ε)`. Caps compose by taking the smaller one.
    pub fn truncate(&self, eps: f64) -> Result<Self> {
        check_positive("eps", eps)?;
        let cap = 1.0 / eps;
        Ok(Self {
            family: self.family.clone(),
            dim: self.dim,
            cap: Some(self.cap.map_or(cap, |c| c.min(cap))),
        })
    }

    /// Uncapped family blows up at the origin like `|x|^{-N-s}`.
    fn family_is_singular(&self) -> bool {
        match &self.family {
            Family::Fractional { .. }
            | Family::AnisotropicFractional { .. }
            | Family::HeterogeneousFractional { .. } => true,
            Family::Tabulated { singular_order, .. } => singular_order.is_some(),
            _ => false,
        }
    }

    /// Singular at the origin (after capping).
    pub fn is_singular(&self) -> bool {
        self.cap.is_none() && self.family_is_singular()
    }

    /// `K ∈ L¹(R^N)`. Every family decays integrably at infinity, so this
    /// only fails for uncapped singular kernels.
    pub fn is_integrable(&self) -> bool {
        !self.is_singular()
    }

    /// Homogeneity exponent `-(N+s)` for the families where `K(tx) = t^{-N-s} K(x)`.
    fn homogeneous_order(&self) -> Option<f64> {
        match &self.family {
            Family::Fractional { s } | Family::AnisotropicFractional { s, .. } => Some(*s),
            Family::HeterogeneousFractional { s, modulation, .. } if modulation.is_homogeneous() => Some(*s),
            _ => None,
        }
    }

    /// Closed-form answer to `min(|x|,1) K ∈ L¹`, when the family determines it.
    pub fn condition_int_analytic(&self) -> Option<bool> {
        match &self.family {
            Family::Tabulated { singular_order, .. } => match (singular_order, self.cap) {
                (Some(t), None) => Some(*t < 1.0),
                _ => Some(true),
            },
            // s ∈ (0,1) is enforced by validation.
            _ => Some(true),
        }
    }

    /// Raw (unsymmetrized, uncapped) value; `+∞` at the origin for singular families.
    fn raw(&self, x: &[f64]) -> f64 {
        let n = self.dim as f64;
        match &self.family {
            Family::Fractional { s } => norm(x).powf(-n - s),
            Family::AnisotropicFractional { s, norm: b } => b.norm(x).powf(-n - s),
            Family::HeterogeneousFractional {
                s,
                lambda,
                upper,
                modulation,
            } => {
                let r = norm(x);
                if r == 0.0 {
                    return f64::INFINITY;
                }
                (lambda + (upper - lambda) * modulation.weight(x, r)) * r.powf(-n - s)
            }
            Family::Gaussian { sigma } => (-x.iter().map(|v| v * v).sum::<f64>() / (sigma * sigma)).exp(),
            Family::BallIndicator { mu, r } => {
                if norm(x) < *r {
                    *mu
                } else {
                    0.0
                }
            }
            Family::AnnulusIndicator { mu, inner, outer } => {
                let d = norm(x);
                if d >= *inner && d <= *outer {
                    *mu
                } else {
                    0.0
                }
            }
            Family::Tabulated {
                data,
                singular_order,
                ..
            } => {
                let mut v = lookup_cell(data, x);
                if let Some(t) = singular_order {
                    v += norm(x).powf(-n - t);
                }
                v
            }
        }
    }

    /// Symmetrized, capped value. Infallible; `+∞` at the origin for singular kernels.
    pub(crate) fn value(&self, x: &[f64]) -> f64 {
        let mut neg = [0.0; 3];
        for (a, v) in x.iter().enumerate() {
            neg[a] = -v;
        }
        let sym = 0.5 * (self.raw(x) + self.raw(&neg[..x.len()]));
        match self.cap {
            Some(c) => sym.min(c),
            None => sym,
        }
    }

    /// Pointwise value of the symmetrized kernel `(K(x) + K(-x))/2`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::domain(format!(
                "point has {} coordinates, kernel dimension is {}",
                x.len(),
                self.dim
            )));
        }
        if self.is_singular() && x.iter().all(|&v| v == 0.0) {
            return Err(Error::domain(format!(
                "{} kernel is singular at the origin",
                self.family.name()
            )));
        }
        Ok(self.value(x))
    }

    /// `‖K‖_{L¹(R^N)}` in closed form, when available.
    pub fn l1_norm_analytic(&self) -> Option<L1Norm> {
        if self.is_singular() {
            return Some(L1Norm::Infinite);
        }
        let n = self.dim;
        let d = n as f64;
        let cap = self.cap.unwrap_or(f64::INFINITY);
        let value = match &self.family {
            Family::Gaussian { sigma } => {
                let full = (sigma * PI.sqrt()).powi(n as i32);
                if cap >= 1.0 {
                    full
                } else {
                    // cap on the ball where exp(-r²/σ²) > cap, gaussian outside it
                    let rho2 = sigma * sigma * (1.0 / cap).ln();
                    cap * ball_volume(n) * rho2.powf(d / 2.0) + full * gamma_ur(d / 2.0, rho2 / (sigma * sigma))
                }
            }
            Family::BallIndicator { mu, r } => mu.min(cap) * ball_volume(n) * r.powi(n as i32),
            Family::AnnulusIndicator { mu, inner, outer } => {
                mu.min(cap) * ball_volume(n) * (outer.powi(n as i32) - inner.powi(n as i32))
            }
            Family::Fractional { s } => ball_volume(n) * cap.powf(s / (d + s)) * (1.0 + d / s),
            Family::AnisotropicFractional { s, norm } => {
                norm.unit_ball_volume(n) * cap.powf(s / (d + s)) * (1.0 + d / s)
            }
            _ => return None,
        };
        Some(L1Norm::Finite(value))
    }

    /// `∫ K` outside the cube `[-R, R]^N`, and whether the value is closed-form.
    pub(crate) fn tail_outside_cube(&self, half_width: f64) -> Tail {
        let n = self.dim;
        match &self.family {
            Family::Gaussian { sigma } if self.cap.is_none_or(|c| c >= 1.0 || self.cap_radius() <= half_width) => {
                let total = (sigma * PI.sqrt()).powi(n as i32);
                let inside = (sigma * PI.sqrt() * libm::erf(half_width / sigma)).powi(n as i32);
                Tail {
                    value: (total - inside).max(0.0),
                    analytic: true,
                }
            }
            Family::BallIndicator { r, .. } if *r <= half_width => Tail {
                value: 0.0,
                analytic: true,
            },
            Family::AnnulusIndicator { outer, .. } if *outer <= half_width => Tail {
                value: 0.0,
                analytic: true,
            },
            _ => match self.homogeneous_order() {
                Some(s) if self.cap.is_none_or(|c| self.cap_radius_upper(c) <= half_width) => {
                    // outside the cube, x = tRp with p on the unit cube surface and t ≥ 1
                    let face: f64 = quadrature::cube_surface_rule(n)
                        .iter()
                        .map(|(p, w)| w * self.raw(&p[..n]))
                        .sum();
                    Tail {
                        value: half_width.powf(-s) / s * face,
                        analytic: matches!(self.family, Family::Fractional { .. } | Family::AnisotropicFractional { .. }),
                    }
                }
                _ => Tail {
                    value: quadrature::cone_tail(|x| self.value(x), n, half_width),
                    analytic: false,
                },
            },
        }
    }

    /// Radius of the region where the gaussian exceeds its cap.
    fn cap_radius(&self) -> f64 {
        match (&self.family, self.cap) {
            (Family::Gaussian { sigma }, Some(c)) if c < 1.0 => sigma * (1.0 / c).ln().sqrt(),
            _ => 0.0,
        }
    }

    /// Upper bound on the Euclidean radius where a homogeneous kernel exceeds `cap`.
    fn cap_radius_upper(&self, cap: f64) -> f64 {
        let n = self.dim;
        let s = self.homogeneous_order().unwrap_or(0.0);
        let peak = quadrature::sphere_rule(n)
            .iter()
            .map(|(theta, _)| self.raw(&theta[..n]))
            .fold(0.0, f64::max);
        (peak / cap).powf(1.0 / (n as f64 + s))
    }

    /// Closed-form cell-pair average at offset `z`, when the family has one.
    ///
    /// Uncapped gaussian: product over axes of the tent average
    /// `(G(z+h) - 2G(z) + G(z-h)) / h²` with `G'' = exp(-t²/σ²)`.
    pub(crate) fn pair_average_closed(&self, z: &[f64], h: f64) -> Option<f64> {
        match (&self.family, self.cap) {
            (Family::Gaussian { sigma }, cap) if cap.is_none_or(|c| c >= 1.0) => {
                let s = *sigma;
                let g = |t: f64| {
                    -0.5 * s * PI.sqrt() * t * libm::erfc(t / s) + 0.5 * s * s * (-(t * t) / (s * s)).exp()
                };
                Some(
                    z.iter()
                        .map(|&za| {
                            let za = za.abs();
                            ((g(za + h) - 2.0 * g(za) + g(za - h)) / (h * h)).max(0.0)
                        })
                        .product(),
                )
            }
            _ => None,
        }
    }

    /// Radii where the kernel jumps.
    pub(crate) fn jump_radii(&self) -> Vec<f64> {
        match &self.family {
            Family::BallIndicator { r, .. } => vec![*r],
            Family::AnnulusIndicator { inner, outer, .. } => vec![*inner, *outer],
            _ => Vec::new(),
        }
    }

    /// Tabulate cell-pair averages on the offset lattice of `grid`.
    pub fn tabulate(&self, grid: &GridSpec) -> Result<KernelTable> {
        self.tabulate_with(grid, &TabulateOptions::default())
    }

    pub fn tabulate_with(&self, grid: &GridSpec, opts: &TabulateOptions) -> Result<KernelTable> {
        table::tabulate(self, grid, opts)
    }

    pub(crate) fn homogeneous_l1_capped(&self) -> Option<f64> {
        // ∫ min(c, A(θ) r^{-N-s}) = c^{s/(N+s)} (1/N + 1/s) ∫_S A^{N/(N+s)} dθ
        let s = self.homogeneous_order()?;
        let c = self.cap?;
        let n = self.dim;
        let d = n as f64;
        let ang: f64 = quadrature::sphere_rule(n)
            .iter()
            .map(|(theta, w)| w * self.raw(&theta[..n]).powf(d / (d + s)))
            .sum();
        Some(c.powf(s / (d + s)) * (1.0 / d + 1.0 / s) * ang)
    }
}

/// Volume `ω_N` of the Euclidean unit ball.
pub fn ball_volume(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => PI.powf(dim as f64 / 2.0) / gamma(dim as f64 / 2.0 + 1.0),
    }
}

fn lookup_cell(data: &Field, x: &[f64]) -> f64 {
    let g = data.grid();
    let n = g.n() as i64;
    let mut idx = 0usize;
    for &xa in x.iter().take(g.dim()) {
        let i = (xa / g.h() + 0.5 * n as f64).floor() as i64;
        if !(0..n).contains(&i) {
            return 0.0;
        }
        idx = idx * g.n() + i as usize;
    }
    data.values()[idx]
}
