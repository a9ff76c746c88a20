//! Audits of candidate minimizers: potential bounds, the first-variation
//! condition `V ≥ c` on `{f=1}`, `V ≤ c` on `{f=0}`, `V = c` in between,
//! the second-variation sign, compact support and the Poincaré inequality.
//! Every audit checks a necessary condition only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{convolve, Field, Mode};
use crate::kernels::KernelTable;
use crate::perimeter::{j_functional, quadratic_form, JPath};
use crate::rearrange::{ball_radius, ProfileTable, DEFAULT_C_ISO};
use crate::sum::tree_sum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    /// Cutoff for `S = {f ≥ 1 - tol_f}` and `N = {f ≤ tol_f}`.
    pub tol_f: f64,
    /// Violation tolerance; `1e-4 ‖K‖₁` when unset.
    pub tol_v: Option<f64>,
    /// Second-variation samples.
    pub trials: usize,
    pub seed: u64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            tol_f: 1e-6,
            tol_v: None,
            trials: 32,
            seed: 0,
        }
    }
}

impl CertifyOptions {
    pub fn tol_v_for(&self, k: &KernelTable) -> f64 {
        self.tol_v.unwrap_or(1e-4 * k.scale())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    /// Multiplier estimate.
    pub c: f64,
    pub tol_f: f64,
    pub tol_v: f64,
    pub cells_s: usize,
    pub cells_n: usize,
    pub cells_i: usize,
    /// `max_S (c - V)`, absent when `S` is empty.
    pub viol_s: Option<f64>,
    /// `max_N (V - c)`.
    pub viol_n: Option<f64>,
    /// `max_I |V - c|`.
    pub viol_i: Option<f64>,
    pub support_radius: f64,
    pub box_radius: f64,
    pub sv_max: f64,
    pub sv_vacuous: bool,
    pub passed: bool,
}

impl Certificate {
    /// The pointwise first-variation conditions alone.
    pub fn first_variation_ok(&self) -> bool {
        [self.viol_s, self.viol_n, self.viol_i]
            .iter()
            .all(|v| v.map_or(true, |x| x <= self.tol_v))
    }
}

fn max_of(it: impl Iterator<Item = f64>) -> Option<f64> {
    it.fold(None, |acc, x| Some(acc.map_or(x, |a: f64| a.max(x))))
}

/// First-variation certificate with `c` the mean of `V` over the fractional
/// region, or the midpoint of `[max_N V, min_S V]` when it is empty.
pub fn first_variation_certificate(f: &Field, k: &KernelTable, opts: &CertifyOptions) -> Result<Certificate> {
    f.ensure_density("first_variation_certificate")?;
    if !(f.mass() > 0.0) {
        return Err(Error::domain(
            "certificate needs positive mass; the multiplier is undefined for f ≡ 0",
        ));
    }
    if !(opts.tol_f >= 0.0 && opts.tol_f < 0.5) {
        return Err(Error::domain(format!("tol_f = {} must lie in [0, 0.5)", opts.tol_f)));
    }
    let v = convolve(f, k)?;
    let tol_f = opts.tol_f;
    let (fv, vv) = (f.values(), v.values());
    let class = |i: usize| {
        if fv[i] >= 1.0 - tol_f {
            0
        } else if fv[i] <= tol_f {
            1
        } else {
            2
        }
    };
    let cells = |c: u8| (0..fv.len()).filter(move |&i| class(i) == c);
    let inner: Vec<f64> = cells(2).map(|i| vv[i]).collect();
    let min_s = cells(0).map(|i| vv[i]).fold(None, |a: Option<f64>, x| Some(a.map_or(x, |a| a.min(x))));
    let max_n = max_of(cells(1).map(|i| vv[i]));
    let c = if !inner.is_empty() {
        tree_sum(&inner) / inner.len() as f64
    } else {
        match (min_s, max_n) {
            (Some(a), Some(b)) => 0.5 * (a + b),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => unreachable!("grid is nonempty"),
        }
    };
    let viol_s = max_of(cells(0).map(|i| c - vv[i]));
    let viol_n = max_of(cells(1).map(|i| vv[i] - c));
    let viol_i = max_of(inner.iter().map(|x| (x - c).abs()));
    let sv = second_variation_probe(f, k, opts.trials, opts.seed, tol_f)?;
    let tol_v = opts.tol_v_for(k);
    let support_radius = f.support_radius(tol_f);
    let box_radius = f.grid().half_width();
    let mut cert = Certificate {
        c,
        tol_f,
        tol_v,
        cells_s: cells(0).count(),
        cells_n: cells(1).count(),
        cells_i: inner.len(),
        viol_s,
        viol_n,
        viol_i,
        support_radius,
        box_radius,
        sv_max: sv.sv_max,
        sv_vacuous: sv.vacuous,
        passed: false,
    };
    cert.passed = cert.first_variation_ok() && cert.sv_max <= tol_v && support_radius < box_radius;
    Ok(cert)
}

#[derive(Debug, Clone, Serialize)]
pub struct SecondVariation {
    pub sv_max: f64,
    /// No admissible perturbation: the fractional region is empty.
    pub vacuous: bool,
    pub trials: usize,
}

/// Largest `q(ξ, ξ)` over random `ξ` supported on `{tol_f < f < 1 - tol_f}`
/// with zero mass and `|ξ| ≤ 1`.
pub fn second_variation_probe(f: &Field, k: &KernelTable, trials: usize, seed: u64, tol_f: f64) -> Result<SecondVariation> {
    let grid = *f.grid();
    let support: Vec<usize> = f
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > tol_f && v < 1.0 - tol_f)
        .map(|(i, _)| i)
        .collect();
    if support.is_empty() || trials == 0 {
        return Ok(SecondVariation {
            sv_max: 0.0,
            vacuous: support.is_empty(),
            trials: 0,
        });
    }
    let values = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64));
            let raw: Vec<f64> = support.iter().map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let mean = tree_sum(&raw) / raw.len() as f64;
            let centered: Vec<f64> = raw.iter().map(|x| x - mean).collect();
            let top = centered.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            let scale = if top > 1.0 { 1.0 / top } else { 1.0 };
            let mut xi = vec![0.0; grid.cells()];
            for (&i, x) in support.iter().zip(&centered) {
                xi[i] = x * scale;
            }
            let xi = Field::new(grid, xi)?;
            quadratic_form(&xi, &xi, k)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SecondVariation {
        sv_max: values.into_iter().fold(f64::NEG_INFINITY, f64::max),
        vacuous: false,
        trials,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PotentialAudit {
    pub v_min: f64,
    pub v_max: f64,
    /// `‖K‖ + 1e-10`, with `‖K‖` the table weight.
    pub v_bound: f64,
    pub mass_v: f64,
    /// `m ‖K‖`.
    pub expected_mass: f64,
    /// Allowed `expected_mass - mass_v`: the part of `V` leaving the box.
    pub mass_tol: f64,
    /// Largest `V` on the outermost layer of cells.
    pub shell_max: f64,
    pub bounds_ok: bool,
    pub mass_ok: bool,
}

/// `0 ≤ V ≤ ‖K‖`, `∫V = m‖K‖` up to what leaves the box, and the size of
/// `V` at the box boundary.
pub fn potential_audit(f: &Field, k: &KernelTable) -> Result<PotentialAudit> {
    if !k.is_integrable() {
        return Err(Error::NotIntegrable(format!("potential of kernel {}", k.label())));
    }
    let grid = *f.grid();
    let v = convolve(f, k)?;
    let weight = k.weight();
    let v_bound = weight + 1e-10;
    let m = f.mass();
    let expected_mass = m * weight;
    let mass_v = v.mass();
    let round = 1e-10 * expected_mass.abs().max(1e-300);
    let mass_tol = match grid.mode() {
        Mode::Periodic => round,
        Mode::Free => {
            let half = grid.half_width();
            let reach = f
                .values()
                .iter()
                .enumerate()
                .filter(|(_, &x)| x != 0.0)
                .map(|(i, _)| {
                    let c = grid.center(i);
                    half - c[..grid.dim()].iter().fold(0.0f64, |a, x| a.max(x.abs()))
                })
                .fold(f64::INFINITY, f64::min);
            if reach.is_finite() {
                m * k.mass_beyond(reach) + round
            } else {
                round
            }
        }
    };
    let n = grid.n();
    let shell_max = (0..grid.cells())
        .filter(|&i| grid.unravel(i)[..grid.dim()].iter().any(|&a| a == 0 || a + 1 == n))
        .map(|i| v.values()[i])
        .fold(0.0, f64::max);
    let (v_min, v_max) = (v.min(), v.max());
    let deficit = expected_mass - mass_v;
    Ok(PotentialAudit {
        v_min,
        v_max,
        v_bound,
        mass_v,
        expected_mass,
        mass_tol,
        shell_max,
        bounds_ok: v_min >= 0.0 && v_max <= v_bound,
        mass_ok: deficit >= -round && deficit <= mass_tol,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CompactSupport {
    pub support_radius: f64,
    pub half_width: f64,
    pub ok: bool,
    pub advice: Option<String>,
}

/// `ok` when the support stays within 90% of the box half-width.
pub fn compact_support_check(f: &Field, tol_f: f64) -> CompactSupport {
    let support_radius = f.support_radius(tol_f);
    let half_width = f.grid().half_width();
    let ok = support_radius <= 0.9 * half_width;
    CompactSupport {
        support_radius,
        half_width,
        ok,
        advice: (!ok).then(|| {
            format!("support reaches {support_radius:.4} of half-width {half_width}; enlarge the box")
        }),
    }
}

/// Median `m(u) = inf{t : |{u > t}| < ∞}` of the zero extension; every
/// grid field is compactly supported, so it is 0.
pub fn median(u: &Field) -> Result<f64> {
    match u.grid().mode() {
        Mode::Free => Ok(0.0),
        Mode::Periodic => Err(Error::domain(
            "the median is defined through infinite-measure sets; use a free-mode grid",
        )),
    }
}

/// Smallest `C` with `g(m) ≥ m^k / C` on the sampled profile.
pub fn fit_poincare_constant(profile: &ProfileTable, k: f64) -> Result<f64> {
    if profile.masses.is_empty() {
        return Err(Error::domain("profile is empty"));
    }
    if !(k >= 1.0) {
        return Err(Error::domain(format!("exponent k = {k} must be at least 1")));
    }
    let mut c = 0.0f64;
    for (&m, &g) in profile.masses.iter().zip(&profile.g_values) {
        if !(g > 0.0) {
            return Err(Error::domain(format!("profile vanishes at m = {m}")));
        }
        c = c.max(m.powf(k) / g);
    }
    Ok(c)
}

#[derive(Debug, Clone, Serialize)]
pub struct PoincareCheck {
    /// `‖u - m(u)‖_{L^k}`.
    pub lhs: f64,
    /// `C J_K(u)`.
    pub rhs: f64,
    /// Relative slack `C_iso h / r`, `r` the radius of a ball with the
    /// measure of the support of `u`.
    pub allowance: f64,
    pub j_path: JPath,
    pub ok: bool,
}

/// `‖u - m(u)‖_{L^k} ≤ C J_K(u)` up to the discretization allowance.
pub fn poincare_check(u: &Field, k: &KernelTable, exponent: f64, c: f64, thresholds: usize) -> Result<PoincareCheck> {
    let med = median(u)?;
    let grid = u.grid();
    let powered: Vec<f64> = u.values().iter().map(|x| (x - med).abs().powf(exponent)).collect();
    let lhs = (grid.cell_volume() * tree_sum(&powered)).powf(1.0 / exponent);
    let j = j_functional(u, k, thresholds)?;
    let rhs = c * j.value;
    let support = grid.cell_volume() * u.values().iter().filter(|&&x| x != 0.0).count() as f64;
    let allowance = if support > 0.0 {
        DEFAULT_C_ISO * grid.h() / ball_radius(grid.dim(), support)
    } else {
        0.0
    };
    Ok(PoincareCheck {
        lhs,
        rhs,
        allowance,
        j_path: j.path,
        ok: lhs <= rhs * (1.0 + allowance),
    })
}
