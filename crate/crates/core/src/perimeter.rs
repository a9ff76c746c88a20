//! Nonlocal perimeter `Per_K(E) = ∫_E ∫_{E^c} K(x-y)`, its relaxation
//! `P_K(f) = ∫∫ f(x)(1-f(y)) K(x-y)`, the functional
//! `J_K(u) = ½ ∫∫ |u(x)-u(y)| K(x-y)`, and the identities they satisfy.
//!
//! Free mode treats the box as embedded in `R^N` with fields vanishing
//! outside it; the interaction of box cells with the far field enters
//! through the table's tail. Periodic mode works on the torus.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{convolve, Field, Mode, BRUTE_FORCE_LIMIT, MAX_DIM};
use crate::kernels::KernelTable;
use crate::sum::{tree_dot, tree_sum};

/// Work bound (cells × table entries) for the literal double sums.
const DIRECT_LIMIT: usize = 1 << 26;

fn ensure_integrable(k: &KernelTable, what: &str) -> Result<()> {
    if k.is_integrable() {
        Ok(())
    } else {
        Err(Error::NotIntegrable(format!(
            "{what} needs K ∈ L¹ (kernel {}); densities and quadratic forms are only defined for integrable kernels",
            k.label()
        )))
    }
}

/// `h^N Σ f·(g∗K)` without the integrability check (callers guarantee the
/// zero offset is never needed, e.g. disjoint supports).
pub(crate) fn raw_form(f: &Field, g: &Field, k: &KernelTable) -> Result<f64> {
    f.grid().ensure_same(g.grid(), "quadratic_form")?;
    let conv = convolve(g, k)?;
    Ok(f.grid().cell_volume() * tree_dot(f.values(), conv.values()))
}

/// `h^{2N} Σ_{x,y} f(x) g(y) K(x-y)`.
pub fn quadratic_form(f: &Field, g: &Field, k: &KernelTable) -> Result<f64> {
    ensure_integrable(k, "quadratic_form")?;
    raw_form(f, g, k)
}

/// Symmetrized cut `½[q(f, 1-f) + q(1-f, f)]` on the torus; invariant
/// under `f ↦ 1-f` bit for bit.
fn periodic_cut(f: &Field, k: &KernelTable) -> Result<f64> {
    let c = f.complement();
    let a = raw_form(f, &c, k)?;
    let b = raw_form(&c, f, k)?;
    Ok((0.5 * (a + b)).max(0.0))
}

/// `mass·(Σ_z K + tail) - q(f,f)` in free mode.
fn free_energy(f: &Field, k: &KernelTable) -> Result<f64> {
    let q = raw_form(f, f, k)?;
    Ok((f.mass() * k.weight() - q).max(0.0))
}

/// `h^{2N} Σ_{x∈E} Σ_{z≠0} (1 - E(x+z)) K(z)` plus `|E|·tail` in free mode.
fn direct_cut(e: &Field, k: &KernelTable) -> f64 {
    let grid = *e.grid();
    let dim = grid.dim();
    let vals = e.values();
    let table = k.values();
    let offsets: Vec<[i64; MAX_DIM]> = (0..table.len()).map(|i| k.offset(i)).collect();
    let rows: Vec<f64> = (0..grid.cells())
        .into_par_iter()
        .map(|x| {
            if vals[x] == 0.0 {
                return 0.0;
            }
            let mut acc = 0.0;
            for (zi, &kz) in table.iter().enumerate() {
                if kz == 0.0 {
                    continue;
                }
                let outside = match grid.shifted(x, &offsets[zi][..dim]) {
                    Some(y) => 1.0 - vals[y],
                    None => 1.0,
                };
                acc += outside * kz;
            }
            acc
        })
        .collect();
    let vol = grid.cell_volume();
    let mut value = vol * vol * tree_sum(&rows);
    if grid.mode() == Mode::Free {
        value += e.mass() * k.tail().value;
    }
    value
}

/// `Per_K(E)` for an indicator field.
///
/// Integrable kernels use `|E|‖K‖ - q(χ_E, χ_E)` (free) or the symmetric
/// cut (periodic). Singular kernels use the literal sum over pairs with
/// distinct membership when it is affordable, otherwise the same
/// decomposition with the zero offset excluded from both terms.
pub fn perimeter_set(e: &Field, k: &KernelTable) -> Result<f64> {
    e.ensure_indicator("perimeter_set")?;
    e.grid().ensure_same(k.grid(), "perimeter_set")?;
    if e.count_ones() == 0 {
        return Ok(0.0);
    }
    let periodic = e.grid().mode() == Mode::Periodic;
    if !k.is_integrable() && e.grid().cells() * k.values().len() <= DIRECT_LIMIT {
        return Ok(direct_cut(e, k));
    }
    if periodic {
        periodic_cut(e, k)
    } else {
        free_energy(e, k)
    }
}

/// `P_K(f) = m‖K‖ - q(f,f)` for a density `0 ≤ f ≤ 1`.
pub fn relaxed_energy(f: &Field, k: &KernelTable) -> Result<f64> {
    f.ensure_density("relaxed_energy")?;
    f.grid().ensure_same(k.grid(), "relaxed_energy")?;
    ensure_integrable(k, "relaxed_energy")?;
    match f.grid().mode() {
        Mode::Periodic => periodic_cut(f, k),
        Mode::Free => free_energy(f, k),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JPath {
    Direct,
    Coarea,
}

#[derive(Debug, Clone, Serialize)]
pub struct JValue {
    pub value: f64,
    pub path: JPath,
}

/// `J_K(u)` by the literal double sum when `n^N ≤ 4096`, by the coarea
/// formula otherwise.
pub fn j_functional(u: &Field, k: &KernelTable, thresholds: usize) -> Result<JValue> {
    if thresholds < 2 {
        return Err(Error::domain(format!("thresholds = {thresholds} must be at least 2")));
    }
    if u.grid().cells() <= BRUTE_FORCE_LIMIT {
        Ok(JValue {
            value: j_direct(u, k)?,
            path: JPath::Direct,
        })
    } else {
        Ok(JValue {
            value: j_coarea(u, k, thresholds)?,
            path: JPath::Coarea,
        })
    }
}

/// `½ h^{2N} Σ_{x,y} |u(x) - u(y)| K(x-y)`, with `u = 0` outside the box
/// and the far field through the tail in free mode.
pub fn j_direct(u: &Field, k: &KernelTable) -> Result<f64> {
    let grid = *u.grid();
    grid.ensure_same(k.grid(), "j_functional")?;
    if !u.values().iter().all(|v| v.is_finite()) {
        return Err(Error::domain("j_functional needs a bounded field"));
    }
    if grid.cells() * k.values().len() > DIRECT_LIMIT {
        return Err(Error::SizeGuard(format!(
            "direct J_K needs cells × table entries <= {DIRECT_LIMIT}"
        )));
    }
    let dim = grid.dim();
    let vals = u.values();
    let table = k.values();
    let offsets: Vec<[i64; MAX_DIM]> = (0..table.len()).map(|i| k.offset(i)).collect();
    let rows: Vec<f64> = (0..grid.cells())
        .into_par_iter()
        .map(|x| {
            let ux = vals[x];
            let mut inside = 0.0;
            let mut outside = 0.0;
            for (zi, &kz) in table.iter().enumerate() {
                if kz == 0.0 {
                    continue;
                }
                match grid.shifted(x, &offsets[zi][..dim]) {
                    Some(y) => inside += (ux - vals[y]).abs() * kz,
                    None => outside += ux.abs() * kz,
                }
            }
            // pairs inside the box are counted twice, pairs leaving it once
            0.5 * inside + outside
        })
        .collect();
    let vol = grid.cell_volume();
    let mut value = vol * vol * tree_sum(&rows);
    if grid.mode() == Mode::Free {
        let abs: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
        value += vol * tree_sum(&abs) * k.tail().value;
    }
    Ok(value)
}

/// Levels of `u` (with 0 in free mode, where `u` vanishes outside the box).
fn levels(u: &Field) -> Vec<f64> {
    let mut v: Vec<f64> = u.values().to_vec();
    if u.grid().mode() == Mode::Free {
        v.push(0.0);
    }
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn midpoints(a: f64, b: f64, count: usize) -> Vec<(f64, f64)> {
    let ds = (b - a) / count as f64;
    (0..count).map(|i| (a + (i as f64 + 0.5) * ds, ds)).collect()
}

/// `Per_K` of the superlevel set `{u > s}`; below zero in free mode the
/// set is unbounded and its complement `{u ≤ s}` is used instead.
fn level_perimeter(u: &Field, k: &KernelTable, s: f64) -> Result<f64> {
    let free = u.grid().mode() == Mode::Free;
    let set = if free && s < 0.0 {
        u.map(|v| if v <= s { 1.0 } else { 0.0 })
    } else {
        u.map(|v| if v > s { 1.0 } else { 0.0 })
    };
    perimeter_set(&set, k)
}

/// `∫ Per_K({u > s}) ds` by the midpoint rule over `thresholds` levels, or
/// exactly when `u` takes at most `thresholds` distinct values.
pub fn j_coarea(u: &Field, k: &KernelTable, thresholds: usize) -> Result<f64> {
    u.grid().ensure_same(k.grid(), "j_functional")?;
    if thresholds < 2 {
        return Err(Error::domain(format!("thresholds = {thresholds} must be at least 2")));
    }
    let lv = levels(u);
    if lv.len() < 2 {
        return Ok(0.0);
    }
    let terms: Vec<(f64, f64)> = if lv.len() <= thresholds + 1 {
        // layer sum: {u > s} is constant for s in [v_j, v_{j+1})
        lv.windows(2).map(|w| (w[0], w[1] - w[0])).collect()
    } else {
        let (a, b) = (lv[0], lv[lv.len() - 1]);
        if u.grid().mode() == Mode::Free && a < 0.0 && b > 0.0 {
            // the far field crowds levels around 0; keep nodes off it
            let below = ((thresholds as f64 * -a / (b - a)).round() as usize).clamp(1, thresholds - 1);
            let mut t = midpoints(a, 0.0, below);
            t.extend(midpoints(0.0, b, thresholds - below));
            t
        } else {
            midpoints(a, b, thresholds)
        }
    };
    let pieces: Vec<f64> = terms
        .par_iter()
        .map(|&(s, w)| level_perimeter(u, k, s).map(|p| p * w))
        .collect::<Result<_>>()?;
    Ok(tree_sum(&pieces))
}

#[derive(Debug, Clone, Serialize)]
pub struct CoareaReport {
    pub lhs: f64,
    pub rhs: f64,
    pub rel_gap: f64,
}

/// Both sides of `J_K(u) = ∫ Per_K({u > s}) ds`.
pub fn coarea_check(u: &Field, k: &KernelTable, thresholds: usize) -> Result<CoareaReport> {
    let lhs = j_direct(u, k)?;
    let rhs = j_coarea(u, k, thresholds)?;
    let scale = lhs.abs().max(rhs.abs());
    Ok(CoareaReport {
        lhs,
        rhs,
        rel_gap: if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SubmodularityReport {
    /// `Per(E) + Per(F) - Per(E∩F) - Per(E∪F)`.
    pub deficit: f64,
    /// `2 q(χ_{E∖F}, χ_{F∖E})`, computed independently.
    pub cross_term: f64,
}

pub fn submodularity_deficit(e: &Field, f: &Field, k: &KernelTable) -> Result<SubmodularityReport> {
    e.ensure_indicator("submodularity_deficit")?;
    f.ensure_indicator("submodularity_deficit")?;
    e.grid().ensure_same(f.grid(), "submodularity_deficit")?;
    let inter = e.zip_with(f, |a, b| a * b)?;
    let union = e.zip_with(f, |a, b| a.max(b))?;
    let e_only = e.zip_with(f, |a, b| a * (1.0 - b))?;
    let f_only = f.zip_with(e, |a, b| a * (1.0 - b))?;
    let deficit = perimeter_set(e, k)? + perimeter_set(f, k)? - perimeter_set(&inter, k)? - perimeter_set(&union, k)?;
    let cross_term = 2.0 * raw_form(&e_only, &f_only, k)?;
    Ok(SubmodularityReport { deficit, cross_term })
}
