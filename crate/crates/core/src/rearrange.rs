//! Discrete balls, symmetric rearrangement of sets, the isoperimetric
//! profile `g(m) = Per_{K*}(B_m)` and the inequality checks built on it.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec, Mode, MAX_DIM};
use crate::kernels::{ball_volume, rearrange_kernel, KernelTable, L1Norm};
use crate::perimeter::{perimeter_set, quadratic_form};

/// Default constant in `tol_iso = C_iso · h · m^{(N-1)/N} · ‖K‖`.
pub const DEFAULT_C_ISO: f64 = 4.0;

/// Order of lattice points (given in doubled integer coordinates) by
/// distance to the origin, ties broken lexicographically on the pair
/// representative `min(z, -z)`, so mirror points are adjacent.
pub(crate) fn symmetric_order(doubled: &[[i64; MAX_DIM]], dim: usize) -> Vec<usize> {
    let key = |z: &[i64; MAX_DIM]| {
        let d2: i64 = z[..dim].iter().map(|v| v * v).sum();
        let mut neg = [0i64; MAX_DIM];
        for a in 0..dim {
            neg[a] = -z[a];
        }
        let rep = if neg[..dim] < z[..dim] { neg } else { *z };
        (d2, rep, z[..dim] != rep[..dim])
    };
    let mut idx: Vec<usize> = (0..doubled.len()).collect();
    idx.sort_by_cached_key(|&i| key(&doubled[i]));
    idx
}

pub(crate) fn cell_order(grid: &GridSpec) -> Vec<usize> {
    let doubled: Vec<[i64; MAX_DIM]> = (0..grid.cells()).map(|i| grid.doubled_center(i)).collect();
    symmetric_order(&doubled, grid.dim())
}

/// The first `count` cells in symmetric order: the discrete centered ball.
pub fn symmetric_ball(grid: GridSpec, count: usize) -> Result<Field> {
    if count > grid.cells() {
        return Err(Error::domain(format!(
            "ball of {count} cells exceeds the {} cells of the box",
            grid.cells()
        )));
    }
    let mut values = vec![0.0; grid.cells()];
    for i in cell_order(&grid).into_iter().take(count) {
        values[i] = 1.0;
    }
    Field::new(grid, values)
}

/// Radius of the ball of volume `m` in `R^N`.
pub fn ball_radius(dim: usize, m: f64) -> f64 {
    (m / ball_volume(dim)).powf(1.0 / dim as f64)
}

#[derive(Debug, Clone)]
pub struct DiscreteBall {
    pub field: Field,
    pub radius: f64,
    pub target_mass: f64,
    pub achieved_mass: f64,
}

/// Indicator of the cells whose centers lie within `(m/ω_N)^{1/N}` of `center`.
pub fn ball_indicator(grid: GridSpec, m: f64, center: &[f64]) -> Result<DiscreteBall> {
    if !(m > 0.0) {
        return Err(Error::domain(format!("ball mass {m} must be positive")));
    }
    if center.len() != grid.dim() {
        return Err(Error::domain(format!(
            "center has {} coordinates, grid dimension is {}",
            center.len(),
            grid.dim()
        )));
    }
    let radius = ball_radius(grid.dim(), m);
    let half = grid.half_width();
    let fits = match grid.mode() {
        Mode::Free => center.iter().all(|c| c.abs() + radius <= half),
        Mode::Periodic => radius <= half,
    };
    if !fits {
        return Err(Error::domain(format!(
            "ball of mass {m} (radius {radius}) around {center:?} exceeds the box of half-width {half}"
        )));
    }
    let field = Field::indicator(grid, |x| {
        x.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum::<f64>() <= radius * radius
    });
    let achieved_mass = field.mass();
    Ok(DiscreteBall {
        field,
        radius,
        target_mass: m,
        achieved_mass,
    })
}

/// Centered discrete ball with the same cell count as `E`.
pub fn rearrange_set(e: &Field) -> Result<Field> {
    e.ensure_indicator("rearrange_set")?;
    symmetric_ball(*e.grid(), e.count_ones())
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileTable {
    pub kernel: String,
    /// Achieved discrete masses, strictly increasing.
    pub masses: Vec<f64>,
    pub g_values: Vec<f64>,
    pub l1_norm: L1Norm,
}

impl ProfileTable {
    /// CSV with columns `m, g, g/m, bound` where `bound = ‖K‖₁ m`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "m,g,g_over_m,bound")?;
        for (m, g) in self.masses.iter().zip(&self.g_values) {
            let bound = match self.l1_norm {
                L1Norm::Finite(l) => format!("{:.16e}", l * m),
                L1Norm::Infinite => "inf".into(),
            };
            writeln!(w, "{m:.16e},{g:.16e},{:.16e},{bound}", g / m)?;
        }
        Ok(())
    }
}

fn cells_for_mass(grid: &GridSpec, m: f64) -> Result<usize> {
    if !(m > 0.0) {
        return Err(Error::domain(format!("profile mass {m} must be positive")));
    }
    let radius = ball_radius(grid.dim(), m);
    if radius > grid.half_width() {
        return Err(Error::domain(format!(
            "ball of mass {m} (radius {radius}) exceeds the box of half-width {}",
            grid.half_width()
        )));
    }
    Ok(((m / grid.cell_volume()).round() as usize).max(1))
}

/// `g(m) = Per_{K*}(B_m)` for each requested mass, `B_m` the discrete
/// centered ball with `round(m / h^N)` cells. Duplicate cell counts are
/// merged; masses are reported as achieved.
pub fn isoperimetric_profile(k: &KernelTable, masses: &[f64]) -> Result<ProfileTable> {
    let grid = *k.grid();
    let mut counts = masses
        .iter()
        .map(|&m| cells_for_mass(&grid, m))
        .collect::<Result<Vec<_>>>()?;
    counts.sort_unstable();
    counts.dedup();
    let star = rearrange_kernel(k)?;
    let g_values = counts
        .par_iter()
        .map(|&c| perimeter_set(&symmetric_ball(grid, c)?, &star))
        .collect::<Result<Vec<_>>>()?;
    Ok(ProfileTable {
        kernel: k.label().to_string(),
        masses: counts.iter().map(|&c| c as f64 * grid.cell_volume()).collect(),
        g_values,
        l1_norm: k.l1_norm(),
    })
}

/// `C_iso · h · m^{(N-1)/N} · ‖K‖`.
pub fn tol_iso(k: &KernelTable, mass: f64, c_iso: f64) -> f64 {
    let g = k.grid();
    let d = g.dim() as f64;
    c_iso * g.h() * mass.powf((d - 1.0) / d) * k.scale()
}

#[derive(Debug, Clone, Serialize)]
pub struct IsoperimetricCheck {
    pub per: f64,
    pub bound: f64,
    pub slack: f64,
    pub tol_iso: f64,
    pub violated: bool,
}

/// `Per_K(E)` against `Per_{K*}` of the centered ball with the same cell count.
pub fn isoperimetric_check(e: &Field, k: &KernelTable, c_iso: f64) -> Result<IsoperimetricCheck> {
    e.ensure_indicator("isoperimetric_check")?;
    let star = rearrange_kernel(k)?;
    let per = perimeter_set(e, k)?;
    let bound = perimeter_set(&rearrange_set(e)?, &star)?;
    let tol = tol_iso(k, e.mass(), c_iso);
    Ok(IsoperimetricCheck {
        per,
        bound,
        slack: per - bound,
        tol_iso: tol,
        violated: per - bound < -tol,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RieszCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub tol_iso: f64,
    pub holds: bool,
}

/// `q(χ_E, χ_E; K) ≤ q(χ_{E*}, χ_{E*}; K*)`.
pub fn riesz_check(e: &Field, k: &KernelTable, c_iso: f64) -> Result<RieszCheck> {
    e.ensure_indicator("riesz_check")?;
    let star = rearrange_kernel(k)?;
    let es = rearrange_set(e)?;
    let lhs = quadratic_form(e, e, k)?;
    let rhs = quadratic_form(&es, &es, &star)?;
    let tol = tol_iso(k, e.mass(), c_iso);
    Ok(RieszCheck {
        lhs,
        rhs,
        tol_iso: tol,
        holds: lhs <= rhs + tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{Anisotropy, KernelSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn ball_examples() {
        assert!((ball_radius(2, PI) - 1.0).abs() < 1e-15);
        assert!((ball_radius(1, 2.0) - 1.0).abs() < 1e-15);
        let g = GridSpec::new(2, 64, 0.05, Mode::Free).unwrap();
        let b = ball_indicator(g, PI, &[0.0, 0.0]).unwrap();
        // shell oracle: cells whose centers are within one cell diagonal of the circle
        let shell = (0..g.cells())
            .filter(|&i| {
                let c = g.center(i);
                let r = (c[0] * c[0] + c[1] * c[1]).sqrt();
                (r - 1.0).abs() <= 0.05 * 2f64.sqrt()
            })
            .count() as f64;
        assert!((b.achieved_mass - PI).abs() <= shell * g.cell_volume());
        assert!(ball_indicator(g, 20.0, &[0.0, 0.0]).is_err());
        assert!(ball_indicator(g, 1.0, &[1.4, 0.0]).is_err());
        let g1 = GridSpec::new(1, 16, 0.25, Mode::Free).unwrap();
        let b1 = ball_indicator(g1, 2.0, &[0.0]).unwrap();
        assert_eq!(b1.achieved_mass, 2.0);
    }

    #[test]
    fn rearrange_set_examples() {
        let g = GridSpec::new(2, 16, 0.1, Mode::Free).unwrap();
        let ball = symmetric_ball(g, 21).unwrap();
        assert_eq!(rearrange_set(&ball).unwrap(), ball);
        let moved = ball.shift(&[3, -2]);
        assert_eq!(rearrange_set(&moved).unwrap(), ball);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let e = Field::new(g, (0..g.cells()).map(|_| if rng.gen::<bool>() { 1.0 } else { 0.0 }).collect()).unwrap();
            let r = rearrange_set(&e).unwrap();
            assert_eq!(r.count_ones(), e.count_ones());
            assert_eq!(rearrange_set(&r).unwrap(), r);
        }
    }

    #[test]
    fn even_counts_give_symmetric_sets() {
        let g = GridSpec::new(2, 8, 0.1, Mode::Free).unwrap();
        for count in (2..=64).step_by(2) {
            let b = symmetric_ball(g, count).unwrap();
            let flipped: Vec<f64> = (0..g.cells()).map(|i| b.values()[g.cells() - 1 - i]).collect();
            assert_eq!(flipped, b.values());
        }
    }

    #[test]
    fn profile_of_gaussian() {
        let g = GridSpec::new(2, 32, 0.1, Mode::Free).unwrap();
        let k = KernelSpec::gaussian(2, 0.5).unwrap().tabulate(&g).unwrap();
        let masses: Vec<f64> = (1..=10).map(|i| 0.05 * i as f64).collect();
        let p = isoperimetric_profile(&k, &masses).unwrap();
        let l1 = k.l1_norm().finite().unwrap();
        for (m, g) in p.masses.iter().zip(&p.g_values) {
            assert!(*g >= 0.0 && *g <= l1 * m * (1.0 + 1e-9));
        }
        assert!(p.masses.windows(2).all(|w| w[0] < w[1]));
        assert!(p.g_values.windows(2).all(|w| w[0] <= w[1]));
        // smallest resolvable mass: a single cell
        let one = isoperimetric_profile(&k, &[g.cell_volume()]).unwrap();
        let ratio = one.g_values[0] / one.masses[0];
        assert!((ratio - l1).abs() < 0.1 * l1, "{ratio} vs {l1}");
        let mut csv = Vec::new();
        p.write_csv(&mut csv).unwrap();
        assert!(String::from_utf8(csv).unwrap().starts_with("m,g,g_over_m,bound\n"));
    }

    #[test]
    fn truncation_family_blows_up_at_small_mass() {
        let g = GridSpec::new(1, 128, 0.01, Mode::Free).unwrap();
        let base = KernelSpec::fractional(1, 0.5).unwrap();
        let m = 0.05;
        let mut last = 0.0;
        for eps in [1.0, 0.1, 0.01, 0.001] {
            let k = base.truncate(eps).unwrap().tabulate(&g).unwrap();
            let p = isoperimetric_profile(&k, &[m]).unwrap();
            let ratio = p.g_values[0] / p.masses[0];
            assert!(ratio > last * 1.2, "eps={eps}: {ratio} vs {last}");
            last = ratio;
        }
    }

    #[test]
    fn isoperimetric_examples() {
        let g = GridSpec::new(2, 32, 0.1, Mode::Free).unwrap();
        let k = KernelSpec::gaussian(2, 0.4).unwrap().tabulate(&g).unwrap();
        let ball = symmetric_ball(g, 60).unwrap();
        let c = isoperimetric_check(&ball, &k, DEFAULT_C_ISO).unwrap();
        assert!(c.slack.abs() <= c.tol_iso, "{c:?}");

        let aniso = KernelSpec::anisotropic_fractional(2, 0.5, Anisotropy::PNorm(1.0))
            .unwrap()
            .truncate(0.05)
            .unwrap()
            .tabulate(&g)
            .unwrap();
        let c = isoperimetric_check(&ball, &aniso, DEFAULT_C_ISO).unwrap();
        assert!(c.per >= c.bound, "{c:?}");
    }

    #[test]
    fn riesz_examples() {
        let g = GridSpec::new(2, 16, 0.1, Mode::Free).unwrap();
        let values: Vec<f64> = (0..31 * 31)
            .map(|i| {
                let (a, b) = (i / 31 - 15, i % 31 - 15);
                (-((a * a + b * b) as f64) / 9.0).exp()
            })
            .collect();
        let k = KernelTable::from_values(g, values, "radial").unwrap();
        let ball = symmetric_ball(g, 37).unwrap();
        let r = riesz_check(&ball, &k, DEFAULT_C_ISO).unwrap();
        assert!((r.lhs - r.rhs).abs() < 1e-10 * r.lhs);
        let moved = ball.shift(&[2, 3]);
        let r = riesz_check(&moved, &k, DEFAULT_C_ISO).unwrap();
        assert!((r.lhs - r.rhs).abs() <= r.tol_iso && r.holds);
    }
}
