//! Discrete kernels on the offset lattice of a grid.
//!
//! Free mode: offsets `k ∈ [-(n-1), n-1]^N`, which covers every pair of
//! cells in the box. Periodic mode: residues `k ∈ [-n/2, n/2)^N`, each
//! entry summing the images `k + jn` within a symmetric window.

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::Serialize;

use super::quadrature::{pair_average_adaptive, pair_average_fixed};
use super::KernelSpec;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, KernelSpectrum, Mode, MAX_DIM};
use crate::sum::tree_sum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum L1Norm {
    Finite(f64),
    Infinite,
}

impl L1Norm {
    pub fn finite(&self) -> Option<f64> {
        match self {
            L1Norm::Finite(v) => Some(*v),
            L1Norm::Infinite => None,
        }
    }
}

/// `∫ K` outside the tabulated cube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tail {
    pub value: f64,
    /// Closed form (as opposed to a quadrature estimate).
    pub analytic: bool,
}

#[derive(Debug, Clone)]
pub struct TabulateOptions {
    /// Offsets with `|k|_∞ ≤ refined_radius` use adaptive subdivision.
    pub refined_radius: usize,
    pub rel_tol: f64,
    /// Cap on subdivisions per entry.
    pub max_splits: usize,
    /// Periodic mode: images `|j|_∞ ≤ images` are summed.
    pub images: usize,
}

impl Default for TabulateOptions {
    fn default() -> Self {
        Self {
            refined_radius: 3,
            rel_tol: 1e-6,
            max_splits: 400,
            images: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KernelTable {
    grid: GridSpec,
    extent: usize,
    center: usize,
    values: Vec<f64>,
    l1_norm: L1Norm,
    tail: Tail,
    integrable: bool,
    refined_radius: usize,
    label: String,
    spectrum: OnceLock<Arc<KernelSpectrum>>,
}

fn layout(grid: &GridSpec) -> (usize, usize) {
    match grid.mode() {
        Mode::Free => (2 * grid.n() - 1, grid.n() - 1),
        Mode::Periodic => (grid.n(), grid.n() / 2),
    }
}

pub(crate) fn tabulate(spec: &KernelSpec, grid: &GridSpec, opts: &TabulateOptions) -> Result<KernelTable> {
    if spec.dim() != grid.dim() {
        return Err(Error::GridMismatch(format!(
            "kernel dimension {} vs grid dimension {}",
            spec.dim(),
            grid.dim()
        )));
    }
    if spec.condition_int_analytic() == Some(false) {
        return Err(Error::NotIntegrable(format!(
            "{} violates min(|x|,1) K ∈ L¹; the perimeter is infinite on every nontrivial set",
            spec.label()
        )));
    }
    let singular = spec.is_singular();
    if singular && opts.refined_radius < 1 {
        return Err(Error::domain("singular kernels need refined_radius >= 1"));
    }
    let (extent, center) = layout(grid);
    let dim = grid.dim();
    let h = grid.h();
    let n = grid.n() as i64;
    let total = extent.pow(dim as u32);
    let k = |x: &[f64]| spec.value(x);
    let jumps = spec.jump_radii();

    let average = |offset: &[i64]| -> f64 {
        if singular && offset.iter().all(|&v| v == 0) {
            return 0.0;
        }
        let mut z = [0.0; MAX_DIM];
        for (a, &v) in offset.iter().enumerate() {
            z[a] = v as f64 * h;
        }
        if let Some(v) = spec.pair_average_closed(&z[..dim], h) {
            return v;
        }
        let cheb = offset.iter().map(|v| v.unsigned_abs() as usize).max().unwrap_or(0);
        // the pair average at z integrates K over the cube z + [-h, h]^N
        let (mut near, mut far) = (0.0f64, 0.0f64);
        for &za in &z[..dim] {
            near += (za.abs() - h).max(0.0).powi(2);
            far += (za.abs() + h).powi(2);
        }
        let straddles = jumps.iter().any(|&r| near.sqrt() < r && r < far.sqrt());
        if cheb <= opts.refined_radius || straddles {
            pair_average_adaptive(&k, &z[..dim], h, opts.rel_tol, opts.max_splits)
        } else {
            pair_average_fixed(&k, &z[..dim], h)
        }
    };

    let template = KernelTable {
        grid: *grid,
        extent,
        center,
        values: Vec::new(),
        l1_norm: L1Norm::Infinite,
        tail: Tail {
            value: 0.0,
            analytic: true,
        },
        integrable: !singular,
        refined_radius: opts.refined_radius,
        label: spec.label(),
        spectrum: OnceLock::new(),
    };

    let images = opts.images as i64;
    let mut values: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|idx| {
            if template.mirror_index(idx) < idx {
                return f64::NAN;
            }
            let off = template.offset(idx);
            match grid.mode() {
                Mode::Free => average(&off[..dim]),
                Mode::Periodic => {
                    // all k ≡ off (mod n) with |k_a| ≤ (images + 1/2) n
                    let axis: Vec<Vec<i64>> = off[..dim]
                        .iter()
                        .map(|&r| {
                            (-images - 1..=images + 1)
                                .map(|j| r + j * n)
                                .filter(|k| 2 * k.abs() <= (2 * images + 1) * n)
                                .collect()
                        })
                        .collect();
                    let count: usize = axis.iter().map(Vec::len).product();
                    let mut acc = 0.0;
                    let mut k = [0i64; MAX_DIM];
                    for m in 0..count {
                        let mut rem = m;
                        for a in (0..dim).rev() {
                            k[a] = axis[a][rem % axis[a].len()];
                            rem /= axis[a].len();
                        }
                        acc += average(&k[..dim]);
                    }
                    acc
                }
            }
        })
        .collect();
    for idx in 0..total {
        let m = template.mirror_index(idx);
        if m < idx {
            values[idx] = values[m];
        }
    }

    let l1_norm = match spec.l1_norm_analytic() {
        Some(v) => v,
        None => match spec.homogeneous_l1_capped() {
            Some(v) => L1Norm::Finite(v),
            None => L1Norm::Finite(super::audit::radial_l1(spec)),
        },
    };
    let reach = match grid.mode() {
        Mode::Free => (grid.n() as f64 - 0.5) * h,
        Mode::Periodic => ((opts.images as f64 + 0.5) * grid.n() as f64 + 0.5) * h,
    };
    let tail = spec.tail_outside_cube(reach);

    Ok(KernelTable {
        values,
        l1_norm,
        tail,
        ..template
    })
}

impl KernelTable {
    /// Table from explicit entries in the layout of `grid` (free: extent
    /// `2n-1`, periodic: extent `n`). Entries must be finite, nonnegative and
    /// even; the kernel is taken to vanish beyond the table.
    pub fn from_values(grid: GridSpec, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let (extent, center) = layout(&grid);
        let expected = extent.pow(grid.dim() as u32);
        if values.len() != expected {
            return Err(Error::domain(format!(
                "kernel table needs {expected} entries, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::domain("kernel table entries must be finite and nonnegative"));
        }
        let mut table = Self {
            grid,
            extent,
            center,
            values,
            l1_norm: L1Norm::Infinite,
            tail: Tail {
                value: 0.0,
                analytic: true,
            },
            integrable: true,
            refined_radius: 0,
            label: label.into(),
            spectrum: OnceLock::new(),
        };
        for idx in 0..expected {
            if table.values[idx] != table.values[table.mirror_index(idx)] {
                return Err(Error::domain(format!(
                    "kernel table is not even at offset {:?}",
                    &table.offset(idx)[..grid.dim()]
                )));
            }
        }
        table.l1_norm = L1Norm::Finite(table.lattice_sum());
        Ok(table)
    }

    pub(crate) fn with_values(&self, values: Vec<f64>, label: String) -> Self {
        Self {
            grid: self.grid,
            extent: self.extent,
            center: self.center,
            values,
            l1_norm: self.l1_norm,
            tail: self.tail,
            integrable: self.integrable,
            refined_radius: self.refined_radius,
            label,
            spectrum: OnceLock::new(),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Entries per axis.
    pub fn extent(&self) -> usize {
        self.extent
    }

    /// Index along each axis of the zero offset.
    pub fn center_index(&self) -> usize {
        self.center
    }

    /// Row-major entries over `extent^N`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn l1_norm(&self) -> L1Norm {
        self.l1_norm
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }

    pub fn is_integrable(&self) -> bool {
        self.integrable
    }

    pub fn refined_radius(&self) -> usize {
        self.refined_radius
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Lattice offset of entry `idx`.
    pub fn offset(&self, idx: usize) -> [i64; MAX_DIM] {
        let dim = self.grid.dim();
        let mut out = [0i64; MAX_DIM];
        let mut rem = idx;
        for a in (0..dim).rev() {
            out[a] = (rem % self.extent) as i64 - self.center as i64;
            rem /= self.extent;
        }
        out
    }

    /// Entry holding offset `k` (wrapped in periodic mode), if tabulated.
    pub fn index_of(&self, offset: &[i64]) -> Option<usize> {
        let n = self.grid.n() as i64;
        let mut idx = 0usize;
        for &k in offset {
            let i = match self.grid.mode() {
                Mode::Free => k + self.center as i64,
                Mode::Periodic => (k + self.center as i64).rem_euclid(n),
            };
            if i < 0 || i >= self.extent as i64 {
                return None;
            }
            idx = idx * self.extent + i as usize;
        }
        Some(idx)
    }

    /// Entry for offset `k`; zero outside a free-mode table.
    pub fn value_at(&self, offset: &[i64]) -> f64 {
        self.index_of(offset).map_or(0.0, |i| self.values[i])
    }

    pub(crate) fn mirror_index(&self, idx: usize) -> usize {
        let off = self.offset(idx);
        let dim = self.grid.dim();
        let mut neg = [0i64; MAX_DIM];
        for a in 0..dim {
            neg[a] = -off[a];
        }
        self.index_of(&neg[..dim]).expect("tables are closed under negation")
    }

    /// Euclidean length of the offset of entry `idx`.
    pub fn distance(&self, idx: usize) -> f64 {
        let off = self.offset(idx);
        let h = self.grid.h();
        off[..self.grid.dim()]
            .iter()
            .map(|&k| (k as f64 * h).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `h^N Σ values`.
    pub fn lattice_sum(&self) -> f64 {
        self.grid.cell_volume() * tree_sum(&self.values)
    }

    /// Total interaction weight `∫K` seen by one cell: lattice sum plus tail
    /// in free mode, lattice sum of the periodized kernel otherwise.
    pub fn weight(&self) -> f64 {
        match self.grid.mode() {
            Mode::Free => self.lattice_sum() + self.tail.value,
            Mode::Periodic => self.lattice_sum(),
        }
    }

    /// `‖K‖₁` when finite, else the effective weight of the table.
    pub fn scale(&self) -> f64 {
        self.l1_norm.finite().unwrap_or_else(|| self.weight())
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(0.0, |m, &v| m.max(v))
    }

    /// `∫_{|y| > radius} K` from the table plus the tail beyond it.
    pub fn mass_beyond(&self, radius: f64) -> f64 {
        let inside: Vec<f64> = (0..self.values.len())
            .filter(|&i| self.distance(i) > radius)
            .map(|i| self.values[i])
            .collect();
        self.grid.cell_volume() * tree_sum(&inside) + self.tail.value
    }

    /// Entrywise sum of two tables on the same grid.
    pub fn add(&self, other: &KernelTable) -> Result<KernelTable> {
        self.grid.ensure_same(&other.grid, "kernel sum")?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        let l1_norm = match (self.l1_norm, other.l1_norm) {
            (L1Norm::Finite(a), L1Norm::Finite(b)) => L1Norm::Finite(a + b),
            _ => L1Norm::Infinite,
        };
        Ok(KernelTable {
            l1_norm,
            tail: Tail {
                value: self.tail.value + other.tail.value,
                analytic: self.tail.analytic && other.tail.analytic,
            },
            integrable: self.integrable && other.integrable,
            refined_radius: self.refined_radius.min(other.refined_radius),
            ..self.with_values(values, format!("({}) + ({})", self.label, other.label))
        })
    }

    /// Table of `c K` for `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<KernelTable> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::domain(format!("kernel scale factor {c} must be positive")));
        }
        let values = self.values.iter().map(|v| c * v).collect();
        Ok(KernelTable {
            l1_norm: match self.l1_norm {
                L1Norm::Finite(v) => L1Norm::Finite(c * v),
                L1Norm::Infinite => L1Norm::Infinite,
            },
            tail: Tail {
                value: c * self.tail.value,
                analytic: self.tail.analytic,
            },
            ..self.with_values(values, format!("{c} · ({})", self.label))
        })
    }

    /// Transform of the table embedded in the convolution circulant (cached).
    pub fn spectrum(&self) -> &KernelSpectrum {
        self.spectrum.get_or_init(|| Arc::new(KernelSpectrum::new(self)))
    }
}
