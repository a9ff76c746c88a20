//! Uniform lattices and grid functions.
//!
//! A [`GridSpec`] describes `n^N` square cells of side `h` filling the box
//! `[-L/2, L/2)^N` with `L = n h`. Cell `i` along an axis has center
//! `(i - n/2 + 1/2) h`, so an even `n` places no cell center at the origin
//! and the lattice is mirror symmetric. Storage is row-major with the last
//! axis fastest.

mod convolve;
pub mod io;

pub use convolve::{brute_force_convolve, convolve, KernelSpectrum, BRUTE_FORCE_LIMIT};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::tree_sum;

pub const MAX_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Fields vanish outside the box.
    Free,
    /// The box is a torus.
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    n: usize,
    h: f64,
    mode: Mode,
}

impl GridSpec {
    pub fn new(dim: usize, n: usize, h: f64, mode: Mode) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::domain(format!("dimension {dim} not in 1..=3")));
        }
        if n < 4 {
            return Err(Error::domain(format!("cells_per_side {n} < 4")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::domain(format!("spacing {h} must be positive")));
        }
        Ok(Self { dim, n, h, mode })
    }

    /// Grid with `n` cells per side covering the box of half-width `half_width`.
    pub fn with_half_width(dim: usize, n: usize, half_width: f64, mode: Mode) -> Result<Self> {
        Self::new(dim, n, 2.0 * half_width / n as f64, mode)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn with_mode(&self, mode: Mode) -> Self {
        Self { mode, ..*self }
    }

    pub fn cells(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn side(&self) -> f64 {
        self.n as f64 * self.h
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.side()
    }

    pub fn box_volume(&self) -> f64 {
        self.side().powi(self.dim as i32)
    }

    pub fn unravel(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        for a in (0..self.dim).rev() {
            out[a] = idx % self.n;
            idx /= self.n;
        }
        out
    }

    pub fn ravel(&self, multi: &[usize]) -> usize {
        multi[..self.dim]
            .iter()
            .fold(0, |acc, &i| acc * self.n + i)
    }

    /// Twice the cell-center coordinate in units of `h`: `2i - n + 1`.
    pub fn doubled_center(&self, idx: usize) -> [i64; MAX_DIM] {
        let m = self.unravel(idx);
        let mut out = [0; MAX_DIM];
        for a in 0..self.dim {
            out[a] = 2 * m[a] as i64 - self.n as i64 + 1;
        }
        out
    }

    pub fn center(&self, idx: usize) -> [f64; MAX_DIM] {
        let d = self.doubled_center(idx);
        let mut out = [0.0; MAX_DIM];
        for a in 0..self.dim {
            out[a] = 0.5 * d[a] as f64 * self.h;
        }
        out
    }

    /// Shift a cell by whole cells. `None` if it leaves a free-mode box.
    pub fn shifted(&self, idx: usize, shift: &[i64]) -> Option<usize> {
        let m = self.unravel(idx);
        let n = self.n as i64;
        let mut out = 0usize;
        for a in 0..self.dim {
            let mut j = m[a] as i64 + shift[a];
            match self.mode {
                Mode::Free if !(0..n).contains(&j) => return None,
                Mode::Free => {}
                Mode::Periodic => j = j.rem_euclid(n),
            }
            out = out * self.n + j as usize;
        }
        Some(out)
    }

    pub(crate) fn ensure_same(&self, other: &GridSpec, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!(
                "{what}: {self:?} vs {other:?}"
            )));
        }
        Ok(())
    }
}

/// A grid function, row-major over `n^N` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::GridMismatch(format!(
                "field has {} values, grid has {} cells",
                values.len(),
                grid.cells()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.cells()],
        }
    }

    /// Sample `f` at cell centers.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.cells())
            .map(|i| f(&grid.center(i)[..grid.dim()]))
            .collect();
        Self { grid, values }
    }

    /// Indicator of the cells whose centers satisfy `pred`.
    pub fn indicator(grid: GridSpec, pred: impl Fn(&[f64]) -> bool) -> Self {
        Self::from_fn(grid, |x| if pred(x) { 1.0 } else { 0.0 })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `h^N Σ values`.
    pub fn mass(&self) -> f64 {
        self.grid.cell_volume() * tree_sum(&self.values)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_indicator(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Number of cells with value 1.
    pub fn count_ones(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1.0).count()
    }

    pub fn ensure_indicator(&self, what: &str) -> Result<()> {
        if let Some(v) = self.values.iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(Error::Constraint(format!(
                "{what}: expected a {{0,1}}-valued indicator, found value {v}"
            )));
        }
        Ok(())
    }

    /// Reject values outside `[0, 1]`, naming the offending extremum.
    pub fn ensure_density(&self, what: &str) -> Result<()> {
        let (lo, hi) = (self.min(), self.max());
        if lo < 0.0 || lo.is_nan() {
            return Err(Error::Constraint(format!("{what}: minimum {lo} < 0")));
        }
        if hi > 1.0 || hi.is_nan() {
            return Err(Error::Constraint(format!("{what}: maximum {hi} > 1")));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.grid.ensure_same(&other.grid, "zip_with")?;
        Ok(Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// `1 - f`.
    pub fn complement(&self) -> Field {
        self.map(|v| 1.0 - v)
    }

    /// `h^N Σ f g`.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.grid.ensure_same(&other.grid, "inner product")?;
        Ok(self.grid.cell_volume() * crate::sum::tree_dot(&self.values, &other.values))
    }

    /// Mass-weighted barycenter of `|f|`.
    pub fn barycenter(&self) -> [f64; MAX_DIM] {
        let mut acc = [0.0; MAX_DIM];
        let mut total = 0.0;
        for (i, &v) in self.values.iter().enumerate() {
            let w = v.abs();
            if w == 0.0 {
                continue;
            }
            let c = self.grid.center(i);
            for a in 0..self.grid.dim() {
                acc[a] += w * c[a];
            }
            total += w;
        }
        if total > 0.0 {
            for x in acc.iter_mut() {
                *x /= total;
            }
        }
        acc
    }

    /// Translate by whole cells; free mode fills with zero, periodic wraps.
    pub fn shift(&self, shift: &[i64]) -> Field {
        let mut out = vec![0.0; self.values.len()];
        for (i, &v) in self.values.iter().enumerate() {
            if let Some(j) = self.grid.shifted(i, shift) {
                out[j] = v;
            }
        }
        Field {
            grid: self.grid,
            values: out,
        }
    }

    /// Translate by the whole-cell shift that best moves the barycenter to the origin.
    pub fn recenter(&self) -> Field {
        let b = self.barycenter();
        let shift: Vec<i64> = (0..self.grid.dim())
            .map(|a| -(b[a] / self.grid.h()).round() as i64)
            .collect();
        self.shift(&shift)
    }

    /// Largest center distance over cells where `f > tol`.
    pub fn support_radius(&self, tol: f64) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > tol)
            .map(|(i, _)| norm(&self.grid.center(i)[..self.grid.dim()]))
            .fold(0.0, f64::max)
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
