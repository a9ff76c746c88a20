//! Convolution of grid functions with tabulated kernels.
//!
//! `V(x) = h^N Σ_y f(y) K(x - y)`. The fast path embeds the kernel in a
//! circulant of side `2n` (free mode, no wraparound for offsets up to
//! `n - 1`) or `n` (periodic mode) and multiplies spectra. The brute-force
//! path is the literal double loop and serves as the oracle.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{Field, GridSpec, Mode, MAX_DIM};
use crate::error::{Error, Result};
use crate::kernels::KernelTable;

/// Largest `n^N` the brute-force oracle accepts.
pub const BRUTE_FORCE_LIMIT: usize = 4096;

/// Transform of a kernel table embedded in its circulant, with cached plans.
pub struct KernelSpectrum {
    dim: usize,
    side: usize,
    hat: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for KernelSpectrum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KernelSpectrum")
            .field("dim", &self.dim)
            .field("side", &self.side)
            .finish()
    }
}

impl KernelSpectrum {
    pub fn new(table: &KernelTable) -> Self {
        let grid = table.grid();
        let dim = grid.dim();
        let side = match grid.mode() {
            Mode::Free => 2 * grid.n(),
            Mode::Periodic => grid.n(),
        };
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(side);
        let inverse = planner.plan_fft_inverse(side);

        let total = side.pow(dim as u32);
        let mut hat = vec![Complex64::new(0.0, 0.0); total];
        let extent = table.extent();
        let center = table.center_index() as i64;
        for (idx, &v) in table.values().iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let mut rem = idx;
            let mut pos = 0usize;
            let mut stride = 1usize;
            for _ in 0..dim {
                let k = (rem % extent) as i64 - center;
                rem /= extent;
                pos += k.rem_euclid(side as i64) as usize * stride;
                stride *= side;
            }
            hat[pos] = Complex64::new(v, 0.0);
        }
        let mut spec = Self {
            dim,
            side,
            hat: Vec::new(),
            forward,
            inverse,
        };
        spec.transform(&mut hat, false);
        spec.hat = hat;
        spec
    }

    /// Side of the transform lattice.
    pub fn side(&self) -> usize {
        self.side
    }

    /// Spectrum coefficients, row-major over `side^N`.
    pub fn coefficients(&self) -> &[Complex64] {
        &self.hat
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let plan = if inverse { &self.inverse } else { &self.forward };
        fft_nd(buf, self.side, self.dim, plan.as_ref());
    }
}

/// In-place N-dimensional transform over a cube of side `side`.
pub(crate) fn fft_nd(buf: &mut [Complex64], side: usize, dim: usize, plan: &dyn Fft<f64>) {
    // Last axis is contiguous.
    plan.process(buf);
    if dim == 1 {
        return;
    }
    let mut line = vec![Complex64::new(0.0, 0.0); side];
    for axis in 0..dim - 1 {
        let stride = side.pow((dim - 1 - axis) as u32);
        let block = stride * side;
        for base in (0..buf.len()).step_by(block) {
            for offset in 0..stride {
                let start = base + offset;
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = buf[start + k * stride];
                }
                plan.process(&mut line);
                for (k, v) in line.iter().enumerate() {
                    buf[start + k * stride] = *v;
                }
            }
        }
    }
}

/// `V = h^N Σ_y f(y) K(x - y)` via the transform path.
///
/// Values are clamped at zero when `f ≥ 0` (round-off only; the table is
/// nonnegative).
pub fn convolve(f: &Field, table: &KernelTable) -> Result<Field> {
    let grid = *f.grid();
    grid.ensure_same(table.grid(), "convolve")?;
    let spectrum = table.spectrum();
    let side = spectrum.side;
    let dim = grid.dim();
    let n = grid.n();

    let mut buf = vec![Complex64::new(0.0, 0.0); spectrum.hat.len()];
    for (i, &v) in f.values().iter().enumerate() {
        if v != 0.0 {
            buf[embed(&grid, i, side)] = Complex64::new(v, 0.0);
        }
    }
    spectrum.transform(&mut buf, false);
    for (b, k) in buf.iter_mut().zip(&spectrum.hat) {
        *b *= k;
    }
    spectrum.transform(&mut buf, true);

    let scale = grid.cell_volume() / buf.len() as f64;
    let nonneg = f.values().iter().all(|&v| v >= 0.0);
    let mut out = vec![0.0; grid.cells()];
    for (i, slot) in out.iter_mut().enumerate() {
        let v = buf[embed(&grid, i, side)].re * scale;
        *slot = if nonneg { v.max(0.0) } else { v };
    }
    debug_assert!(n <= side && dim <= MAX_DIM);
    Field::new(grid, out)
}

fn embed(grid: &GridSpec, idx: usize, side: usize) -> usize {
    let m = grid.unravel(idx);
    m[..grid.dim()].iter().fold(0, |acc, &i| acc * side + i)
}

/// Literal double sum with the same semantics as [`convolve`].
pub fn brute_force_convolve(f: &Field, table: &KernelTable) -> Result<Field> {
    let grid = *f.grid();
    grid.ensure_same(table.grid(), "brute_force_convolve")?;
    if grid.cells() > BRUTE_FORCE_LIMIT {
        return Err(Error::SizeGuard(format!(
            "brute_force_convolve needs n^N <= {BRUTE_FORCE_LIMIT}, got {}",
            grid.cells()
        )));
    }
    let dim = grid.dim();
    let cells = grid.cells();
    let mut out = vec![0.0; cells];
    let mut offset = [0i64; MAX_DIM];
    for (x, slot) in out.iter_mut().enumerate() {
        let mx = grid.unravel(x);
        let mut acc = 0.0;
        for (y, &fy) in f.values().iter().enumerate() {
            if fy == 0.0 {
                continue;
            }
            let my = grid.unravel(y);
            for a in 0..dim {
                offset[a] = mx[a] as i64 - my[a] as i64;
            }
            acc += fy * table.value_at(&offset[..dim]);
        }
        *slot = acc * grid.cell_volume();
    }
    Field::new(grid, out)
}
