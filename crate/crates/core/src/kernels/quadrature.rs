//! Quadrature rules for kernel tabulation and audits.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::sync::OnceLock;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub(crate) fn gauss_legendre(q: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(q);
    for i in 0..q {
        let mut x = (PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=q {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if q == 1 {
                p0 = 1.0;
                p1 = x;
            }
            dp = q as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Gauss–Legendre rule mapped to `[0, 1]`.
fn unit_rule(q: usize) -> &'static [(f64, f64)] {
    static RULES: [OnceLock<Vec<(f64, f64)>>; 9] = [const { OnceLock::new() }; 9];
    RULES[q].get_or_init(|| {
        gauss_legendre(q)
            .into_iter()
            .map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w))
            .collect()
    })
}

/// Composite rule on `[-1, 1]` with `panels` equal panels of `q` points.
fn composite(panels: usize, q: usize) -> Vec<(f64, f64)> {
    let width = 2.0 / panels as f64;
    let mut out = Vec::new();
    for p in 0..panels {
        let a = -1.0 + p as f64 * width;
        for &(x, w) in unit_rule(q) {
            out.push((a + width * x, width * w));
        }
    }
    out
}

/// Points `p` on the surface of `[-1,1]^N` with area weights.
pub(crate) fn cube_surface_rule(dim: usize) -> &'static [([f64; 3], f64)] {
    static RULES: [OnceLock<Vec<([f64; 3], f64)>>; 4] = [const { OnceLock::new() }; 4];
    RULES[dim].get_or_init(|| {
        let mut out = Vec::new();
        match dim {
            1 => {
                out.push(([1.0, 0.0, 0.0], 1.0));
                out.push(([-1.0, 0.0, 0.0], 1.0));
            }
            2 => {
                let line = composite(8, 8);
                for axis in 0..2 {
                    for sign in [-1.0, 1.0] {
                        for &(u, w) in &line {
                            let mut p = [0.0; 3];
                            p[axis] = sign;
                            p[1 - axis] = u;
                            out.push((p, w));
                        }
                    }
                }
            }
            3 => {
                let line = composite(6, 6);
                for axis in 0..3 {
                    let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
                    for sign in [-1.0, 1.0] {
                        for &(u, wu) in &line {
                            for &(v, wv) in &line {
                                let mut p = [0.0; 3];
                                p[axis] = sign;
                                p[a] = u;
                                p[b] = v;
                                out.push((p, wu * wv));
                            }
                        }
                    }
                }
            }
            _ => unreachable!("dimension <= 3"),
        }
        out
    })
}

/// Directions on the unit sphere `S^{N-1}` with solid-angle weights
/// (central projection of the cube surface, `dΩ = dA / |p|^N`).
pub(crate) fn sphere_rule(dim: usize) -> &'static [([f64; 3], f64)] {
    static RULES: [OnceLock<Vec<([f64; 3], f64)>>; 4] = [const { OnceLock::new() }; 4];
    RULES[dim].get_or_init(|| {
        cube_surface_rule(dim)
            .iter()
            .map(|(p, w)| {
                let r = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                ([p[0] / r, p[1] / r, p[2] / r], w / r.powi(dim as i32))
            })
            .collect()
    })
}

/// `∫ f` over the complement of `[-R, R]^N`, by rays through the cube surface
/// and dyadic shells in the ray parameter.
pub(crate) fn cone_tail(f: impl Fn(&[f64]) -> f64, dim: usize, half_width: f64) -> f64 {
    let radial = unit_rule(8);
    let mut total = 0.0;
    let mut x = [0.0; 3];
    for j in 0..64 {
        let (a, b) = (2f64.powi(j), 2f64.powi(j + 1));
        let mut shell = 0.0;
        for &(p, wp) in cube_surface_rule(dim) {
            for &(u, wu) in radial {
                let t = a + (b - a) * u;
                for k in 0..dim {
                    x[k] = t * half_width * p[k];
                }
                shell += wp * wu * (b - a) * t.powi(dim as i32 - 1) * f(&x[..dim]);
            }
        }
        shell *= half_width.powi(dim as i32);
        total += shell;
        if j >= 4 && shell.abs() <= 1e-14 * total.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    total
}

/// Tensor Gauss rule of order `q` over the box `lo + [0, side]^N`.
fn box_rule(g: &impl Fn(&[f64]) -> f64, lo: &[f64; 3], side: f64, dim: usize, q: usize) -> f64 {
    let rule = unit_rule(q);
    let mut x = [0.0; 3];
    let mut acc = 0.0;
    let total = q.pow(dim as u32);
    for m in 0..total {
        let mut rem = m;
        let mut w = 1.0;
        for a in 0..dim {
            let (t, wt) = rule[rem % q];
            rem /= q;
            x[a] = lo[a] + side * t;
            w *= wt;
        }
        acc += w * g(&x[..dim]);
    }
    acc * side.powi(dim as i32)
}

fn children(lo: &[f64; 3], side: f64, dim: usize) -> impl Iterator<Item = [f64; 3]> + '_ {
    let half = 0.5 * side;
    (0..1usize << dim).map(move |c| {
        let mut child = *lo;
        for (a, slot) in child.iter_mut().enumerate().take(dim) {
            if c >> a & 1 == 1 {
                *slot += half;
            }
        }
        child
    })
}

struct Node {
    lo: [f64; 3],
    side: f64,
    coarse: Vec<f64>,
    fine: f64,
    err: f64,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

const ADAPTIVE_ORDER: usize = 4;
const FIXED_ORDER: usize = 3;

fn make_node(g: &impl Fn(&[f64]) -> f64, lo: [f64; 3], side: f64, coarse_total: f64, dim: usize) -> Node {
    let coarse: Vec<f64> = children(&lo, side, dim)
        .map(|c| box_rule(g, &c, 0.5 * side, dim, ADAPTIVE_ORDER))
        .collect();
    let fine: f64 = coarse.iter().sum();
    Node {
        lo,
        side,
        coarse,
        fine,
        err: (fine - coarse_total).abs(),
    }
}

/// Integrand of a cell-pair average: `K(z + w) Π(1 - |w_a|/h) / h^N` on `[-h, h]^N`.
fn tent_integrand<'a>(k: &'a impl Fn(&[f64]) -> f64, z: &'a [f64], h: f64) -> impl Fn(&[f64]) -> f64 + 'a {
    let dim = z.len();
    let norm = h.powi(dim as i32);
    move |w: &[f64]| {
        let mut x = [0.0; 3];
        let mut tent = 1.0;
        for a in 0..dim {
            x[a] = z[a] + w[a];
            tent *= 1.0 - w[a].abs() / h;
        }
        if tent <= 0.0 {
            return 0.0;
        }
        tent * k(&x[..dim]) / norm
    }
}

fn orthants(dim: usize, h: f64) -> impl Iterator<Item = [f64; 3]> {
    (0..1usize << dim).map(move |c| {
        let mut lo = [0.0; 3];
        for (a, slot) in lo.iter_mut().enumerate().take(dim) {
            *slot = if c >> a & 1 == 1 { 0.0 } else { -h };
        }
        lo
    })
}

/// Average of `K(x - y)` over pairs of cells whose centers differ by `z`,
/// by globally adaptive dyadic subdivision.
pub(crate) fn pair_average_adaptive(
    k: &impl Fn(&[f64]) -> f64,
    z: &[f64],
    h: f64,
    rel_tol: f64,
    max_splits: usize,
) -> f64 {
    let dim = z.len();
    let g = tent_integrand(k, z, h);
    let mut heap = BinaryHeap::new();
    for lo in orthants(dim, h) {
        let coarse = box_rule(&g, &lo, h, dim, ADAPTIVE_ORDER);
        heap.push(make_node(&g, lo, h, coarse, dim));
    }
    let mut total: f64 = heap.iter().map(|n| n.fine).sum();
    let mut err: f64 = heap.iter().map(|n| n.err).sum();
    for _ in 0..max_splits {
        if err <= rel_tol * total.abs() {
            break;
        }
        let node = heap.pop().expect("nonempty heap");
        total -= node.fine;
        err -= node.err;
        let half = 0.5 * node.side;
        for (child, coarse) in children(&node.lo, node.side, dim).zip(node.coarse) {
            let c = make_node(&g, child, half, coarse, dim);
            total += c.fine;
            err += c.err;
            heap.push(c);
        }
        err = err.max(0.0);
    }
    heap.iter().map(|n| n.fine).sum()
}

/// Same average with a fixed tensor Gauss rule on each half-cell.
pub(crate) fn pair_average_fixed(k: &impl Fn(&[f64]) -> f64, z: &[f64], h: f64) -> f64 {
    let dim = z.len();
    let g = tent_integrand(k, z, h);
    orthants(dim, h)
        .map(|lo| box_rule(&g, &lo, h, dim, FIXED_ORDER))
        .sum()
}

/// Volume of `B(0,ε) ∩ B(z,ε)` in `R^N` for `|z| = d`.
pub fn lens_volume(dim: usize, eps: f64, d: f64) -> f64 {
    if d >= 2.0 * eps {
        return 0.0;
    }
    match dim {
        1 => 2.0 * eps - d,
        2 => 2.0 * eps * eps * (d / (2.0 * eps)).acos() - 0.5 * d * (4.0 * eps * eps - d * d).sqrt(),
        3 => PI * (4.0 * eps + d) * (2.0 * eps - d).powi(2) / 12.0,
        _ => unreachable!("dimension <= 3"),
    }
}
