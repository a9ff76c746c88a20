//! Relaxed isoperimetric problem
//!
//! `min P_K(f)` over `A_m = {0 ≤ f ≤ 1, ∫f = m}`, solved as the
//! maximization of `q(f,f) = ∫∫ f(x) f(y) K(x-y)` over the same set.
//! The objective may be convex, so the search is a multi-start ascent
//! whose output is audited by [`crate::certify`], never claimed global.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::{first_variation_certificate, Certificate, CertifyOptions};
use crate::error::{Error, Result};
use crate::grid::{convolve, Field, GridSpec};
use crate::kernels::KernelTable;
use crate::perimeter::{quadratic_form, relaxed_energy};
use crate::rearrange::{ball_radius, cell_order};
use crate::sum::{tree_dot, tree_sum};

/// Relative mass accuracy every feasible iterate satisfies.
pub const MASS_TOL: f64 = 1e-12;

const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Projected gradient with backtracking.
    Pg,
    /// Frank-Wolfe with exact line search.
    Fw,
}

impl Method {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pg" => Some(Method::Pg),
            "fw" => Some(Method::Fw),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Init {
    Ball,
    Random,
    /// A stored field, projected onto `A_m` before the first step.
    File(Field),
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub method: Method,
    /// Start of restart 0; later restarts start from seeded noise.
    pub init: Init,
    pub target_mass: f64,
    pub max_iters: usize,
    /// Relative energy change below which a run stops.
    pub stop_tol: f64,
    pub restarts: usize,
    pub seed: u64,
    pub certify: CertifyOptions,
}

impl SolverConfig {
    pub fn new(target_mass: f64) -> Self {
        SolverConfig {
            method: Method::Fw,
            init: Init::Ball,
            target_mass,
            max_iters: 500,
            stop_tol: 1e-10,
            restarts: 8,
            seed: 0,
            certify: CertifyOptions::default(),
        }
    }

    fn validate(&self, grid: &GridSpec) -> Result<()> {
        if !(self.target_mass > 0.0 && self.target_mass.is_finite()) {
            return Err(Error::domain(format!("target mass {} must be positive", self.target_mass)));
        }
        check_feasible(grid, self.target_mass)?;
        if self.restarts == 0 {
            return Err(Error::domain("restarts must be at least 1"));
        }
        if self.max_iters == 0 {
            return Err(Error::domain("max_iters must be at least 1"));
        }
        if !(self.stop_tol >= 0.0) {
            return Err(Error::domain(format!("stop_tol {} must be nonnegative", self.stop_tol)));
        }
        if let Init::File(f) = &self.init {
            grid.ensure_same(f.grid(), "initial field")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    pub f: Field,
    pub energy: f64,
    pub quad: f64,
    /// `m·‖K‖ - q(f_k, f_k)` per accepted iterate, starting with the initial field.
    pub history: Vec<f64>,
    pub iterations: usize,
    /// Energy stagnation reached before `max_iters`.
    pub stagnated: bool,
    /// Stagnated and the first-variation residual is within tolerance.
    pub converged: bool,
    pub best_of: usize,
    pub certificate: Certificate,
}

impl SolverResult {
    /// `∫|f - B|` after translating `f` to the origin, `B` the centered
    /// ball density of the same mass.
    pub fn distance_to_ball(&self) -> Result<f64> {
        let ball = ball_density(*self.f.grid(), self.f.mass())?;
        let r = self.f.recenter();
        Ok(r.zip_with(&ball, |a, b| (a - b).abs())?.mass())
    }
}

fn check_feasible(grid: &GridSpec, m: f64) -> Result<()> {
    check_mass(grid.cells(), grid.cell_volume(), m)
}

fn check_mass(cells: usize, cell_volume: f64, m: f64) -> Result<()> {
    let total = cells as f64 * cell_volume;
    if !(m > 0.0) || m > total * (1.0 + MASS_TOL) {
        return Err(Error::Infeasible(format!(
            "mass {m} must lie in (0, {total}] for this box"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub values: Vec<f64>,
    pub tau: f64,
}

fn clipped_mass(g: &[f64], tau: f64) -> f64 {
    let clipped: Vec<f64> = g.iter().map(|&v| (v - tau).clamp(0.0, 1.0)).collect();
    tree_sum(&clipped)
}

/// Euclidean projection of `g` onto `{0 ≤ f ≤ 1, vol·Σ f = m}`:
/// `f = clip(g - τ, 0, 1)`.
///
/// `τ` is located between consecutive breakpoints `g_i - 1`, `g_i` of the
/// piecewise-linear mass function and then solved exactly on that piece.
pub fn project_values(g: &[f64], cell_volume: f64, m: f64) -> Result<Projection> {
    check_mass(g.len(), cell_volume, m)?;
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("projection input is not finite".into()));
    }
    let target = m / cell_volume;
    let n = g.len();
    if target >= n as f64 {
        let lo = g.iter().cloned().fold(f64::INFINITY, f64::min);
        return Ok(Projection {
            values: vec![1.0; n],
            tau: lo - 1.0,
        });
    }

    let mut bps: Vec<f64> = g.iter().flat_map(|&v| [v - 1.0, v]).collect();
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    // mass is n at the first breakpoint and 0 at the last
    let (mut lo, mut hi) = (0usize, bps.len() - 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if clipped_mass(g, bps[mid]) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let probe = 0.5 * (bps[lo] + bps[hi]);
    let (mut ones, mut free) = (0.0, Vec::new());
    for &v in g {
        if v - probe >= 1.0 {
            ones += 1.0;
        } else if v - probe > 0.0 {
            free.push(v);
        }
    }
    let mut tau = if free.is_empty() {
        bps[lo]
    } else {
        (tree_sum(&free) + ones - target) / free.len() as f64
    };

    if (clipped_mass(g, tau) - target).abs() > 1e-14 * target.max(1.0) {
        let (mut a, mut b) = (bps[0], bps[bps.len() - 1]);
        for _ in 0..200 {
            tau = 0.5 * (a + b);
            if clipped_mass(g, tau) >= target {
                a = tau;
            } else {
                b = tau;
            }
        }
    }
    Ok(Projection {
        values: g.iter().map(|&v| (v - tau).clamp(0.0, 1.0)).collect(),
        tau,
    })
}

/// [`project_values`] on a field.
pub fn project_capped_simplex(g: &Field, m: f64) -> Result<Field> {
    let p = project_values(g.values(), g.grid().cell_volume(), m)?;
    Field::new(*g.grid(), p.values)
}

/// Maximizer of `vol·Σ V·s` over `{0 ≤ s ≤ 1, vol·Σ s = m}`: ones on the
/// cells with largest `V` (ties by index), one fractional cell, zeros below.
pub fn bathtub_values(v: &[f64], cell_volume: f64, m: f64) -> Result<Vec<f64>> {
    check_mass(v.len(), cell_volume, m)?;
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    Ok(fill_order(v.len(), &idx, m / cell_volume))
}

/// [`bathtub_values`] on a field.
pub fn bathtub_argmax(v: &Field, m: f64) -> Result<Field> {
    let s = bathtub_values(v.values(), v.grid().cell_volume(), m)?;
    Field::new(*v.grid(), s)
}

fn fill_order(len: usize, order: &[usize], count: f64) -> Vec<f64> {
    let mut out = vec![0.0; len];
    let full = (count.floor() as usize).min(order.len());
    for &i in &order[..full] {
        out[i] = 1.0;
    }
    let rest = count - full as f64;
    if full < order.len() && rest > 0.0 {
        out[order[full]] = rest;
    }
    out
}

/// Centered ball of exact mass `m`: whole cells in symmetric order, the
/// remainder on the next cell.
pub fn ball_density(grid: GridSpec, m: f64) -> Result<Field> {
    check_feasible(&grid, m)?;
    if ball_radius(grid.dim(), m) > grid.half_width() {
        return Err(Error::domain(format!(
            "ball of mass {m} exceeds the box of half-width {}",
            grid.half_width()
        )));
    }
    Field::new(grid, fill_order(grid.cells(), &cell_order(&grid), m / grid.cell_volume()))
}

/// Iterate with its potential and quadratic form.
struct State {
    f: Field,
    v: Field,
    q: f64,
}

impl State {
    fn unchanged(&self) -> Self {
        State {
            f: self.f.clone(),
            v: self.v.clone(),
            q: self.q,
        }
    }

    fn new(f: Field, k: &KernelTable) -> Result<Self> {
        let v = convolve(&f, k)?;
        let q = f.grid().cell_volume() * tree_dot(f.values(), v.values());
        Ok(State { f, v, q })
    }
}

fn pg_step(s: &State, k: &KernelTable, m: f64) -> Result<State> {
    let mut eta = 1.0 / (2.0 * k.weight());
    if !eta.is_finite() || s.v.values().iter().all(|&x| x == 0.0) {
        return Ok(s.unchanged());
    }
    for _ in 0..MAX_HALVINGS {
        let g = s.f.zip_with(&s.v, |f, v| f + 2.0 * eta * v)?;
        let next = State::new(project_capped_simplex(&g, m)?, k)?;
        if next.q >= s.q {
            return Ok(next);
        }
        eta *= 0.5;
    }
    Ok(s.unchanged())
}

fn fw_step(s: &State, k: &KernelTable, m: f64) -> Result<State> {
    let vol = s.f.grid().cell_volume();
    let target = bathtub_argmax(&s.v, m)?;
    let d = target.zip_with(&s.f, |a, b| a - b)?;
    if d.values().iter().all(|&x| x == 0.0) {
        return Ok(s.unchanged());
    }
    let vd = convolve(&d, k)?;
    // q(f + t d) = q + b t + a t²
    let a = vol * tree_dot(d.values(), vd.values());
    let b = 2.0 * vol * tree_dot(d.values(), s.v.values());
    let t = if a < 0.0 {
        (-b / (2.0 * a)).clamp(0.0, 1.0)
    } else if a + b > 0.0 {
        1.0
    } else {
        0.0
    };
    if t == 0.0 {
        return Ok(s.unchanged());
    }
    let f = if t == 1.0 {
        target
    } else {
        s.f.zip_with(&d, |x, y| (x + t * y).clamp(0.0, 1.0))?
    };
    let next = State::new(f, k)?;
    if next.q < s.q {
        // round-off reversal; treat as no progress
        return Ok(s.unchanged());
    }
    Ok(next)
}

/// One projected-gradient step `P(f + 2ηV)` with `η` halved from
/// `1/(2‖K‖)` until `q` does not decrease.
pub fn ascent_step_pg(f: &Field, k: &KernelTable, m: f64) -> Result<Field> {
    Ok(pg_step(&State::new(f.clone(), k)?, k, m)?.f)
}

/// One Frank-Wolfe step toward the bathtub maximizer of `V = f∗K` with
/// exact line search on the quadratic.
pub fn ascent_step_fw(f: &Field, k: &KernelTable, m: f64) -> Result<Field> {
    Ok(fw_step(&State::new(f.clone(), k)?, k, m)?.f)
}

struct Run {
    state: State,
    history: Vec<f64>,
    iterations: usize,
    stagnated: bool,
}

fn random_start(grid: GridSpec, m: f64, seed: u64) -> Result<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..grid.cells()).map(|_| rng.gen::<f64>()).collect();
    project_capped_simplex(&Field::new(grid, noise)?, m)
}

fn start(cfg: &SolverConfig, grid: GridSpec, index: usize) -> Result<Field> {
    let m = cfg.target_mass;
    if index > 0 {
        return random_start(grid, m, cfg.seed.wrapping_add(index as u64));
    }
    match &cfg.init {
        Init::Ball => ball_density(grid, m).or_else(|_| random_start(grid, m, cfg.seed)),
        Init::Random => random_start(grid, m, cfg.seed),
        Init::File(f) => project_capped_simplex(f, m),
    }
}

fn run(cfg: &SolverConfig, k: &KernelTable, init: Field) -> Result<Run> {
    let m = cfg.target_mass;
    let weight = k.weight();
    let mut state = State::new(init, k)?;
    let mut history = vec![m * weight - state.q];
    let mut stagnated = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        let next = match cfg.method {
            Method::Pg => pg_step(&state, k, m)?,
            Method::Fw => fw_step(&state, k, m)?,
        };
        iterations += 1;
        if !next.q.is_finite() {
            return Err(Error::Numerical(format!("quadratic form diverged at iteration {iterations}")));
        }
        let (old, new) = (m * weight - state.q, m * weight - next.q);
        state = next;
        history.push(new);
        if (old - new).abs() <= cfg.stop_tol * old.abs() {
            stagnated = true;
            break;
        }
    }
    Ok(Run {
        state,
        history,
        iterations,
        stagnated,
    })
}

/// Multi-start ascent on `q` over `A_m`; the lowest final energy wins,
/// ties broken by restart index.
pub fn minimize(cfg: &SolverConfig, k: &KernelTable) -> Result<SolverResult> {
    let grid = *k.grid();
    cfg.validate(&grid)?;
    if !k.is_integrable() {
        return Err(Error::NotIntegrable(format!(
            "the relaxed problem needs K ∈ L¹; kernel {} is singular (truncate it first)",
            k.label()
        )));
    }
    if !(k.lattice_sum() > 0.0) {
        return Err(Error::domain(format!("kernel {} vanishes on the grid", k.label())));
    }
    let runs = (0..cfg.restarts)
        .into_par_iter()
        .map(|i| run(cfg, k, start(cfg, grid, i)?))
        .collect::<Result<Vec<_>>>()?;
    let weight = k.weight();
    let (best_of, best) = runs
        .into_iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| {
            let ea = cfg.target_mass * weight - a.state.q;
            let eb = cfg.target_mass * weight - b.state.q;
            ea.total_cmp(&eb).then(i.cmp(j))
        })
        .expect("at least one restart");
    let f = best.state.f;
    let certificate = first_variation_certificate(&f, k, &cfg.certify)?;
    Ok(SolverResult {
        energy: relaxed_energy(&f, k)?,
        quad: quadratic_form(&f, &f, k)?,
        converged: best.stagnated && certificate.first_variation_ok(),
        f,
        history: best.history,
        iterations: best.iterations,
        stagnated: best.stagnated,
        best_of,
        certificate,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SubadditivityPair {
    pub m1: f64,
    pub m2: f64,
    pub q1: f64,
    pub q2: f64,
    pub q12: f64,
    /// `q*(m1+m2) - q*(m1) - q*(m2)`.
    pub gap: f64,
    /// `(m1+m2) · ∫_{|z| > d} K` for the separation `d` of half the box.
    pub eps_tail: f64,
    pub superadditive: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubadditivityReport {
    pub masses: Vec<f64>,
    /// Maximal quadratic form found for each mass.
    pub quads: Vec<f64>,
    pub monotone: bool,
    pub pairs: Vec<SubadditivityPair>,
}

impl SubadditivityReport {
    pub fn holds(&self) -> bool {
        self.monotone && self.pairs.iter().all(|p| p.superadditive)
    }
}

fn separation(k: &KernelTable, m1: f64, m2: f64) -> Result<f64> {
    let grid = k.grid();
    let half = grid.half_width();
    let (r1, r2) = (ball_radius(grid.dim(), m1), ball_radius(grid.dim(), m2));
    if r1 + r2 > 0.5 * half {
        return Err(Error::Infeasible(format!(
            "masses {m1} and {m2} (radii {r1:.4}, {r2:.4}) cannot be separated by half the box of half-width {half}"
        )));
    }
    Ok(half)
}

fn pair(k: &KernelTable, m1: f64, m2: f64, q1: f64, q2: f64, q12: f64) -> Result<SubadditivityPair> {
    let d = separation(k, m1, m2)?;
    let eps_tail = (m1 + m2) * k.mass_beyond(d);
    let gap = q12 - q1 - q2;
    Ok(SubadditivityPair {
        m1,
        m2,
        q1,
        q2,
        q12,
        gap,
        eps_tail,
        superadditive: gap >= -eps_tail,
    })
}

fn solve_quads(cfg: &SolverConfig, k: &KernelTable, masses: &[f64]) -> Result<Vec<f64>> {
    masses
        .iter()
        .map(|&m| {
            let c = SolverConfig {
                target_mass: m,
                ..cfg.clone()
            };
            Ok(minimize(&c, k)?.quad)
        })
        .collect()
}

/// Solves `m1`, `m2`, `m1+m2` and checks monotonicity and superadditivity
/// of the maximal quadratic form up to the far-field slack.
pub fn subadditivity_probe(k: &KernelTable, m1: f64, m2: f64, cfg: &SolverConfig) -> Result<SubadditivityReport> {
    separation(k, m1, m2)?;
    let masses = vec![m1, m2, m1 + m2];
    let quads = solve_quads(cfg, k, &masses)?;
    let monotone = quads[2] >= quads[0].max(quads[1]);
    let p = pair(k, m1, m2, quads[0], quads[1], quads[2])?;
    Ok(SubadditivityReport {
        masses,
        quads,
        monotone,
        pairs: vec![p],
    })
}

/// Solves an increasing mass ladder once; monotonicity is checked between
/// neighbours and superadditivity on every pair whose sum is on the ladder.
pub fn subadditivity_ladder(k: &KernelTable, masses: &[f64], cfg: &SolverConfig) -> Result<SubadditivityReport> {
    if masses.len() < 2 || masses.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::domain("mass ladder must hold at least two increasing masses"));
    }
    let quads = solve_quads(cfg, k, masses)?;
    let monotone = quads.windows(2).all(|w| w[1] >= w[0]);
    let mut pairs = Vec::new();
    for i in 0..masses.len() {
        for j in i..masses.len() {
            let sum = masses[i] + masses[j];
            if let Some(l) = masses.iter().position(|&m| (m - sum).abs() <= 1e-9 * sum) {
                pairs.push(pair(k, masses[i], masses[j], quads[i], quads[j], quads[l])?);
            }
        }
    }
    Ok(SubadditivityReport {
        masses: masses.to_vec(),
        quads,
        monotone,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Mode;
    use crate::kernels::KernelSpec;
    use proptest::prelude::*;
    use rand::Rng;


    /// Closest feasible point by enumerating which coordinates sit at 0, at 1
    /// or strictly inside; the inside ones share a single shift.
    fn brute_projection(g: &[f64], target: f64) -> Vec<f64> {
        let n = g.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for code in 0..3usize.pow(n as u32) {
            let mut c = code;
            let state: Vec<usize> = (0..n)
                .map(|_| {
                    let s = c % 3;
                    c /= 3;
                    s
                })
                .collect();
            let ones = state.iter().filter(|&&s| s == 1).count() as f64;
            let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
            let x: Vec<f64> = if free.is_empty() {
                if (ones - target).abs() > 1e-12 {
                    continue;
                }
                state.iter().map(|&s| if s == 1 { 1.0 } else { 0.0 }).collect()
            } else {
                let tau = (free.iter().map(|&i| g[i]).sum::<f64>() + ones - target) / free.len() as f64;
                state
                    .iter()
                    .enumerate()
                    .map(|(i, &s)| match s {
                        0 => 0.0,
                        1 => 1.0,
                        _ => g[i] - tau,
                    })
                    .collect()
            };
            if x.iter().any(|&v| !(-1e-12..=1.0 + 1e-12).contains(&v)) {
                continue;
            }
            let d: f64 = x.iter().zip(g).map(|(a, b)| (a - b).powi(2)).sum();
            if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
                best = Some((d, x));
            }
        }
        best.unwrap().1
    }

    #[test]
    fn projection_examples() {
        let p = project_values(&[2.0, 0.5, -1.0], 1.0, 1.5).unwrap();
        assert!(p.tau.abs() < 1e-15);
        assert_eq!(p.values, vec![1.0, 0.5, 0.0]);

        let g = [0.25, 0.75, 1.0, 0.0];
        let p = project_values(&g, 1.0, 2.0).unwrap();
        assert!(p.tau.abs() < 1e-15);
        for (a, b) in p.values.iter().zip(&g) {
            assert!((a - b).abs() < 1e-15);
        }

        assert!(project_values(&g, 1.0, 4.5).is_err());
        assert_eq!(project_values(&g, 1.0, 4.0).unwrap().values, vec![1.0; 4]);
        assert!(project_values(&g, 1.0, 0.0).is_err());
    }

    #[test]
    fn bathtub_examples() {
        assert_eq!(bathtub_values(&[3.0, 1.0, 2.0], 1.0, 1.5).unwrap(), vec![1.0, 0.0, 0.5]);
        assert_eq!(bathtub_values(&[3.0, 1.0, 2.0], 1.0, 3.0).unwrap(), vec![1.0; 3]);
        // ties go to the lower index
        assert_eq!(bathtub_values(&[1.0, 2.0, 2.0, 0.0], 1.0, 1.0).unwrap(), vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn bathtub_beats_random_feasible_fields() {
        let g = GridSpec::new(2, 8, 0.5, Mode::Free).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let v = Field::new(g, (0..64).map(|_| rng.gen::<f64>()).collect()).unwrap();
        let m = 3.3;
        let s = bathtub_argmax(&v, m).unwrap();
        let best = s.inner(&v).unwrap();
        for _ in 0..100 {
            let f = random_start(g, m, rng.gen()).unwrap();
            assert!(f.inner(&v).unwrap() <= best + 1e-12);
        }
    }

    #[test]
    fn steps_are_monotone_and_feasible() {
        let g = GridSpec::with_half_width(2, 16, 2.0, Mode::Free).unwrap();
        let k = KernelSpec::gaussian(2, 0.7).unwrap().tabulate(&g).unwrap();
        let m = 2.0;
        let mut f = random_start(g, m, 3).unwrap();
        for step in [ascent_step_pg, ascent_step_fw] {
            for _ in 0..5 {
                let next = step(&f, &k, m).unwrap();
                assert!(quadratic_form(&next, &next, &k).unwrap() >= quadratic_form(&f, &f, &k).unwrap());
                assert!((next.mass() - m).abs() <= MASS_TOL * m);
                assert!(next.min() >= 0.0 && next.max() <= 1.0);
                f = next;
            }
        }
    }

    #[test]
    fn zero_kernel_leaves_f_unchanged() {
        let g = GridSpec::new(1, 8, 0.5, Mode::Free).unwrap();
        let k = KernelTable::from_values(g, vec![0.0; 15], "zero").unwrap();
        let f = random_start(g, 1.0, 1).unwrap();
        assert_eq!(ascent_step_pg(&f, &k, 1.0).unwrap().values(), f.values());
        assert_eq!(ascent_step_fw(&f, &k, 1.0).unwrap().values(), f.values());
        let mut cfg = SolverConfig::new(1.0);
        cfg.restarts = 1;
        assert!(minimize(&cfg, &k).is_err());
    }

    #[test]
    fn fw_line_search_on_convex_direction_picks_endpoint() {
        // gaussian tables are positive definite: the parabola opens upward
        let g = GridSpec::with_half_width(2, 12, 2.0, Mode::Free).unwrap();
        let k = KernelSpec::gaussian(2, 0.5).unwrap().tabulate(&g).unwrap();
        let m = 1.5;
        let f = random_start(g, m, 11).unwrap();
        let next = ascent_step_fw(&f, &k, m).unwrap();
        let s = bathtub_argmax(&convolve(&f, &k).unwrap(), m).unwrap();
        let d = s.zip_with(&f, |a, b| a - b).unwrap();
        assert!(quadratic_form(&d, &d, &k).unwrap() >= 0.0);
        assert!(next.values() == s.values() || next.values() == f.values());
        assert!(quadratic_form(&next, &next, &k).unwrap() >= quadratic_form(&f, &f, &k).unwrap());
    }

    #[test]
    fn converged_ball_is_a_fixed_point() {
        let g = GridSpec::with_half_width(2, 24, 3.0, Mode::Free).unwrap();
        let k = KernelSpec::gaussian(2, 1.0).unwrap().tabulate(&g).unwrap();
        let m = 2.0;
        let mut cfg = SolverConfig::new(m);
        cfg.restarts = 1;
        let r = minimize(&cfg, &k).unwrap();
        assert!(r.converged, "{:?}", r.certificate);
        let pg = ascent_step_pg(&r.f, &k, m).unwrap();
        let fw = ascent_step_fw(&r.f, &k, m).unwrap();
        for (a, b) in r.f.values().iter().zip(pg.values()) {
            assert!((a - b).abs() < 1e-10);
        }
        assert_eq!(fw.values(), r.f.values());
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn full_mass_forces_constant_density() {
        for mode in [Mode::Free, Mode::Periodic] {
            let g = GridSpec::new(2, 6, 0.5, mode).unwrap();
            let k = KernelSpec::gaussian(2, 0.5).unwrap().tabulate(&g).unwrap();
            let mut cfg = SolverConfig::new(g.box_volume());
            cfg.restarts = 2;
            let r = minimize(&cfg, &k).unwrap();
            assert!(r.f.values().iter().all(|&v| v == 1.0));
            match mode {
                Mode::Periodic => assert_eq!(r.energy, 0.0),
                Mode::Free => {
                    let expected = g.box_volume() * k.weight() - quadratic_form(&r.f, &r.f, &k).unwrap();
                    assert!((r.energy - expected).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn singular_kernels_refused() {
        let g = GridSpec::new(1, 16, 0.25, Mode::Free).unwrap();
        let k = KernelSpec::fractional(1, 0.5).unwrap().tabulate(&g).unwrap();
        assert!(matches!(minimize(&SolverConfig::new(1.0), &k), Err(Error::NotIntegrable(_))));
    }

    #[test]
    fn restarts_are_deterministic() {
        let g = GridSpec::with_half_width(2, 16, 2.0, Mode::Free).unwrap();
        let k = KernelSpec::gaussian(2, 0.5).unwrap().tabulate(&g).unwrap();
        let mut cfg = SolverConfig::new(1.0);
        cfg.init = Init::Random;
        cfg.restarts = 4;
        cfg.seed = 42;
        let a = minimize(&cfg, &k).unwrap();
        let b = minimize(&cfg, &k).unwrap();
        assert_eq!(a.f.values(), b.f.values());
        assert_eq!(a.best_of, b.best_of);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn equal_masses_give_equal_quads() {
        let g = GridSpec::with_half_width(2, 24, 3.0, Mode::Free).unwrap();
        let k = KernelSpec::gaussian(2, 0.5).unwrap().tabulate(&g).unwrap();
        let mut cfg = SolverConfig::new(1.0);
        cfg.restarts = 2;
        let r = subadditivity_probe(&k, 0.5, 0.5, &cfg).unwrap();
        assert_eq!(r.quads[0], r.quads[1]);
        assert!(r.holds());
        assert!(r.pairs[0].gap > 0.0);
        assert!(subadditivity_probe(&k, 5.0, 5.0, &cfg).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]
        #[test]
        fn projection_matches_brute_force(
            g in proptest::collection::vec(-2.0f64..3.0, 1..=6),
            frac in 0.01f64..1.0,
        ) {
            let target = frac * g.len() as f64;
            let p = project_values(&g, 1.0, target).unwrap();
            let oracle = brute_projection(&g, target);
            for (a, b) in p.values.iter().zip(&oracle) {
                prop_assert!((a - b).abs() < 1e-10, "{:?} vs {:?}", p.values, oracle);
            }
            prop_assert!((p.values.iter().sum::<f64>() - target).abs() <= 1e-12 * target);
        }
    }
}
