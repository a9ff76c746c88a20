//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Reference values come from oracles
//! written here against the raw kernel tables, not from library shortcuts.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nlperim::certify::{fit_poincare_constant, median, poincare_check, CertifyOptions};
use nlperim::checks::{random_layers, random_set, random_smooth};
use nlperim::grid::{brute_force_convolve, convolve, MAX_DIM};
use nlperim::kernels::{check_positive_definite, Anisotropy};
use nlperim::perimeter::{j_coarea, j_direct, perimeter_set, relaxed_energy, submodularity_deficit};
use nlperim::rearrange::{isoperimetric_check, isoperimetric_profile, riesz_check};
use nlperim::solver::{minimize, project_values, subadditivity_ladder, Method, SolverConfig};
use nlperim::{Field, GridSpec, KernelSpec, KernelTable, Mode};

struct Verdict {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: impl Into<String>) -> Verdict {
    Verdict { ok, detail: detail.into() }
}

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

fn coords(grid: &GridSpec, i: usize) -> [usize; MAX_DIM] {
    grid.unravel(i)
}

fn offset(grid: &GridSpec, x: usize, y: usize) -> [i64; MAX_DIM] {
    let (a, b) = (coords(grid, x), coords(grid, y));
    let mut out = [0; MAX_DIM];
    for d in 0..grid.dim() {
        out[d] = a[d] as i64 - b[d] as i64;
    }
    out
}

fn kernel_at(k: &KernelTable, grid: &GridSpec, x: usize, y: usize) -> f64 {
    k.value_at(&offset(grid, x, y)[..grid.dim()])
}

/// `V(x) = h^N Σ_y f(y) K(x - y)` by the literal double loop.
fn oracle_convolve(f: &Field, k: &KernelTable) -> Vec<f64> {
    let g = *f.grid();
    let vol = g.cell_volume();
    (0..g.cells())
        .map(|x| {
            vol * (0..g.cells())
                .map(|y| f.values()[y] * kernel_at(k, &g, x, y))
                .sum::<f64>()
        })
        .collect()
}

/// `h^{2N} Σ_{x,y} f(x) g(y) K(x - y)`.
fn oracle_quad(f: &Field, g: &Field, k: &KernelTable) -> f64 {
    let grid = *f.grid();
    let vol = grid.cell_volume();
    let gv = g.values();
    let mut s = 0.0;
    for x in (0..grid.cells()).filter(|&x| f.values()[x] != 0.0) {
        for y in (0..grid.cells()).filter(|&y| gv[y] != 0.0) {
            s += f.values()[x] * gv[y] * kernel_at(k, &grid, x, y);
        }
    }
    vol * vol * s
}

/// `½ ∫∫ |u(x) - u(y)| K(x - y)` for the zero extension of a free-mode `u`:
/// box pairs by double sum, box-to-exterior pairs through the total weight.
fn oracle_j(u: &Field, k: &KernelTable) -> f64 {
    let grid = *u.grid();
    let vol = grid.cell_volume();
    let v = u.values();
    let mut inside = 0.0;
    let mut outside = 0.0;
    for x in 0..grid.cells() {
        let mut seen = 0.0;
        for y in 0..grid.cells() {
            let kz = kernel_at(k, &grid, x, y);
            inside += (v[x] - v[y]).abs() * kz;
            seen += kz;
        }
        outside += v[x].abs() * (k.weight() - vol * seen);
    }
    0.5 * vol * vol * inside + vol * outside
}

fn random_field(grid: GridSpec, rng: &mut impl Rng) -> Field {
    let v = (0..grid.cells()).map(|_| rng.gen_range(0.0..1.0)).collect();
    Field::new(grid, v).unwrap()
}

fn c1_oracle_convolution() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let grids = [(1, 16), (1, 32), (2, 8), (2, 16), (3, 4), (3, 8)];
    let mut worst = 0.0f64;
    let mut count = 0;
    // every (grid, mode, kernel) combination, in turn
    let mut tables = Vec::new();
    for &(dim, n) in &grids {
        for mode in [Mode::Free, Mode::Periodic] {
            let grid = GridSpec::with_half_width(dim, n, 2.0, mode).unwrap();
            for spec in [
                KernelSpec::gaussian(dim, 0.7).unwrap(),
                KernelSpec::ball_indicator(dim, 1.0, 0.9).unwrap(),
                KernelSpec::fractional(dim, 0.4).unwrap().truncate(0.2).unwrap(),
            ] {
                tables.push(spec.tabulate(&grid).unwrap());
            }
        }
    }
    for k in tables.iter().cycle().take(200) {
        let grid = *k.grid();
        let f = random_field(grid, &mut rng);
        let fast = convolve(&f, &k).unwrap();
        let reference = oracle_convolve(&f, &k);
        let lib_oracle = brute_force_convolve(&f, &k).unwrap();
        let top = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for ((a, b), c) in fast.values().iter().zip(&reference).zip(lib_oracle.values()) {
            worst = worst.max((a - b).abs() / top).max((c - b).abs() / top);
        }
        count += 1;
    }
    verdict(
        worst <= 1e-10,
        format!("{count} fields up to 16² and 8³, worst relative gap {worst:.2e} (tol 1e-10)"),
    )
}

fn c2_fractional_interval() -> Verdict {
    let s = 0.5;
    let exact = 2.0 / (s * (1.0 - s));
    let per = |n: usize| {
        let grid = GridSpec::with_half_width(1, n, 8.0, Mode::Free).unwrap();
        let k = KernelSpec::fractional(1, s).unwrap().tabulate(&grid).unwrap();
        let e = Field::indicator(grid, |x| (0.0..1.0).contains(&x[0]));
        assert!((e.mass() - 1.0).abs() < 1e-12);
        perimeter_set(&e, &k).unwrap()
    };
    let (p256, p512) = (per(256), per(512));
    let (e256, e512) = ((p256 - exact).abs() / exact, (p512 - exact).abs() / exact);
    verdict(
        e256 <= 0.02 && e512 < e256,
        format!("Per = {p256:.5} (n=256, err {e256:.2e}), {p512:.5} (n=512, err {e512:.2e}); exact {exact} (tol 2%)"),
    )
}

fn c3_structural_identities() -> Verdict {
    let grid = GridSpec::with_half_width(2, 16, 3.0, Mode::Periodic).unwrap();
    let k = KernelSpec::gaussian(2, 0.8).unwrap().tabulate(&grid).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (mut comp, mut min_def, mut cross_gap) = (0.0f64, f64::INFINITY, 0.0f64);
    for _ in 0..500 {
        let density = rng.gen_range(0.1..0.6);
        let mut draw = || {
            let v = (0..grid.cells()).map(|_| f64::from(u8::from(rng.gen_bool(density)))).collect();
            Field::new(grid, v).unwrap()
        };
        let e = draw();
        let f = draw();
        let pe = perimeter_set(&e, &k).unwrap();
        comp = comp.max(rel(pe, perimeter_set(&e.complement(), &k).unwrap()));
        let report = submodularity_deficit(&e, &f, &k).unwrap();
        let e_minus_f = e.zip_with(&f, |a, b| a * (1.0 - b)).unwrap();
        let f_minus_e = f.zip_with(&e, |a, b| a * (1.0 - b)).unwrap();
        let cross = 2.0 * oracle_quad(&e_minus_f, &f_minus_e, &k);
        let union = e.zip_with(&f, f64::max).unwrap();
        let inter = e.zip_with(&f, f64::min).unwrap();
        let deficit = pe + perimeter_set(&f, &k).unwrap()
            - perimeter_set(&union, &k).unwrap()
            - perimeter_set(&inter, &k).unwrap();
        let scale = pe.max(1e-300);
        min_def = min_def.min(report.deficit / scale);
        cross_gap = cross_gap.max((deficit - cross).abs() / scale).max((report.deficit - cross).abs() / scale);
    }
    verdict(
        comp <= 1e-12 && min_def >= -1e-10 && cross_gap <= 1e-10,
        format!(
            "500 periodic pairs: complement gap {comp:.2e} (tol 1e-12), min deficit {min_def:.2e} (tol -1e-10), \
             |deficit - 2q(E∖F, F∖E)| {cross_gap:.2e} (tol 1e-10)"
        ),
    )
}

fn c4_coarea() -> Verdict {
    let grid = GridSpec::with_half_width(2, 32, 4.0, Mode::Free).unwrap();
    let k = KernelSpec::gaussian(2, 1.0).unwrap().tabulate(&grid).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut smooth, mut layered, mut direct) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..50 {
        let u = random_smooth(grid, &mut rng);
        let reference = oracle_j(&u, &k);
        direct = direct.max(rel(j_direct(&u, &k).unwrap(), reference));
        smooth = smooth.max(rel(j_coarea(&u, &k, 256).unwrap(), reference));
        let w = random_layers(grid, &mut rng);
        layered = layered.max(rel(j_coarea(&w, &k, 256).unwrap(), oracle_j(&w, &k)));
    }
    verdict(
        smooth <= 1e-3 && layered <= 1e-10 && direct <= 1e-10,
        format!(
            "50 smooth fields: gap {smooth:.2e} (tol 1e-3); 50 piecewise-constant: {layered:.2e} (tol 1e-10); \
             direct path vs oracle {direct:.2e}"
        ),
    )
}

fn c5_isoperimetric() -> Verdict {
    let grid = GridSpec::with_half_width(2, 32, 4.0, Mode::Free).unwrap();
    let kernels = [
        KernelSpec::gaussian(2, 1.0).unwrap().tabulate(&grid).unwrap(),
        KernelSpec::anisotropic_fractional(2, 0.5, Anisotropy::Matrix(vec![2.0, 0.5, 0.5, 1.0]))
            .unwrap()
            .truncate(0.5)
            .unwrap()
            .tabulate(&grid)
            .unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let (mut iso_bad, mut riesz_bad, mut worst_iso, mut worst_riesz) = (0, 0, f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut per_gap = 0.0f64;
    for k in &kernels {
        for t in 0..500 {
            let e = random_set(grid, &mut rng);
            let iso = isoperimetric_check(&e, k, 4.0).unwrap();
            let riesz = riesz_check(&e, k, 4.0).unwrap();
            if t < 10 {
                let q = oracle_quad(&e, &e, k);
                per_gap = per_gap.max(rel(iso.per, e.mass() * k.weight() - q));
                per_gap = per_gap.max(rel(riesz.lhs, q));
            }
            iso_bad += usize::from(iso.per < iso.bound - iso.tol_iso);
            riesz_bad += usize::from(riesz.lhs > riesz.rhs + riesz.tol_iso);
            worst_iso = worst_iso.max((iso.bound - iso.per) / iso.tol_iso);
            worst_riesz = worst_riesz.max((riesz.lhs - riesz.rhs) / riesz.tol_iso);
        }
    }
    verdict(
        iso_bad == 0 && riesz_bad == 0 && per_gap <= 1e-10,
        format!(
            "1000 sets (gaussian, truncated anisotropic fractional): {iso_bad} isoperimetric and {riesz_bad} Riesz \
             violations; worst deficit / tol_iso {worst_iso:.3} and {worst_riesz:.3}; Per vs oracle {per_gap:.1e}"
        ),
    )
}

/// `∫_0^m ∫_{R∖[0,m]} min(|x-y|^{-1-s}, 1/ε)` in closed form.
fn truncated_interval_perimeter(s: f64, eps: f64, m: f64) -> f64 {
    let a = eps.powf(1.0 / (1.0 + s));
    // tail T(x) = ∫_x^∞ K; the perimeter is 2 ∫_0^m T
    let int_t = |x: f64| -> f64 {
        // ∫_0^x T
        if x <= a {
            (a * x - 0.5 * x * x) / eps + x * a.powf(-s) / s
        } else {
            0.5 * a * a / eps + a.powf(1.0 - s) / s + (x.powf(1.0 - s) - a.powf(1.0 - s)) / (s * (1.0 - s))
        }
    };
    2.0 * int_t(m)
}

fn c6_profile() -> Verdict {
    let grid = GridSpec::with_half_width(2, 64, 4.0, Mode::Free).unwrap();
    let k = KernelSpec::gaussian(2, 1.0).unwrap().tabulate(&grid).unwrap();
    let l1 = PI;
    let cell = grid.cell_volume();
    let masses: Vec<f64> = (0..12).map(|i| 4.0 * cell * 1.6f64.powi(i)).collect();
    let p = isoperimetric_profile(&k, &masses).unwrap();
    let small = p.g_values[0] / p.masses[0];
    let small_gap = (small - l1).abs() / l1;
    let bound_ok = p.masses.iter().zip(&p.g_values).all(|(m, g)| *g <= l1 * m);

    let line = GridSpec::with_half_width(1, 512, 8.0, Mode::Free).unwrap();
    let m = 0.5;
    let mut ratios = Vec::new();
    let mut closed_gap = 0.0f64;
    for eps in [0.4, 0.2, 0.1, 0.05, 0.025] {
        let ke = KernelSpec::fractional(1, 0.5).unwrap().truncate(eps).unwrap().tabulate(&line).unwrap();
        let g = isoperimetric_profile(&ke, &[m]).unwrap();
        ratios.push(g.g_values[0] / g.masses[0]);
        closed_gap = closed_gap.max(rel(g.g_values[0], truncated_interval_perimeter(0.5, eps, g.masses[0])));
    }
    let increasing = ratios.windows(2).all(|w| w[1] > w[0]);
    verdict(
        small_gap <= 0.10 && bound_ok && increasing && closed_gap <= 0.02,
        format!(
            "g(m)/m = {small:.4} at m = {:.4} vs ‖K‖₁ = {l1:.4} (gap {:.1}%, tol 10%); g ≤ ‖K‖₁m on {} rows: {bound_ok}; \
             truncated fractional g(0.5)/0.5 = {} increasing: {increasing}; closed-form gap {closed_gap:.2e}",
            p.masses[0],
            100.0 * small_gap,
            p.masses.len(),
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(" < "),
        ),
    )
}

/// Centered discrete ball density of mass `m`: whole cells by distance to
/// the origin (ties by index), the remainder on the next cell.
fn oracle_ball(grid: GridSpec, m: f64) -> Field {
    let dim = grid.dim();
    let mut order: Vec<(f64, usize)> = (0..grid.cells())
        .map(|i| {
            let c = grid.center(i);
            (c[..dim].iter().map(|v| v * v).sum::<f64>(), i)
        })
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut v = vec![0.0; grid.cells()];
    let mut left = m / grid.cell_volume();
    for &(_, i) in &order {
        if left <= 0.0 {
            break;
        }
        v[i] = left.min(1.0);
        left -= 1.0;
    }
    Field::new(grid, v).unwrap()
}

/// Smallest `∫|f(· - t) - B|` over whole-cell shifts near the barycenter.
fn distance_to_centered_ball(f: &Field, ball: &Field) -> f64 {
    let g = *f.grid();
    let dim = g.dim();
    let mut bary = vec![0.0; dim];
    for (i, &v) in f.values().iter().enumerate() {
        let c = g.center(i);
        for a in 0..dim {
            bary[a] += v * c[a];
        }
    }
    let base: Vec<i64> = bary.iter().map(|b| -(b / f.values().iter().sum::<f64>() / g.h()).round() as i64).collect();
    let mut best = f64::INFINITY;
    for dx in -2..=2 {
        for dy in -2..=2 {
            let shift = vec![base[0] + dx, base[1] + dy];
            let moved = f.shift(&shift);
            let d: f64 = moved.values().iter().zip(ball.values()).map(|(a, b)| (a - b).abs()).sum::<f64>() * g.cell_volume();
            best = best.min(d);
        }
    }
    best
}

struct SolveOutcome {
    f: Field,
    m: f64,
}

fn c7_solver(keep: &mut Option<SolveOutcome>) -> Verdict {
    let start = Instant::now();
    let grid = GridSpec::with_half_width(2, 64, 4.0, Mode::Free).unwrap();
    let k = KernelSpec::gaussian(2, 1.0).unwrap().tabulate(&grid).unwrap();
    let m = PI;
    let mut cfg = SolverConfig::new(m);
    cfg.method = Method::Fw;
    cfg.restarts = 8;
    cfg.seed = 7;
    cfg.certify = CertifyOptions {
        tol_v: Some(1e-4 * PI),
        ..CertifyOptions::default()
    };
    let r = minimize(&cfg, &k).unwrap();
    let ball = oracle_ball(grid, m);
    let ball_energy = m * k.weight() - oracle_quad(&ball, &ball, &k);
    let lib_ball_energy = relaxed_energy(&ball, &k).unwrap();
    let energy = m * k.weight() - oracle_quad(&r.f, &r.f, &k);
    let dist = distance_to_centered_ball(&r.f, &ball);
    let monotone = r.history.windows(2).all(|w| w[1] <= w[0]);
    let elapsed = start.elapsed().as_secs_f64();
    let ok = dist <= 0.05 * m
        && energy <= ball_energy + 1e-6
        && rel(energy, r.energy) <= 1e-10
        && rel(ball_energy, lib_ball_energy) <= 1e-10
        && monotone
        && r.certificate.passed
        && elapsed < 300.0;
    let detail = format!(
        "energy {energy:.8} vs ball {ball_energy:.8} (+1e-6); distance to ball {dist:.4} (tol {:.4}); \
         monotone {monotone}; certificate {} (tol_V {:.2e}); {elapsed:.1}s",
        0.05 * m,
        r.certificate.passed,
        r.certificate.tol_v
    );
    *keep = Some(SolveOutcome { f: r.f, m });
    verdict(ok, detail)
}

fn c8_indicator_collapse(solved: &Option<SolveOutcome>) -> Verdict {
    let grid = GridSpec::with_half_width(2, 32, 4.0, Mode::Periodic).unwrap();
    let gauss = check_positive_definite(&KernelSpec::gaussian(2, 1.0).unwrap().tabulate(&grid).unwrap()).unwrap();
    let annulus = check_positive_definite(
        &KernelSpec::annulus_indicator(2, 1.0, 0.5, 1.0).unwrap().tabulate(&grid).unwrap(),
    )
    .unwrap();
    let Some(s) = solved else {
        return verdict(false, "no solver result");
    };
    let vol = s.f.grid().cell_volume();
    // L¹ distance from the nearest indicator, carried by the fractional cells
    let fractional: f64 = s
        .f
        .values()
        .iter()
        .filter(|&&v| v > 1e-6 && v < 1.0 - 1e-6)
        .map(|&v| v.min(1.0 - v))
        .sum::<f64>()
        * vol;
    verdict(
        fractional <= 1e-3 * s.m && gauss.is_pd && !annulus.is_pd,
        format!(
            "fractional mass {fractional:.3e} (tol {:.3e}); gaussian PD {} (min coefficient {:.2e}); \
             annulus PD {} (min coefficient {:.2e})",
            1e-3 * s.m,
            gauss.is_pd,
            gauss.min_fourier_coefficient,
            annulus.is_pd,
            annulus.min_fourier_coefficient
        ),
    )
}

/// Exhaustive active-set solution of `min |x - g|²` subject to `0 ≤ x ≤ 1`,
/// `vol Σ x = m`.
fn oracle_projection(g: &[f64], vol: f64, m: f64) -> Vec<f64> {
    let n = g.len();
    let target = m / vol;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for code in 0..3usize.pow(n as u32) {
        let mut state = vec![0u8; n];
        let mut c = code;
        for s in state.iter_mut() {
            *s = (c % 3) as u8;
            c /= 3;
        }
        let ones = state.iter().filter(|&&s| s == 1).count() as f64;
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut x: Vec<f64> = state.iter().map(|&s| if s == 1 { 1.0 } else { 0.0 }).collect();
        if free.is_empty() {
            if (ones - target).abs() > 1e-12 {
                continue;
            }
        } else {
            let tau = (free.iter().map(|&i| g[i]).sum::<f64>() - (target - ones)) / free.len() as f64;
            for &i in &free {
                x[i] = g[i] - tau;
            }
        }
        if x.iter().any(|&v| !(-1e-12..=1.0 + 1e-12).contains(&v)) {
            continue;
        }
        let d: f64 = x.iter().zip(g).map(|(a, b)| (a - b).powi(2)).sum();
        if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
            best = Some((d, x));
        }
    }
    best.expect("feasible").1
}

fn c9_projection() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=6);
        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..3.0)).collect();
        let vol = rng.gen_range(0.1..2.0);
        let m = rng.gen_range(0.01..1.0) * n as f64 * vol;
        let got = project_values(&g, vol, m).unwrap().values;
        let want = oracle_projection(&g, vol, m);
        for (a, b) in got.iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }
    }
    verdict(worst <= 1e-10, format!("1000 vectors of length ≤ 6, worst gap {worst:.2e} (tol 1e-10)"))
}

/// Sum of compactly supported `C²` bumps of either sign, kept inside the
/// central half of the box.
fn compact_field(grid: GridSpec, rng: &mut impl Rng) -> Field {
    let half = grid.half_width();
    let bumps: Vec<([f64; 2], f64, f64)> = (0..rng.gen_range(1..=3))
        .map(|_| {
            let c = [rng.gen_range(-0.3..0.3) * half, rng.gen_range(-0.3..0.3) * half];
            (c, rng.gen_range(0.1..0.25) * half, rng.gen_range(-1.0..1.0))
        })
        .collect();
    Field::from_fn(grid, |x| {
        bumps
            .iter()
            .map(|(c, w, a)| a * (1.0 - ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) / (w * w)).max(0.0).powi(3))
            .sum()
    })
}

fn c10_poincare() -> Verdict {
    let grid = GridSpec::with_half_width(2, 32, 4.0, Mode::Free).unwrap();
    let k = KernelSpec::gaussian(2, 1.0).unwrap().tabulate(&grid).unwrap();
    let cell = grid.cell_volume();
    let top = grid.box_volume() * 0.25;
    let masses: Vec<f64> = (0..16).map(|i| cell * (top / cell).powf(i as f64 / 15.0)).collect();
    let profile = isoperimetric_profile(&k, &masses).unwrap();
    let c = fit_poincare_constant(&profile, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let (mut failures, mut worst, mut medians) = (0, 0.0f64, 0);
    for _ in 0..500 {
        let u = compact_field(grid, &mut rng);
        let p = poincare_check(&u, &k, 1.0, c, 256).unwrap();
        // m(u) = 0: {u > t} has infinite measure exactly for t < 0
        medians += usize::from(median(&u).unwrap() != 0.0);
        let lhs: f64 = u.values().iter().map(|v| v.abs()).sum::<f64>() * cell;
        failures += usize::from(!p.ok || rel(lhs, p.lhs) > 1e-12);
        if p.rhs > 0.0 {
            worst = worst.max(p.lhs / p.rhs);
        }
    }
    verdict(
        failures == 0 && medians == 0,
        format!("C = {c:.4}; 500 compactly supported fields: {failures} failures, worst ‖u‖₁ / C J {worst:.3}; nonzero medians {medians}"),
    )
}

fn c11_subadditivity() -> Verdict {
    let start = Instant::now();
    let grid = GridSpec::with_half_width(2, 32, 4.0, Mode::Free).unwrap();
    let k = KernelSpec::gaussian(2, 1.0).unwrap().tabulate(&grid).unwrap();
    let m0 = PI * (0.2 * grid.half_width()).powi(2) / 4.0;
    let ladder: Vec<f64> = (1..=5).map(|i| i as f64 * m0).collect();
    let mut cfg = SolverConfig::new(m0);
    cfg.seed = 11;
    let r = subadditivity_ladder(&k, &ladder, &cfg).unwrap();
    let worst = r.pairs.iter().map(|p| p.gap + p.eps_tail).fold(f64::INFINITY, f64::min);
    verdict(
        r.monotone && r.pairs.iter().all(|p| p.superadditive) && !r.pairs.is_empty() && start.elapsed().as_secs() < 600,
        format!(
            "ladder {:.4}·(1..5): monotone {}; {} pairs superadditive up to ε_tail, min slack {worst:.3e}; {:.1}s",
            m0,
            r.monotone,
            r.pairs.len(),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn main() {
    let mut solved = None;
    let criteria: Vec<(&str, Box<dyn FnOnce() -> Verdict + '_>)> = vec![
        ("oracle equivalence", Box::new(c1_oracle_convolution)),
        ("fractional interval", Box::new(c2_fractional_interval)),
        ("structural identities", Box::new(c3_structural_identities)),
        ("coarea", Box::new(c4_coarea)),
        ("isoperimetric and Riesz", Box::new(c5_isoperimetric)),
        ("profile asymptotics", Box::new(c6_profile)),
    ];
    let mut failed = 0;
    let mut report = |i: usize, name: &str, v: std::thread::Result<Verdict>| {
        let (ok, detail) = match v {
            Ok(v) => (v.ok, v.detail),
            Err(e) => (
                false,
                e.downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panicked".into()),
            ),
        };
        failed += usize::from(!ok);
        println!("acceptance {i:>2} [{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    };
    let timed = |f: &mut dyn FnMut() -> Verdict| {
        let t = Instant::now();
        catch_unwind(AssertUnwindSafe(f)).map(|mut v| {
            v.detail = format!("{} [{:.1}s]", v.detail, t.elapsed().as_secs_f64());
            v
        })
    };
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        let mut f = Some(f);
        report(i + 1, name, timed(&mut || f.take().unwrap()()));
    }
    report(7, "solver", timed(&mut || c7_solver(&mut solved)));
    report(8, "indicator collapse", timed(&mut || c8_indicator_collapse(&solved)));
    report(9, "projection oracle", timed(&mut c9_projection));
    report(10, "poincare", timed(&mut c10_poincare));
    report(11, "subadditivity", timed(&mut c11_subadditivity));
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 11 acceptance criteria passed");
}
