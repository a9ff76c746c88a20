//! Structural checks on kernels: integrability, lower bound near the
//! origin, positive definiteness, and the sampled positivity condition.

use serde::Serialize;

use super::quadrature::{lens_volume, sphere_rule};
use super::{KernelSpec, KernelTable, L1Norm};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, Mode, MAX_DIM};

const MAX_SHELLS: usize = 200;
const SHELL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct IntegrabilityReport {
    pub l1_norm: L1Norm,
    pub condition_int_holds: bool,
    /// Estimate of `∫ min(|x|,1) K(x) dx` (last partial value if divergent).
    pub estimate: f64,
    pub shells_inner: usize,
    pub shells_outer: usize,
    pub diagnostic: Option<String>,
}

struct ShellSum {
    value: f64,
    shells: usize,
    converged: bool,
    ratio: f64,
}

/// `∫_S ∫_{r ∈ [a,b]} w(r) f(rθ) r^{N-1} dr dθ` with `panels` Gauss panels.
fn shell(spec: &KernelSpec, weight: &impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let dim = spec.dim();
    let rule = super::quadrature::gauss_legendre(8);
    let width = (b - a) / panels as f64;
    let mut x = [0.0; MAX_DIM];
    let mut acc = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        for &(t, wt) in &rule {
            let r = lo + 0.5 * width * (t + 1.0);
            let radial = 0.5 * width * wt * weight(r) * r.powi(dim as i32 - 1);
            let mut ang = 0.0;
            for (theta, w) in sphere_rule(dim) {
                for k in 0..dim {
                    x[k] = r * theta[k];
                }
                ang += w * spec.value(&x[..dim]);
            }
            acc += radial * ang;
        }
    }
    acc
}

/// Sum of dyadic shells `[r0 q^j, r0 q^{j+1}]` moving inward (`inward`) or
/// outward, with geometric extrapolation of the remainder. Converged when
/// successive extrapolated totals agree to `SHELL_TOL` relative.
fn shell_series(
    spec: &KernelSpec,
    weight: &impl Fn(f64) -> f64,
    r0: f64,
    inward: bool,
    h: f64,
) -> ShellSum {
    let mut partial = 0.0;
    let mut prev_shell: Option<f64> = None;
    let mut prev_estimate: Option<f64> = None;
    let mut ratio = f64::NAN;
    for j in 0..MAX_SHELLS {
        let (a, b) = if inward {
            (r0 * 0.5f64.powi(j as i32 + 1), r0 * 0.5f64.powi(j as i32))
        } else {
            (r0 * 2f64.powi(j as i32), r0 * 2f64.powi(j as i32 + 1))
        };
        let panels = ((b - a) / h).ceil().clamp(1.0, 32.0) as usize;
        let c = shell(spec, weight, a, b, panels);
        partial += c;
        let mut estimate = partial;
        if let Some(p) = prev_shell {
            if p > 0.0 {
                ratio = c / p;
                if ratio < 1.0 {
                    estimate += c * ratio / (1.0 - ratio);
                }
            }
        }
        prev_shell = Some(c);
        if let Some(pe) = prev_estimate {
            let scale = estimate.abs().max(f64::MIN_POSITIVE);
            if (estimate - pe).abs() < SHELL_TOL * scale && (ratio.is_nan() || ratio < 1.0) {
                return ShellSum {
                    value: estimate,
                    shells: j + 1,
                    converged: true,
                    ratio,
                };
            }
        }
        prev_estimate = Some(estimate);
        if c == 0.0 && j > 2 && partial.abs() > 0.0 && !inward {
            return ShellSum {
                value: partial,
                shells: j + 1,
                converged: true,
                ratio: 0.0,
            };
        }
    }
    ShellSum {
        value: partial,
        shells: MAX_SHELLS,
        converged: false,
        ratio,
    }
}

/// Radial quadrature estimate of `‖K‖₁`.
pub(crate) fn radial_l1(spec: &KernelSpec) -> f64 {
    let one = |_: f64| 1.0;
    let inner = shell_series(spec, &one, 1.0, true, 0.05);
    let outer = shell_series(spec, &one, 1.0, false, 0.05);
    inner.value + outer.value
}

/// Estimate `∫ min(|x|,1) K(x) dx` by shells anchored at `r = 1`, panels of
/// width at most the probe spacing.
pub fn check_integrability(spec: &KernelSpec, probe_grid: &GridSpec) -> Result<IntegrabilityReport> {
    if spec.dim() != probe_grid.dim() {
        return Err(Error::GridMismatch(format!(
            "kernel dimension {} vs probe grid dimension {}",
            spec.dim(),
            probe_grid.dim()
        )));
    }
    let h = probe_grid.h();
    let weight = |r: f64| r.min(1.0);
    let inner = shell_series(spec, &weight, 1.0, true, h);
    let outer = shell_series(spec, &weight, 1.0, false, h);
    let holds = inner.converged && outer.converged;
    let diagnostic = if holds {
        None
    } else {
        let side = if !inner.converged { &inner } else { &outer };
        Some(format!(
            "{} shells did not settle after {} dyadic shells (last contribution ratio {:.4}, partial sum {:.6e})",
            if !inner.converged { "inner" } else { "outer" },
            side.shells,
            side.ratio,
            side.value
        ))
    };

    let l1_norm = match spec.l1_norm_analytic() {
        Some(v) => v,
        None if !holds => L1Norm::Infinite,
        None => {
            let one = |_: f64| 1.0;
            let a = shell_series(spec, &one, 1.0, true, h);
            let b = shell_series(spec, &one, 1.0, false, h);
            if a.converged && b.converged {
                L1Norm::Finite(a.value + b.value)
            } else {
                L1Norm::Infinite
            }
        }
    };
    Ok(IntegrabilityReport {
        l1_norm,
        condition_int_holds: holds,
        estimate: inner.value + outer.value,
        shells_inner: inner.shells,
        shells_outer: outer.shells,
        diagnostic,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerBound {
    pub mu: f64,
    pub r: f64,
}

/// Lower bound `K ≥ μ` on `B(0, r)` read off the table within the box.
///
/// The core is the set of offsets closer to the origin than the first
/// vanishing entry by more than one cell (entries within a cell of the
/// support edge are partial averages). Without vanishing entries the core
/// is the whole box. Absent when an entry adjacent to the origin vanishes.
pub fn check_lower_bound(table: &KernelTable) -> Option<LowerBound> {
    let grid = table.grid();
    let dim = grid.dim();
    let h = grid.h();
    let half = (grid.n() / 2) as i64;
    let in_box: Vec<usize> = (0..table.values().len())
        .filter(|&i| table.offset(i)[..dim].iter().all(|k| k.abs() <= half))
        .filter(|&i| table.is_integrable() || table.offset(i)[..dim].iter().any(|&k| k != 0))
        .collect();
    let adjacent_zero = in_box.iter().any(|&i| {
        table.offset(i)[..dim].iter().all(|k| k.abs() <= 1) && table.values()[i] <= 0.0
    });
    if adjacent_zero {
        return None;
    }
    let first_zero = in_box
        .iter()
        .filter(|&&i| table.values()[i] <= 0.0)
        .map(|&i| table.distance(i))
        .fold(f64::INFINITY, f64::min);
    let cutoff = first_zero - h * (1.0 + 1e-9);
    let r = in_box
        .iter()
        .map(|&i| table.distance(i))
        .filter(|&d| d < cutoff)
        .fold(f64::NEG_INFINITY, f64::max);
    if !r.is_finite() || r <= 0.0 {
        return None;
    }
    let mu = in_box
        .iter()
        .filter(|&&i| table.distance(i) <= r)
        .map(|&i| table.values()[i])
        .fold(f64::INFINITY, f64::min);
    (mu > 0.0).then_some(LowerBound { mu, r })
}

#[derive(Debug, Clone, Serialize)]
pub struct PositiveDefiniteReport {
    pub is_pd: bool,
    /// Smallest real part of `h^N Σ_z K(z) e^{-2πi k·z/n}`.
    pub min_fourier_coefficient: f64,
    pub max_fourier_coefficient: f64,
}

/// Discrete Fourier transform of a periodic table; PD when every real part
/// is at least `-1e-10` times the largest.
pub fn check_positive_definite(table: &KernelTable) -> Result<PositiveDefiniteReport> {
    if table.grid().mode() != Mode::Periodic {
        return Err(Error::domain("check_positive_definite needs a periodic-mode table"));
    }
    let scale = table.grid().cell_volume();
    let (min, max) = table
        .spectrum()
        .coefficients()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
            (lo.min(c.re * scale), hi.max(c.re * scale))
        });
    Ok(PositiveDefiniteReport {
        is_pd: min >= -1e-10 * max.abs(),
        min_fourier_coefficient: min,
        max_fourier_coefficient: max,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionPosSample {
    pub x: Vec<f64>,
    pub eps: f64,
    /// `∫_{B(0,2ε)} |B(0,ε) ∩ B(z,ε)| (K(z) - K(x+z)) dz`, absent when skipped.
    pub value: Option<f64>,
    pub nonnegative: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionPosReport {
    pub samples: Vec<ConditionPosSample>,
    pub warnings: Vec<String>,
}

impl ConditionPosReport {
    /// Every evaluated sample is nonnegative.
    pub fn all_nonnegative(&self) -> bool {
        self.samples.iter().all(|s| s.nonnegative != Some(false))
    }
}

/// Lattice quadrature of the positivity integral at each `(x, ε)`; `x` is
/// rounded to the nearest lattice offset.
pub fn check_condition_pos(
    table: &KernelTable,
    sample_points: &[Vec<f64>],
    eps_list: &[f64],
) -> Result<ConditionPosReport> {
    if !table.is_integrable() {
        return Err(Error::NotIntegrable(
            "condition check needs a finite kernel at the origin; truncate first".into(),
        ));
    }
    let grid = table.grid();
    let dim = grid.dim();
    let h = grid.h();
    let vol = grid.cell_volume();
    let reach = table.center_index() as f64 * h;
    let mut samples = Vec::new();
    let mut warnings = Vec::new();
    for x in sample_points {
        if x.len() != dim {
            return Err(Error::domain(format!(
                "sample point has {} coordinates, expected {dim}",
                x.len()
            )));
        }
        let kx: Vec<i64> = x.iter().map(|v| (v / h).round() as i64).collect();
        for &eps in eps_list {
            if !(eps > 0.0) {
                return Err(Error::domain(format!("eps = {eps} must be positive")));
            }
            let mut entry = ConditionPosSample {
                x: x.clone(),
                eps,
                value: None,
                nonnegative: None,
            };
            if 2.0 * eps > reach {
                warnings.push(format!("skipped x={x:?}, eps={eps}: B(0,2ε) exceeds the table"));
                samples.push(entry);
                continue;
            }
            let mut acc = 0.0;
            let mut scale = 0.0;
            let mut skipped = false;
            let mut shifted = [0i64; MAX_DIM];
            for idx in 0..table.values().len() {
                let d = table.distance(idx);
                if d >= 2.0 * eps {
                    continue;
                }
                let off = table.offset(idx);
                for a in 0..dim {
                    shifted[a] = off[a] + kx[a];
                }
                let Some(j) = table.index_of(&shifted[..dim]) else {
                    skipped = true;
                    break;
                };
                let lens = lens_volume(dim, eps, d);
                acc += lens * (table.values()[idx] - table.values()[j]);
                scale += lens * table.values()[idx];
            }
            if skipped {
                warnings.push(format!("skipped x={x:?}, eps={eps}: x + z leaves the tabulated domain"));
            } else {
                let value = acc * vol;
                entry.value = Some(value);
                entry.nonnegative = Some(value >= -1e-12 * scale * vol);
            }
            samples.push(entry);
        }
    }
    Ok(ConditionPosReport { samples, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Field;
    use std::f64::consts::PI;

    fn periodic(dim: usize, n: usize, h: f64) -> GridSpec {
        GridSpec::new(dim, n, h, Mode::Periodic).unwrap()
    }

    #[test]
    fn integrability_examples() {
        let probe = GridSpec::new(1, 16, 0.1, Mode::Free).unwrap();
        let frac = check_integrability(&KernelSpec::fractional(1, 0.5).unwrap(), &probe).unwrap();
        assert!(frac.condition_int_holds);
        assert_eq!(frac.l1_norm, L1Norm::Infinite);
        // ∫ min(|x|,1)|x|^{-3/2} = 2 (∫_0^1 x^{-1/2} + ∫_1^∞ x^{-3/2}) = 2 (2 + 2)
        assert!((frac.estimate - 8.0).abs() < 1e-5, "{}", frac.estimate);

        let gauss = check_integrability(&KernelSpec::gaussian(2, 1.0).unwrap(), &probe.with_mode(Mode::Free)).unwrap_err();
        assert!(matches!(gauss, Error::GridMismatch(_)));
        let probe2 = GridSpec::new(2, 16, 0.1, Mode::Free).unwrap();
        let gauss = check_integrability(&KernelSpec::gaussian(2, 1.0).unwrap(), &probe2).unwrap();
        assert!(gauss.condition_int_holds);
        assert!((gauss.l1_norm.finite().unwrap() - PI).abs() < 1e-14);
    }

    #[test]
    fn injected_strong_singularity_diverges() {
        let g = GridSpec::new(1, 8, 0.25, Mode::Free).unwrap();
        let data = Field::constant(g, 0.5);
        let spec = KernelSpec::tabulated(data, None, Some(1.5)).unwrap();
        let report = check_integrability(&spec, &g).unwrap();
        assert!(!report.condition_int_holds);
        assert!(report.diagnostic.unwrap().contains("inner"));
        // the analytic criterion s < 1 agrees
        assert_eq!(spec.condition_int_analytic(), Some(false));
        // and tabulation refuses it
        assert!(matches!(spec.tabulate(&g), Err(Error::NotIntegrable(_))));
        // a mild singularity passes
        let mild = KernelSpec::tabulated(Field::constant(g, 0.5), None, Some(0.5)).unwrap();
        assert!(check_integrability(&mild, &g).unwrap().condition_int_holds);
    }

    #[test]
    fn radial_l1_of_heterogeneous_decay_kernel() {
        use crate::kernels::Modulation;
        // a(x) = 1 + 1/(1+|x|²), capped at 4, in 1D: compare with direct 1D quadrature
        let spec = KernelSpec::heterogeneous_fractional(1, 0.5, 1.0, 2.0, Modulation::RadialDecay)
            .unwrap()
            .truncate(0.25)
            .unwrap();
        let radial = radial_l1(&spec);
        let mut direct = 0.0;
        let m = 400_000;
        let top = 2000.0f64;
        // substitution x = t², dx = 2t dt, on [0, sqrt(top)]
        let tmax = top.sqrt();
        for i in 0..m {
            let t = (i as f64 + 0.5) * tmax / m as f64;
            direct += spec.value(&[t * t]) * 2.0 * t * tmax / m as f64;
        }
        // tail beyond `top`: K = x^{-3/2}
        direct += 2.0 / top.sqrt();
        direct *= 2.0;
        assert!((radial - direct).abs() < 1e-4 * direct, "{radial} vs {direct}");
    }

    #[test]
    fn lower_bound_examples() {
        let g = GridSpec::new(1, 32, 0.1, Mode::Free).unwrap();
        let ball = KernelSpec::ball_indicator(1, 2.0, 0.5).unwrap().tabulate(&g).unwrap();
        let lb = check_lower_bound(&ball).unwrap();
        assert!((lb.mu - 2.0).abs() < 1e-12, "{lb:?}");
        assert!((lb.r - 0.5).abs() <= 0.1 + 1e-12, "{lb:?}");

        for dim in 1..=2 {
            let g = GridSpec::with_half_width(dim, 64, 3.0, Mode::Free).unwrap();
            let t = KernelSpec::gaussian(dim, 1.0).unwrap().tabulate(&g).unwrap();
            let lb = check_lower_bound(&t).unwrap();
            // oracle: smallest tabulated value inside the box
            let oracle = (0..t.values().len())
                .filter(|&i| t.offset(i)[..dim].iter().all(|k| k.abs() <= 32))
                .map(|i| t.values()[i])
                .fold(f64::INFINITY, f64::min);
            assert_eq!(lb.mu, oracle);
            let corner = (-9.0 * dim as f64).exp();
            assert!((lb.mu / corner - 1.0).abs() < 0.15, "{dim}: {lb:?}");
            assert!((lb.r - 3.0 * (dim as f64).sqrt()).abs() < 1e-9);
        }

        let annulus = KernelSpec::annulus_indicator(1, 1.0, 1.0, 2.0).unwrap().tabulate(&g).unwrap();
        assert_eq!(check_lower_bound(&annulus), None);
    }

    fn direct_dft_min(table: &KernelTable) -> f64 {
        // 1D periodic oracle
        let n = table.grid().n();
        (0..n)
            .map(|k| {
                (0..n)
                    .map(|i| {
                        let z = table.offset(i)[0] as f64;
                        table.values()[i] * (2.0 * PI * k as f64 * z / n as f64).cos()
                    })
                    .sum::<f64>()
                    * table.grid().h()
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn positive_definiteness() {
        let g = periodic(1, 64, 0.1);
        let gauss = KernelSpec::gaussian(1, 0.5).unwrap().tabulate(&g).unwrap();
        let rep = check_positive_definite(&gauss).unwrap();
        assert!(rep.is_pd);
        assert!((rep.min_fourier_coefficient - direct_dft_min(&gauss)).abs() < 1e-12);

        let ann = KernelSpec::annulus_indicator(1, 1.0, 1.0, 2.0).unwrap().tabulate(&g).unwrap();
        let rep = check_positive_definite(&ann).unwrap();
        assert!(!rep.is_pd);
        assert!(direct_dft_min(&ann) < 0.0);
        assert!((rep.min_fourier_coefficient - direct_dft_min(&ann)).abs() < 1e-12);

        let doubled = gauss.add(&gauss).unwrap();
        assert!(check_positive_definite(&doubled).unwrap().is_pd);

        let free = GridSpec::new(1, 64, 0.1, Mode::Free).unwrap();
        let t = KernelSpec::gaussian(1, 0.5).unwrap().tabulate(&free).unwrap();
        assert!(check_positive_definite(&t).is_err());
    }

    #[test]
    fn condition_pos_examples() {
        let g = GridSpec::new(2, 32, 0.1, Mode::Free).unwrap();
        let t = KernelSpec::gaussian(2, 0.8).unwrap().tabulate(&g).unwrap();
        let xs = vec![vec![0.0, 0.0], vec![0.3, -0.2], vec![1.0, 0.5]];
        let rep = check_condition_pos(&t, &xs, &[0.05, 0.2, 0.4]).unwrap();
        for s in &rep.samples {
            let v = s.value.unwrap();
            if s.x == vec![0.0, 0.0] {
                assert_eq!(v, 0.0);
            } else {
                assert!(v > 0.0, "{s:?}");
            }
        }
        assert!(rep.all_nonnegative());
        // x + z far outside the table is skipped with a warning
        let far = check_condition_pos(&t, &[vec![3.0, 3.0]], &[0.4]).unwrap();
        assert!(far.samples[0].value.is_none());
        assert_eq!(far.warnings.len(), 1);
        assert!(check_condition_pos(
            &KernelSpec::fractional(2, 0.5).unwrap().tabulate(&g).unwrap(),
            &xs,
            &[0.1]
        )
        .is_err());
    }

    #[test]
    fn condition_pos_matches_fine_quadrature() {
        // 1D gaussian, x = 0.5, ε = 0.3: ∫_{-0.6}^{0.6} (0.6 - |z|)(K(z) - K(z + 0.5)) dz
        let sigma = 0.7;
        let k = |z: f64| (-z * z / (sigma * sigma)).exp();
        let m = 200_000;
        let mut exact = 0.0;
        for i in 0..m {
            let z = -0.6 + (i as f64 + 0.5) * 1.2 / m as f64;
            exact += (0.6 - z.abs()) * (k(z) - k(z + 0.5)) * 1.2 / m as f64;
        }
        let g = GridSpec::new(1, 512, 0.005, Mode::Free).unwrap();
        let t = KernelSpec::gaussian(1, sigma).unwrap().tabulate(&g).unwrap();
        let rep = check_condition_pos(&t, &[vec![0.5]], &[0.3]).unwrap();
        let v = rep.samples[0].value.unwrap();
        assert!((v - exact).abs() < 1e-3 * exact.abs(), "{v} vs {exact}");
    }
}
