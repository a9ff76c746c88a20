//! Command driver: executes a [`RunConfig`] and writes its artifacts.
//!
//! Every result is a JSON record `{operation, inputs_hash, seed, value,
//! corrections, tolerances, passed}`. Nothing time- or host-dependent is
//! recorded, so identical configurations give byte-identical reports.

use std::fs;
use std::io::BufWriter;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::certify::{compact_support_check, first_variation_certificate, potential_audit};
use crate::checks::{run_checks, CheckSettings, Status};
use crate::config::{Command, RunConfig};
use crate::error::{Error, Result};
use crate::grid::io::{write_csv, write_nlpg1};
use crate::grid::Mode;
use crate::kernels::{
    check_condition_pos, check_integrability, check_lower_bound, check_positive_definite, Family, KernelTable, L1Norm,
};
use crate::perimeter::perimeter_set;
use crate::rearrange::isoperimetric_profile;
use crate::solver::{minimize, Init, Method};

#[derive(Debug, Clone, Serialize)]
pub struct Record {
    pub operation: String,
    pub inputs_hash: String,
    pub seed: u64,
    pub value: Value,
    pub corrections: Value,
    pub tolerances: Value,
    pub passed: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub records: Vec<Record>,
    /// No invariant was violated.
    pub passed: bool,
    pub artifacts: Vec<PathBuf>,
    /// Human-readable lines for the terminal.
    pub summary: Vec<String>,
}

/// SHA-256 over the normalized configuration and every file it references.
pub fn inputs_hash(cfg: &RunConfig) -> Result<String> {
    let mut h = Sha256::new();
    h.update(cfg.canonical.as_bytes());
    let mut files: Vec<PathBuf> = cfg.input.iter().cloned().collect();
    if let Family::Tabulated { path: Some(p), .. } = cfg.kernel.family() {
        files.push(p.clone());
    }
    for p in files {
        h.update(fs::read(&p)?);
    }
    if let Some(Init::File(f)) = cfg.solver.as_ref().map(|s| &s.init) {
        let mut buf = Vec::new();
        write_nlpg1(f, &mut buf)?;
        h.update(&buf);
    }
    Ok(hex::encode(h.finalize()))
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    hash: String,
    records: Vec<Record>,
    artifacts: Vec<PathBuf>,
    summary: Vec<String>,
}

impl Ctx<'_> {
    fn record(&mut self, operation: &str, value: Value, corrections: Value, tolerances: Value, passed: Option<bool>) {
        self.records.push(Record {
            operation: operation.into(),
            inputs_hash: self.hash.clone(),
            seed: self.cfg.seed,
            value,
            corrections,
            tolerances,
            passed,
        });
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cfg.output_dir.join(name)
    }

    fn write_with(&mut self, name: &str, f: impl FnOnce(BufWriter<fs::File>) -> Result<()>) -> Result<()> {
        let p = self.path(name);
        f(BufWriter::new(fs::File::create(&p)?))?;
        self.artifacts.push(p);
        Ok(())
    }
}

fn l1_json(l: L1Norm) -> Value {
    match l {
        L1Norm::Finite(v) => json!(v),
        L1Norm::Infinite => json!("infinite"),
    }
}

fn table_tolerances(cfg: &RunConfig) -> Value {
    json!({
        "tabulation_rel_tol": cfg.tabulate.rel_tol,
        "refined_radius": cfg.tabulate.refined_radius,
    })
}

fn tabulate(cfg: &RunConfig) -> Result<KernelTable> {
    cfg.kernel.tabulate_with(&cfg.grid, &cfg.tabulate)
}

fn cmd_kernel(ctx: &mut Ctx) -> Result<bool> {
    let cfg = ctx.cfg;
    let integ = check_integrability(&cfg.kernel, &cfg.grid)?;
    ctx.summary.push(format!(
        "condition (int): {}  ‖K‖₁ = {}",
        integ.condition_int_holds,
        l1_json(integ.l1_norm)
    ));
    ctx.record(
        "check_integrability",
        serde_json::to_value(&integ)?,
        json!({}),
        json!({ "shell_rel_tol": 1e-6 }),
        None,
    );
    if !integ.condition_int_holds {
        return Ok(true);
    }
    let table = tabulate(cfg)?;
    ctx.record(
        "tabulate",
        json!({
            "label": table.label(),
            "lattice_sum": table.lattice_sum(),
            "weight": table.weight(),
            "l1_norm": l1_json(table.l1_norm()),
            "integrable": table.is_integrable(),
        }),
        json!({ "tail": table.tail().value, "tail_analytic": table.tail().analytic }),
        table_tolerances(cfg),
        None,
    );
    let lb = check_lower_bound(&table);
    ctx.summary.push(match lb {
        Some(b) => format!("lower bound: K ≥ {:.6e} on B(0, {:.4})", b.mu, b.r),
        None => "lower bound: none".into(),
    });
    ctx.record("check_lower_bound", serde_json::to_value(lb)?, json!({}), json!({}), None);

    let periodic = cfg.kernel.tabulate_with(&cfg.grid.with_mode(Mode::Periodic), &cfg.tabulate)?;
    let pd = check_positive_definite(&periodic)?;
    ctx.summary.push(format!("positive definite: {}", pd.is_pd));
    ctx.record(
        "check_positive_definite",
        serde_json::to_value(&pd)?,
        json!({}),
        json!({ "relative": 1e-10 }),
        None,
    );

    if table.is_integrable() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let dim = cfg.grid.dim();
        let reach = 0.25 * cfg.grid.half_width();
        let points: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..dim).map(|_| rng.gen_range(-reach..reach)).collect())
            .collect();
        let h = cfg.grid.h();
        let pos = check_condition_pos(&table, &points, &[2.0 * h, 4.0 * h])?;
        ctx.summary.push(format!("condition (pos) on samples: {}", pos.all_nonnegative()));
        ctx.record(
            "check_condition_pos",
            serde_json::to_value(&pos)?,
            json!({}),
            table_tolerances(cfg),
            None,
        );
    }
    Ok(true)
}

fn cmd_perimeter(ctx: &mut Ctx) -> Result<bool> {
    let cfg = ctx.cfg;
    let e = cfg.load_input()?;
    e.ensure_indicator("perimeter input")?;
    let table = tabulate(cfg)?;
    let per = perimeter_set(&e, &table)?;
    let tail = if cfg.grid.mode() == Mode::Free {
        e.mass() * table.tail().value
    } else {
        0.0
    };
    ctx.summary.push(format!("Per_K(E) = {per:.12e}  (|E| = {})", e.mass()));
    ctx.record(
        "perimeter_set",
        json!({ "per": per, "mass": e.mass(), "kernel": table.label() }),
        json!({ "tail_term": tail, "tail_analytic": table.tail().analytic }),
        table_tolerances(cfg),
        None,
    );
    Ok(true)
}

fn cmd_profile(ctx: &mut Ctx) -> Result<bool> {
    let cfg = ctx.cfg;
    let table = tabulate(cfg)?;
    let masses = &cfg.profile.as_ref().expect("validated").masses;
    let p = isoperimetric_profile(&table, masses)?;
    let l1 = p.l1_norm.finite();
    let rows: Vec<Value> = p
        .masses
        .iter()
        .zip(&p.g_values)
        .map(|(m, g)| {
            let bound = l1.map(|l| l * m);
            json!({ "m": m, "g": g, "g_over_m": g / m, "bound": bound,
                    "within_bound": bound.map(|b| *g <= b * (1.0 + 1e-12)) })
        })
        .collect();
    let ok = rows.iter().all(|r| r["within_bound"].as_bool() != Some(false));
    ctx.summary.push(format!("profile: {} masses, g(m) ≤ ‖K‖₁ m: {ok}", p.masses.len()));
    if cfg.formats.csv {
        ctx.write_with("profile.csv", |w| p.write_csv(w))?;
    }
    ctx.record(
        "isoperimetric_profile",
        json!({ "kernel": p.kernel, "rows": rows }),
        json!({ "tail": table.tail().value }),
        json!({ "bound_relative": 1e-12, "tabulation_rel_tol": cfg.tabulate.rel_tol }),
        Some(ok),
    );
    Ok(ok)
}

fn cmd_minimize(ctx: &mut Ctx) -> Result<bool> {
    let cfg = ctx.cfg;
    let table = tabulate(cfg)?;
    let scfg = cfg.solver.as_ref().expect("validated");
    let r = minimize(scfg, &table)?;
    let monotone = r.history.windows(2).all(|w| w[1] <= w[0]);
    let mass_ok = (r.f.mass() - scfg.target_mass).abs() <= 1e-12 * scfg.target_mass;
    let ok = monotone && mass_ok && r.f.min() >= 0.0 && r.f.max() <= 1.0;
    ctx.summary.push(format!(
        "minimize: energy = {:.12e}  iterations = {}  best restart = {}  converged = {}",
        r.energy, r.iterations, r.best_of, r.converged
    ));
    ctx.summary.push(format!("certificate passed: {}", r.certificate.passed));
    if cfg.formats.nlpg1 {
        ctx.write_with("minimizer.nlpg1", |w| write_nlpg1(&r.f, w))?;
    }
    if cfg.formats.csv {
        ctx.write_with("minimizer.csv", |w| write_csv(&r.f, w))?;
    }
    ctx.record(
        "minimize",
        json!({
            "method": match scfg.method { Method::Pg => "pg", Method::Fw => "fw" },
            "mass": r.f.mass(),
            "energy": r.energy,
            "quad": r.quad,
            "iterations": r.iterations,
            "stagnated": r.stagnated,
            "converged": r.converged,
            "best_of": r.best_of,
            "restarts": scfg.restarts,
            "history": r.history,
            "history_monotone": monotone,
        }),
        json!({ "tail": table.tail().value }),
        json!({ "stop_tol": scfg.stop_tol, "mass_relative": 1e-12, "tabulation_rel_tol": cfg.tabulate.rel_tol }),
        Some(ok),
    );
    ctx.record(
        "first_variation_certificate",
        serde_json::to_value(&r.certificate)?,
        json!({}),
        json!({ "tol_f": r.certificate.tol_f, "tol_v": r.certificate.tol_v }),
        Some(r.certificate.passed),
    );
    Ok(ok)
}

fn cmd_certify(ctx: &mut Ctx) -> Result<bool> {
    let cfg = ctx.cfg;
    let f = cfg.load_input()?;
    let table = tabulate(cfg)?;
    let cert = first_variation_certificate(&f, &table, &cfg.certify)?;
    let pot = potential_audit(&f, &table)?;
    let support = compact_support_check(&f, cfg.certify.tol_f);
    ctx.summary.push(format!(
        "certificate: c = {:.10e}  |S| = {}  |N| = {}  |I| = {}  passed = {}",
        cert.c, cert.cells_s, cert.cells_n, cert.cells_i, cert.passed
    ));
    ctx.summary.push(format!(
        "potential bounds: {}  mass identity: {}  compact support: {}",
        pot.bounds_ok, pot.mass_ok, support.ok
    ));
    ctx.record(
        "first_variation_certificate",
        serde_json::to_value(&cert)?,
        json!({}),
        json!({ "tol_f": cert.tol_f, "tol_v": cert.tol_v, "sv_trials": cfg.certify.trials }),
        Some(cert.passed),
    );
    ctx.record(
        "potential_audit",
        serde_json::to_value(&pot)?,
        json!({ "tail": table.tail().value }),
        json!({ "v_bound": pot.v_bound, "mass_tol": pot.mass_tol }),
        Some(pot.bounds_ok && pot.mass_ok),
    );
    ctx.record(
        "compact_support_check",
        serde_json::to_value(&support)?,
        json!({}),
        json!({ "fraction_of_half_width": 0.9, "tol_f": cfg.certify.tol_f }),
        Some(support.ok),
    );
    Ok(cert.passed)
}

fn cmd_check(ctx: &mut Ctx) -> Result<bool> {
    let cfg = ctx.cfg;
    let s = CheckSettings {
        trials: cfg.check.trials,
        thresholds: cfg.check.thresholds,
        c_iso: cfg.check.c_iso,
        ladder: cfg.check.ladder.clone(),
        seed: cfg.seed,
    };
    let results = run_checks(&cfg.kernel, &cfg.grid, &cfg.tabulate, &s)?;
    ctx.summary.push(format!("{:<20} {:<8} {:>7} {:>12} {:>10}", "suite", "status", "trials", "worst", "tol"));
    for r in &results {
        let status = match r.status {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Skipped => "skipped",
        };
        ctx.summary.push(format!(
            "{:<20} {:<8} {:>7} {:>12.4e} {:>10.1e}  {}",
            r.name, status, r.trials, r.worst, r.tolerance, r.detail
        ));
    }
    let ok = results.iter().all(|r| r.status != Status::Fail);
    let failed: Vec<&str> = results.iter().filter(|r| r.status == Status::Fail).map(|r| r.name).collect();
    if !failed.is_empty() {
        ctx.summary.push(format!("violated: {} (inputs {})", failed.join(", "), ctx.hash));
    }
    ctx.record(
        "check",
        serde_json::to_value(&results)?,
        json!({}),
        json!({ "c_iso": s.c_iso, "thresholds": s.thresholds, "trials": s.trials }),
        Some(ok),
    );
    Ok(ok)
}

/// Runs the configured command, writing `<command>.json` (when JSON output
/// is enabled) and any command-specific artifacts into the output directory.
pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    fs::create_dir_all(&cfg.output_dir)?;
    let mut ctx = Ctx {
        cfg,
        hash: inputs_hash(cfg)?,
        records: Vec::new(),
        artifacts: Vec::new(),
        summary: vec![format!("seed = {}", cfg.seed)],
    };
    let passed = match cfg.command {
        Command::Kernel => cmd_kernel(&mut ctx)?,
        Command::Perimeter => cmd_perimeter(&mut ctx)?,
        Command::Profile => cmd_profile(&mut ctx)?,
        Command::Minimize => cmd_minimize(&mut ctx)?,
        Command::Certify => cmd_certify(&mut ctx)?,
        Command::Check => cmd_check(&mut ctx)?,
    };
    if cfg.formats.json {
        let name = format!("{}.json", cfg.command.name());
        let records = ctx.records.clone();
        ctx.write_with(&name, |mut w| {
            serde_json::to_writer_pretty(&mut w, &records)?;
            use std::io::Write;
            writeln!(w)?;
            Ok(())
        })?;
    }
    Ok(Outcome {
        records: ctx.records,
        passed,
        artifacts: ctx.artifacts,
        summary: ctx.summary,
    })
}

/// Process exit status for a failed run.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numerical(_) | Error::SizeGuard(_) => 3,
        _ => 2,
    }
}
