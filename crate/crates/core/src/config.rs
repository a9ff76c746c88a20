//! Run configuration: a flat INI-style text format.
//!
//! ```text
//! command = minimize
//! seed = 7
//!
//! [kernel]
//! family = gaussian
//! dim = 2
//! sigma = 1.0
//!
//! [grid]
//! n = 64
//! half_width = 4
//!
//! [solver]
//! mass = 3.14159
//! ```
//!
//! `#` and `;` start comments. Unknown sections and keys are errors, and a
//! misspelled key is reported with the nearest valid one.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::certify::CertifyOptions;
use crate::error::{Error, Result};
use crate::grid::io::load_nlpg1;
use crate::grid::{Field, GridSpec, Mode};
use crate::kernels::{Anisotropy, KernelSpec, Modulation, TabulateOptions};
use crate::rearrange::DEFAULT_C_ISO;
use crate::solver::{Init, Method, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Kernel,
    Perimeter,
    Profile,
    Minimize,
    Certify,
    Check,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Kernel => "kernel",
            Command::Perimeter => "perimeter",
            Command::Profile => "profile",
            Command::Minimize => "minimize",
            Command::Certify => "certify",
            Command::Check => "check",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [
            Command::Kernel,
            Command::Perimeter,
            Command::Profile,
            Command::Minimize,
            Command::Certify,
            Command::Check,
        ]
        .into_iter()
        .find(|c| c.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Formats {
    pub json: bool,
    pub csv: bool,
    pub nlpg1: bool,
}

impl Formats {
    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        let mut f = Formats::default();
        for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            match item {
                "json" => f.json = true,
                "csv" => f.csv = true,
                "nlpg1" => f.nlpg1 = true,
                other => return Err(format!("unknown format '{other}' (expected json, csv, nlpg1)")),
            }
        }
        if f == Formats::default() {
            return Err("formats must name at least one of json, csv, nlpg1".into());
        }
        Ok(f)
    }
}

#[derive(Debug, Clone)]
pub struct ProfileConfig {
    pub masses: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CheckConfig {
    pub trials: usize,
    pub thresholds: usize,
    pub c_iso: f64,
    /// Mass ladder for the subadditivity suite; derived from the box when empty.
    pub ladder: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub kernel: KernelSpec,
    pub grid: GridSpec,
    pub tabulate: TabulateOptions,
    pub solver: Option<SolverConfig>,
    pub output_dir: PathBuf,
    pub formats: Formats,
    pub input: Option<PathBuf>,
    pub profile: Option<ProfileConfig>,
    pub check: CheckConfig,
    pub certify: CertifyOptions,
    /// Normalized `section.key = value` lines, the basis of the inputs hash.
    pub canonical: String,
}

const TOP_KEYS: &[&str] = &["command", "seed"];
const SECTIONS: &[(&str, &[&str])] = &[
    (
        "kernel",
        &[
            "family",
            "dim",
            "s",
            "sigma",
            "mu",
            "r",
            "inner",
            "outer",
            "norm",
            "matrix",
            "lambda",
            "upper",
            "modulation",
            "path",
            "singular_order",
            "truncate",
        ],
    ),
    ("grid", &["n", "half_width", "h", "mode", "images", "refined_radius"]),
    (
        "solver",
        &["method", "init", "init_path", "mass", "max_iters", "stop_tol", "restarts"],
    ),
    ("output", &["dir", "formats"]),
    ("input", &["field"]),
    ("profile", &["masses", "m_min", "m_max", "count"]),
    ("check", &["trials", "thresholds", "c_iso", "ladder"]),
    ("certify", &["tol_f", "tol_v", "trials"]),
];

fn nearest<'a>(word: &str, candidates: impl Iterator<Item = &'a str>) -> Option<&'a str> {
    candidates
        .map(|c| (strsim::levenshtein(word, c), c))
        .min()
        .filter(|(d, c)| *d <= c.len().max(word.len()) / 2 + 1)
        .map(|(_, c)| c)
}

/// Raw `section -> key -> (value, line)` map after syntax checks.
struct Raw {
    entries: BTreeMap<String, BTreeMap<String, (String, usize)>>,
}

fn lex(text: &str) -> Result<Raw> {
    let mut entries: BTreeMap<String, BTreeMap<String, (String, usize)>> = BTreeMap::new();
    entries.insert(String::new(), BTreeMap::new());
    let mut section = String::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::config(line_no, format!("unterminated section header '{line}'")))?
                .trim();
            if !SECTIONS.iter().any(|(s, _)| *s == name) {
                let hint = nearest(name, SECTIONS.iter().map(|(s, _)| *s))
                    .map(|s| format!("; did you mean [{s}]?"))
                    .unwrap_or_default();
                return Err(Error::config(line_no, format!("unknown section [{name}]{hint}")));
            }
            if entries.contains_key(name) {
                return Err(Error::config(line_no, format!("section [{name}] appears twice")));
            }
            section = name.to_string();
            entries.insert(section.clone(), BTreeMap::new());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::config(line_no, format!("expected 'key = value', found '{line}'")))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(Error::config(line_no, format!("empty key or value in '{line}'")));
        }
        let allowed: &[&str] = if section.is_empty() {
            TOP_KEYS
        } else {
            SECTIONS.iter().find(|(s, _)| *s == section).map(|(_, k)| *k).unwrap_or(&[])
        };
        if !allowed.contains(&key) {
            let place = if section.is_empty() {
                "at top level".to_string()
            } else {
                format!("in [{section}]")
            };
            let hint = nearest(key, allowed.iter().copied())
                .map(|k| format!("; did you mean '{k}'?"))
                .unwrap_or_else(|| format!("; valid keys: {}", allowed.join(", ")));
            return Err(Error::config(line_no, format!("unknown key '{key}' {place}{hint}")));
        }
        let map = entries.get_mut(&section).expect("section inserted");
        if map.insert(key.to_string(), (value.to_string(), line_no)).is_some() {
            return Err(Error::config(line_no, format!("key '{key}' set twice")));
        }
    }
    Ok(Raw { entries })
}

/// Typed accessor over one section; tracks the header line for errors.
struct Section<'a> {
    name: &'a str,
    map: Option<&'a BTreeMap<String, (String, usize)>>,
    line: usize,
}

impl<'a> Section<'a> {
    fn present(&self) -> bool {
        self.map.is_some()
    }

    fn raw(&self, key: &str) -> Option<(&'a str, usize)> {
        self.map.and_then(|m| m.get(key)).map(|(v, l)| (v.as_str(), *l))
    }

    fn has(&self, key: &str) -> bool {
        self.raw(key).is_some()
    }

    fn require(&self, key: &str) -> Result<(&'a str, usize)> {
        self.raw(key).ok_or_else(|| {
            Error::config(self.line, format!("missing required key '{key}' in [{}]", self.name))
        })
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::config(line, format!("{}.{key} = '{v}' is not {what}", self.name))),
        }
    }

    fn real(&self, key: &str) -> Result<Option<f64>> {
        self.parse::<f64>(key, "a number")
    }

    fn req_real(&self, key: &str) -> Result<f64> {
        self.require(key)?;
        Ok(self.real(key)?.expect("checked"))
    }

    fn count(&self, key: &str) -> Result<Option<usize>> {
        self.parse::<usize>(key, "a nonnegative integer")
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => v
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|_| Error::config(line, format!("{}.{key} = '{v}' is not a list of numbers", self.name))),
        }
    }

    fn line_of(&self, key: &str) -> usize {
        self.raw(key).map(|(_, l)| l).unwrap_or(self.line)
    }

    /// Rejects keys that the chosen variant does not read.
    fn only(&self, used: &[&str], context: &str) -> Result<()> {
        if let Some(map) = self.map {
            for (k, (_, line)) in map {
                if !used.contains(&k.as_str()) {
                    return Err(Error::config(*line, format!("key '{k}' is not used by {context}")));
                }
            }
        }
        Ok(())
    }
}

fn section_line(text: &str, name: &str) -> usize {
    text.lines()
        .position(|l| l.trim().trim_start_matches('[').starts_with(name) && l.trim().starts_with('['))
        .map(|i| i + 1)
        .unwrap_or(0)
}

fn domain_at(line: usize, e: Error) -> Error {
    match e {
        Error::Domain(m) => Error::config(line, m),
        other => other,
    }
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let path = Path::new(p);
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

fn existing(base: &Path, v: &str, line: usize) -> Result<PathBuf> {
    let p = resolve(base, v);
    if !p.exists() {
        return Err(Error::config(line, format!("file '{}' does not exist", p.display())));
    }
    Ok(p)
}

fn parse_kernel(sec: &Section, base: &Path) -> Result<KernelSpec> {
    if !sec.present() {
        return Err(Error::config(0, "missing [kernel] section"));
    }
    let (family, fline) = sec.require("family")?;
    let dim = match family {
        "tabulated" => None,
        _ => Some(
            sec.count("dim")?
                .ok_or_else(|| Error::config(sec.line, "missing required key 'dim' in [kernel]"))?,
        ),
    };
    let at = |key: &str| sec.line_of(key);
    let spec = match family {
        "fractional" => {
            sec.only(&["family", "dim", "s", "truncate"], "the fractional family")?;
            KernelSpec::fractional(dim.unwrap(), sec.req_real("s")?).map_err(|e| domain_at(at("s"), e))?
        }
        "anisotropic_fractional" => {
            sec.only(&["family", "dim", "s", "norm", "matrix", "truncate"], "the anisotropic_fractional family")?;
            let norm = match (sec.raw("norm"), sec.list("matrix")?) {
                (Some(_), Some(_)) => {
                    return Err(Error::config(at("matrix"), "set either 'norm' or 'matrix', not both"))
                }
                (Some((v, line)), None) => {
                    let p = if v == "inf" {
                        f64::INFINITY
                    } else {
                        v.parse::<f64>()
                            .map_err(|_| Error::config(line, format!("kernel.norm = '{v}' is not a number or 'inf'")))?
                    };
                    Anisotropy::PNorm(p)
                }
                (None, Some(m)) => Anisotropy::Matrix(m),
                (None, None) => {
                    return Err(Error::config(sec.line, "anisotropic_fractional needs 'norm' or 'matrix'"))
                }
            };
            KernelSpec::anisotropic_fractional(dim.unwrap(), sec.req_real("s")?, norm)
                .map_err(|e| domain_at(at("norm").max(at("matrix")), e))?
        }
        "heterogeneous_fractional" => {
            sec.only(
                &["family", "dim", "s", "lambda", "upper", "modulation", "truncate"],
                "the heterogeneous_fractional family",
            )?;
            let (mname, mline) = sec.require("modulation")?;
            let modulation = Modulation::parse(mname).ok_or_else(|| {
                Error::config(mline, format!("unknown modulation '{mname}' (angular, skew, radial_decay)"))
            })?;
            KernelSpec::heterogeneous_fractional(
                dim.unwrap(),
                sec.req_real("s")?,
                sec.req_real("lambda")?,
                sec.req_real("upper")?,
                modulation,
            )
            .map_err(|e| domain_at(at("s"), e))?
        }
        "gaussian" => {
            sec.only(&["family", "dim", "sigma", "truncate"], "the gaussian family")?;
            KernelSpec::gaussian(dim.unwrap(), sec.req_real("sigma")?).map_err(|e| domain_at(at("sigma"), e))?
        }
        "ball_indicator" => {
            sec.only(&["family", "dim", "mu", "r", "truncate"], "the ball_indicator family")?;
            KernelSpec::ball_indicator(dim.unwrap(), sec.req_real("mu")?, sec.req_real("r")?)
                .map_err(|e| domain_at(at("r"), e))?
        }
        "annulus_indicator" => {
            sec.only(&["family", "dim", "mu", "inner", "outer", "truncate"], "the annulus_indicator family")?;
            KernelSpec::annulus_indicator(
                dim.unwrap(),
                sec.req_real("mu")?,
                sec.req_real("inner")?,
                sec.req_real("outer")?,
            )
            .map_err(|e| domain_at(at("outer"), e))?
        }
        "tabulated" => {
            sec.only(&["family", "dim", "path", "singular_order", "truncate"], "the tabulated family")?;
            let (p, line) = sec.require("path")?;
            let path = existing(base, p, line)?;
            let data = load_nlpg1(&path).map_err(|e| Error::config(line, format!("cannot load '{p}': {e}")))?;
            if let Some(d) = dim {
                if d != data.grid().dim() {
                    return Err(Error::config(at("dim"), format!("dim = {d} but the table is {}-dimensional", data.grid().dim())));
                }
            }
            KernelSpec::tabulated(data, Some(path), sec.real("singular_order")?)
                .map_err(|e| domain_at(line, e))?
        }
        other => {
            let families = [
                "fractional",
                "anisotropic_fractional",
                "heterogeneous_fractional",
                "gaussian",
                "ball_indicator",
                "annulus_indicator",
                "tabulated",
            ];
            let hint = nearest(other, families.into_iter())
                .map(|f| format!("; did you mean '{f}'?"))
                .unwrap_or_default();
            return Err(Error::config(fline, format!("unknown kernel family '{other}'{hint}")));
        }
    };
    match sec.real("truncate")? {
        Some(eps) => spec.truncate(eps).map_err(|e| domain_at(at("truncate"), e)),
        None => Ok(spec),
    }
}

fn parse_grid(sec: &Section, dim: usize) -> Result<(GridSpec, TabulateOptions)> {
    if !sec.present() {
        return Err(Error::config(0, "missing [grid] section"));
    }
    let (_, nline) = sec.require("n")?;
    let n = sec.count("n")?.expect("required");
    let mode = match sec.raw("mode") {
        None | Some(("free", _)) => Mode::Free,
        Some(("periodic", _)) => Mode::Periodic,
        Some((v, line)) => return Err(Error::config(line, format!("grid.mode = '{v}' (expected free or periodic)"))),
    };
    let grid = match (sec.real("half_width")?, sec.real("h")?) {
        (Some(w), None) => GridSpec::with_half_width(dim, n, w, mode),
        (None, Some(h)) => GridSpec::new(dim, n, h, mode),
        (Some(_), Some(_)) => return Err(Error::config(sec.line_of("h"), "set either 'half_width' or 'h', not both")),
        (None, None) => return Err(Error::config(sec.line, "[grid] needs 'half_width' or 'h'")),
    }
    .map_err(|e| domain_at(nline, e))?;
    let mut opts = TabulateOptions::default();
    if let Some(p) = sec.count("images")? {
        opts.images = p;
    }
    if let Some(r) = sec.count("refined_radius")? {
        opts.refined_radius = r;
    }
    Ok((grid, opts))
}

fn parse_solver(sec: &Section, base: &Path, grid: &GridSpec, seed: u64) -> Result<SolverConfig> {
    let mass = sec.req_real("mass")?;
    let mut cfg = SolverConfig::new(mass);
    cfg.seed = seed;
    if let Some((m, line)) = sec.raw("method") {
        cfg.method = Method::parse(m).ok_or_else(|| Error::config(line, format!("solver.method = '{m}' (expected pg or fw)")))?;
    }
    cfg.init = match sec.raw("init") {
        None | Some(("ball", _)) => Init::Ball,
        Some(("random", _)) => Init::Random,
        Some(("file", line)) => {
            let (p, pline) = sec
                .raw("init_path")
                .ok_or_else(|| Error::config(line, "init = file needs 'init_path'"))?;
            let f = load_nlpg1(existing(base, p, pline)?)?;
            if f.grid() != grid {
                return Err(Error::config(pline, "initial field lives on a different grid"));
            }
            Init::File(f)
        }
        Some((v, line)) => return Err(Error::config(line, format!("solver.init = '{v}' (expected ball, random or file)"))),
    };
    if sec.has("init_path") && !matches!(cfg.init, Init::File(_)) {
        return Err(Error::config(sec.line_of("init_path"), "init_path is only read with init = file"));
    }
    if let Some(v) = sec.count("max_iters")? {
        cfg.max_iters = v;
    }
    if let Some(v) = sec.real("stop_tol")? {
        cfg.stop_tol = v;
    }
    if let Some(v) = sec.count("restarts")? {
        cfg.restarts = v;
    }
    if !(mass > 0.0) || mass > grid.box_volume() {
        return Err(Error::config(
            sec.line_of("mass"),
            format!("solver.mass = {mass} must lie in (0, {}]", grid.box_volume()),
        ));
    }
    if cfg.restarts == 0 {
        return Err(Error::config(sec.line_of("restarts"), "solver.restarts must be at least 1"));
    }
    if cfg.max_iters == 0 {
        return Err(Error::config(sec.line_of("max_iters"), "solver.max_iters must be at least 1"));
    }
    Ok(cfg)
}

fn parse_profile(sec: &Section) -> Result<ProfileConfig> {
    let masses = match (sec.list("masses")?, sec.real("m_min")?, sec.real("m_max")?, sec.count("count")?) {
        (Some(m), None, None, None) => m,
        (None, Some(a), Some(b), Some(c)) if c >= 2 && a > 0.0 && b > a => {
            (0..c).map(|i| a + (b - a) * i as f64 / (c - 1) as f64).collect()
        }
        (None, Some(_), Some(_), Some(_)) => {
            return Err(Error::config(sec.line, "profile range needs 0 < m_min < m_max and count ≥ 2"))
        }
        _ => return Err(Error::config(sec.line, "[profile] needs 'masses' or all of 'm_min', 'm_max', 'count'")),
    };
    if masses.is_empty() || masses.iter().any(|m| !(*m > 0.0)) {
        return Err(Error::config(sec.line_of("masses"), "profile masses must be positive"));
    }
    Ok(ProfileConfig { masses })
}

/// Parses and validates a configuration; relative paths resolve against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<RunConfig> {
    let raw = lex(text)?;
    let sec = |name: &'static str| Section {
        name,
        map: raw.entries.get(name),
        line: section_line(text, name),
    };
    let top = Section {
        name: "top level",
        map: raw.entries.get(""),
        line: 1,
    };
    let (cmd, cline) = top
        .raw("command")
        .ok_or_else(|| Error::config(1, "missing top-level 'command'"))?;
    let command = Command::parse(cmd).ok_or_else(|| {
        Error::config(
            cline,
            format!("unknown command '{cmd}' (kernel, perimeter, profile, minimize, certify, check)"),
        )
    })?;
    let seed = top.parse::<u64>("seed", "an unsigned 64-bit integer")?.unwrap_or(0);

    let kernel = parse_kernel(&sec("kernel"), base)?;
    let (grid, tabulate) = parse_grid(&sec("grid"), kernel.dim())?;

    let solver_sec = sec("solver");
    let solver = if solver_sec.present() {
        Some(parse_solver(&solver_sec, base, &grid, seed)?)
    } else {
        None
    };

    let out = sec("output");
    let output_dir = out.raw("dir").map(|(d, _)| resolve(base, d)).unwrap_or_else(|| base.join("out"));
    let formats = match out.raw("formats") {
        Some((v, line)) => Formats::parse(v).map_err(|m| Error::config(line, m))?,
        None => Formats {
            json: true,
            csv: true,
            nlpg1: true,
        },
    };

    let input_sec = sec("input");
    let input = match input_sec.raw("field") {
        Some((p, line)) => Some(existing(base, p, line)?),
        None => None,
    };

    let profile_sec = sec("profile");
    let profile = if profile_sec.present() {
        Some(parse_profile(&profile_sec)?)
    } else {
        None
    };

    let check_sec = sec("check");
    let check = CheckConfig {
        trials: check_sec.count("trials")?.unwrap_or(50),
        thresholds: check_sec.count("thresholds")?.unwrap_or(256),
        c_iso: check_sec.real("c_iso")?.unwrap_or(DEFAULT_C_ISO),
        ladder: check_sec.list("ladder")?.unwrap_or_default(),
    };
    if check.thresholds < 2 {
        return Err(Error::config(check_sec.line_of("thresholds"), "check.thresholds must be at least 2"));
    }
    if !(check.c_iso > 0.0) {
        return Err(Error::config(check_sec.line_of("c_iso"), "check.c_iso must be positive"));
    }

    let cert_sec = sec("certify");
    let mut certify = CertifyOptions {
        seed,
        ..CertifyOptions::default()
    };
    if let Some(v) = cert_sec.real("tol_f")? {
        if !(0.0..0.5).contains(&v) {
            return Err(Error::config(cert_sec.line_of("tol_f"), "certify.tol_f must lie in [0, 0.5)"));
        }
        certify.tol_f = v;
    }
    if let Some(v) = cert_sec.real("tol_v")? {
        if !(v >= 0.0) {
            return Err(Error::config(cert_sec.line_of("tol_v"), "certify.tol_v must be nonnegative"));
        }
        certify.tol_v = Some(v);
    }
    if let Some(v) = cert_sec.count("trials")? {
        certify.trials = v;
    }

    let needs = |present: bool, what: &str| -> Result<()> {
        if present {
            Ok(())
        } else {
            Err(Error::config(cline, format!("command '{cmd}' needs {what}")))
        }
    };
    match command {
        Command::Minimize => needs(solver.is_some(), "a [solver] section")?,
        Command::Profile => needs(profile.is_some(), "a [profile] section")?,
        Command::Perimeter | Command::Certify => needs(input.is_some(), "[input] field = PATH")?,
        Command::Kernel | Command::Check => {}
    }
    let solver = solver.map(|mut s| {
        s.certify = certify;
        s
    });

    let mut canonical = String::new();
    // where results go is not an input
    for (section, map) in raw.entries.iter().filter(|(s, _)| s.as_str() != "output") {
        for (k, (v, _)) in map {
            let name = if section.is_empty() { k.clone() } else { format!("{section}.{k}") };
            canonical.push_str(&format!("{name} = {v}\n"));
        }
    }

    Ok(RunConfig {
        command,
        seed,
        kernel,
        grid,
        tabulate,
        solver,
        output_dir,
        formats,
        input,
        profile,
        check,
        certify,
        canonical,
    })
}

impl RunConfig {
    pub fn load_input(&self) -> Result<Field> {
        let path = self
            .input
            .as_ref()
            .ok_or_else(|| Error::config(0, "no [input] field configured"))?;
        let f = load_nlpg1(path)?;
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch(format!(
                "input field {} is on {:?}, config grid is {:?}",
                path.display(),
                f.grid(),
                self.grid
            )));
        }
        Ok(f)
    }

    /// Seed override from the command line; reaches the solver and certificate.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.certify.seed = seed;
        if let Some(s) = self.solver.as_mut() {
            s.seed = seed;
            s.certify.seed = seed;
        }
        self.canonical = self
            .canonical
            .lines()
            .filter(|l| !l.starts_with("seed = "))
            .map(|l| format!("{l}\n"))
            .collect::<String>()
            + &format!("seed = {seed}\n");
    }
}
