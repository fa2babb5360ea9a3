//! Configuration parsing and validation.
//!
//! The configuration format is line-oriented `section.key = value` pairs.
//! `#` starts a comment, keys are case-sensitive, arrays are comma-separated
//! values. Unknown keys are errors so typos never pass silently.

use crate::error::{Error, Result};
use std::path::PathBuf;

/// Which linear-solve path drives the optimization loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    /// Reduced-order reanalysis with multigrid-built basis vectors and an
    /// MGCG fallback.
    Mgar,
    /// Pure multigrid-preconditioned conjugate gradients every cycle.
    Mgcg,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Mgar => "mgar",
            SolverKind::Mgcg => "mgcg",
        }
    }
}

/// Per-element volumetric heat source specification.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    /// One value for every element.
    Uniform(f64),
    /// Four values for the four quadrants of a 2D domain, ordered
    /// lower-left, lower-right, upper-left, upper-right.
    Quadrants([f64; 4]),
    /// CSV file with one value per element (same layout as field exports).
    File(PathBuf),
}

/// Prescribed-temperature node set specification.
#[derive(Debug, Clone, PartialEq)]
pub enum DirichletSpec {
    /// Built-in preset: `mid-left` (2D) or `back-center` (3D).
    Preset(String),
    /// Text file with one node index per line.
    File(PathBuf),
}

/// Fully parsed and validated configuration.
///
/// Optional fields (`lp`, `n_on`, `cg_max`, `r_proj`, `dirichlet`) fall back
/// to derived defaults through the accessor methods; an explicit value always
/// wins over the fractional knob.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig {
    pub dim: usize,
    pub nel: Vec<usize>,
    pub volfrac: f64,
    pub k0: f64,
    pub kmin: f64,
    pub penal: f64,

    pub r_min: f64,
    pub alpha: f64,
    pub lp_fraction: f64,
    pub lp: Option<usize>,
    pub rebuild_every_cycle: bool,

    pub max_cycles: usize,
    pub early_stop: bool,
    pub change_tol: f64,

    pub solver: SolverKind,
    pub eps1: f64,
    pub eps2: f64,
    pub cg_max: Option<usize>,
    pub nl: usize,
    pub m_basis: usize,
    pub n_on_fraction: f64,
    pub n_on: Option<usize>,
    pub omega_jac: f64,
    pub nu_pre: usize,
    pub nu_post: usize,

    pub source: SourceSpec,
    pub dirichlet: Option<DirichletSpec>,

    pub postprocess_enabled: bool,
    pub subdiv: usize,
    pub r_proj: Option<f64>,

    pub output_dir: PathBuf,
}

impl Default for ParsedConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            nel: vec![96, 96],
            volfrac: 0.5,
            k0: 1.0,
            kmin: 1e-3,
            penal: 3.0,
            r_min: 3.0,
            alpha: 1.4 / 50.0,
            lp_fraction: 5.0 / 6.0,
            lp: None,
            rebuild_every_cycle: false,
            max_cycles: 300,
            early_stop: false,
            change_tol: 1e-3,
            solver: SolverKind::Mgar,
            eps1: 0.5,
            eps2: 1e-6,
            cg_max: None,
            nl: 3,
            m_basis: 2,
            n_on_fraction: 2.0 / 15.0,
            n_on: None,
            omega_jac: 0.6,
            nu_pre: 1,
            nu_post: 1,
            source: SourceSpec::Uniform(1e-4),
            dirichlet: None,
            postprocess_enabled: true,
            subdiv: 4,
            r_proj: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ParsedConfig {
    /// CG iteration cap; defaults to 200 in 2D and 50 in 3D.
    pub fn cg_max(&self) -> usize {
        self.cg_max.unwrap_or(if self.dim == 3 { 50 } else { 200 })
    }

    /// Design cycle before which only the full MGCG solver runs.
    pub fn n_on_cycles(&self) -> usize {
        self.n_on
            .unwrap_or_else(|| (self.n_on_fraction * self.max_cycles as f64).ceil() as usize)
    }

    /// Number of cycles over which the filter radius decays to `r_min`.
    pub fn lp_cycles(&self) -> usize {
        self.lp
            .unwrap_or_else(|| (self.lp_fraction * self.max_cycles as f64).floor() as usize)
            .max(1)
    }

    /// Domain side length in element units (largest axial count).
    pub fn domain_side(&self) -> f64 {
        *self.nel.iter().max().unwrap_or(&1) as f64
    }

    /// Dirichlet spec with the dimension-appropriate preset as default.
    pub fn dirichlet_spec(&self) -> DirichletSpec {
        self.dirichlet.clone().unwrap_or_else(|| {
            DirichletSpec::Preset(
                if self.dim == 3 { "back-center" } else { "mid-left" }.to_string(),
            )
        })
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::ConfigParse {
        line,
        msg: msg.into(),
    }
}

fn value_err(key: &str, msg: impl Into<String>) -> Error {
    Error::ConfigValue {
        key: key.to_string(),
        msg: msg.into(),
    }
}

fn parse_f64(raw: &str, key: &str, line: usize) -> Result<f64> {
    raw.trim()
        .parse::<f64>()
        .map_err(|_| parse_err(line, format!("`{key}` expects a number, got `{raw}`")))
}

fn parse_usize(raw: &str, key: &str, line: usize) -> Result<usize> {
    raw.trim()
        .parse::<usize>()
        .map_err(|_| parse_err(line, format!("`{key}` expects a non-negative integer, got `{raw}`")))
}

fn parse_bool(raw: &str, key: &str, line: usize) -> Result<bool> {
    match raw.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(parse_err(
            line,
            format!("`{key}` expects `true` or `false`, got `{raw}`"),
        )),
    }
}

/// Parses configuration text into a validated [`ParsedConfig`].
pub fn parse_config(text: &str) -> Result<ParsedConfig> {
    let mut cfg = ParsedConfig::default();
    let mut source_keys = 0usize;
    let mut dirichlet_keys = 0usize;

    for (idx, raw_line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(lineno, format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        let value = value.trim();

        match key {
            "mesh.dim" => cfg.dim = parse_usize(value, key, lineno)?,
            "mesh.nel" => {
                let mut nel = Vec::new();
                for part in value.split(',') {
                    nel.push(parse_usize(part, key, lineno)?);
                }
                cfg.nel = nel;
            }
            "problem.volfrac" => cfg.volfrac = parse_f64(value, key, lineno)?,
            "material.k0" => cfg.k0 = parse_f64(value, key, lineno)?,
            "material.kmin" => cfg.kmin = parse_f64(value, key, lineno)?,
            "material.penal" => cfg.penal = parse_f64(value, key, lineno)?,
            "filter.r_min" => cfg.r_min = parse_f64(value, key, lineno)?,
            "filter.alpha" => cfg.alpha = parse_f64(value, key, lineno)?,
            "filter.lp_fraction" => cfg.lp_fraction = parse_f64(value, key, lineno)?,
            "filter.lp" => cfg.lp = Some(parse_usize(value, key, lineno)?),
            "filter.rebuild_every_cycle" => {
                cfg.rebuild_every_cycle = parse_bool(value, key, lineno)?
            }
            "loop.max_cycles" => cfg.max_cycles = parse_usize(value, key, lineno)?,
            "loop.early_stop" => cfg.early_stop = parse_bool(value, key, lineno)?,
            "loop.change_tol" => cfg.change_tol = parse_f64(value, key, lineno)?,
            "solver.kind" => {
                cfg.solver = match value {
                    "mgar" => SolverKind::Mgar,
                    "mgcg" => SolverKind::Mgcg,
                    _ => {
                        return Err(parse_err(
                            lineno,
                            format!("`solver.kind` must be `mgar` or `mgcg`, got `{value}`"),
                        ))
                    }
                }
            }
            "solver.eps1" => cfg.eps1 = parse_f64(value, key, lineno)?,
            "solver.eps2" => cfg.eps2 = parse_f64(value, key, lineno)?,
            "solver.cg_max" => cfg.cg_max = Some(parse_usize(value, key, lineno)?),
            "solver.nl" => cfg.nl = parse_usize(value, key, lineno)?,
            "solver.m_basis" => cfg.m_basis = parse_usize(value, key, lineno)?,
            "solver.n_on_fraction" => cfg.n_on_fraction = parse_f64(value, key, lineno)?,
            "solver.n_on" => cfg.n_on = Some(parse_usize(value, key, lineno)?),
            "solver.omega_jac" => cfg.omega_jac = parse_f64(value, key, lineno)?,
            "solver.nu_pre" => cfg.nu_pre = parse_usize(value, key, lineno)?,
            "solver.nu_post" => cfg.nu_post = parse_usize(value, key, lineno)?,
            "source.uniform" => {
                cfg.source = SourceSpec::Uniform(parse_f64(value, key, lineno)?);
                source_keys += 1;
            }
            "source.quadrants" => {
                let parts: Vec<&str> = value.split(',').collect();
                if parts.len() != 4 {
                    return Err(parse_err(
                        lineno,
                        format!("`source.quadrants` expects 4 values, got {}", parts.len()),
                    ));
                }
                let mut q = [0.0; 4];
                for (slot, part) in q.iter_mut().zip(parts.iter()) {
                    *slot = parse_f64(part, key, lineno)?;
                }
                cfg.source = SourceSpec::Quadrants(q);
                source_keys += 1;
            }
            "source.file" => {
                cfg.source = SourceSpec::File(PathBuf::from(value));
                source_keys += 1;
            }
            "dirichlet.preset" => {
                cfg.dirichlet = Some(DirichletSpec::Preset(value.to_string()));
                dirichlet_keys += 1;
            }
            "dirichlet.file" => {
                cfg.dirichlet = Some(DirichletSpec::File(PathBuf::from(value)));
                dirichlet_keys += 1;
            }
            "postprocess.enabled" => cfg.postprocess_enabled = parse_bool(value, key, lineno)?,
            "postprocess.subdiv" => cfg.subdiv = parse_usize(value, key, lineno)?,
            "postprocess.r_proj" => cfg.r_proj = Some(parse_f64(value, key, lineno)?),
            "output.dir" => cfg.output_dir = PathBuf::from(value),
            _ => return Err(parse_err(lineno, format!("unknown key `{key}`"))),
        }
    }

    if source_keys > 1 {
        return Err(value_err(
            "source",
            "only one of source.uniform, source.quadrants, source.file may be given",
        ));
    }
    if dirichlet_keys > 1 {
        return Err(value_err(
            "dirichlet",
            "only one of dirichlet.preset, dirichlet.file may be given",
        ));
    }

    validate(&cfg)?;
    Ok(cfg)
}

/// Checks every invariant the downstream modules rely on; errors name the
/// offending key.
pub fn validate(cfg: &ParsedConfig) -> Result<()> {
    if cfg.dim != 2 && cfg.dim != 3 {
        return Err(value_err("mesh.dim", "must be 2 or 3"));
    }
    if cfg.nel.len() != cfg.dim {
        return Err(value_err(
            "mesh.nel",
            format!("expected {} axial counts, got {}", cfg.dim, cfg.nel.len()),
        ));
    }
    if cfg.nl < 2 {
        return Err(value_err("solver.nl", "coarsening level must be at least 2"));
    }
    let divisor = 1usize << (cfg.nl - 1);
    for (axis, &n) in cfg.nel.iter().enumerate() {
        if n == 0 || n % divisor != 0 {
            return Err(value_err(
                "mesh.nel",
                format!(
                    "axis {axis} count {n} must be a positive multiple of 2^(nl-1) = {divisor} \
                     for coarsening level nl = {}",
                    cfg.nl
                ),
            ));
        }
    }
    if !(cfg.volfrac > 0.0 && cfg.volfrac < 1.0) {
        return Err(value_err("problem.volfrac", "must lie strictly in (0, 1)"));
    }
    if !(cfg.k0 > cfg.kmin && cfg.kmin > 0.0) {
        return Err(value_err(
            "material.k0",
            format!("requires k0 > kmin > 0, got k0 = {}, kmin = {}", cfg.k0, cfg.kmin),
        ));
    }
    if cfg.penal < 1.0 {
        return Err(value_err("material.penal", "must be at least 1"));
    }
    if cfg.r_min < 1.0 {
        return Err(value_err("filter.r_min", "must be at least 1 element"));
    }
    if cfg.alpha <= 0.0 {
        return Err(value_err("filter.alpha", "must be positive"));
    }
    if !(cfg.lp_fraction > 0.0 && cfg.lp_fraction <= 1.0) {
        return Err(value_err("filter.lp_fraction", "must lie in (0, 1]"));
    }
    if cfg.max_cycles == 0 {
        return Err(value_err("loop.max_cycles", "must be at least 1"));
    }
    if cfg.change_tol <= 0.0 {
        return Err(value_err("loop.change_tol", "must be positive"));
    }
    if !(cfg.eps2 > 0.0 && cfg.eps2 <= cfg.eps1) {
        return Err(value_err(
            "solver.eps2",
            format!("requires 0 < eps2 <= eps1, got eps1 = {}, eps2 = {}", cfg.eps1, cfg.eps2),
        ));
    }
    if cfg.cg_max() == 0 {
        return Err(value_err("solver.cg_max", "must be at least 1"));
    }
    if cfg.m_basis == 0 || cfg.m_basis > 10 {
        return Err(value_err("solver.m_basis", "must lie in 1..=10"));
    }
    if !(cfg.omega_jac > 0.0 && cfg.omega_jac <= 1.0) {
        return Err(value_err("solver.omega_jac", "must lie in (0, 1]"));
    }
    if cfg.nu_pre == 0 || cfg.nu_post == 0 {
        return Err(value_err("solver.nu_pre", "smoothing counts must be at least 1"));
    }
    match &cfg.source {
        SourceSpec::Uniform(v) => {
            if *v <= 0.0 {
                return Err(value_err("source.uniform", "must be positive"));
            }
        }
        SourceSpec::Quadrants(q) => {
            if cfg.dim != 2 {
                return Err(value_err("source.quadrants", "only available for 2D meshes"));
            }
            if q.iter().any(|&v| v < 0.0) || q.iter().all(|&v| v == 0.0) {
                return Err(value_err(
                    "source.quadrants",
                    "values must be non-negative with at least one positive",
                ));
            }
        }
        SourceSpec::File(_) => {} // values checked when the file is loaded
    }
    match cfg.dirichlet_spec() {
        DirichletSpec::Preset(name) => match (name.as_str(), cfg.dim) {
            ("mid-left", 2) | ("back-center", 3) => {}
            ("mid-left", _) => {
                return Err(value_err("dirichlet.preset", "`mid-left` requires mesh.dim = 2"))
            }
            ("back-center", _) => {
                return Err(value_err("dirichlet.preset", "`back-center` requires mesh.dim = 3"))
            }
            (other, _) => {
                return Err(value_err(
                    "dirichlet.preset",
                    format!("unknown boundary spec `{other}`"),
                ))
            }
        },
        DirichletSpec::File(_) => {}
    }
    if cfg.subdiv == 0 {
        return Err(value_err("postprocess.subdiv", "must be at least 1"));
    }
    if let Some(r) = cfg.r_proj {
        if r < 1.0 {
            return Err(value_err("postprocess.r_proj", "must be at least 1 element"));
        }
    }
    Ok(())
}

/// Serializes a configuration to the same text format `parse_config` reads.
/// Parsing the result reproduces the configuration exactly.
pub fn serialize(cfg: &ParsedConfig) -> String {
    let mut s = String::new();
    let nel: Vec<String> = cfg.nel.iter().map(|n| n.to_string()).collect();
    s.push_str(&format!("mesh.dim = {}\n", cfg.dim));
    s.push_str(&format!("mesh.nel = {}\n", nel.join(",")));
    s.push_str(&format!("problem.volfrac = {}\n", cfg.volfrac));
    s.push_str(&format!("material.k0 = {}\n", cfg.k0));
    s.push_str(&format!("material.kmin = {}\n", cfg.kmin));
    s.push_str(&format!("material.penal = {}\n", cfg.penal));
    s.push_str(&format!("filter.r_min = {}\n", cfg.r_min));
    s.push_str(&format!("filter.alpha = {}\n", cfg.alpha));
    s.push_str(&format!("filter.lp_fraction = {}\n", cfg.lp_fraction));
    if let Some(lp) = cfg.lp {
        s.push_str(&format!("filter.lp = {lp}\n"));
    }
    s.push_str(&format!(
        "filter.rebuild_every_cycle = {}\n",
        cfg.rebuild_every_cycle
    ));
    s.push_str(&format!("loop.max_cycles = {}\n", cfg.max_cycles));
    s.push_str(&format!("loop.early_stop = {}\n", cfg.early_stop));
    s.push_str(&format!("loop.change_tol = {}\n", cfg.change_tol));
    s.push_str(&format!("solver.kind = {}\n", cfg.solver.as_str()));
    s.push_str(&format!("solver.eps1 = {}\n", cfg.eps1));
    s.push_str(&format!("solver.eps2 = {}\n", cfg.eps2));
    if let Some(m) = cfg.cg_max {
        s.push_str(&format!("solver.cg_max = {m}\n"));
    }
    s.push_str(&format!("solver.nl = {}\n", cfg.nl));
    s.push_str(&format!("solver.m_basis = {}\n", cfg.m_basis));
    s.push_str(&format!("solver.n_on_fraction = {}\n", cfg.n_on_fraction));
    if let Some(n) = cfg.n_on {
        s.push_str(&format!("solver.n_on = {n}\n"));
    }
    s.push_str(&format!("solver.omega_jac = {}\n", cfg.omega_jac));
    s.push_str(&format!("solver.nu_pre = {}\n", cfg.nu_pre));
    s.push_str(&format!("solver.nu_post = {}\n", cfg.nu_post));
    match &cfg.source {
        SourceSpec::Uniform(v) => s.push_str(&format!("source.uniform = {v}\n")),
        SourceSpec::Quadrants(q) => s.push_str(&format!(
            "source.quadrants = {},{},{},{}\n",
            q[0], q[1], q[2], q[3]
        )),
        SourceSpec::File(p) => s.push_str(&format!("source.file = {}\n", p.display())),
    }
    if let Some(spec) = &cfg.dirichlet {
        match spec {
            DirichletSpec::Preset(name) => s.push_str(&format!("dirichlet.preset = {name}\n")),
            DirichletSpec::File(p) => s.push_str(&format!("dirichlet.file = {}\n", p.display())),
        }
    }
    s.push_str(&format!("postprocess.enabled = {}\n", cfg.postprocess_enabled));
    s.push_str(&format!("postprocess.subdiv = {}\n", cfg.subdiv));
    if let Some(r) = cfg.r_proj {
        s.push_str(&format!("postprocess.r_proj = {r}\n"));
    }
    s.push_str(&format!("output.dir = {}\n", cfg.output_dir.display()));
    s
}
