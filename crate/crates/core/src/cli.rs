//! Run configuration and the subcommands behind the `snr-geom` binary.
//!
//! Every subcommand returns a [`RunReport`]; rendering and exit codes are
//! decided here so the binary stays a thin argument parser.

use crate::error::GeomError;
use crate::fields::FieldGenerator;
use crate::geometry::JetOptions;
use crate::immersion::{catalog, Immersion, Metadata, SurfaceParams, CATALOG_NAMES};
use crate::inequalities::{
    certification, equality_case_audit_from, gauss_bonnet_from, guo_yin_inequality_from,
    main_inequality_from, prop3_inequality_from, InequalityReport, SLICE_TOL,
};
use crate::operators::{cor1_batch, lemma1_batch};
use crate::quadrature::{build_grid, ParameterDomain};
use crate::report::{fmt_float, CheckKind, CheckReport, RunReport};
use crate::survey::Survey;
use crate::variational::{
    extremal_pair, first_variation_check, matrix_lemma_check, matrix_lemma_sweep,
    seeded_variations, VARIATION_STEP_RANGE,
};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

/// Admissible grid resolution per axis.
pub const RESOLUTION_RANGE: (usize, usize) = (8, 4096);

/// Check names and their default tolerances.
pub const DEFAULT_TOLERANCES: [(&str, f64); 18] = [
    ("constraint", 1e-10),
    ("frame", 1e-10),
    ("gauss", 1e-8),
    ("codazzi", 1e-7),
    ("dt_compatibility", 1e-7),
    ("gauss_curvature", 1e-8),
    ("gauss_bonnet", 1e-5),
    ("el_residual", 1e-6),
    ("huisken", 1e-6),
    ("simons", 1e-4),
    ("lemma1", 1e-5),
    ("cor1", 1e-5),
    ("main_inequality", 1e-5),
    ("guo_yin_inequality", 1e-5),
    ("prop3_inequality", 1e-6),
    ("equality_case_audit", 1e-5),
    ("first_variation", 1e-4),
    ("lemma34", 1e-12),
];

/// Random `(f, ξ)` pairs used by the integration-by-parts checks.
pub const IDENTITY_FIELDS: usize = 4;

/// Seeded variations in [`cmd_variation`].
pub const VARIATIONS: usize = 10;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("unknown surface '{0}' (known: {known})", known = CATALOG_NAMES.join(", "))]
    UnknownSurface(String),
    #[error("bad resolution: {0}")]
    BadResolution(String),
    #[error("bad step: {0}")]
    BadStep(String),
    #[error("cannot write {0}")]
    Unwritable(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::UnknownSurface(_) | CliError::Invalid(_) => 2,
            CliError::BadResolution(_) | CliError::BadStep(_) => 3,
            CliError::Unwritable(_) => 4,
            CliError::Geom(GeomError::InvalidArgument(_) | GeomError::CompactnessRequired(_)) => 2,
            CliError::Geom(_) => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for OutputFormat {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<OutputFormat> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(CliError::Invalid(format!(
                "unknown format '{other}' (json or csv)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub surface: String,
    pub n: Option<usize>,
    pub t0: Option<f64>,
    pub rho: Option<f64>,
    pub eps: Option<f64>,
    /// Nodes per parameter axis; `None` picks a per-surface default.
    pub grid: Option<Vec<usize>>,
    /// Forces finite-difference jets with this step.
    pub fd_step: Option<f64>,
    pub seed: u64,
    /// Overrides of [`DEFAULT_TOLERANCES`].
    pub tolerances: BTreeMap<String, f64>,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    /// RFC-3339 time stamp for the report (not echoed in the config).
    #[serde(skip)]
    pub timestamp: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            surface: "slice_sphere".into(),
            n: None,
            t0: None,
            rho: None,
            eps: None,
            grid: None,
            fd_step: None,
            seed: 0,
            tolerances: BTreeMap::new(),
            out: None,
            format: OutputFormat::Json,
            timestamp: None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> CliResult<T> {
    value
        .parse()
        .map_err(|_| CliError::Invalid(format!("cannot parse {key} = '{value}'")))
}

/// Parses `NUxNV` (any number of axes).
pub fn parse_grid(s: &str) -> CliResult<Vec<usize>> {
    let axes: Vec<usize> = s
        .split(['x', 'X'])
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| CliError::BadResolution(format!("cannot parse grid '{s}'")))
        })
        .collect::<CliResult<_>>()?;
    let (lo, hi) = RESOLUTION_RANGE;
    if let Some(&bad) = axes.iter().find(|&&k| k < lo || k > hi) {
        return Err(CliError::BadResolution(format!(
            "{bad} nodes per axis is outside [{lo}, {hi}]"
        )));
    }
    Ok(axes)
}

/// Parses `NAME=VALUE`.
pub fn parse_tolerance(s: &str) -> CliResult<(String, f64)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| CliError::Invalid(format!("tolerance '{s}' is not NAME=VALUE")))?;
    let name = k.trim().to_string();
    if !DEFAULT_TOLERANCES.iter().any(|(n, _)| *n == name) {
        return Err(CliError::Invalid(format!(
            "unknown tolerance name '{name}'"
        )));
    }
    let value: f64 = parse_num(&name, v.trim())?;
    if !(value > 0.0 && value.is_finite()) {
        return Err(CliError::Invalid(format!(
            "tolerance {name} must be positive, got {value}"
        )));
    }
    Ok((name, value))
}

impl RunConfig {
    /// Applies one `key = value` setting (config-file syntax).
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        match key {
            "surface" => self.surface = value.to_string(),
            "n" => self.n = Some(parse_num(key, value)?),
            "t0" => self.t0 = Some(parse_num(key, value)?),
            "rho" => self.rho = Some(parse_num(key, value)?),
            "eps" => self.eps = Some(parse_num(key, value)?),
            "grid" => self.grid = Some(parse_grid(value)?),
            "fd_step" | "fd-step" => self.fd_step = Some(parse_num(key, value)?),
            "seed" => self.seed = parse_num(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => self.format = value.parse()?,
            "timestamp" => self.timestamp = Some(value.to_string()),
            _ => match key.strip_prefix("tol.") {
                Some(name) => {
                    let (name, v) = parse_tolerance(&format!("{name}={value}"))?;
                    self.tolerances.insert(name, v);
                }
                None => return Err(CliError::Invalid(format!("unknown config key '{key}'"))),
            },
        }
        Ok(())
    }

    /// Reads a flat `key = value` file; `#` starts a comment.
    pub fn from_file(path: &Path) -> CliResult<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Invalid(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Invalid(format!(
                    "{}:{}: expected key = value",
                    path.display(),
                    lineno + 1
                ))
            })?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn tolerance(&self, name: &str) -> f64 {
        self.tolerances.get(name).copied().unwrap_or_else(|| {
            DEFAULT_TOLERANCES
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, v)| *v)
                .expect("known check name")
        })
    }

    fn params(&self) -> SurfaceParams {
        SurfaceParams {
            n: self.n,
            t0: self.t0,
            rho: self.rho,
            eps: self.eps,
        }
    }

    pub fn build_surface(&self) -> CliResult<Immersion> {
        if !CATALOG_NAMES.contains(&self.surface.as_str()) {
            return Err(CliError::UnknownSurface(self.surface.clone()));
        }
        Ok(catalog(&self.surface, &self.params())?)
    }

    fn jet_options(&self) -> CliResult<JetOptions> {
        match self.fd_step {
            None => Ok(JetOptions::default()),
            Some(h) if h > 0.0 && h.is_finite() => Ok(JetOptions::finite_differences(Some(h))),
            Some(h) => Err(CliError::BadStep(format!(
                "finite-difference step {h} must be positive"
            ))),
        }
    }

    fn validate_tolerances(&self) -> CliResult<()> {
        for (k, v) in &self.tolerances {
            parse_tolerance(&format!("{k}={v}"))?;
        }
        Ok(())
    }

    fn resolution(&self, domain: &ParameterDomain, coarse: bool) -> CliResult<Vec<usize>> {
        let res = match &self.grid {
            Some(g) => g.clone(),
            None => default_grid(domain, coarse),
        };
        if res.len() != domain.dim() {
            return Err(CliError::BadResolution(format!(
                "grid has {} axes, the surface has {}",
                res.len(),
                domain.dim()
            )));
        }
        let (lo, hi) = RESOLUTION_RANGE;
        if res.iter().any(|&k| k < lo || k > hi) {
            return Err(CliError::BadResolution(format!(
                "{res:?} outside [{lo}, {hi}] per axis"
            )));
        }
        Ok(res)
    }
}

/// 64 nodes on periodic axes of a torus; 48 × 96 on a sphere chart. `coarse`
/// halves both.
pub fn default_grid(domain: &ParameterDomain, coarse: bool) -> Vec<usize> {
    let any_closed = domain.axes().iter().any(|a| !a.periodic);
    let scale = if coarse { 2 } else { 1 };
    domain
        .axes()
        .iter()
        .map(|a| match (a.periodic, any_closed) {
            (false, _) => 48 / scale,
            (true, true) => 96 / scale,
            (true, false) => 64 / scale,
        })
        .collect()
}

/// `--timestamp`, else `SOURCE_DATE_EPOCH`, else the current time; always
/// rendered as UTC RFC-3339.
pub fn resolve_timestamp(explicit: Option<&str>) -> CliResult<String> {
    use chrono::{DateTime, SecondsFormat, Utc};
    let t: DateTime<Utc> = if let Some(s) = explicit {
        DateTime::parse_from_rfc3339(s)
            .map_err(|e| CliError::Invalid(format!("timestamp '{s}': {e}")))?
            .with_timezone(&Utc)
    } else if let Ok(epoch) = std::env::var("SOURCE_DATE_EPOCH") {
        let secs: i64 = parse_num("SOURCE_DATE_EPOCH", epoch.trim())?;
        DateTime::from_timestamp(secs, 0)
            .ok_or_else(|| CliError::Invalid(format!("SOURCE_DATE_EPOCH {secs} out of range")))?
    } else {
        Utc::now()
    };
    Ok(t.to_rfc3339_opts(SecondsFormat::Secs, true))
}

/// Fails early (exit 4) when the output path cannot be created.
pub fn ensure_writable(out: Option<&Path>) -> CliResult<()> {
    if let Some(p) = out {
        std::fs::OpenOptions::new()
            .write(true)
            .create(true)
            .truncate(true)
            .open(p)
            .map_err(|e| CliError::Unwritable(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

/// Renders the report; writes it to `out` or returns it for stdout.
pub fn emit(
    report: &RunReport,
    format: OutputFormat,
    out: Option<&Path>,
) -> CliResult<Option<String>> {
    let text = match format {
        OutputFormat::Json => report.to_json(),
        OutputFormat::Csv => report.to_csv(),
    };
    match out {
        Some(p) => {
            std::fs::write(p, text)
                .map_err(|e| CliError::Unwritable(format!("{}: {e}", p.display())))?;
            Ok(None)
        }
        None => Ok(Some(text)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogEntry {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub chi: Option<i32>,
    pub compact: bool,
    pub properties: Vec<&'static str>,
}

fn properties(meta: &Metadata) -> Vec<&'static str> {
    let c = &meta.claims;
    let mut out = Vec::new();
    if c.minimal {
        out.push("minimal");
    }
    if c.in_slice {
        out.push("T≡0");
    }
    if c.totally_geodesic {
        out.push("totally-geodesic");
    }
    if c.umbilical {
        out.push("umbilical");
    }
    if c.h_surface {
        out.push("H-surface");
    }
    out
}

pub fn catalog_entries() -> Vec<CatalogEntry> {
    CATALOG_NAMES
        .iter()
        .map(|name| {
            let imm = catalog(name, &SurfaceParams::default()).expect("catalog defaults are valid");
            let meta = imm.metadata();
            CatalogEntry {
                name: meta.name.clone(),
                params: meta.params.iter().cloned().collect(),
                chi: meta.chi,
                compact: meta.compact,
                properties: properties(meta),
            }
        })
        .collect()
}

/// One line per surface, or a JSON array.
pub fn cmd_catalog(json: bool) -> String {
    let entries = catalog_entries();
    if json {
        let mut s = serde_json::to_string_pretty(&entries).expect("catalog serializes");
        s.push('\n');
        return s;
    }
    let mut s = String::new();
    for e in entries {
        let chi = e
            .chi
            .map_or("non-compact".to_string(), |c| format!("χ={c}"));
        let params: Vec<String> = e
            .params
            .iter()
            .map(|(k, v)| match v.fract() == 0.0 && v.abs() < 1e15 {
                true => format!("{k}={}", *v as i64),
                false => format!("{k}={}", fmt_float(*v)),
            })
            .collect();
        let mut words = vec![e.name.clone(), chi];
        words.extend(e.properties.iter().map(|p| p.to_string()));
        s.push_str(&format!("{}  ({})\n", words.join(" "), params.join(", ")));
    }
    s
}

const CLIFFORD_NOTE: &str = "the Clifford torus is listed among the equality cases, but the integrand \
     is -2 at every point (|phi|^2 = 2, T = 0), so LHS = -4pi^2 < 0 = RHS; see Known discrepancies in the README";

fn or_nan(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

fn inequality_check(rep: &InequalityReport, name: &str, tol: f64, certified: bool) -> CheckReport {
    let scale = tol * (1.0 + rep.rhs.abs());
    let holds = rep.slack >= -scale;
    let equality = rep.slack.abs() <= scale;
    let mut c = CheckReport::new(
        name,
        CheckKind::Inequality,
        rep.lhs,
        rep.rhs,
        rep.slack,
        tol,
        holds || !certified,
    )
    .with_note(&format!("equality: {equality}"));
    if !certified {
        c = c.with_note("not certified as an H-surface; informational");
    }
    for note in &rep.notes {
        if !note.starts_with("not certified") {
            c = c.with_note(note);
        }
    }
    c
}

/// Runs every check that applies to the configured surface.
pub fn cmd_check(cfg: &RunConfig) -> CliResult<RunReport> {
    let imm = cfg.build_surface()?;
    let res = cfg.resolution(imm.domain(), false)?;
    cfg.validate_tolerances()?;
    let opts = cfg.jet_options()?;
    let timestamp = resolve_timestamp(cfg.timestamp.as_deref())?;
    ensure_writable(cfg.out.as_deref())?;
    let grid = build_grid(imm.domain(), &res)?;
    let survey = Survey::compute(&imm, &grid, 4, opts)?;
    let meta = imm.metadata().clone();
    let compact = meta.compact;
    let tol = |n: &str| cfg.tolerance(n);
    let mut checks = Vec::new();

    let mut pointwise = |name: &str, v: f64| {
        checks.push(
            CheckReport::identity(name, v, 0.0, v, tol(name)).with_note("largest pointwise defect"),
        );
    };
    pointwise("constraint", survey.range(|r| r.constraint).1);
    pointwise("frame", survey.range(|r| r.frame).1);
    pointwise("gauss", or_nan(survey.max_of(|r| r.gauss)));
    pointwise("codazzi", or_nan(survey.max_of(|r| r.codazzi)));
    pointwise("dt_compatibility", or_nan(survey.max_of(|r| r.dt)));
    pointwise(
        "gauss_curvature",
        or_nan(survey.max_of(|r| Some((r.k_extrinsic? - r.k_intrinsic?).abs()))),
    );

    let skip = |name: &str, kind: CheckKind, reason: &str| {
        CheckReport::skipped(name, kind, tol(name), reason)
    };

    if compact {
        let gb = gauss_bonnet_from(&survey)?;
        let res = gb.slack.abs() / (1.0 + gb.rhs.abs());
        checks.push(
            CheckReport::identity("gauss_bonnet", gb.lhs, gb.rhs, res, tol("gauss_bonnet"))
                .with_note("lhs = integral of K, rhs = 2 pi chi; relative residual"),
        );
    } else {
        checks.push(skip("gauss_bonnet", CheckKind::Identity, "non-compact"));
    }

    let el_max = or_nan(survey.max_of(|r| r.el));
    let sigma_max = survey.range(|r| r.sigma2).1;
    let el_tol = tol("el_residual") * (1.0 + sigma_max);
    let certified = el_max <= el_tol;
    let mut el = CheckReport::identity("el_residual", el_max, 0.0, el_max, el_tol);
    if !meta.claims.h_surface {
        el.pass = true;
        el = el.with_note("not certified: the surface is not claimed stationary; informational");
    } else {
        el = el.with_note("tolerance is el_residual * (1 + max |sigma|^2)");
    }
    checks.push(el);

    let h_min = survey.min_of(|r| r.huisken).unwrap_or(f64::NAN);
    checks.push(
        CheckReport::new(
            "huisken",
            CheckKind::Inequality,
            0.0,
            h_min,
            h_min,
            tol("huisken"),
            h_min >= -tol("huisken"),
        )
        .with_note("minimum pointwise slack"),
    );
    let simons = or_nan(survey.max_of(|r| r.simons.map(f64::abs)));
    checks.push(
        CheckReport::identity("simons", simons, 0.0, simons, tol("simons"))
            .with_note("largest pointwise residual"),
    );

    if compact {
        let mut gen = FieldGenerator::new(cfg.seed, imm.ambient_dim());
        let pairs: Vec<_> = (0..IDENTITY_FIELDS)
            .map(|_| (gen.scalar(), gen.normal()))
            .collect();
        let fields: Vec<_> = (0..IDENTITY_FIELDS).map(|_| gen.normal()).collect();
        for (name, rows) in [
            ("lemma1", lemma1_batch(&imm, &grid, &pairs, opts)?),
            ("cor1", cor1_batch(&imm, &grid, &fields, opts)?),
        ] {
            let worst = rows
                .iter()
                .max_by(|a, b| a.residual.total_cmp(&b.residual))
                .expect("at least one field");
            checks.push(
                CheckReport::identity(name, worst.lhs, worst.rhs, worst.residual, tol(name))
                    .with_note(&format!("worst of {} seeded fields", rows.len())),
            );
        }
    } else {
        checks.push(skip("lemma1", CheckKind::Identity, "non-compact"));
        checks.push(skip("cor1", CheckKind::Identity, "non-compact"));
    }

    if compact {
        let main = main_inequality_from(&survey)?;
        let mut c = inequality_check(&main, "main_inequality", tol("main_inequality"), certified);
        if meta.name == "clifford_torus" {
            c = c.with_note(CLIFFORD_NOTE);
        }
        checks.push(c);

        let t_max = survey.range(|r| r.t2.sqrt()).1;
        if t_max <= SLICE_TOL {
            let n_eff = imm.n().max(3);
            let gy = guo_yin_inequality_from(&survey, n_eff)?;
            checks.push(
                inequality_check(
                    &gy,
                    "guo_yin_inequality",
                    tol("guo_yin_inequality"),
                    certified,
                )
                .with_note(&format!("n_eff = {n_eff}")),
            );
        } else {
            checks.push(skip(
                "guo_yin_inequality",
                CheckKind::Inequality,
                "surface is not in a slice (T != 0)",
            ));
        }

        if certification(&survey) == Some(true) {
            let p3 = prop3_inequality_from(&survey)?;
            checks.push(inequality_check(
                &p3,
                "prop3_inequality",
                tol("prop3_inequality"),
                true,
            ));
        } else {
            checks.push(skip(
                "prop3_inequality",
                CheckKind::Inequality,
                "not certified as an H-surface",
            ));
        }

        let audit = equality_case_audit_from(&survey)?;
        let q = audit.sigma_quartic_integral;
        let mut c = CheckReport::new(
            "equality_case_audit",
            CheckKind::EqualityCase,
            q,
            0.0,
            q.abs(),
            tol("equality_case_audit"),
            true,
        )
        .with_note("lhs = integral of |sigma|^2 (3/2 |sigma|^2 - 2); informational");
        for e in &audit.extrema {
            c = c.with_note(&format!(
                "{} in [{}, {}]",
                e.quantity,
                fmt_float(e.min),
                fmt_float(e.max)
            ));
        }
        checks.push(c);
    } else {
        for (name, kind) in [
            ("main_inequality", CheckKind::Inequality),
            ("guo_yin_inequality", CheckKind::Inequality),
            ("prop3_inequality", CheckKind::Inequality),
            ("equality_case_audit", CheckKind::EqualityCase),
        ] {
            checks.push(skip(name, kind, "non-compact"));
        }
    }

    let config = serde_json::to_value(cfg).expect("config serializes");
    let config = with_resolution(config, &res);
    Ok(RunReport::new(timestamp, config, checks))
}

fn with_resolution(mut config: serde_json::Value, res: &[usize]) -> serde_json::Value {
    config["grid"] = serde_json::json!(res);
    config
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma34Config {
    pub trials: usize,
    pub p: Option<usize>,
    pub m: Option<usize>,
    pub seed: u64,
}

/// Random sweep of the matrix inequality plus the extremal-pair regression.
pub fn cmd_lemma34(cfg: &Lemma34Config, timestamp: Option<&str>) -> CliResult<RunReport> {
    if cfg.trials == 0 {
        return Err(CliError::Invalid("trials must be >= 1".into()));
    }
    if let Some(p) = cfg.p.filter(|&p| p < 2) {
        return Err(CliError::Invalid(format!(
            "the matrix inequality needs p >= 2, got {p}"
        )));
    }
    if cfg.m == Some(0) {
        return Err(CliError::Invalid("matrix dimension m must be >= 1".into()));
    }
    let timestamp = resolve_timestamp(timestamp)?;
    let tol = DEFAULT_TOLERANCES
        .iter()
        .find(|(n, _)| *n == "lemma34")
        .map(|t| t.1)
        .expect("listed");
    let sweep = matrix_lemma_sweep(cfg.trials, cfg.p, cfg.m, cfg.seed)?;
    let sweep_check = CheckReport::new(
        "lemma34_sweep",
        CheckKind::Inequality,
        0.0,
        sweep.min_slack,
        sweep.min_slack,
        tol,
        sweep.min_slack >= -tol,
    )
    .with_note(&format!(
        "minimum slack over {} trials (worst trial {})",
        sweep.trials, sweep.worst_trial
    ));
    let ex = matrix_lemma_check(&extremal_pair())?;
    let ex_check = CheckReport::new(
        "lemma34_extremal_pair",
        CheckKind::EqualityCase,
        ex.lhs,
        ex.rhs,
        ex.slack,
        tol,
        ex.slack.abs() <= tol,
    )
    .with_note("diag(1,-1) and [[0,1],[1,0]]");
    let config = serde_json::to_value(cfg).expect("config serializes");
    Ok(RunReport::new(
        timestamp,
        config,
        vec![sweep_check, ex_check],
    ))
}

/// Finite-difference check of the first variation of `𝓗` along seeded fields.
pub fn cmd_variation(cfg: &RunConfig, delta: f64) -> CliResult<RunReport> {
    let (lo, hi) = VARIATION_STEP_RANGE;
    if !(delta >= lo && delta <= hi) {
        return Err(CliError::BadStep(format!(
            "delta {delta} outside [{lo}, {hi}]"
        )));
    }
    let imm = Arc::new(cfg.build_surface()?);
    let res = cfg.resolution(imm.domain(), true)?;
    cfg.validate_tolerances()?;
    let opts = cfg.jet_options()?;
    let timestamp = resolve_timestamp(cfg.timestamp.as_deref())?;
    ensure_writable(cfg.out.as_deref())?;
    if !imm.is_compact() {
        return Err(GeomError::CompactnessRequired(format!(
            "the first variation on {}",
            imm.name()
        ))
        .into());
    }
    let grid = build_grid(imm.domain(), &res)?;
    let tol = cfg.tolerance("first_variation");
    let checks = seeded_variations(cfg.seed, VARIATIONS, imm.ambient_dim())
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let r = first_variation_check(&imm, &grid, v, delta, opts)?;
            Ok(CheckReport::identity(
                &format!("first_variation[{k}]"),
                r.fd,
                r.analytic,
                r.residual,
                tol,
            )
            .with_note("lhs = finite difference, rhs = integral of <E, v_perp>"))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut config = serde_json::to_value(cfg).expect("config serializes");
    config["delta"] = serde_json::json!(delta);
    Ok(RunReport::new(
        timestamp,
        with_resolution(config, &res),
        checks,
    ))
}
