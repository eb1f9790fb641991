//! Scenario configs, built-in presets and CSV output for the CLI.
//!
//! A scenario file is TOML. Every section is optional when a `preset` is
//! named; unknown keys are rejected.
//!
//! ```toml
//! preset = "lq_rho05_eps01"
//! mode = "optimize"            # or "forward"
//! output = "out"
//!
//! [model]
//! rho = 0.5
//! delta = "low_quality"   # preset name, constant, or node array
//! max_intensity = "inf"
//!
//! [grid]
//! levels = [10, 25, 50]        # space intervals; M = N * T
//!
//! [sweep]
//! relaxation = 0.5
//! tol = 1e-6
//! max_iters = 500
//!
//! [forward]
//! solver = "mol"               # or "characteristics"
//! u = 0.0
//! u0 = 0.0
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::characteristic::solve_state_characteristics;
use crate::error::{Error, Result};
use crate::grid::{BoundarySeries, Field, Grid};
use crate::model::{ModelParams, Profile};
use crate::mol::forward_state;
use crate::objective;
use crate::sweep::{self, ControlPair, SolveReport, SweepConfig};

/// Built-in presets: `(name, rho, eps_g)`; `eps_g` is used as `gamma`.
pub const PRESETS: [(&str, f64, f64); 4] = [
    ("lq_rho05_eps01", 0.5, 0.1),
    ("lq_rho05_eps1", 0.5, 1.0),
    ("lq_rho1_eps01", 1.0, 0.1),
    ("lq_rho1_eps1", 1.0, 1.0),
];

pub fn preset(name: &str) -> Option<ModelParams> {
    PRESETS
        .iter()
        .find(|(n, _, _)| *n == name)
        .map(|&(_, rho, eps)| ModelParams::low_quality(rho, eps))
}

/// Human-readable listing of the built-in presets.
pub fn list_presets() -> String {
    let base = ModelParams::low_quality(1.0, 1.0);
    let mut out = String::new();
    let _ = writeln!(out, "Low-quality durable good, shared parameters:");
    let _ = writeln!(out, "  R(a)     = 3/5 - (3/21) sqrt(a)");
    let _ = writeln!(out, "  delta(a) = 1 - (0.5 / (1 - e^-1)) e^-a");
    let _ = writeln!(
        out,
        "  r = {}, T = {}, beta = {}, K = {}, G0 = 1.5, c_f = {}, I = inf",
        base.discount_rate, base.horizon, base.beta, base.revenue_coeff, base.fixed_cost
    );
    let _ = writeln!(
        out,
        "{:<16} {:>5} {:>6} {:>6}",
        "name", "rho", "eps_g", "gamma"
    );
    for (name, rho, eps) in PRESETS {
        let _ = writeln!(out, "{name:<16} {rho:>5} {eps:>6} {eps:>6}");
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Forward,
    Optimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForwardSolver {
    Mol,
    Characteristics,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ProfileSpec {
    Constant(f64),
    Named(String),
    Samples(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Intensity {
    Value(f64),
    Named(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    rho: Option<f64>,
    gamma: Option<f64>,
    discount_rate: Option<f64>,
    beta: Option<f64>,
    revenue_coeff: Option<f64>,
    fixed_cost: Option<f64>,
    horizon: Option<f64>,
    max_intensity: Option<Intensity>,
    delta: Option<ProfileSpec>,
    recommendation: Option<ProfileSpec>,
    initial_goodwill: Option<ProfileSpec>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    levels: Option<Vec<usize>>,
    n_space: Option<usize>,
    n_time: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    relaxation: Option<f64>,
    tol: Option<f64>,
    max_iters: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ForwardSection {
    solver: Option<ForwardSolver>,
    u: Option<f64>,
    u0: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    name: Option<String>,
    preset: Option<String>,
    mode: Option<Mode>,
    output: Option<PathBuf>,
    #[serde(default)]
    model: ModelSection,
    #[serde(default)]
    grid: GridSection,
    #[serde(default)]
    sweep: SweepSection,
    #[serde(default)]
    forward: ForwardSection,
}

/// A fully resolved scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub name: String,
    pub params: ModelParams,
    pub mode: Mode,
    pub sweep: SweepConfig,
    pub forward_solver: ForwardSolver,
    /// Constant controls used in forward mode.
    pub forward_controls: (f64, f64),
    /// Output directory prefix; files go to `<output>/<name>/`.
    pub output: PathBuf,
}

/// Command-line overrides applied on top of a loaded scenario.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub output: Option<PathBuf>,
    pub grid: Option<(usize, usize)>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn resolve_profile(spec: ProfileSpec, what: &str) -> Result<Profile> {
    match spec {
        ProfileSpec::Constant(c) => Ok(Profile::Constant(c)),
        ProfileSpec::Samples(v) if v.len() >= 2 => Ok(Profile::Samples(v)),
        ProfileSpec::Samples(_) => Err(config_err(format!("{what}: need at least 2 nodes"))),
        ProfileSpec::Named(name) => match (name.strip_prefix("paper_").unwrap_or(&name), what) {
            ("low_quality" | "lowquality", "delta") => Ok(Profile::RisingDepreciation),
            ("low_quality" | "lowquality", "recommendation") => Ok(Profile::FadingRecommendation),
            ("low_quality" | "lowquality", "initial_goodwill") => Ok(Profile::Constant(1.5)),
            ("zero", "delta" | "recommendation") => Ok(Profile::Constant(0.0)),
            _ => Err(config_err(format!(
                "{what}: unknown profile preset `{name}`"
            ))),
        },
    }
}

impl ScenarioConfig {
    /// A scenario running one of the built-in presets with default settings.
    pub fn from_preset(name: &str) -> Result<Self> {
        let params = preset(name).ok_or_else(|| config_err(format!("unknown preset `{name}`")))?;
        Ok(ScenarioConfig {
            name: name.to_string(),
            sweep: SweepConfig::default_for(params.horizon)?,
            params,
            mode: Mode::Optimize,
            forward_solver: ForwardSolver::Mol,
            forward_controls: (0.0, 0.0),
            output: PathBuf::from("out"),
        })
    }

    pub fn from_toml_str(text: &str, default_name: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        let mut params = match &file.preset {
            Some(p) => preset(p).ok_or_else(|| config_err(format!("unknown preset `{p}`")))?,
            None => {
                if file.model.rho.is_none() || file.model.gamma.is_none() {
                    return Err(config_err(
                        "model.rho and model.gamma are required without a preset",
                    ));
                }
                ModelParams::low_quality(1.0, 1.0)
            }
        };
        let m = file.model;
        if let Some(v) = m.rho {
            params.rho = v;
        }
        if let Some(v) = m.gamma {
            params.gamma = v;
        }
        if let Some(v) = m.discount_rate {
            params.discount_rate = v;
        }
        if let Some(v) = m.beta {
            params.beta = v;
        }
        if let Some(v) = m.revenue_coeff {
            params.revenue_coeff = v;
        }
        if let Some(v) = m.fixed_cost {
            params.fixed_cost = v;
        }
        if let Some(v) = m.horizon {
            params.horizon = v;
        }
        if let Some(v) = m.max_intensity {
            params.max_intensity = match v {
                Intensity::Value(x) => x,
                Intensity::Named(s) if matches!(s.as_str(), "inf" | "infinity" | "unbounded") => {
                    f64::INFINITY
                }
                Intensity::Named(s) => {
                    return Err(config_err(format!("max_intensity: cannot parse `{s}`")))
                }
            };
        }
        if let Some(s) = m.delta {
            params.delta = resolve_profile(s, "delta")?;
        }
        if let Some(s) = m.recommendation {
            params.recommendation = resolve_profile(s, "recommendation")?;
        }
        if let Some(s) = m.initial_goodwill {
            params.initial_goodwill = resolve_profile(s, "initial_goodwill")?;
        }
        params
            .validate()
            .map_err(|e| config_err(format!("model: {e}")))?;

        let mut sweep = SweepConfig::default_for(params.horizon)?;
        match (file.grid.levels, file.grid.n_space, file.grid.n_time) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                return Err(config_err(
                    "grid: give either `levels` or `n_space`/`n_time`",
                ))
            }
            (Some(levels), None, None) => {
                sweep.levels = levels
                    .iter()
                    .map(|&n| Grid::matched(n, params.horizon))
                    .collect::<Result<_>>()
                    .map_err(|e| config_err(format!("grid: {e}")))?;
            }
            (None, Some(n), m) => {
                let grid = match m {
                    Some(m) => Grid::new(n, m, params.horizon),
                    None => Grid::matched(n, params.horizon),
                }
                .map_err(|e| config_err(format!("grid: {e}")))?;
                sweep.levels = vec![grid];
            }
            (None, None, Some(_)) => return Err(config_err("grid: n_time needs n_space")),
            (None, None, None) => {}
        }
        if let Some(v) = file.sweep.relaxation {
            sweep.relaxation = v;
        }
        if let Some(v) = file.sweep.tol {
            sweep.tol_control = v;
        }
        if let Some(v) = file.sweep.max_iters {
            sweep.max_iters = v;
        }
        sweep
            .validate()
            .map_err(|e| config_err(format!("sweep: {e}")))?;

        Ok(ScenarioConfig {
            name: file
                .name
                .or(file.preset)
                .unwrap_or_else(|| default_name.to_string()),
            params,
            mode: file.mode.unwrap_or(Mode::Optimize),
            sweep,
            forward_solver: file.forward.solver.unwrap_or(ForwardSolver::Mol),
            forward_controls: (
                file.forward.u.unwrap_or(0.0),
                file.forward.u0.unwrap_or(0.0),
            ),
            output: file.output.unwrap_or_else(|| PathBuf::from("out")),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into());
        ScenarioConfig::from_toml_str(&text, &stem)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(m) = o.mode {
            self.mode = m;
        }
        if let Some(p) = &o.output {
            self.output = p.clone();
        }
        if let Some((n, m)) = o.grid {
            let finest = Grid::new(n, m, self.params.horizon)
                .map_err(|e| config_err(format!("--grid: {e}")))?;
            let mut levels: Vec<Grid> = self
                .sweep
                .levels
                .iter()
                .copied()
                .filter(|g| g.n_space() < n && g.n_time() < m)
                .collect();
            levels.push(finest);
            self.sweep.levels = levels;
        }
        if let Some(t) = o.tol {
            self.sweep.tol_control = t;
        }
        if let Some(k) = o.max_iters {
            self.sweep.max_iters = k;
        }
        self.sweep.validate().map_err(|e| config_err(e.to_string()))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.join(&self.name)
    }

    pub fn finest_grid(&self) -> Grid {
        *self.sweep.levels.last().expect("validated non-empty")
    }
}

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub rho: f64,
    pub gamma: f64,
    pub j0: f64,
    pub j: f64,
    pub max_u: f64,
    pub max_u0: f64,
    pub max_g: f64,
    pub iterations: usize,
    pub final_residual: f64,
}

impl Summary {
    pub fn dj_over_j0(&self) -> f64 {
        (self.j - self.j0) / self.j0
    }
}

/// Everything a scenario run produces.
#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub grid: Grid,
    pub summary: Summary,
    pub g: Field,
    pub u: Field,
    pub u0: BoundarySeries,
    pub report: Option<SolveReport>,
}

fn forward_field(cfg: &ScenarioConfig, grid: &Grid, controls: &ControlPair) -> Result<Field> {
    Ok(match cfg.forward_solver {
        ForwardSolver::Mol => forward_state(&cfg.params, grid, &controls.u, &controls.u0)?.g,
        ForwardSolver::Characteristics => {
            solve_state_characteristics(&cfg.params, grid, &controls.u, &controls.u0)?.g
        }
    })
}

fn output_from_report(cfg: &ScenarioConfig, report: SolveReport) -> ScenarioOutput {
    ScenarioOutput {
        grid: report.grid,
        summary: Summary {
            rho: cfg.params.rho,
            gamma: cfg.params.gamma,
            j0: report.j_zero,
            j: report.j_star,
            max_u: report.max_u,
            max_u0: report.max_u0,
            max_g: report.max_g,
            iterations: report.total_iterations(),
            final_residual: report.final_control_change,
        },
        g: report.g_star.clone(),
        u: report.u_star.clone(),
        u0: report.u0_star.clone(),
        report: Some(report),
    }
}

/// Runs the scenario in memory. On `NoConvergence` the best iterate is
/// returned inside the error.
pub fn execute(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    cfg.params.renewal_multiplier()?;
    match cfg.mode {
        Mode::Optimize => {
            sweep::solve(&cfg.params, &cfg.sweep, None).map(|r| output_from_report(cfg, r))
        }
        Mode::Forward => {
            let grid = cfg.finest_grid();
            let (cu, cu0) = cfg.forward_controls;
            let controls = ControlPair::constant(&grid, cu, cu0);
            let zero = ControlPair::zero(&grid);
            let g = forward_field(cfg, &grid, &controls)?;
            let g_zero = forward_field(cfg, &grid, &zero)?;
            let j = objective::evaluate(&cfg.params, &grid, &g, &controls.u, &controls.u0)?.total;
            let j0 = objective::evaluate(&cfg.params, &grid, &g_zero, &zero.u, &zero.u0)?.total;
            Ok(ScenarioOutput {
                grid,
                summary: Summary {
                    rho: cfg.params.rho,
                    gamma: cfg.params.gamma,
                    j0,
                    j,
                    max_u: controls.u.max(),
                    max_u0: controls.u0.max(),
                    max_g: g.max(),
                    iterations: 0,
                    final_residual: 0.0,
                },
                g,
                u: controls.u,
                u0: controls.u0,
                report: None,
            })
        }
    }
}

/// Runs the scenario and writes its CSV files. Files are written for the
/// best iterate even when the sweep fails to converge.
pub fn run(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    match execute(cfg) {
        Ok(out) => {
            write_outputs(&cfg.output_dir(), &out)?;
            Ok(out)
        }
        Err(Error::NoConvergence(report)) => {
            let out = output_from_report(cfg, (*report).clone());
            write_outputs(&cfg.output_dir(), &out)?;
            Err(Error::NoConvergence(report))
        }
        Err(e) => Err(e),
    }
}

/// `%.12g`-style formatting: 12 significant digits, trailing zeros trimmed.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub const SUMMARY_HEADER: [&str; 10] = [
    "rho",
    "gamma",
    "J0",
    "J",
    "dJ_over_J0",
    "max_u",
    "max_u0",
    "max_G",
    "iterations",
    "final_residual",
];

fn csv_text<R, I>(header: &[&str], rows: R) -> Result<String>
where
    R: IntoIterator<Item = I>,
    I: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.into());
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is ASCII"))
}

pub fn summary_csv(s: &Summary) -> Result<String> {
    let row = vec![
        fmt_num(s.rho),
        fmt_num(s.gamma),
        fmt_num(s.j0),
        fmt_num(s.j),
        fmt_num(s.dj_over_j0()),
        fmt_num(s.max_u),
        fmt_num(s.max_u0),
        fmt_num(s.max_g),
        s.iterations.to_string(),
        fmt_num(s.final_residual),
    ];
    csv_text(&SUMMARY_HEADER, [row])
}

/// Long format, one `t,a,value` row per node, time-major.
pub fn field_csv(grid: &Grid, f: &Field) -> Result<String> {
    let rows = (0..=grid.n_time()).flat_map(|j| {
        (0..=grid.n_space())
            .map(move |i| vec![fmt_num(grid.t(j)), fmt_num(grid.a(i)), fmt_num(f.get(j, i))])
    });
    csv_text(&["t", "a", "value"], rows)
}

pub fn series_csv(grid: &Grid, s: &BoundarySeries) -> Result<String> {
    let rows = (0..=grid.n_time()).map(|j| vec![fmt_num(grid.t(j)), fmt_num(s.get(j))]);
    csv_text(&["t", "value"], rows)
}

pub fn write_outputs(dir: &Path, out: &ScenarioOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("summary.csv"), summary_csv(&out.summary)?)?;
    fs::write(dir.join("g_field.csv"), field_csv(&out.grid, &out.g)?)?;
    fs::write(dir.join("u_field.csv"), field_csv(&out.grid, &out.u)?)?;
    fs::write(dir.join("u0_series.csv"), series_csv(&out.grid, &out.u0)?)?;
    Ok(())
}

fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    csv::Reader::from_path(path)
        .and_then(|mut r| r.deserialize().collect())
        .map_err(|e| Error::Io(e.into()))
}

/// Reads a long-format field written by [`field_csv`].
pub fn read_field_csv(path: &Path, grid: &Grid) -> Result<Field> {
    let rows: Vec<(f64, f64, f64)> = read_rows(path)?;
    let width = grid.n_space() + 1;
    if rows.len() != width * (grid.n_time() + 1) {
        return Err(Error::GridMismatch(format!(
            "{} has {} rows, grid needs {}",
            path.display(),
            rows.len(),
            width * (grid.n_time() + 1)
        )));
    }
    Field::from_rows(
        rows.chunks(width)
            .map(|c| c.iter().map(|r| r.2).collect())
            .collect(),
    )
}

pub fn read_series_csv(path: &Path) -> Result<BoundarySeries> {
    let rows: Vec<(f64, f64)> = read_rows(path)?;
    Ok(BoundarySeries::new(rows.into_iter().map(|r| r.1).collect()))
}
