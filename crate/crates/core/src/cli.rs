//! Batch front end: a JSON job description in, CSV rows and a plain-text
//! convergence report out.
//!
//! Lengths in the config are in an arbitrary unit `L`, material frequencies in
//! `c / L` and `temperature` is `k_B T L / (hbar c)`. Results are reported in
//! `hbar c / R^4` (`R` the outer radius) or, with `units = "si"`, in pascal
//! given `reference_length_m` (the size of `L` in meters).

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Deserialize;

use crate::error::Error;
use crate::materials::{LorentzPole, MaterialModel};
use crate::mie::{Layer, SphereGeometry};
use crate::stress::{
    stress_finite_t, stress_real_axis_diagnostic, stress_zero_t, RealAxisGrid, StressMode, StressOptions,
    StressResult,
};

pub const CSV_HEADER: &str = "sweep_value,T_RR,l_max,n_max,tail,seconds";

/// `hbar c` in J m (CODATA 2018, exact `c`).
pub const HBAR_C: f64 = 1.054_571_817e-34 * 299_792_458.0;

pub const EXIT_OK: i32 = 0;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_IO: i32 = 4;

const VACUUM: &str = "vacuum";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub materials: BTreeMap<String, MaterialModel>,
    pub geometry: GeometryConfig,
    /// Required unless the mode is `zero_T` or the sweep axis is `temperature`.
    #[serde(default)]
    pub temperature: Option<f64>,
    pub sweep: SweepConfig,
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    /// Core first.
    pub layers: Vec<LayerConfig>,
    #[serde(default = "vacuum_name")]
    pub exterior: String,
}

fn vacuum_name() -> String {
    VACUUM.to_string()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerConfig {
    pub radius: f64,
    pub material: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Temperature,
    RadiusScale,
    Parameter,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    /// For `parameter`: `materials.<name>.<field>` or
    /// `materials.<name>.eps_poles[<i>].<field>` (likewise `mu_poles`).
    #[serde(default)]
    pub path: Option<String>,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub range: Option<RangeConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeConfig {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum Mode {
    #[serde(rename = "matsubara")]
    Matsubara,
    #[serde(rename = "zero_T")]
    ZeroT,
    #[serde(rename = "real_axis_diag")]
    RealAxisDiag,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_l_cap")]
    pub l_cap: usize,
    #[serde(default = "default_n_cap")]
    pub n_cap: usize,
    /// Relative distance from the surface at which the stress is evaluated.
    pub standoff: f64,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    /// Also run the real-frequency integral and compare (Matsubara mode only).
    #[serde(default)]
    pub cross_check: bool,
}

fn default_tol() -> f64 {
    StressOptions::default().tol
}

fn default_l_cap() -> usize {
    StressOptions::default().l_cap
}

fn default_n_cap() -> usize {
    StressOptions::default().n_cap
}

fn default_mode() -> Mode {
    Mode::Matsubara
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    #[default]
    Reduced,
    Si,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// CSV destination; stdout when absent and not given on the command line.
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub units: Units,
    #[serde(default)]
    pub reference_length_m: Option<f64>,
    /// Convergence report destination.
    #[serde(default)]
    pub report: Option<PathBuf>,
    /// Fill the `seconds` column. Off by default so that output bytes are
    /// reproducible.
    #[serde(default)]
    pub timing: bool,
}

/// A problem with a config, located by JSON path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl Diagnostic {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Strict parse; unknown keys and type errors come back as a diagnostic.
pub fn parse_config(text: &str) -> Result<JobConfig, Diagnostic> {
    let mut de = serde_json::Deserializer::from_str(text);
    let cfg: JobConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        Diagnostic::new(path, e.into_inner().to_string())
    })?;
    de.end().map_err(|e| Diagnostic::new(".", e.to_string()))?;
    Ok(cfg)
}

fn resolve(materials: &BTreeMap<String, MaterialModel>, name: &str) -> Option<MaterialModel> {
    match materials.get(name) {
        Some(m) => Some(m.clone()),
        None if name == VACUUM => Some(MaterialModel::vacuum()),
        None => None,
    }
}

fn check_pole(p: &LorentzPole, path: &str, out: &mut Vec<Diagnostic>) {
    if !(p.plasma_strength.is_finite() && p.plasma_strength >= 0.0) {
        out.push(Diagnostic::new(
            format!("{path}.plasma_strength"),
            format!("{} must be finite and >= 0", p.plasma_strength),
        ));
    }
    if !(p.resonance.is_finite() && p.resonance >= 0.0) {
        out.push(Diagnostic::new(
            format!("{path}.resonance"),
            format!("{} must be finite and >= 0", p.resonance),
        ));
    }
    if !(p.damping.is_finite() && p.damping > 0.0) {
        out.push(Diagnostic::new(
            format!("{path}.damping"),
            format!("{} must be finite and > 0", p.damping),
        ));
    }
}

fn check_material(m: &MaterialModel, path: &str, out: &mut Vec<Diagnostic>) {
    for (i, p) in m.eps_poles.iter().enumerate() {
        check_pole(p, &format!("{path}.eps_poles[{i}]"), out);
    }
    for (i, p) in m.mu_poles.iter().enumerate() {
        check_pole(p, &format!("{path}.mu_poles[{i}]"), out);
    }
    for (field, v) in [("eps_infinity", m.eps_infinity), ("mu_infinity", m.mu_infinity)] {
        if !(v.is_finite() && v >= 1.0) {
            out.push(Diagnostic::new(format!("{path}.{field}"), format!("{v} must be finite and >= 1")));
        }
    }
}

/// Sweep points in input order.
pub fn sweep_values(sweep: &SweepConfig) -> Vec<f64> {
    if let Some(v) = &sweep.values {
        return v.clone();
    }
    let Some(r) = sweep.range else {
        return Vec::new();
    };
    if r.count <= 1 {
        return vec![r.start; r.count];
    }
    let last = (r.count - 1) as f64;
    (0..r.count)
        .map(|i| {
            let f = i as f64 / last;
            match r.spacing {
                Spacing::Linear => r.start + (r.stop - r.start) * f,
                Spacing::Log => (r.start.ln() + (r.stop.ln() - r.start.ln()) * f).exp(),
            }
        })
        .collect()
}

/// Sets the material parameter addressed by `path` in place.
pub fn set_parameter(materials: &mut BTreeMap<String, MaterialModel>, path: &str, value: f64) -> Result<(), String> {
    let rest = path
        .strip_prefix("materials.")
        .ok_or_else(|| format!("path `{path}` must start with `materials.`"))?;
    let (name, field) = rest
        .split_once('.')
        .ok_or_else(|| format!("path `{path}` names no field"))?;
    let model = materials
        .get_mut(name)
        .ok_or_else(|| format!("material `{name}` is not defined"))?;
    match field {
        "eps_infinity" => model.eps_infinity = value,
        "mu_infinity" => model.mu_infinity = value,
        _ => {
            let (list, tail) = field
                .split_once('[')
                .ok_or_else(|| format!("unknown material field `{field}`"))?;
            let (index, pole_field) = tail
                .split_once("].")
                .ok_or_else(|| format!("malformed pole reference `{field}`"))?;
            let index: usize = index.parse().map_err(|_| format!("bad pole index `{index}`"))?;
            let poles = match list {
                "eps_poles" => &mut model.eps_poles,
                "mu_poles" => &mut model.mu_poles,
                _ => return Err(format!("unknown pole list `{list}`")),
            };
            let len = poles.len();
            let pole = poles
                .get_mut(index)
                .ok_or_else(|| format!("{list}[{index}] does not exist (length {len})"))?;
            match pole_field {
                "plasma_strength" => pole.plasma_strength = value,
                "resonance" => pole.resonance = value,
                "damping" => pole.damping = value,
                _ => return Err(format!("unknown pole field `{pole_field}`")),
            }
        }
    }
    Ok(())
}

/// Empty exactly when [`run_job`] can start.
pub fn validate_config(cfg: &JobConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for (name, m) in &cfg.materials {
        check_material(m, &format!("materials.{name}"), &mut out);
    }

    let g = &cfg.geometry;
    if g.layers.is_empty() {
        out.push(Diagnostic::new("geometry.layers", "at least one layer is required"));
    }
    let mut prev: Option<f64> = None;
    for (i, layer) in g.layers.iter().enumerate() {
        let path = format!("geometry.layers[{i}]");
        if !(layer.radius.is_finite() && layer.radius > 0.0) {
            out.push(Diagnostic::new(
                format!("{path}.radius"),
                format!("{} must be finite and positive", layer.radius),
            ));
        } else if let Some(p) = prev.filter(|&p| layer.radius <= p) {
            out.push(Diagnostic::new(
                format!("{path}.radius"),
                format!("radius {} does not exceed the preceding layer radius {p}", layer.radius),
            ));
        }
        prev = Some(layer.radius);
        if resolve(&cfg.materials, &layer.material).is_none() {
            out.push(Diagnostic::new(
                format!("{path}.material"),
                format!("material `{}` is not defined", layer.material),
            ));
        }
    }
    match resolve(&cfg.materials, &g.exterior) {
        None => out.push(Diagnostic::new(
            "geometry.exterior",
            format!("material `{}` is not defined", g.exterior),
        )),
        Some(m) if !m.is_vacuum() => out.push(Diagnostic::new(
            "geometry.exterior",
            "the stress is defined for a vacuum exterior only",
        )),
        Some(_) => {}
    }

    let n = &cfg.numerics;
    if !(n.tol > 0.0 && n.tol < 1.0) {
        out.push(Diagnostic::new("numerics.tol", format!("{} must lie in (0, 1)", n.tol)));
    }
    if n.l_cap == 0 {
        out.push(Diagnostic::new("numerics.l_cap", "must be positive"));
    }
    if n.n_cap == 0 {
        out.push(Diagnostic::new("numerics.n_cap", "must be positive"));
    }
    if !(n.standoff.is_finite() && n.standoff >= 0.0) {
        out.push(Diagnostic::new("numerics.standoff", format!("{} must be finite and >= 0", n.standoff)));
    }
    if n.cross_check && n.mode != Mode::Matsubara {
        out.push(Diagnostic::new("numerics.cross_check", "only available in matsubara mode"));
    }

    let s = &cfg.sweep;
    match (&s.values, &s.range) {
        (Some(_), Some(_)) => out.push(Diagnostic::new("sweep", "give either `values` or `range`, not both")),
        (None, None) => out.push(Diagnostic::new("sweep", "one of `values` or `range` is required")),
        (Some(v), None) if v.is_empty() => out.push(Diagnostic::new("sweep.values", "must not be empty")),
        (None, Some(r)) => {
            if r.count == 0 {
                out.push(Diagnostic::new("sweep.range.count", "must be positive"));
            }
            if !(r.start.is_finite() && r.stop.is_finite()) {
                out.push(Diagnostic::new("sweep.range", "start and stop must be finite"));
            } else if r.spacing == Spacing::Log && !(r.start > 0.0 && r.stop > 0.0) {
                out.push(Diagnostic::new("sweep.range", "log spacing needs positive start and stop"));
            }
        }
        _ => {}
    }
    let values = sweep_values(s);
    let values_path = if s.values.is_some() { "sweep.values" } else { "sweep.range" };
    let positive = matches!(s.axis, SweepAxis::Temperature | SweepAxis::RadiusScale);
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() || (positive && *v <= 0.0) {
            let what = if positive { "finite and positive" } else { "finite" };
            out.push(Diagnostic::new(format!("{values_path}[{i}]"), format!("{v} must be {what}")));
        }
    }
    match s.axis {
        SweepAxis::Parameter => match &s.path {
            None => out.push(Diagnostic::new("sweep.path", "required for a parameter sweep")),
            Some(p) => {
                for (i, v) in values.iter().enumerate() {
                    let mut m = cfg.materials.clone();
                    match set_parameter(&mut m, p, *v) {
                        Err(e) => {
                            out.push(Diagnostic::new("sweep.path", e));
                            break;
                        }
                        Ok(()) => {
                            let name = p.trim_start_matches("materials.").split('.').next().unwrap_or("");
                            let mut d = Vec::new();
                            check_material(&m[name], &format!("sweep (value {i}) materials.{name}"), &mut d);
                            out.extend(d);
                        }
                    }
                }
            }
        },
        _ => {
            if s.path.is_some() {
                out.push(Diagnostic::new("sweep.path", "only used by parameter sweeps"));
            }
        }
    }
    if s.axis == SweepAxis::Temperature {
        if n.mode == Mode::ZeroT {
            out.push(Diagnostic::new("sweep.axis", "a temperature sweep needs a finite-temperature mode"));
        }
        if cfg.temperature.is_some() {
            out.push(Diagnostic::new("temperature", "set by the temperature sweep; remove it"));
        }
    } else {
        match (cfg.temperature, n.mode) {
            (None, Mode::Matsubara) => out.push(Diagnostic::new("temperature", "required in matsubara mode")),
            (Some(t), Mode::Matsubara) if !(t.is_finite() && t > 0.0) => {
                out.push(Diagnostic::new("temperature", format!("{t} must be finite and positive")))
            }
            (Some(t), Mode::RealAxisDiag) if !(t.is_finite() && t >= 0.0) => {
                out.push(Diagnostic::new("temperature", format!("{t} must be finite and >= 0")))
            }
            (Some(_), Mode::ZeroT) => out.push(Diagnostic::new("temperature", "not used in zero_T mode; remove it")),
            _ => {}
        }
    }

    let o = &cfg.output;
    match (o.units, o.reference_length_m) {
        (Units::Si, None) => out.push(Diagnostic::new("output.reference_length_m", "required for SI units")),
        (Units::Si, Some(l)) if !(l.is_finite() && l > 0.0) => out.push(Diagnostic::new(
            "output.reference_length_m",
            format!("{l} must be finite and positive"),
        )),
        (Units::Reduced, Some(_)) => out.push(Diagnostic::new(
            "output.reference_length_m",
            "only used with SI units",
        )),
        _ => {}
    }
    out
}

/// Geometry and reduced temperature of one sweep point. The config must be
/// valid.
pub fn point_setup(cfg: &JobConfig, value: f64) -> Result<(SphereGeometry, f64), String> {
    let mut materials = cfg.materials.clone();
    let mut scale = 1.0;
    let mut temperature = cfg.temperature.unwrap_or(0.0);
    match cfg.sweep.axis {
        SweepAxis::Temperature => temperature = value,
        SweepAxis::RadiusScale => scale = value,
        SweepAxis::Parameter => {
            let path = cfg.sweep.path.as_deref().ok_or("missing sweep path")?;
            set_parameter(&mut materials, path, value)?;
        }
    }
    let mut layers = Vec::with_capacity(cfg.geometry.layers.len());
    for l in &cfg.geometry.layers {
        let material = resolve(&materials, &l.material).ok_or_else(|| format!("unknown material {}", l.material))?;
        layers.push(Layer {
            radius: l.radius * scale,
            material,
        });
    }
    let exterior =
        resolve(&materials, &cfg.geometry.exterior).ok_or_else(|| format!("unknown material {}", cfg.geometry.exterior))?;
    let geom = SphereGeometry { layers, exterior };
    let t = temperature * geom.radius();
    Ok((geom, t))
}

pub fn stress_options(n: &NumericsConfig) -> StressOptions {
    StressOptions {
        tol: n.tol,
        l_cap: n.l_cap,
        n_cap: n.n_cap,
        standoff: n.standoff,
    }
}

fn real_axis_grid(n: &NumericsConfig) -> RealAxisGrid {
    RealAxisGrid {
        rel_tol: n.tol,
        ..RealAxisGrid::default()
    }
}

/// Everything computed for one sweep point.
#[derive(Debug)]
pub struct PointOutcome {
    pub sweep_value: f64,
    /// Outer radius in config length units.
    pub radius: f64,
    pub result: Result<StressResult, Error>,
    pub cross_check: Option<Result<StressResult, Error>>,
    pub seconds: f64,
}

pub fn run_point(cfg: &JobConfig, value: f64) -> PointOutcome {
    let start = Instant::now();
    let opts = stress_options(&cfg.numerics);
    let setup = point_setup(cfg, value);
    let (result, cross_check, radius) = match setup {
        Err(e) => (Err(Error::Domain(e)), None, f64::NAN),
        Ok((geom, t)) => {
            let radius = geom.radius();
            let (result, cross) = match cfg.numerics.mode {
                Mode::Matsubara => {
                    let r = stress_finite_t(&geom, t, &opts);
                    let c = cfg
                        .numerics
                        .cross_check
                        .then(|| stress_real_axis_diagnostic(&geom, t, real_axis_grid(&cfg.numerics), &opts));
                    (r, c)
                }
                Mode::ZeroT => (stress_zero_t(&geom, &opts), None),
                Mode::RealAxisDiag => (
                    stress_real_axis_diagnostic(&geom, t, real_axis_grid(&cfg.numerics), &opts),
                    None,
                ),
            };
            (result, cross, radius)
        }
    };
    PointOutcome {
        sweep_value: value,
        radius,
        result,
        cross_check,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// One CSV line. Optional fields print as empty cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub t_rr: f64,
    pub l_max: usize,
    pub n_max: Option<usize>,
    pub tail: f64,
    pub seconds: Option<f64>,
}

impl ResultRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            fmt_e(self.sweep_value),
            fmt_e(self.t_rr),
            self.l_max,
            self.n_max.map(|n| n.to_string()).unwrap_or_default(),
            fmt_e(self.tail),
            self.seconds.map(fmt_e).unwrap_or_default(),
        )
    }
}

/// C `%.12e`: twelve mantissa digits, signed exponent of at least two digits.
pub fn fmt_e(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.12e}");
    let (mant, exp) = s.split_once('e').unwrap_or((&s, "0"));
    let e: i32 = exp.parse().unwrap_or(0);
    let sign = if e < 0 { '-' } else { '+' };
    format!("{mant}e{sign}{:02}", e.abs())
}

/// Pa per `hbar c / R^4` for an outer radius of `radius_m` meters.
pub fn si_factor(radius_m: f64) -> f64 {
    HBAR_C / radius_m.powi(4)
}

fn unit_factor(cfg: &JobConfig, radius: f64) -> f64 {
    match (cfg.output.units, cfg.output.reference_length_m) {
        (Units::Si, Some(l)) => si_factor(radius * l),
        _ => 1.0,
    }
}

pub fn result_row(cfg: &JobConfig, p: &PointOutcome, r: &StressResult) -> ResultRow {
    let f = unit_factor(cfg, p.radius);
    ResultRow {
        sweep_value: p.sweep_value,
        t_rr: r.t_rr * f,
        l_max: r.l_max_used,
        n_max: (r.mode == StressMode::Matsubara).then_some(r.n_max_used),
        tail: r.tail_estimate * f,
        seconds: cfg.output.timing.then_some(p.seconds),
    }
}

fn largest_tail(r: &StressResult) -> f64 {
    r.frequencies.iter().map(|d| d.tail).fold(r.tail_estimate, f64::max)
}

/// Human-readable convergence summary of one stress evaluation, optionally
/// with a real-axis cross-check value.
pub fn emit_convergence_report(result: &StressResult, cross_check: Option<&StressResult>) -> String {
    let mut s = String::new();
    let mode = match result.mode {
        StressMode::Matsubara => "matsubara",
        StressMode::ImagAxisT0 => "zero_T",
        StressMode::RealAxisDiagnostic => "real_axis_diag",
    };
    let _ = writeln!(s, "mode: {mode}");
    if result.mode != StressMode::ImagAxisT0 {
        let _ = writeln!(s, "temperature (reduced): {}", fmt_e(result.temperature));
    }
    let _ = writeln!(s, "standoff: {}", fmt_e(result.standoff));
    let target = result.tol * result.t_rr.abs();
    if result.converged {
        let _ = writeln!(s, "T_RR (hbar c / R^4): {}", fmt_e(result.t_rr));
        if result.tail_estimate <= target || result.t_rr == 0.0 {
            let _ = writeln!(s, "tail < tol: {:.3e} < {:.3e}", result.tail_estimate, target);
        } else {
            let _ = writeln!(s, "tail >= tol: {:.3e} >= {:.3e}", result.tail_estimate, target);
        }
    } else {
        let _ = writeln!(s, "NOT CONVERGED");
        let _ = writeln!(s, "partial sum T_RR (hbar c / R^4): {}", fmt_e(result.t_rr));
        let _ = writeln!(s, "largest tail: {:.3e}", largest_tail(result));
    }
    let _ = writeln!(s, "l_max used: {}", result.l_max_used);
    if result.mode == StressMode::Matsubara {
        let _ = writeln!(s, "n_max used: {}", result.n_max_used);
    }
    let _ = writeln!(s, "imaginary residue: {:.3e}", result.imaginary_residue);
    if let Some(c) = cross_check {
        let dev = if result.t_rr != 0.0 {
            ((c.t_rr - result.t_rr) / result.t_rr).abs()
        } else {
            c.t_rr.abs()
        };
        let _ = writeln!(
            s,
            "cross-check (real axis): T_RR = {}, relative deviation {:.3e}",
            fmt_e(c.t_rr),
            dev
        );
    }
    if !result.frequencies.is_empty() {
        if result.mode == StressMode::Matsubara {
            let _ = writeln!(s, "{:>8} {:>20} {:>6} {:>10} {:>20}", "n", "xi_n", "l_max", "tail", "xi S(i xi)");
            for d in &result.frequencies {
                let _ = writeln!(
                    s,
                    "{:>8} {:>20} {:>6} {:>10.3e} {:>20}",
                    d.n.unwrap_or(0),
                    fmt_e(d.omega.im),
                    d.l_max,
                    d.tail,
                    fmt_e(d.value)
                );
            }
        } else {
            let (head, value) = if result.mode == StressMode::ImagAxisT0 {
                ("xi", "xi S(i xi)")
            } else {
                ("x", "integrand")
            };
            let _ = writeln!(s, "{:>20} {:>6} {:>10} {:>20}", head, "l_max", "tail", value);
            for d in &result.frequencies {
                let w = if result.mode == StressMode::ImagAxisT0 { d.omega.im } else { d.omega.re };
                let _ = writeln!(s, "{:>20} {:>6} {:>10.3e} {:>20}", fmt_e(w), d.l_max, d.tail, fmt_e(d.value));
            }
        }
    }
    s
}

/// Result of a whole job before anything is written.
#[derive(Debug)]
pub struct JobRun {
    pub points: Vec<PointOutcome>,
}

impl JobRun {
    /// Rows of the points that finished, in sweep order.
    pub fn rows(&self, cfg: &JobConfig) -> Vec<ResultRow> {
        self.points
            .iter()
            .filter_map(|p| p.result.as_ref().ok().map(|r| result_row(cfg, p, r)))
            .collect()
    }

    pub fn csv(&self, cfg: &JobConfig) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for row in self.rows(cfg) {
            s.push_str(&row.to_csv_line());
            s.push('\n');
        }
        s
    }

    pub fn failures(&self) -> Vec<String> {
        self.points
            .iter()
            .filter_map(|p| {
                p.result
                    .as_ref()
                    .err()
                    .map(|e| format!("sweep value {}: {e}", fmt_e(p.sweep_value)))
            })
            .collect()
    }

    pub fn report(&self) -> String {
        let mut s = String::new();
        for p in &self.points {
            let _ = writeln!(s, "== sweep value {} ==", fmt_e(p.sweep_value));
            let cross = p.cross_check.as_ref().and_then(|c| c.as_ref().ok());
            match &p.result {
                Ok(r) => s.push_str(&emit_convergence_report(r, cross)),
                Err(Error::NonConvergence { reason, partial }) => {
                    let _ = writeln!(s, "error: {reason}");
                    s.push_str(&emit_convergence_report(partial, cross));
                }
                Err(e) => {
                    let _ = writeln!(s, "error: {e}");
                }
            }
            if let Some(Err(e)) = &p.cross_check {
                let _ = writeln!(s, "cross-check failed: {e}");
            }
            s.push('\n');
        }
        s
    }
}

/// Runs every sweep point (in parallel) without writing anything.
pub fn execute(cfg: &JobConfig) -> JobRun {
    let values = sweep_values(&cfg.sweep);
    let points = values.par_iter().map(|&v| run_point(cfg, v)).collect();
    JobRun { points }
}

/// Command-line settings that are not part of the experiment record.
#[derive(Debug, Clone, Default)]
pub struct RunArgs {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    /// 0 picks the number of cores.
    pub threads: usize,
    pub verbose: bool,
}

fn write_file(path: &Path, text: &str) -> std::io::Result<()> {
    std::fs::write(path, text.as_bytes())
}

/// Validates, runs and writes one job; returns the process exit code.
pub fn run_job(cfg: &JobConfig, out: Option<&Path>, verbose: bool) -> i32 {
    let diags = validate_config(cfg);
    if !diags.is_empty() {
        for d in &diags {
            eprintln!("config error at {d}");
        }
        return EXIT_SCHEMA;
    }
    let run = execute(cfg);
    let csv = run.csv(cfg);
    let target = out.map(Path::to_path_buf).or_else(|| cfg.output.path.clone());
    let written = match &target {
        Some(p) => write_file(p, &csv),
        None => std::io::stdout().lock().write_all(csv.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("cannot write results: {e}");
        return EXIT_IO;
    }
    let report = run.report();
    if let Some(p) = &cfg.output.report {
        if let Err(e) = write_file(p, &report) {
            eprintln!("cannot write report {}: {e}", p.display());
            return EXIT_IO;
        }
    } else if verbose {
        eprint!("{report}");
    }
    let failures = run.failures();
    for f in &failures {
        eprintln!("{f}");
    }
    if failures.is_empty() {
        EXIT_OK
    } else {
        EXIT_CONVERGENCE
    }
}

/// Whole command: read and parse the config, size the thread pool, run.
pub fn run_cli(args: &RunArgs) -> i32 {
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", args.config.display());
            return EXIT_IO;
        }
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(d) => {
            eprintln!("config error at {d}");
            return EXIT_SCHEMA;
        }
    };
    // output paths in the config are relative to the config file
    if let Some(dir) = args.config.parent() {
        for p in [&mut cfg.output.path, &mut cfg.output.report].into_iter().flatten() {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
    }
    if args.threads > 0 {
        // a pool that already exists (tests, embedding) is kept
        let _ = rayon::ThreadPoolBuilder::new().num_threads(args.threads).build_global();
    }
    if args.verbose {
        eprintln!(
            "{} sweep points, mode {:?}, {} threads",
            sweep_values(&cfg.sweep).len(),
            cfg.numerics.mode,
            rayon::current_num_threads()
        );
    }
    run_job(&cfg, args.out.as_deref(), args.verbose)
}
