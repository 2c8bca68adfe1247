//! Scenario configuration and file output.
//!
//! A scenario is a TOML file with the sections [geometry], [salt], [sediment],
//! [time], [gravity], [perturbation], [output] and [solver]. Unknown keys are
//! rejected so a typo cannot silently fall back to a default. Two built-in
//! presets cover the reference experiments: a perturbed flat interface under
//! heavier overburden (diapir_6_1) and a slowly tilted basin (incline_6_2).
//!
//! Snapshots are legacy ASCII VTK, one file per cadence point; the per-step
//! diagnostics go to one CSV. Floats are written with Rust's shortest
//! round-trip formatting, so a file parsed back yields bitwise-equal numbers
//! and two identical runs yield byte-identical files.

use crate::error::{Error, Result};
use crate::fem::RegionParams;
use crate::material::{MaterialParams, TeUpdate};
use crate::mesh::{Geometry, Region};
use crate::sla::{self, ResolvedPerturbation, RunOutcome, RunSettings, SimState, StepRecord};
use crate::solver::SolverOptions;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub geometry: Geometry,
    pub salt: MaterialParams,
    pub sediment: MaterialParams,
    pub time: TimeCfg,
    #[serde(default)]
    pub gravity: GravityCfg,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationCfg>,
    #[serde(default)]
    pub output: OutputCfg,
    #[serde(default)]
    pub solver: SolverOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeCfg {
    /// Step length, Ma.
    pub dt: f64,
    pub n_steps: usize,
    #[serde(default = "default_te_update")]
    pub te_update: TeUpdate,
    /// Per-step displacement cap expressed as a speed, m/Ma; 0 disables.
    /// Keeps each increment inside the |H| << 1 regime of the linearized
    /// step when the interface instability outruns the time step.
    #[serde(default = "default_max_speed")]
    pub max_speed: f64,
    /// Upper bound on the internal step, Ma; a longer dt runs as equal
    /// sub-steps no longer than this, which keeps the implicit update below
    /// its stability pole whatever the output cadence. 0 disables.
    #[serde(default = "default_substep_dt")]
    pub substep_dt: f64,
}

fn default_te_update() -> TeUpdate {
    TeUpdate::Increment
}

fn default_max_speed() -> f64 {
    20.0
}

fn default_substep_dt() -> f64 {
    0.05
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GravityCfg {
    #[serde(default = "default_g")]
    pub magnitude: f64,
    #[serde(default)]
    pub ramp_angle_deg: f64,
    #[serde(default)]
    pub ramp_steps: usize,
}

fn default_g() -> f64 {
    9.81
}

impl Default for GravityCfg {
    fn default() -> Self {
        GravityCfg {
            magnitude: default_g(),
            ramp_angle_deg: 0.0,
            ramp_steps: 0,
        }
    }
}

/// Interface bump. Unset values resolve against the active mesh: centered,
/// two element widths half-width, 1% of the salt thickness amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationCfg {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputCfg {
    #[serde(default = "default_dir")]
    pub directory: String,
    /// Snapshot every this many steps; 0 keeps only the first and last.
    #[serde(default = "default_cadence")]
    pub snapshot_cadence: usize,
    /// Record the load decomposition norms in the diagnostics.
    #[serde(default = "default_true")]
    pub decomposition: bool,
}

fn default_dir() -> String {
    "out".to_string()
}
fn default_cadence() -> usize {
    10
}
fn default_true() -> bool {
    true
}

impl Default for OutputCfg {
    fn default() -> Self {
        OutputCfg {
            directory: default_dir(),
            snapshot_cadence: default_cadence(),
            decomposition: default_true(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if !(self.time.dt > 0.0) {
            return Err(Error::Validation(format!(
                "time.dt must be positive, got {}",
                self.time.dt
            )));
        }
        if !(self.time.max_speed >= 0.0) {
            return Err(Error::Validation(format!(
                "time.max_speed must be zero or positive, got {}",
                self.time.max_speed
            )));
        }
        if !(self.time.substep_dt >= 0.0) {
            return Err(Error::Validation(format!(
                "time.substep_dt must be zero or positive, got {}",
                self.time.substep_dt
            )));
        }
        for (name, m) in [("salt", &self.salt), ("sediment", &self.sediment)] {
            if !(m.rho0 > 0.0) {
                return Err(Error::Validation(format!(
                    "{name}.rho0 must be positive, got {}",
                    m.rho0
                )));
            }
            if !(m.beta > 0.0) {
                return Err(Error::Validation(format!(
                    "{name}.beta must be positive, got {}",
                    m.beta
                )));
            }
        }
        if !(self.gravity.magnitude > 0.0) {
            return Err(Error::Validation(format!(
                "gravity.magnitude must be positive, got {}",
                self.gravity.magnitude
            )));
        }
        if !(self.solver.tol > 0.0) {
            return Err(Error::Validation(format!(
                "solver.tol must be positive, got {}",
                self.solver.tol
            )));
        }
        if self.solver.max_iter == 0 {
            return Err(Error::Validation("solver.max_iter must be at least 1".into()));
        }
        if let Some(p) = self.resolved_perturbation() {
            let cap = 0.05 * self.geometry.salt_height;
            if !(p.amplitude.abs() <= cap) {
                return Err(Error::Validation(format!(
                    "perturbation.amplitude {} exceeds 5% of the salt thickness ({cap})",
                    p.amplitude
                )));
            }
            if !(p.half_width > 0.0) {
                return Err(Error::Validation(format!(
                    "perturbation.half_width must be positive, got {}",
                    p.half_width
                )));
            }
        }
        Ok(())
    }

    pub fn resolved_perturbation(&self) -> Option<ResolvedPerturbation> {
        self.perturbation.map(|p| ResolvedPerturbation {
            center_x: p.center_x.unwrap_or(0.5 * self.geometry.length),
            half_width: p
                .half_width
                .unwrap_or(2.0 * self.geometry.length / self.geometry.nx.max(1) as f64),
            amplitude: p.amplitude.unwrap_or(0.01 * self.geometry.salt_height),
        })
    }

    pub fn to_run_settings(&self) -> RunSettings {
        RunSettings {
            geometry: self.geometry,
            params: RegionParams {
                salt: self.salt,
                sediment: self.sediment,
            },
            gravity: sla::GravitySpec {
                magnitude: self.gravity.magnitude,
                ramp_angle_deg: self.gravity.ramp_angle_deg,
                ramp_steps: self.gravity.ramp_steps,
            },
            dt: self.time.dt,
            n_steps: self.time.n_steps,
            te_update: self.time.te_update,
            solver: self.solver,
            decomposition: self.output.decomposition,
            max_speed: self.time.max_speed,
            substep_dt: self.time.substep_dt,
            perturbation: self.resolved_perturbation(),
            snapshot_cadence: self.output.snapshot_cadence,
        }
    }
}

fn de_error(text: &str, e: toml::de::Error) -> Error {
    let line = e
        .span()
        .map(|s| text.as_bytes()[..s.start.min(text.len())].iter().filter(|&&b| b == b'\n').count() + 1);
    match line {
        Some(l) => Error::Parse(format!("config line {l}: {}", e.message())),
        None => Error::Parse(e.message().to_string()),
    }
}

/// Parse and validate a scenario file.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| de_error(text, e))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn serialize_config(cfg: &ScenarioConfig) -> Result<String> {
    toml::to_string_pretty(cfg).map_err(|e| Error::Parse(e.to_string()))
}

fn parse_override_value(raw: &str) -> toml::Value {
    if let Ok(v) = raw.parse::<i64>() {
        return toml::Value::Integer(v);
    }
    if let Ok(v) = raw.parse::<f64>() {
        return toml::Value::Float(v);
    }
    if let Ok(v) = raw.parse::<bool>() {
        return toml::Value::Boolean(v);
    }
    toml::Value::String(raw.to_string())
}

/// Apply `--set section.key=value` overrides on top of a config and
/// re-validate. Creating a missing section is allowed (so a preset without a
/// [perturbation] can gain one), but unknown keys are still rejected.
pub fn apply_overrides(cfg: &ScenarioConfig, sets: &[String]) -> Result<ScenarioConfig> {
    if sets.is_empty() {
        return Ok(cfg.clone());
    }
    let value = toml::Value::try_from(cfg).map_err(|e| Error::Parse(e.to_string()))?;
    let toml::Value::Table(mut table) = value else {
        return Err(Error::Parse("config did not serialize to a table".into()));
    };
    for set in sets {
        let (path, raw) = set
            .split_once('=')
            .ok_or_else(|| Error::Validation(format!("--set expects key=value, got {set:?}")))?;
        let mut segments: Vec<&str> = path.split('.').collect();
        let leaf = segments.pop().filter(|s| !s.is_empty()).ok_or_else(|| {
            Error::Validation(format!("--set key must be a dotted path, got {path:?}"))
        })?;
        let mut cursor = &mut table;
        for seg in segments {
            cursor = cursor
                .entry(seg.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| {
                    Error::Validation(format!("--set path {path:?}: {seg} is not a section"))
                })?;
        }
        cursor.insert(leaf.to_string(), parse_override_value(raw));
    }
    let cfg: ScenarioConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e| Error::Parse(format!("override rejected: {}", e.message())))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Built-in reference scenarios.
pub fn preset(name: &str) -> Result<ScenarioConfig> {
    match name {
        "diapir_6_1" => Ok(ScenarioConfig {
            geometry: Geometry {
                length: 1200.0,
                salt_height: 100.0,
                sediment_height: 200.0,
                nx: 120,
                ny_salt: 10,
                ny_sediment: 20,
            },
            salt: MaterialParams {
                rho0: 2.2e3,
                s1: 0.0,
                s2: -0.2e3,
                lambda: -10.0e3,
                mu1: 15.0e3,
                mu2: 0.0,
                mu3: 0.0,
                beta: 1e9,
            },
            sediment: MaterialParams {
                rho0: 3.0e3,
                s1: 2.5e3,
                s2: -7.5e3,
                lambda: 0.0,
                mu1: 0.0,
                mu2: 0.0,
                mu3: 0.0,
                beta: 1e9,
            },
            time: TimeCfg {
                dt: 0.1,
                n_steps: 300,
                te_update: TeUpdate::Increment,
                max_speed: default_max_speed(),
                substep_dt: default_substep_dt(),
            },
            gravity: GravityCfg::default(),
            perturbation: Some(PerturbationCfg::default()),
            output: OutputCfg::default(),
            solver: SolverOptions::default(),
        }),
        "incline_6_2" => Ok(ScenarioConfig {
            geometry: Geometry {
                length: 5000.0,
                salt_height: 100.0,
                sediment_height: 200.0,
                nx: 250,
                ny_salt: 5,
                ny_sediment: 10,
            },
            salt: MaterialParams {
                rho0: 2.2e3,
                s1: 0.0,
                s2: -0.2e3,
                lambda: -10.0e3,
                mu1: 15.0e3,
                mu2: 0.0,
                mu3: 0.0,
                beta: 2e9,
            },
            sediment: MaterialParams {
                rho0: 3.0e3,
                s1: 2.5e3,
                s2: -7.5e3,
                lambda: 0.0,
                mu1: 0.0,
                mu2: 0.0,
                mu3: 0.0,
                beta: 2e9,
            },
            time: TimeCfg {
                dt: 0.1,
                n_steps: 1500,
                te_update: TeUpdate::Increment,
                max_speed: default_max_speed(),
                substep_dt: default_substep_dt(),
            },
            gravity: GravityCfg {
                magnitude: 9.81,
                ramp_angle_deg: 1.0,
                ramp_steps: 10,
            },
            perturbation: None,
            output: OutputCfg::default(),
            solver: SolverOptions::default(),
        }),
        other => Err(Error::Validation(format!(
            "unknown preset {other:?} (available: diapir_6_1, incline_6_2)"
        ))),
    }
}

/// Legacy ASCII VTK snapshot: mesh, per-cell state, nodal displacement.
pub fn write_vtk(sim: &SimState, path: &Path) -> Result<()> {
    let mesh = &sim.mesh;
    let mut s = String::with_capacity(64 * mesh.nodes.len());
    s.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(s, "slafem snapshot step {} time {} Ma", sim.step, sim.time);
    s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", mesh.nodes.len());
    for p in &mesh.nodes {
        let _ = writeln!(s, "{} {} 0", p.x, p.y);
    }
    let nt = mesh.triangles.len();
    let _ = writeln!(s, "CELLS {} {}", nt, 4 * nt);
    for tri in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", tri[0], tri[1], tri[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "CELL_DATA {nt}");
    s.push_str("SCALARS region int 1\nLOOKUP_TABLE default\n");
    for r in &mesh.region {
        s.push_str(match r {
            Region::Salt => "0\n",
            Region::Sediment => "1\n",
        });
    }
    s.push_str("SCALARS p double 1\nLOOKUP_TABLE default\n");
    for st in &sim.states {
        let _ = writeln!(s, "{}", st.p);
    }
    s.push_str("SCALARS rho double 1\nLOOKUP_TABLE default\n");
    for st in &sim.states {
        let _ = writeln!(s, "{}", st.rho);
    }
    s.push_str("SCALARS det_f double 1\nLOOKUP_TABLE default\n");
    for st in &sim.states {
        let _ = writeln!(s, "{}", st.f.det());
    }
    s.push_str("TENSORS t_e double\n");
    for st in &sim.states {
        let t = st.t_e;
        let _ = writeln!(s, "{} {} 0\n{} {} 0\n0 0 0", t.a11, t.a12, t.a21, t.a22);
    }
    let _ = writeln!(s, "POINT_DATA {}", mesh.nodes.len());
    s.push_str("VECTORS displacement double\n");
    for d in sim.displacements() {
        let _ = writeln!(s, "{} {} 0", d.x, d.y);
    }
    fs::write(path, s)?;
    Ok(())
}

pub const DIAGNOSTICS_HEADER: &str =
    "step,time_Ma,apex_height_m,min_area_ratio,max_u_m,residual,I1,I2,I3";

pub fn write_diagnostics_csv(records: &[StepRecord], path: &Path) -> Result<()> {
    let mut s = String::with_capacity(64 * (records.len() + 1));
    s.push_str(DIAGNOSTICS_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.step, r.time, r.apex_height, r.min_area_ratio, r.max_u, r.residual, r.i1, r.i2, r.i3
        );
    }
    fs::write(path, s)?;
    Ok(())
}

/// Run a scenario end to end, writing snapshots and diagnostics under the
/// configured output directory. A failed step still leaves the diagnostics
/// rows collected so far on disk; the error is surfaced in the outcome.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let dir = Path::new(&cfg.output.directory);
    fs::create_dir_all(dir)?;
    let settings = cfg.to_run_settings();
    let outcome = sla::run(&settings, |sim| {
        write_vtk(sim, &dir.join(format!("snapshot_{:05}.vtk", sim.step)))
    })?;
    write_diagnostics_csv(&outcome.records, &dir.join("diagnostics.csv"))?;
    Ok(outcome)
}
