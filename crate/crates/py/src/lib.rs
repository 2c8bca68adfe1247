//! Python bindings: a thin layer over the core crate exposing scenario
//! configuration, the stepper, and the kernel validation suite. Build the
//! cdylib with cargo and rename/copy it to `slafem_py.so` on the import
//! path; python/smoke_test.py in the repository root automates that.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use slafem::scenario;
use slafem::sla::{self, StepOptions};
use slafem::{Error, ScenarioConfig, SimState};
use std::path::PathBuf;

fn py_err(e: Error) -> PyErr {
    match &e {
        Error::Parse(_) | Error::Validation(_) | Error::InvalidGeometry(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// One diagnostics row of a completed step.
#[pyclass(frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct StepRecord {
    step: usize,
    time: f64,
    apex_height: f64,
    min_area_ratio: f64,
    max_u: f64,
    residual: f64,
    i1: f64,
    i2: f64,
    i3: f64,
}

impl From<sla::StepRecord> for StepRecord {
    fn from(r: sla::StepRecord) -> Self {
        StepRecord {
            step: r.step,
            time: r.time,
            apex_height: r.apex_height,
            min_area_ratio: r.min_area_ratio,
            max_u: r.max_u,
            residual: r.residual,
            i1: r.i1,
            i2: r.i2,
            i3: r.i3,
        }
    }
}

#[pymethods]
impl StepRecord {
    fn __repr__(&self) -> String {
        format!(
            "StepRecord(step={}, time={:.4}, apex_height={:.4}, min_area_ratio={:.4}, max_u={:.3e})",
            self.step, self.time, self.apex_height, self.min_area_ratio, self.max_u
        )
    }
}

/// A scenario configuration: geometry, materials, time stepping, output.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Scenario {
    cfg: ScenarioConfig,
}

#[pymethods]
impl Scenario {
    /// Built-in scenario by name: "diapir_6_1" or "incline_6_2".
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        Ok(Scenario {
            cfg: scenario::preset(name).map_err(py_err)?,
        })
    }

    /// Parse a TOML scenario document.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Scenario {
            cfg: scenario::parse_config(text).map_err(py_err)?,
        })
    }

    /// Apply one dotted-path override, e.g. set("geometry.nx", 60).
    fn set(&mut self, key: &str, value: Bound<'_, PyAny>) -> PyResult<()> {
        let rendered = if let Ok(b) = value.extract::<bool>() {
            b.to_string()
        } else {
            value.str()?.to_string()
        };
        let sets = vec![format!("{key}={rendered}")];
        self.cfg = scenario::apply_overrides(&self.cfg, &sets).map_err(py_err)?;
        Ok(())
    }

    fn to_toml(&self) -> PyResult<String> {
        scenario::serialize_config(&self.cfg).map_err(py_err)
    }

    /// Initialize a simulation, applying the configured perturbation.
    fn build(&self) -> PyResult<Simulation> {
        let settings = self.cfg.to_run_settings();
        let mut sim = sla::initialize(
            &settings.geometry,
            settings.params,
            settings.gravity,
            settings.dt,
        )
        .map_err(py_err)?;
        if let Some(p) = &settings.perturbation {
            sla::apply_perturbation(&mut sim, p.center_x, p.half_width, p.amplitude, settings.te_update)
                .map_err(py_err)?;
        }
        let opts = StepOptions {
            solver: settings.solver,
            te_update: settings.te_update,
            decomposition: settings.decomposition,
            max_speed: settings.max_speed,
            substep_dt: settings.substep_dt,
        };
        Ok(Simulation { sim, opts })
    }

    /// Run the whole scenario, writing snapshots and diagnostics.csv to the
    /// configured output directory. Returns the records; raises if the run
    /// aborted partway.
    fn run(&self) -> PyResult<Vec<StepRecord>> {
        let outcome = scenario::run_scenario(&self.cfg).map_err(py_err)?;
        if let Some(e) = outcome.error {
            return Err(py_err(e));
        }
        Ok(outcome.records.into_iter().map(StepRecord::from).collect())
    }

    fn __repr__(&self) -> String {
        let g = &self.cfg.geometry;
        format!(
            "Scenario({}x{} mesh, {} steps of {} Ma)",
            g.nx,
            g.ny_salt + g.ny_sediment,
            self.cfg.time.n_steps,
            self.cfg.time.dt
        )
    }
}

/// A live simulation: step it, interrogate it, snapshot it.
#[pyclass]
struct Simulation {
    sim: SimState,
    opts: StepOptions,
}

#[pymethods]
impl Simulation {
    /// Advance one step and return its record.
    fn step(&mut self) -> PyResult<StepRecord> {
        sla::step(&mut self.sim, &self.opts)
            .map(StepRecord::from)
            .map_err(py_err)
    }

    /// Advance n steps, returning all records.
    fn run(&mut self, n: usize) -> PyResult<Vec<StepRecord>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.step()?);
        }
        Ok(out)
    }

    /// Displace the interface by a cosine-squared bump.
    fn perturb(&mut self, center_x: f64, half_width: f64, amplitude: f64) -> PyResult<()> {
        sla::apply_perturbation(
            &mut self.sim,
            center_x,
            half_width,
            amplitude,
            self.opts.te_update,
        )
        .map_err(py_err)
    }

    #[getter]
    fn time(&self) -> f64 {
        self.sim.time
    }

    #[getter]
    fn steps_done(&self) -> usize {
        self.sim.step
    }

    #[getter]
    fn apex_height(&self) -> f64 {
        self.sim.apex_height()
    }

    #[getter]
    fn min_area_ratio(&self) -> f64 {
        self.sim.min_area_ratio()
    }

    #[getter]
    fn max_detf_deviation(&self) -> f64 {
        self.sim.max_detf_deviation()
    }

    /// Current (salt, sediment) mass per unit depth.
    fn region_mass(&self) -> (f64, f64) {
        let m = self.sim.region_mass();
        (m[0], m[1])
    }

    /// Interface node positions left to right as (x, y) pairs.
    fn interface_profile(&self) -> Vec<(f64, f64)> {
        self.sim
            .interface_profile()
            .into_iter()
            .map(|p| (p.x, p.y))
            .collect()
    }

    /// All node positions as (x, y) pairs.
    fn nodes(&self) -> Vec<(f64, f64)> {
        self.sim.mesh.nodes.iter().map(|p| (p.x, p.y)).collect()
    }

    /// Node displacements since initialization as (x, y) pairs.
    fn displacements(&self) -> Vec<(f64, f64)> {
        self.sim
            .displacements()
            .into_iter()
            .map(|p| (p.x, p.y))
            .collect()
    }

    /// Write the current state as a legacy-ASCII VTK file.
    fn write_vtk(&self, path: PathBuf) -> PyResult<()> {
        scenario::write_vtk(&self.sim, &path).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Simulation(step={}, time={:.4} Ma, apex={:.2} m)",
            self.sim.step,
            self.sim.time,
            self.sim.apex_height()
        )
    }
}

/// Check the analytic kernels against finite differences of the constitutive
/// map on random states; returns (elasticity, viscosity) max relative errors.
#[pyfunction]
#[pyo3(signature = (samples = 100, seed = 42))]
fn validate_kernels(samples: usize, seed: u64) -> PyResult<(f64, f64)> {
    let cfg = scenario::preset("diapir_6_1").map_err(py_err)?;
    let report = slafem::material::kernel_validation_suite(&[cfg.salt, cfg.sediment], samples, seed)
        .map_err(py_err)?;
    Ok((report.max_rel_err_elasticity, report.max_rel_err_viscosity))
}

#[pymodule]
fn slafem_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_class::<Simulation>()?;
    m.add_class::<StepRecord>()?;
    m.add_function(wrap_pyfunction!(validate_kernels, m)?)?;
    Ok(())
}
