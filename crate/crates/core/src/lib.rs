//! Quasi-static finite element simulation of slow viscoelastic flow in
//! layered solids, aimed at salt tectonics: a dense salt-under-sediment
//! column destabilizes and grows a diapir, or creeps downhill when tilted.
//!
//! Each time step linearizes the constitutive law about the current
//! configuration, solves one linear boundary value problem for the
//! displacement increment on the current mesh, then moves the mesh and
//! updates the per-element state. Large deformation accumulates through
//! many such small steps, so no global reference configuration is kept.
//!
//! Module map:
//! - [`tensor`]: 2D vectors and second-order tensors.
//! - [`material`]: constitutive law, linearized kernels, per-point state.
//! - [`mesh`]: structured triangulation of the two-layer rectangle.
//! - [`sparse`], [`solver`]: COO/CSR matrices, banded LU and BiCGSTAB.
//! - [`fem`]: element matrices, assembly, boundary conditions.
//! - [`sla`]: the stepper, initialization, perturbation, run loop.
//! - [`scenario`]: TOML configs, presets, VTK/CSV output.

pub mod error;
pub mod fem;
pub mod material;
pub mod mesh;
pub mod scenario;
pub mod sla;
pub mod solver;
pub mod sparse;
pub mod tensor;

pub use error::{Error, Result};
pub use fem::RegionParams;
pub use material::{MaterialParams, PointState, TeUpdate};
pub use mesh::{Geometry, Mesh, Region};
pub use scenario::{parse_config, preset, run_scenario, ScenarioConfig};
pub use sla::{GravitySpec, RunOutcome, RunSettings, SimState, StepRecord};
pub use solver::{SolverMethod, SolverOptions};
pub use tensor::{Tensor2, Vec2};
