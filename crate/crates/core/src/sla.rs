//! The successive-linear-approximation stepper.
//!
//! Each global step linearizes the constitutive law about the current
//! configuration, solves one linear boundary value problem for the
//! displacement increment, then moves the mesh and advances the per-element
//! state. Large deformation is reached as the accumulation of many such
//! increments; no step ever iterates.
//!
//! The initial state is lithostatic: a hydrostatic elastic stress balancing
//! vertical gravity exactly, which the discrete equations reproduce to
//! roundoff (the pressure profile is piecewise linear and the centroid rule
//! integrates it exactly). An unperturbed run therefore stays put, and any
//! later motion is a response to an explicit disturbance: an interface bump
//! or a gravity rotation.

use crate::error::{Error, Result};
use crate::fem::{
    assemble_rhs_parts, assemble_system, body_force_norm, tri_grads, DofMap, RegionParams,
};
use crate::material::{update_point_state, PointState, TeUpdate};
use crate::mesh::{build_mesh, Geometry, Mesh, Region};
use crate::solver::{solve, SolveReport, SolverOptions};
use crate::tensor::{Tensor2, Vec2};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GravitySpec {
    /// |g|, m/s^2.
    pub magnitude: f64,
    /// Final tilt, degrees counter-clockwise; positive tips downhill toward +x.
    pub ramp_angle_deg: f64,
    /// Steps over which the tilt is applied; 0 means immediately.
    pub ramp_steps: usize,
}

impl GravitySpec {
    pub fn vertical(magnitude: f64) -> Self {
        GravitySpec {
            magnitude,
            ramp_angle_deg: 0.0,
            ramp_steps: 0,
        }
    }

    /// Gravity vector in effect at global step n.
    pub fn at_step(&self, n: usize) -> Vec2 {
        self.at_step_coord(n as f64)
    }

    /// Gravity at a possibly fractional step coordinate; sub-steps sample the
    /// ramp partway between whole steps.
    pub fn at_step_coord(&self, s: f64) -> Vec2 {
        gravity_ramp(
            s,
            self.ramp_steps,
            self.ramp_angle_deg,
            Vec2::new(0.0, -self.magnitude),
        )
    }
}

/// Rotate g0 counter-clockwise by angle_deg * min(s / ramp_steps, 1).
pub fn gravity_ramp(s: f64, ramp_steps: usize, angle_deg: f64, g0: Vec2) -> Vec2 {
    let frac = if ramp_steps == 0 {
        1.0
    } else {
        (s / ramp_steps as f64).min(1.0)
    };
    let theta = (angle_deg * frac).to_radians();
    let (s, c) = theta.sin_cos();
    Vec2::new(c * g0.x - s * g0.y, s * g0.x + c * g0.y)
}

/// Lithostatic pressure at height y for the two-layer column, zero at the free
/// surface.
pub fn lithostatic_pressure(y: f64, geom: &Geometry, params: &RegionParams, g: f64) -> f64 {
    if y >= geom.salt_height {
        params.sediment.rho0 * g * (geom.total_height() - y)
    } else {
        params.sediment.rho0 * g * geom.sediment_height
            + params.salt.rho0 * g * (geom.salt_height - y)
    }
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub geometry: Geometry,
    pub mesh: Mesh,
    /// One state per element (centroid quadrature).
    pub states: Vec<PointState>,
    pub params: RegionParams,
    pub gravity: GravitySpec,
    /// Step length; time is measured in Ma throughout.
    pub dt: f64,
    pub step: usize,
    pub time: f64,
    pub dof_map: DofMap,
    initial_nodes: Vec<Vec2>,
    initial_areas: Vec<f64>,
    initial_mass: [f64; 2],
}

pub fn initialize(
    geom: &Geometry,
    params: RegionParams,
    gravity: GravitySpec,
    dt: f64,
) -> Result<SimState> {
    if !(dt > 0.0) {
        return Err(Error::Validation(format!("dt must be positive, got {dt}")));
    }
    let mesh = build_mesh(geom)?;
    let dof_map = DofMap::rollers(&mesh);
    let states: Vec<PointState> = (0..mesh.triangles.len())
        .map(|t| {
            let [p0, p1, p2] = mesh.triangle_coords(t);
            let yc = (p0.y + p1.y + p2.y) / 3.0;
            let p_lith = lithostatic_pressure(yc, geom, &params, gravity.magnitude);
            let m = params.get(mesh.region[t]);
            PointState {
                f: Tensor2::IDENTITY,
                // -p I + s1 B + s2 B^{-1} must equal -p_lith I at B = I
                t_e: Tensor2::IDENTITY * -p_lith,
                p: p_lith + m.s1 + m.s2,
                rho: m.rho0,
                h_prev: Tensor2::ZERO,
            }
        })
        .collect();
    let initial_areas: Vec<f64> = (0..mesh.triangles.len())
        .map(|t| mesh.triangle_area(t))
        .collect();
    let mut initial_mass = [0.0; 2];
    for t in 0..mesh.triangles.len() {
        initial_mass[region_index(mesh.region[t])] += states[t].rho * initial_areas[t];
    }
    let initial_nodes = mesh.nodes.clone();
    Ok(SimState {
        geometry: *geom,
        mesh,
        states,
        params,
        gravity,
        dt,
        step: 0,
        time: 0.0,
        dof_map,
        initial_nodes,
        initial_areas,
        initial_mass,
    })
}

fn region_index(r: Region) -> usize {
    match r {
        Region::Salt => 0,
        Region::Sediment => 1,
    }
}

impl SimState {
    /// Highest point of the material interface.
    pub fn apex_height(&self) -> f64 {
        self.mesh
            .interface_nodes
            .iter()
            .map(|&n| self.mesh.nodes[n].y)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Current positions of the material-interface nodes, left to right.
    pub fn interface_profile(&self) -> Vec<Vec2> {
        self.mesh
            .interface_nodes
            .iter()
            .map(|&n| self.mesh.nodes[n])
            .collect()
    }

    /// Smallest current/initial element area ratio; positive means no element
    /// has inverted.
    pub fn min_area_ratio(&self) -> f64 {
        (0..self.mesh.triangles.len())
            .map(|t| self.mesh.triangle_area(t) / self.initial_areas[t])
            .fold(f64::INFINITY, f64::min)
    }

    /// Current [salt, sediment] mass (per unit out-of-plane depth).
    pub fn region_mass(&self) -> [f64; 2] {
        let mut mass = [0.0; 2];
        for t in 0..self.mesh.triangles.len() {
            mass[region_index(self.mesh.region[t])] +=
                self.states[t].rho * self.mesh.triangle_area(t);
        }
        mass
    }

    pub fn initial_region_mass(&self) -> [f64; 2] {
        self.initial_mass
    }

    /// Node displacements accumulated since initialization.
    pub fn displacements(&self) -> Vec<Vec2> {
        self.mesh
            .nodes
            .iter()
            .zip(&self.initial_nodes)
            .map(|(now, then)| *now - *then)
            .collect()
    }

    /// Volumetric locking indicator: how far det F has drifted from 1 anywhere.
    pub fn max_detf_deviation(&self) -> f64 {
        self.states
            .iter()
            .map(|s| (s.f.det() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Shared update path for solved increments and imposed disturbances:
    /// compute H element-wise from the nodal field on the pre-move mesh,
    /// advance every state, then move the nodes.
    fn advance_with_displacement(&mut self, u: &[Vec2], mode: TeUpdate) -> Result<()> {
        assert_eq!(u.len(), self.mesh.nodes.len());
        let mesh = &self.mesh;
        let states = &self.states;
        let params = &self.params;
        let new_states: Vec<PointState> = (0..mesh.triangles.len())
            .into_par_iter()
            .map(|t| {
                let tri = mesh.triangles[t];
                let (_, gn) = tri_grads(mesh.triangle_coords(t)).map_err(|e| e.with_element(t))?;
                let mut h = Tensor2::ZERO;
                for a in 0..3 {
                    h += Tensor2::outer(u[tri[a]], gn[a]);
                }
                update_point_state(&states[t], h, params.get(mesh.region[t]), mode)
                    .map_err(|e| e.with_element(t))
            })
            .collect::<Result<Vec<_>>>()?;
        self.states = new_states;
        for (node, du) in self.mesh.nodes.iter_mut().zip(u) {
            *node += *du;
        }
        Ok(())
    }
}

/// Displace the interface by an even cosine-squared bump and make the element
/// states consistent with that displacement.
pub fn apply_perturbation(
    sim: &mut SimState,
    center_x: f64,
    half_width: f64,
    amplitude: f64,
    mode: TeUpdate,
) -> Result<()> {
    if !(half_width > 0.0) {
        return Err(Error::Validation(format!(
            "perturbation half_width must be positive, got {half_width}"
        )));
    }
    let cap = 0.05 * sim.geometry.salt_height;
    if !(amplitude.abs() <= cap) {
        return Err(Error::Validation(format!(
            "perturbation amplitude {amplitude} exceeds 5% of the salt thickness ({cap})"
        )));
    }
    let mut u = vec![Vec2::ZERO; sim.mesh.nodes.len()];
    for &n in &sim.mesh.interface_nodes {
        let x = sim.mesh.nodes[n].x;
        if (x - center_x).abs() <= half_width {
            let arg = std::f64::consts::FRAC_PI_2 * (x - center_x) / half_width;
            u[n].y = amplitude * arg.cos().powi(2);
        }
    }
    sim.advance_with_displacement(&u, mode)
}

#[derive(Debug, Clone, Copy)]
pub struct StepOptions {
    pub solver: SolverOptions,
    pub te_update: TeUpdate,
    /// Record the load decomposition norms (costs one extra rhs pass).
    pub decomposition: bool,
    /// Trust region for the per-step linearization: the incremental solution
    /// is scaled down when any node would move farther than max_speed * dt.
    /// The density inversion makes the fastest interface mode grow at a rate
    /// sigma with sigma * dt beyond the stability pole of the implicit step
    /// at the reference parameters, so an uncapped increment overshoots the
    /// |H| << 1 regime the step equation was derived in and inverts elements
    /// within a few steps. Capping by a speed (not a fixed length) keeps
    /// displacement-versus-time curves comparable across dt choices.
    /// 0 disables the cap.
    pub max_speed: f64,
    /// Upper bound on the internal step length, Ma; a longer step runs as
    /// equal sub-steps no longer than this. The implicit viscous update
    /// multiplies a mode growing at rate sigma by 1/(1 - sigma dt) per step,
    /// which blows up at dt = 1/sigma; the reference densities and salt
    /// viscosity put that pole near dt = 0.08 Ma for the fastest interface
    /// mode. Sub-stepping keeps the internal dynamics on the stable side of
    /// the pole whatever the requested output cadence, so halving dt refines
    /// the same trajectory instead of switching regimes. 0 disables.
    pub substep_dt: f64,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions {
            solver: SolverOptions::default(),
            te_update: TeUpdate::Increment,
            decomposition: true,
            max_speed: 20.0,
            substep_dt: 0.05,
        }
    }
}

/// Loads at or below this fraction of the body-force norm are assembly
/// roundoff, not data: the step takes u = 0 instead of solving, so a state
/// in discrete equilibrium persists exactly. At equilibrium the assembled
/// rhs cancels to ~1e-13 of the gravity load while any physical perturbation
/// enters at 1e-3 or more, so the threshold sits in a wide gap.
pub const EQUILIBRIUM_RTOL: f64 = 1e-10;

/// One diagnostics row; everything that goes into diagnostics.csv. When a
/// step runs as several sub-steps, max_u is the largest accumulated nodal
/// displacement over the whole step and residual plus the decomposition
/// norms come from its last internal solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub apex_height: f64,
    pub min_area_ratio: f64,
    pub max_u: f64,
    pub residual: f64,
    /// 2-norms of the load decomposition parts; NaN when not recorded.
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One linearized solve at the current sim.dt: assemble about the current
/// configuration, solve for the increment, cap it, advance states and mesh.
/// `coord_old`/`coord_new` locate the increment on the (possibly fractional)
/// external step axis for the gravity schedule; `label` is the external step
/// number used in error reports. Returns the applied nodal displacement, the
/// solve report, and the decomposition norms.
fn solve_increment(
    sim: &mut SimState,
    opts: &StepOptions,
    coord_old: f64,
    coord_new: f64,
    label: usize,
) -> Result<(Vec<Vec2>, SolveReport, [f64; 3])> {
    let g_new = sim.gravity.at_step_coord(coord_new);
    let g_old = sim.gravity.at_step_coord(coord_old);
    let asm = assemble_system(&sim.mesh, &sim.states, &sim.params, sim.dt, g_new, &sim.dof_map)
        .map_err(|e| e.with_step(label))?;
    let parts_norms = if opts.decomposition {
        let parts = assemble_rhs_parts(
            &sim.mesh, &sim.states, &sim.params, sim.dt, g_new, g_old, &sim.dof_map,
        )
        .map_err(|e| e.with_step(label))?;
        [norm2(&parts.i1), norm2(&parts.i2), norm2(&parts.i3)]
    } else {
        [f64::NAN; 3]
    };
    let body_norm = body_force_norm(&sim.mesh, &sim.states, &sim.dof_map, g_new);
    let rhs_norm = norm2(&asm.rhs);
    let (mut u, report) = if rhs_norm <= EQUILIBRIUM_RTOL * body_norm {
        // Discrete equilibrium: the load is cancellation noise. Solving for
        // it would seed the density-inversion instability from roundoff.
        (vec![0.0; asm.rhs.len()], SolveReport::equilibrium())
    } else {
        solve(&asm.matrix, &asm.rhs, &opts.solver)?
    };
    let max_u = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cap = opts.max_speed * sim.dt;
    if opts.max_speed > 0.0 && max_u > cap {
        let scale = cap / max_u;
        for v in &mut u {
            *v *= scale;
        }
    }
    let u_nodes = sim.dof_map.expand(&u);
    sim.advance_with_displacement(&u_nodes, opts.te_update)
        .map_err(|e| e.with_step(label))?;
    Ok((u_nodes, report, parts_norms))
}

/// Number of equal sub-steps so none exceeds substep_dt. The 1e-9 slack keeps
/// exact integer ratios from rounding up.
fn substep_count(dt: f64, substep_dt: f64) -> usize {
    if !(substep_dt > 0.0) || dt <= substep_dt {
        1
    } else {
        (dt / substep_dt - 1e-9).ceil() as usize
    }
}

pub fn step(sim: &mut SimState, opts: &StepOptions) -> Result<StepRecord> {
    let n = sim.step + 1;
    let dt_full = sim.dt;
    let k = substep_count(dt_full, opts.substep_dt);
    sim.dt = dt_full / k as f64;
    let mut total = vec![Vec2::ZERO; sim.mesh.nodes.len()];
    let mut last = None;
    let mut failure = None;
    for j in 1..=k {
        let coord_old = (n - 1) as f64 + (j - 1) as f64 / k as f64;
        let coord_new = (n - 1) as f64 + j as f64 / k as f64;
        match solve_increment(sim, opts, coord_old, coord_new, n) {
            Ok((u_nodes, report, parts)) => {
                for (t, du) in total.iter_mut().zip(&u_nodes) {
                    *t += *du;
                }
                last = Some((report, parts));
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    sim.dt = dt_full;
    if let Some(e) = failure {
        return Err(e);
    }
    let (report, parts) = last.expect("k >= 1");
    sim.step = n;
    sim.time = n as f64 * dt_full;
    let max_u = total
        .iter()
        .map(|v| v.x.abs().max(v.y.abs()))
        .fold(0.0, f64::max);
    Ok(StepRecord {
        step: n,
        time: sim.time,
        apex_height: sim.apex_height(),
        min_area_ratio: sim.min_area_ratio(),
        max_u,
        residual: report.residual_norm,
        i1: parts[0],
        i2: parts[1],
        i3: parts[2],
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ResolvedPerturbation {
    pub center_x: f64,
    pub half_width: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone)]
pub struct RunSettings {
    pub geometry: Geometry,
    pub params: RegionParams,
    pub gravity: GravitySpec,
    pub dt: f64,
    pub n_steps: usize,
    pub te_update: TeUpdate,
    pub solver: SolverOptions,
    pub decomposition: bool,
    /// Per-step displacement cap as a speed, m/Ma; see [`StepOptions`].
    pub max_speed: f64,
    /// Internal step bound, Ma; see [`StepOptions`].
    pub substep_dt: f64,
    pub perturbation: Option<ResolvedPerturbation>,
    /// Snapshot every this many steps (besides step 0 and the last step);
    /// 0 snapshots endpoints only.
    pub snapshot_cadence: usize,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub records: Vec<StepRecord>,
    /// A step failure ends the run early; the records up to it are kept.
    pub error: Option<Error>,
    pub sim: SimState,
}

/// Drive a whole simulation. `on_snapshot` is called with the initial state
/// and then per cadence; its errors abort the run outright.
pub fn run(
    settings: &RunSettings,
    mut on_snapshot: impl FnMut(&SimState) -> Result<()>,
) -> Result<RunOutcome> {
    let mut sim = initialize(
        &settings.geometry,
        settings.params,
        settings.gravity,
        settings.dt,
    )?;
    if let Some(p) = &settings.perturbation {
        apply_perturbation(&mut sim, p.center_x, p.half_width, p.amplitude, settings.te_update)?;
    }
    on_snapshot(&sim)?;
    let opts = StepOptions {
        solver: settings.solver,
        te_update: settings.te_update,
        decomposition: settings.decomposition,
        max_speed: settings.max_speed,
        substep_dt: settings.substep_dt,
    };
    let mut records = Vec::with_capacity(settings.n_steps);
    for k in 1..=settings.n_steps {
        match step(&mut sim, &opts) {
            Ok(rec) => records.push(rec),
            Err(e) => {
                return Ok(RunOutcome {
                    records,
                    error: Some(e),
                    sim,
                })
            }
        }
        let on_cadence = settings.snapshot_cadence > 0 && k % settings.snapshot_cadence == 0;
        if k == settings.n_steps || on_cadence {
            on_snapshot(&sim)?;
        }
    }
    Ok(RunOutcome {
        records,
        error: None,
        sim,
    })
}
