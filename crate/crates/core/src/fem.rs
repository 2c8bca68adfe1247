//! Finite element assembly on linear triangles.
//!
//! One quadrature point per element (the centroid), which is exact for every
//! integrand appearing here: the kernels are constant over an element because
//! F, T_e and H are, and the body force picks up the linear shape functions
//! through their exact integral A/3.
//!
//! Local degrees of freedom are interleaved, dof = 2 * local_node + component.
//! Roller walls are handled by exact elimination: constrained components never
//! receive a global index, so the assembled system contains free dofs only.
//!
//! Element matrices are computed in parallel; the scatter into the global COO
//! runs sequentially in element order, which together with the stable
//! duplicate summation in `to_csr` keeps assembly bitwise deterministic.

use crate::error::{Error, Result};
use crate::material::{Kernels, MaterialParams, PointState};
use crate::mesh::{BoundaryEdge, EdgeTag, Mesh, Region};
use crate::sparse::{Coo, Csr};
use crate::tensor::{Tensor2, Vec2};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy)]
pub struct RegionParams {
    pub salt: MaterialParams,
    pub sediment: MaterialParams,
}

impl RegionParams {
    pub fn get(&self, r: Region) -> &MaterialParams {
        match r {
            Region::Salt => &self.salt,
            Region::Sediment => &self.sediment,
        }
    }
}

/// Node-component to free-dof index map.
#[derive(Debug, Clone)]
pub struct DofMap {
    entries: Vec<[Option<u32>; 2]>,
    pub n_free: usize,
}

impl DofMap {
    /// Roller walls: x pinned on the side walls, y pinned on the base. A node
    /// on both (a bottom corner) loses both components.
    pub fn rollers(mesh: &Mesh) -> DofMap {
        let n = mesh.nodes.len();
        let mut pinned = vec![[false; 2]; n];
        for edge in &mesh.boundary_edges {
            let comp = match edge.tag {
                EdgeTag::SideRoller => 0,
                EdgeTag::BottomRoller => 1,
                EdgeTag::TopFree => continue,
            };
            for &node in &edge.nodes {
                pinned[node][comp] = true;
            }
        }
        Self::from_pinned(&pinned)
    }

    pub fn all_free(n_nodes: usize) -> DofMap {
        Self::from_pinned(&vec![[false; 2]; n_nodes])
    }

    fn from_pinned(pinned: &[[bool; 2]]) -> DofMap {
        let mut entries = Vec::with_capacity(pinned.len());
        let mut next = 0u32;
        for p in pinned {
            let mut e = [None; 2];
            for c in 0..2 {
                if !p[c] {
                    e[c] = Some(next);
                    next += 1;
                }
            }
            entries.push(e);
        }
        DofMap {
            entries,
            n_free: next as usize,
        }
    }

    pub fn index(&self, node: usize, comp: usize) -> Option<u32> {
        self.entries[node][comp]
    }

    /// Free-dof vector to per-node displacements, zeros on constrained
    /// components.
    pub fn expand(&self, u: &[f64]) -> Vec<Vec2> {
        debug_assert_eq!(u.len(), self.n_free);
        self.entries
            .iter()
            .map(|e| {
                let x = e[0].map_or(0.0, |i| u[i as usize]);
                let y = e[1].map_or(0.0, |i| u[i as usize]);
                Vec2::new(x, y)
            })
            .collect()
    }
}

/// Area and constant shape gradients of a triangle; fails on inversion.
pub(crate) fn tri_grads(coords: [Vec2; 3]) -> Result<(f64, [Vec2; 3])> {
    let [p0, p1, p2] = coords;
    let two_a = (p1.x - p0.x) * (p2.y - p0.y) - (p1.y - p0.y) * (p2.x - p0.x);
    if two_a <= 0.0 {
        return Err(Error::ElementInverted {
            det: two_a,
            context: String::new(),
        });
    }
    let inv = 1.0 / two_a;
    let g = [
        Vec2::new((p1.y - p2.y) * inv, (p2.x - p1.x) * inv),
        Vec2::new((p2.y - p0.y) * inv, (p0.x - p2.x) * inv),
        Vec2::new((p0.y - p1.y) * inv, (p1.x - p0.x) * inv),
    ];
    Ok((0.5 * two_a, g))
}

const BASIS: [Vec2; 2] = [Vec2 { x: 1.0, y: 0.0 }, Vec2 { x: 0.0, y: 1.0 }];

#[derive(Debug, Clone)]
pub struct ElementMatrices {
    /// Tangent (K + M/dt) contribution, rows and columns 2a + i.
    pub k: [[f64; 6]; 6],
    /// Body force minus internal force of the carried stress.
    pub f: [f64; 6],
}

pub fn element_matrices(
    coords: [Vec2; 3],
    state: &PointState,
    m: &MaterialParams,
    dt: f64,
    gravity: Vec2,
) -> Result<ElementMatrices> {
    let (area, gn) = tri_grads(coords)?;
    let kern = Kernels::new(state.f, m)?;
    let inv_dt = 1.0 / dt;
    let mut k = [[0.0; 6]; 6];
    let mut f = [0.0; 6];
    for b in 0..3 {
        for j in 0..2 {
            let h = Tensor2::outer(BASIS[j], gn[b]);
            let s = kern.piola(state.t_e, h) + kern.viscosity(h) * inv_dt;
            for a in 0..3 {
                let col = s * gn[a];
                k[2 * a][2 * b + j] = area * col.x;
                k[2 * a + 1][2 * b + j] = area * col.y;
            }
        }
    }
    let body = gravity * (state.rho * area / 3.0);
    for a in 0..3 {
        let te_g = state.t_e * gn[a];
        f[2 * a] = body.x - area * te_g.x;
        f[2 * a + 1] = body.y - area * te_g.y;
    }
    Ok(ElementMatrices { k, f })
}

#[derive(Debug, Clone)]
pub struct Assembled {
    pub matrix: Csr,
    pub rhs: Vec<f64>,
}

pub fn assemble_system(
    mesh: &Mesh,
    states: &[PointState],
    params: &RegionParams,
    dt: f64,
    gravity: Vec2,
    dof_map: &DofMap,
) -> Result<Assembled> {
    assert_eq!(states.len(), mesh.triangles.len());
    let elems: Vec<ElementMatrices> = (0..mesh.triangles.len())
        .into_par_iter()
        .map(|t| {
            element_matrices(
                mesh.triangle_coords(t),
                &states[t],
                params.get(mesh.region[t]),
                dt,
                gravity,
            )
            .map_err(|e| e.with_element(t))
        })
        .collect::<Result<Vec<_>>>()?;

    let n = dof_map.n_free;
    let mut coo = Coo::with_capacity(n, 36 * elems.len());
    let mut rhs = vec![0.0; n];
    for (t, em) in elems.iter().enumerate() {
        let tri = mesh.triangles[t];
        let mut gidx = [None; 6];
        for a in 0..3 {
            for i in 0..2 {
                gidx[2 * a + i] = dof_map.index(tri[a], i);
            }
        }
        for (r, &gr) in gidx.iter().enumerate() {
            let Some(gr) = gr else { continue };
            rhs[gr as usize] += em.f[r];
            for (c, &gc) in gidx.iter().enumerate() {
                let Some(gc) = gc else { continue };
                coo.push(gr as usize, gc as usize, em.k[r][c]);
            }
        }
    }
    Ok(Assembled {
        matrix: coo.to_csr(),
        rhs,
    })
}

/// The load functional split into its physical sources, all as free-dof
/// vectors:
///
///   p        = body(g_new) - internal(T_e)                      (what drives the step)
///   i1       = body(g_new) - body(g_old)                        (gravity change)
///   i2       = traction change                                  (always zero here)
///   i3       = internal(M[H_prev / dt])                         (viscous memory)
///   residual = body(g_old) - internal(T_e) - internal(M[..])    (equilibrium defect)
///
/// By construction p = i1 + i2 + i3 + residual up to roundoff; i1 and i2
/// vanish exactly under time-constant loads and i3 vanishes exactly when
/// H_prev = 0.
#[derive(Debug, Clone)]
pub struct RhsParts {
    pub p: Vec<f64>,
    pub i1: Vec<f64>,
    pub i2: Vec<f64>,
    pub i3: Vec<f64>,
    pub residual: Vec<f64>,
}

pub fn assemble_rhs_parts(
    mesh: &Mesh,
    states: &[PointState],
    params: &RegionParams,
    dt: f64,
    g_new: Vec2,
    g_old: Vec2,
    dof_map: &DofMap,
) -> Result<RhsParts> {
    let n = dof_map.n_free;
    let mut parts = RhsParts {
        p: vec![0.0; n],
        i1: vec![0.0; n],
        i2: vec![0.0; n],
        i3: vec![0.0; n],
        residual: vec![0.0; n],
    };
    let inv_dt = 1.0 / dt;
    for t in 0..mesh.triangles.len() {
        let st = &states[t];
        let m = params.get(mesh.region[t]);
        let (area, gn) = tri_grads(mesh.triangle_coords(t)).map_err(|e| e.with_element(t))?;
        let kern = Kernels::new(st.f, m)?;
        let visc = kern.viscosity(st.h_prev * inv_dt);
        let body_new = g_new * (st.rho * area / 3.0);
        let body_old = g_old * (st.rho * area / 3.0);
        let tri = mesh.triangles[t];
        for a in 0..3 {
            let te_g = st.t_e * gn[a];
            let visc_g = visc * gn[a];
            for i in 0..2 {
                let Some(gi) = dof_map.index(tri[a], i) else { continue };
                let gi = gi as usize;
                let (bn, bo, te, vs) = match i {
                    0 => (body_new.x, body_old.x, te_g.x, visc_g.x),
                    _ => (body_new.y, body_old.y, te_g.y, visc_g.y),
                };
                parts.p[gi] += bn - area * te;
                parts.i1[gi] += bn - bo;
                parts.i3[gi] += area * vs;
                parts.residual[gi] += bo - area * te - area * vs;
            }
        }
    }
    Ok(parts)
}

/// 2-norm of the assembled gravity load over free dofs. Reference scale for
/// deciding whether an assembled rhs is real loading or cancellation noise.
pub fn body_force_norm(mesh: &Mesh, states: &[PointState], dof_map: &DofMap, g: Vec2) -> f64 {
    let mut body = vec![0.0; dof_map.n_free];
    for t in 0..mesh.triangles.len() {
        let w = g * (states[t].rho * mesh.triangle_area(t) / 3.0);
        for &node in &mesh.triangles[t] {
            if let Some(gi) = dof_map.index(node, 0) {
                body[gi as usize] += w.x;
            }
            if let Some(gi) = dof_map.index(node, 1) {
                body[gi as usize] += w.y;
            }
        }
    }
    body.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Surface load on a boundary edge, two-point Gauss (exact for tractions
/// varying linearly along the edge).
pub fn add_traction<F: Fn(Vec2) -> Vec2>(
    mesh: &Mesh,
    edge: &BoundaryEdge,
    traction: F,
    dof_map: &DofMap,
    rhs: &mut [f64],
) {
    let (a, b) = (edge.nodes[0], edge.nodes[1]);
    let (pa, pb) = (mesh.nodes[a], mesh.nodes[b]);
    let half_len = 0.5 * (pb - pa).norm();
    let gp = 1.0 / 3f64.sqrt();
    for xi in [-gp, gp] {
        let na = 0.5 * (1.0 - xi);
        let nb = 0.5 * (1.0 + xi);
        let x = pa * na + pb * nb;
        let tv = traction(x);
        for (node, shape) in [(a, na), (b, nb)] {
            if let Some(ix) = dof_map.index(node, 0) {
                rhs[ix as usize] += half_len * shape * tv.x;
            }
            if let Some(iy) = dof_map.index(node, 1) {
                rhs[iy as usize] += half_len * shape * tv.y;
            }
        }
    }
}
