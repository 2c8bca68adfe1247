//! Structured two-layer triangle mesh for the rectangular basin.
//!
//! The domain is a length x (salt_height + sediment_height) rectangle, salt
//! below, sediment above, discretized into quad cells split into two linear
//! triangles each. The split diagonal alternates with cell parity so the mesh
//! carries no preferred shear direction.
//!
//! Nodes are numbered column-major, node(i, j) = i * (ny + 1) + j with j the
//! vertical index. The assembled stiffness matrix then has bandwidth about
//! 2 * (ny + 2) independent of nx, which is what makes the banded direct
//! solver cheap on long domains.

use crate::error::{Error, Result};
use crate::tensor::Vec2;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    /// Domain length, m.
    pub length: f64,
    /// Thickness of the lower (salt) layer, m.
    pub salt_height: f64,
    /// Thickness of the upper (sediment) layer, m.
    pub sediment_height: f64,
    /// Cells along x.
    pub nx: usize,
    /// Cells across the salt layer.
    pub ny_salt: usize,
    /// Cells across the sediment layer.
    pub ny_sediment: usize,
}

impl Geometry {
    pub fn total_height(&self) -> f64 {
        self.salt_height + self.sediment_height
    }

    pub fn ny(&self) -> usize {
        self.ny_salt + self.ny_sediment
    }

    /// Characteristic element edge length, used for tolerance scaling.
    pub fn element_size(&self) -> f64 {
        let dx = self.length / self.nx as f64;
        let dy_salt = self.salt_height / self.ny_salt as f64;
        let dy_sed = self.sediment_height / self.ny_sediment as f64;
        dx.max(dy_salt).max(dy_sed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny_salt == 0 || self.ny_sediment == 0 {
            return Err(Error::InvalidGeometry(format!(
                "cell counts must be positive (nx={}, ny_salt={}, ny_sediment={})",
                self.nx, self.ny_salt, self.ny_sediment
            )));
        }
        if !(self.length > 0.0 && self.salt_height > 0.0 && self.sediment_height > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "dimensions must be positive (length={}, salt_height={}, sediment_height={})",
                self.length, self.salt_height, self.sediment_height
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Salt,
    Sediment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeTag {
    /// Traction-free top surface.
    TopFree,
    /// Vertical wall: x displacement pinned, y free.
    SideRoller,
    /// Base: y pinned, x free.
    BottomRoller,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: EdgeTag,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    /// Current node positions; the stepper moves them every increment.
    pub nodes: Vec<Vec2>,
    /// Node triples, counter-clockwise.
    pub triangles: Vec<[usize; 3]>,
    /// Layer of each triangle.
    pub region: Vec<Region>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Nodes initially on the salt-sediment interface, left to right.
    pub interface_nodes: Vec<usize>,
}

impl Mesh {
    pub fn triangle_coords(&self, t: usize) -> [Vec2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    /// Area of triangle t; positive while the element keeps its orientation.
    pub fn triangle_area(&self, t: usize) -> f64 {
        let [p, q, r] = self.triangle_coords(t);
        0.5 * ((q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x))
    }
}

pub fn build_mesh(geom: &Geometry) -> Result<Mesh> {
    geom.validate()?;
    let (nx, ny_salt, ny) = (geom.nx, geom.ny_salt, geom.ny());
    let dx = geom.length / nx as f64;
    let dy_salt = geom.salt_height / ny_salt as f64;
    let dy_sed = geom.sediment_height / geom.ny_sediment as f64;
    let node = |i: usize, j: usize| i * (ny + 1) + j;

    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for i in 0..=nx {
        let x = i as f64 * dx;
        for j in 0..=ny {
            let y = if j <= ny_salt {
                j as f64 * dy_salt
            } else {
                geom.salt_height + (j - ny_salt) as f64 * dy_sed
            };
            nodes.push(Vec2::new(x, y));
        }
    }

    let mut triangles = Vec::with_capacity(2 * nx * ny);
    let mut region = Vec::with_capacity(2 * nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            let (a, b) = (node(i, j), node(i + 1, j));
            let (c, d) = (node(i + 1, j + 1), node(i, j + 1));
            if (i + j) % 2 == 0 {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
            let r = if j < ny_salt { Region::Salt } else { Region::Sediment };
            region.push(r);
            region.push(r);
        }
    }

    let mut boundary_edges = Vec::new();
    for i in 0..nx {
        boundary_edges.push(BoundaryEdge {
            nodes: [node(i, 0), node(i + 1, 0)],
            tag: EdgeTag::BottomRoller,
        });
        boundary_edges.push(BoundaryEdge {
            nodes: [node(i, ny), node(i + 1, ny)],
            tag: EdgeTag::TopFree,
        });
    }
    for j in 0..ny {
        boundary_edges.push(BoundaryEdge {
            nodes: [node(0, j), node(0, j + 1)],
            tag: EdgeTag::SideRoller,
        });
        boundary_edges.push(BoundaryEdge {
            nodes: [node(nx, j), node(nx, j + 1)],
            tag: EdgeTag::SideRoller,
        });
    }

    let interface_nodes = (0..=nx).map(|i| node(i, ny_salt)).collect();

    Ok(Mesh {
        nodes,
        triangles,
        region,
        boundary_edges,
        interface_nodes,
    })
}

/// Map from an undirected node pair to the triangles sharing that edge.
fn edge_triangle_map(mesh: &Mesh) -> HashMap<(usize, usize), Vec<usize>> {
    let mut map: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let key = (a.min(b), a.max(b));
            map.entry(key).or_default().push(t);
        }
    }
    map
}

/// The unique triangle owning a boundary edge, if the mesh is conforming.
pub fn owning_triangle(mesh: &Mesh, edge: &BoundaryEdge) -> Option<usize> {
    let [a, b] = edge.nodes;
    let key = (a.min(b), a.max(b));
    match edge_triangle_map(mesh).get(&key).map(|v| v.as_slice()) {
        Some([t]) => Some(*t),
        _ => None,
    }
}

/// Unit outward normal of a boundary edge: perpendicular to the edge, pointing
/// away from the centroid of the owning triangle.
pub fn boundary_normal(mesh: &Mesh, edge: &BoundaryEdge) -> Vec2 {
    let t = owning_triangle(mesh, edge).expect("boundary edge not on exactly one triangle");
    let [p0, p1, p2] = mesh.triangle_coords(t);
    let centroid = (p0 + p1 + p2) * (1.0 / 3.0);
    let (a, b) = (mesh.nodes[edge.nodes[0]], mesh.nodes[edge.nodes[1]]);
    let e = b - a;
    let mut n = Vec2::new(e.y, -e.x);
    let mid = (a + b) * 0.5;
    if n.dot(centroid - mid) > 0.0 {
        n = -n;
    }
    n * (1.0 / n.norm())
}
