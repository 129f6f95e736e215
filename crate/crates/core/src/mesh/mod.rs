//! Fixed-topology triangle meshes: validation, I/O, adjacency and edge-graph
//! distances.
//!
//! Coordinates are millimetres. Faces are counter-clockwise when viewed from
//! outside, so every interior edge is shared by exactly two faces that
//! traverse it in opposite directions.

mod adjacency;
mod geodesic;
mod io;
pub mod primitives;

use std::collections::HashMap;

pub use adjacency::{build_adjacency, AdjacencyList};
pub use geodesic::graph_geodesic;
pub use io::{load_mesh, save_mesh, save_mesh_with_header, MeshFormat};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

/// Triangle mesh with validated connectivity.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
}

impl Mesh {
    /// Builds a mesh, checking index range, degeneracy and orientation.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.is_empty() || faces.is_empty() {
            return Err(Error::InvalidMesh("empty mesh".into()));
        }
        let n = vertices.len();
        let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(faces.len() * 3);
        for (fi, f) in faces.iter().enumerate() {
            for &i in f {
                if i >= n {
                    return Err(Error::InvalidMesh(format!(
                        "face {fi} references vertex {i}, mesh has {n} vertices"
                    )));
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!("face {fi} is degenerate: {f:?}")));
            }
            for k in 0..3 {
                let e = (f[k], f[(k + 1) % 3]);
                if directed.insert(e, fi).is_some() {
                    return Err(Error::BadEdge(e.0, e.1));
                }
            }
        }
        Ok(Mesh { vertices, faces })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    /// Same connectivity, new positions.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::Topology(format!(
                "expected {} vertices, got {}",
                self.vertices.len(),
                vertices.len()
            )));
        }
        Ok(Mesh {
            vertices,
            faces: self.faces.clone(),
        })
    }

    pub fn same_topology(&self, other: &Mesh) -> bool {
        self.vertices.len() == other.vertices.len() && self.faces == other.faces
    }

    /// Vertex positions flattened row-major into `N*3` values.
    pub fn flat_positions(&self) -> Vec<f64> {
        self.vertices.iter().flat_map(|v| v.iter().copied()).collect()
    }

    /// Unique undirected edges as `(min, max)` pairs, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .faces
            .iter()
            .flat_map(|f| (0..3).map(move |k| (f[k].min(f[(k + 1) % 3]), f[k].max(f[(k + 1) % 3]))))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    pub fn mean_edge_length(&self) -> f64 {
        let edges = self.edges();
        let total: f64 = edges
            .iter()
            .map(|&(a, b)| dist(&self.vertices[a], &self.vertices[b]))
            .sum();
        total / edges.len() as f64
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    /// Index of the vertex with the largest z coordinate; lowest index on ties.
    pub fn max_z_vertex(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.vertices.iter().enumerate() {
            if v[2] > self.vertices[best][2] {
                best = i;
            }
        }
        best
    }
}

pub(crate) fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn dist(a: &Vec3, b: &Vec3) -> f64 {
    norm(&sub(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_index() {
        let err = Mesh::new(vec![[0.0; 3]; 3], vec![[0, 1, 3]]).unwrap_err();
        assert!(matches!(err, Error::InvalidMesh(_)));
    }

    #[test]
    fn rejects_degenerate_face() {
        assert!(Mesh::new(vec![[0.0; 3]; 3], vec![[0, 1, 1]]).is_err());
    }

    #[test]
    fn rejects_inconsistent_orientation() {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]];
        // second face repeats directed edge 1->2
        let err = Mesh::new(v, vec![[0, 1, 2], [1, 2, 3]]).unwrap_err();
        assert!(matches!(err, Error::BadEdge(1, 2)));
    }

    #[test]
    fn rejects_empty() {
        assert!(Mesh::new(vec![], vec![]).is_err());
    }

    #[test]
    fn tetrahedron_edges() {
        let t = primitives::tetrahedron();
        assert_eq!(t.edges().len(), 6);
        assert_eq!(t.num_faces(), 4);
    }
}
