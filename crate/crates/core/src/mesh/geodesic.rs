use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::{dist, Mesh};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    d: f64,
    v: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d.total_cmp(&other.d).then(self.v.cmp(&other.v))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest-path distances over the edge graph, edges weighted by Euclidean
/// length. Unreachable vertices get `f64::INFINITY`.
pub fn graph_geodesic(mesh: &Mesh, source: usize) -> Vec<f64> {
    let n = mesh.num_vertices();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (a, b) in mesh.edges() {
        let w = dist(&mesh.vertices()[a], &mesh.vertices()[b]);
        adj[a].push((b, w));
        adj[b].push((a, w));
    }
    let mut d = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    d[source] = 0.0;
    heap.push(Reverse(Entry { d: 0.0, v: source }));
    while let Some(Reverse(Entry { d: du, v: u })) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &(w, len) in &adj[u] {
            let nd = du + len;
            if nd < d[w] {
                d[w] = nd;
                heap.push(Reverse(Entry { d: nd, v: w }));
            }
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;

    /// Bellman-Ford style relaxation until fixpoint.
    fn brute_force(mesh: &Mesh, source: usize) -> Vec<f64> {
        let mut d = vec![f64::INFINITY; mesh.num_vertices()];
        d[source] = 0.0;
        let edges = mesh.edges();
        loop {
            let mut changed = false;
            for &(a, b) in &edges {
                let w = dist(&mesh.vertices()[a], &mesh.vertices()[b]);
                if d[a] + w < d[b] {
                    d[b] = d[a] + w;
                    changed = true;
                }
                if d[b] + w < d[a] {
                    d[a] = d[b] + w;
                    changed = true;
                }
            }
            if !changed {
                return d;
            }
        }
    }

    #[test]
    fn unit_tetrahedron() {
        let s = 1.0 / 2f64.sqrt();
        let m = Mesh::new(
            vec![[s, 0.0, 0.0], [0.0, s, 0.0], [0.0, 0.0, s], [s, s, s]],
            vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]],
        )
        .unwrap();
        let d = graph_geodesic(&m, 0);
        for (i, expect) in [0.0, 1.0, 1.0, 1.0].iter().enumerate() {
            assert!((d[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn strip_line_metric() {
        let m = primitives::strip(10, 1.0);
        let d = graph_geodesic(&m, 0);
        // bottom row vertices are 0..=10 spaced 1mm apart
        for i in 0..=10 {
            assert!((d[i] - i as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_brute_force_on_small_meshes() {
        for m in [primitives::icosphere(1, 3.0), primitives::face_grid(7, 8, 40.0)] {
            assert!(m.num_vertices() <= 100);
            for s in [0, m.num_vertices() / 2] {
                let a = graph_geodesic(&m, s);
                let b = brute_force(&m, s);
                for (x, y) in a.iter().zip(&b) {
                    assert!((x - y).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn pole_to_pole_at_least_chord() {
        let r = 5.0;
        let m = primitives::icosphere(3, r);
        let north = m.max_z_vertex();
        let south = (0..m.num_vertices())
            .min_by(|&a, &b| m.vertices()[a][2].total_cmp(&m.vertices()[b][2]))
            .unwrap();
        let d = graph_geodesic(&m, north);
        assert!(d[south] >= 2.0 * r - 1e-9);
        assert!(d.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn disconnected_gives_infinity() {
        let m = Mesh::new(
            vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [5.0, 0.0, 0.0],
                [6.0, 0.0, 0.0],
                [5.0, 1.0, 0.0],
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap();
        let d = graph_geodesic(&m, 0);
        assert!(d[3].is_infinite() && d[5].is_infinite());
    }
}
