//! Quadric error metric edge collapse with endpoint placement.
//!
//! Every collapse removes one vertex and moves its faces onto a surviving
//! neighbour, so the coarse vertex set is a subset of the fine one.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use log::warn;

use crate::error::{Error, Result};
use crate::mesh::{build_adjacency, cross, dot, norm, sub, Mesh, Vec3};

/// Result of [`decimate`].
#[derive(Debug, Clone)]
pub struct Decimation {
    pub coarse: Mesh,
    /// `kept[j]` is the fine index of coarse vertex `j`, ascending.
    pub kept: Vec<usize>,
    pub target: usize,
}

impl Decimation {
    pub fn reached_target(&self) -> bool {
        self.coarse.num_vertices() <= self.target
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Quadric([f64; 10]);

impl Quadric {
    fn from_plane(n: Vec3, d: f64, w: f64) -> Self {
        let [a, b, c] = n;
        Quadric([
            w * a * a,
            w * a * b,
            w * a * c,
            w * a * d,
            w * b * b,
            w * b * c,
            w * b * d,
            w * c * c,
            w * c * d,
            w * d * d,
        ])
    }

    fn add(&mut self, o: &Quadric) {
        for (x, y) in self.0.iter_mut().zip(o.0) {
            *x += y;
        }
    }

    fn eval_sum(&self, o: &Quadric, p: &Vec3) -> f64 {
        let q: [f64; 10] = std::array::from_fn(|i| self.0[i] + o.0[i]);
        let [x, y, z] = *p;
        q[0] * x * x
            + 2.0 * q[1] * x * y
            + 2.0 * q[2] * x * z
            + 2.0 * q[3] * x
            + q[4] * y * y
            + 2.0 * q[5] * y * z
            + 2.0 * q[6] * y
            + q[7] * z * z
            + 2.0 * q[8] * z
            + q[9]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    cost: f64,
    from: usize,
    to: usize,
    ver_from: u32,
    ver_to: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, o: &Self) -> Ordering {
        self.cost
            .total_cmp(&o.cost)
            .then(self.from.cmp(&o.from))
            .then(self.to.cmp(&o.to))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

struct State<'a> {
    pos: &'a [Vec3],
    faces: Vec<[usize; 3]>,
    face_alive: Vec<bool>,
    vf: Vec<Vec<usize>>,
    alive: Vec<bool>,
    boundary: Vec<bool>,
    quadric: Vec<Quadric>,
    version: Vec<u32>,
    heap: BinaryHeap<Reverse<Candidate>>,
    length_weight: f64,
}

impl<'a> State<'a> {
    fn new(mesh: &'a Mesh) -> Self {
        let pos = mesh.vertices();
        let n = pos.len();
        let faces = mesh.faces().to_vec();
        let mut vf = vec![Vec::new(); n];
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                vf[v].push(fi);
            }
        }
        let mut quadric = vec![Quadric::default(); n];
        let mut total_area = 0.0;
        let mut normals = Vec::with_capacity(faces.len());
        for f in &faces {
            let nrm = cross(&sub(&pos[f[1]], &pos[f[0]]), &sub(&pos[f[2]], &pos[f[0]]));
            let len = norm(&nrm);
            let area = 0.5 * len;
            total_area += area;
            let unit = if len > 0.0 { [nrm[0] / len, nrm[1] / len, nrm[2] / len] } else { [0.0; 3] };
            normals.push(unit);
            let q = Quadric::from_plane(unit, -dot(&unit, &pos[f[0]]), area);
            for &v in f {
                quadric[v].add(&q);
            }
        }
        // Boundary edges: a directed edge whose reverse is absent.
        let mut directed: Vec<(usize, usize, usize)> = faces
            .iter()
            .enumerate()
            .flat_map(|(fi, f)| (0..3).map(move |k| (f[k], f[(k + 1) % 3], fi)))
            .collect();
        directed.sort_unstable();
        let has = |a: usize, b: usize| directed.binary_search_by(|e| (e.0, e.1).cmp(&(a, b))).is_ok();
        let mut boundary = vec![false; n];
        for &(a, b, fi) in &directed {
            if !has(b, a) {
                boundary[a] = true;
                boundary[b] = true;
                let e = sub(&pos[b], &pos[a]);
                let side = cross(&e, &normals[fi]);
                let len = norm(&side);
                if len > 0.0 {
                    let unit = [side[0] / len, side[1] / len, side[2] / len];
                    let q = Quadric::from_plane(unit, -dot(&unit, &pos[a]), 100.0 * dot(&e, &e));
                    quadric[a].add(&q);
                    quadric[b].add(&q);
                }
            }
        }
        let mean_area = total_area / faces.len() as f64;
        let face_alive = vec![true; faces.len()];
        State {
            pos,
            faces,
            face_alive,
            vf,
            alive: vec![true; n],
            boundary,
            quadric,
            version: vec![0; n],
            heap: BinaryHeap::new(),
            length_weight: 0.01 * mean_area,
        }
    }

    fn neighbors(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.vf[v]
            .iter()
            .flat_map(|&f| self.faces[f])
            .filter(|&u| u != v)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn push(&mut self, from: usize, to: usize) {
        let e = sub(&self.pos[from], &self.pos[to]);
        let cost = self.quadric[from].eval_sum(&self.quadric[to], &self.pos[to])
            + self.length_weight * dot(&e, &e);
        self.heap.push(Reverse(Candidate {
            cost,
            from,
            to,
            ver_from: self.version[from],
            ver_to: self.version[to],
        }));
    }

    fn push_vertex_edges(&mut self, v: usize) {
        for u in self.neighbors(v) {
            self.push(v, u);
            self.push(u, v);
        }
    }

    fn face_normal(&self, f: &[usize; 3], moved: usize, to: usize) -> Vec3 {
        let p = |i: usize| if i == moved { self.pos[to] } else { self.pos[i] };
        cross(&sub(&p(f[1]), &p(f[0])), &sub(&p(f[2]), &p(f[0])))
    }

    fn can_collapse(&self, a: usize, b: usize) -> bool {
        let shared: Vec<usize> = self.vf[a]
            .iter()
            .copied()
            .filter(|&f| self.faces[f].contains(&b))
            .collect();
        if shared.is_empty() || shared.len() > 2 {
            return false;
        }
        let edge_on_boundary = shared.len() == 1;
        if self.boundary[a] && self.boundary[b] && !edge_on_boundary {
            return false;
        }
        let mut opposite: Vec<usize> = shared
            .iter()
            .flat_map(|&f| self.faces[f])
            .filter(|&u| u != a && u != b)
            .collect();
        opposite.sort_unstable();
        let na = self.neighbors(a);
        let nb = self.neighbors(b);
        let common: Vec<usize> = na.iter().copied().filter(|u| nb.binary_search(u).is_ok()).collect();
        if common != opposite {
            return false;
        }
        for &f in &self.vf[a] {
            let face = self.faces[f];
            if face.contains(&b) {
                continue;
            }
            let before = self.face_normal(&face, usize::MAX, 0);
            let after = self.face_normal(&face, a, b);
            let (lb, la) = (norm(&before), norm(&after));
            if la <= 1e-12 * lb.max(1e-300) || dot(&before, &after) <= 1e-3 * lb * la {
                return false;
            }
            // the moved face must not duplicate one already around b
            let mut moved: Vec<usize> = face.iter().map(|&u| if u == a { b } else { u }).collect();
            moved.sort_unstable();
            for &g in &self.vf[b] {
                let mut other = self.faces[g].to_vec();
                other.sort_unstable();
                if other == moved {
                    return false;
                }
            }
        }
        true
    }

    fn collapse(&mut self, a: usize, b: usize) {
        let faces_a = std::mem::take(&mut self.vf[a]);
        for f in faces_a {
            if self.faces[f].contains(&b) {
                self.face_alive[f] = false;
                for u in self.faces[f] {
                    if u != a {
                        self.vf[u].retain(|&g| g != f);
                    }
                }
            } else {
                for u in self.faces[f].iter_mut() {
                    if *u == a {
                        *u = b;
                    }
                }
                self.vf[b].push(f);
            }
        }
        self.alive[a] = false;
        let qa = self.quadric[a];
        self.quadric[b].add(&qa);
        if self.boundary[a] {
            self.boundary[b] = true;
        }
        let ring = self.neighbors(b);
        self.version[b] += 1;
        for &c in &ring {
            self.version[c] += 1;
        }
        self.push_vertex_edges(b);
        for c in ring {
            self.push_vertex_edges(c);
        }
    }
}

/// Collapses edges in increasing quadric cost until `target_count` vertices
/// remain or no valid collapse is left.
///
/// Fails with [`Error::DecimationStalled`] only when the achieved count
/// overshoots the target by more than 10%.
pub fn decimate(mesh: &Mesh, target_count: usize) -> Result<Decimation> {
    if target_count < 4 {
        return Err(Error::InvalidArgument(format!(
            "decimation target {target_count} below 4"
        )));
    }
    build_adjacency(mesh)?;
    let n = mesh.num_vertices();
    if target_count >= n {
        return Ok(Decimation {
            coarse: mesh.clone(),
            kept: (0..n).collect(),
            target: target_count,
        });
    }
    let mut st = State::new(mesh);
    for v in 0..n {
        for u in st.neighbors(v) {
            if u > v {
                st.push(v, u);
                st.push(u, v);
            }
        }
    }
    let mut remaining = n;
    while remaining > target_count {
        let Some(Reverse(c)) = st.heap.pop() else { break };
        if !st.alive[c.from]
            || !st.alive[c.to]
            || st.version[c.from] != c.ver_from
            || st.version[c.to] != c.ver_to
        {
            continue;
        }
        if !st.can_collapse(c.from, c.to) {
            continue;
        }
        st.collapse(c.from, c.to);
        remaining -= 1;
    }
    let kept: Vec<usize> = (0..n).filter(|&v| st.alive[v]).collect();
    let mut remap = vec![usize::MAX; n];
    for (j, &v) in kept.iter().enumerate() {
        remap[v] = j;
    }
    let vertices = kept.iter().map(|&v| mesh.vertices()[v]).collect();
    let faces = st
        .faces
        .iter()
        .zip(&st.face_alive)
        .filter(|(_, &alive)| alive)
        .map(|(f, _)| [remap[f[0]], remap[f[1]], remap[f[2]]])
        .collect();
    let coarse = Mesh::new(vertices, faces)?;
    build_adjacency(&coarse)?;
    if kept.len() > target_count {
        let slack = target_count.div_ceil(10);
        warn!(
            "decimation stopped at {} vertices (target {target_count})",
            kept.len()
        );
        if kept.len() > target_count + slack {
            return Err(Error::DecimationStalled {
                achieved: kept.len(),
                target: target_count,
            });
        }
    }
    Ok(Decimation {
        coarse,
        kept,
        target: target_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;

    #[test]
    fn identity_when_target_is_n() {
        let m = primitives::icosphere(1, 1.0);
        let d = decimate(&m, m.num_vertices()).unwrap();
        assert_eq!(d.coarse, m);
        assert_eq!(d.kept, (0..m.num_vertices()).collect::<Vec<_>>());
    }

    #[test]
    fn target_below_four_rejected() {
        assert!(decimate(&primitives::tetrahedron(), 3).is_err());
    }

    #[test]
    fn icosphere_to_514_is_subset() {
        let m = primitives::icosphere(4, 80.0);
        let d = decimate(&m, 514).unwrap();
        assert_eq!(d.coarse.num_vertices(), 514);
        // brute-force nearest fine vertex for each coarse vertex: distance 0
        for (j, p) in d.coarse.vertices().iter().enumerate() {
            let (best, dist) = m
                .vertices()
                .iter()
                .enumerate()
                .map(|(i, q)| (i, crate::mesh::dist(p, q)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert_eq!(dist, 0.0);
            assert_eq!(best, d.kept[j]);
        }
        // closed sphere stays closed: Euler characteristic 2
        let e = d.coarse.edges().len() as i64;
        let chi = d.coarse.num_vertices() as i64 - e + d.coarse.num_faces() as i64;
        assert_eq!(chi, 2);
    }

    #[test]
    fn open_grid_keeps_single_boundary() {
        let m = primitives::face_grid(30, 24, 100.0);
        let d = decimate(&m, 144).unwrap();
        assert_eq!(d.coarse.num_vertices(), 144);
        let e = d.coarse.edges().len() as i64;
        let chi = d.coarse.num_vertices() as i64 - e + d.coarse.num_faces() as i64;
        assert_eq!(chi, 1);
    }

    #[test]
    fn deterministic() {
        let m = primitives::icosphere(3, 10.0);
        let a = decimate(&m, 100).unwrap();
        let b = decimate(&m, 100).unwrap();
        assert_eq!(a.coarse, b.coarse);
        assert_eq!(a.kept, b.kept);
    }
}
