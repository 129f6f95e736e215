//! Rings, disks and spiral vertex orderings.
//!
//! A spiral around `v` lists `v`, then its one-ring, then the two-ring and so
//! on. Each ring runs counter-clockwise (outward normals) and starts at the
//! vertex nearest, in edge-graph distance, to a fixed reference vertex. The
//! ordering depends only on connectivity and those distances, so it is
//! computed once per topology.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::mesh::{build_adjacency, graph_geodesic, AdjacencyList, Mesh};

/// Padding marker in spiral rows.
pub const PAD: i64 = -1;

/// Fixed-length spiral per vertex of one mesh level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpiralTable {
    pub level: usize,
    pub length: usize,
    /// Row-major `N x length`, [`PAD`] marks padding.
    pub indices: Vec<i64>,
    pub reference_vertex: usize,
}

impl SpiralTable {
    pub fn num_vertices(&self) -> usize {
        self.indices.len() / self.length
    }

    pub fn row(&self, v: usize) -> &[i64] {
        &self.indices[v * self.length..(v + 1) * self.length]
    }

    /// Row-level invariants: starts at `v`, no duplicates, padding suffix.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_vertices();
        for v in 0..n {
            let row = self.row(v);
            if row[0] != v as i64 {
                return Err(Error::InvalidArgument(format!("spiral row {v} does not start at {v}")));
            }
            let valid = row.iter().take_while(|&&x| x != PAD).count();
            if row[valid..].iter().any(|&x| x != PAD) {
                return Err(Error::InvalidArgument(format!("spiral row {v} padding is not a suffix")));
            }
            let set: BTreeSet<i64> = row[..valid].iter().copied().collect();
            if set.len() != valid || row[..valid].iter().any(|&x| x < 0 || x as usize >= n) {
                return Err(Error::InvalidArgument(format!("spiral row {v} has bad entries")));
            }
        }
        Ok(())
    }
}

/// How the reference vertex for ring start selection is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceVertex {
    /// Vertex with the largest z (the nose tip on an upright face).
    MaxZ,
    /// Explicit vertex index.
    Index(usize),
}

/// Vertices at exactly `k` hops, computed by the ring recursion
/// `ring(k+1) = N(ring(k)) \ disk(k)`.
pub fn k_ring(adj: &AdjacencyList, v: usize, k: usize) -> BTreeSet<usize> {
    rings(adj, v, k).pop().unwrap_or_default()
}

/// Vertices within `k` hops.
pub fn k_disk(adj: &AdjacencyList, v: usize, k: usize) -> BTreeSet<usize> {
    rings(adj, v, k).into_iter().flatten().collect()
}

/// `ring(0) ..= ring(k)`; stops early (empty rings) once the component is
/// exhausted.
fn rings(adj: &AdjacencyList, v: usize, k: usize) -> Vec<BTreeSet<usize>> {
    let mut out = vec![BTreeSet::from([v])];
    let mut disk: BTreeSet<usize> = out[0].clone();
    for _ in 0..k {
        let last = out.last().unwrap();
        let next: BTreeSet<usize> = last
            .iter()
            .flat_map(|&u| adj.neighbors[u].iter().copied())
            .filter(|u| !disk.contains(u))
            .collect();
        disk.extend(next.iter().copied());
        out.push(next);
    }
    out
}

/// Geodesic order with lower index breaking ties. Distances within a
/// relative 1e-9 count as tied, so symmetric meshes pick the same vertex
/// regardless of round-off from a rigid motion.
fn geo_cmp(a: usize, b: usize, geo: &[f64]) -> std::cmp::Ordering {
    let (ga, gb) = (geo[a], geo[b]);
    let tied = ga == gb || (ga - gb).abs() <= 1e-9 * ga.abs().max(gb.abs());
    let by_dist = if tied { std::cmp::Ordering::Equal } else { ga.total_cmp(&gb) };
    by_dist.then(a.cmp(&b))
}

fn argmin_geodesic(cands: impl IntoIterator<Item = usize>, geo: &[f64]) -> Option<usize> {
    cands.into_iter().min_by(|&a, &b| geo_cmp(a, b, geo))
}

/// Spiral trajectory of `v` over rings `0..=k`.
///
/// Ring `r` is read off the boundary loop of the faces touching
/// `disk(r - 1)`, which runs counter-clockwise around the disk. Ring 1 starts
/// at the geodesic-nearest vertex to the reference; ring `r > 1` starts at
/// the geodesic-nearest ring vertex adjacent to the previous ring's start.
/// Near the mesh boundary a ring may be an open path; it is then walked from
/// whichever endpoint is geodesic-nearer.
pub fn spiral(adj: &AdjacencyList, v: usize, k: usize, geodesics: &[f64]) -> Vec<usize> {
    let all = rings(adj, v, k);
    let mut out = vec![v];
    let mut disk: BTreeSet<usize> = BTreeSet::from([v]);
    let mut prev_start = v;
    for ring in all.into_iter().skip(1) {
        if ring.is_empty() {
            break;
        }
        let start = argmin_geodesic(
            ring.iter().copied().filter(|u| adj.neighbors[prev_start].binary_search(u).is_ok()),
            geodesics,
        )
        .or_else(|| argmin_geodesic(ring.iter().copied(), geodesics))
        .unwrap();
        let ordered = order_ring(adj, &disk, &ring, start, geodesics);
        disk.extend(ring.iter().copied());
        out.extend(ordered);
        prev_start = start;
    }
    out
}

fn order_ring(
    adj: &AdjacencyList,
    disk: &BTreeSet<usize>,
    ring: &BTreeSet<usize>,
    start: usize,
    geo: &[f64],
) -> Vec<usize> {
    // directed edges of the patch of faces touching the disk; the faces
    // around u are (u, r[i], r[i+1]) over its oriented one-ring r
    let mut half: BTreeSet<(usize, usize)> = BTreeSet::new();
    for &u in disk {
        let r = &adj.rings[u];
        let m = r.len();
        let pairs = if adj.closed[u] { m } else { m.saturating_sub(1) };
        for i in 0..pairs {
            let (a, b) = (r[i], r[(i + 1) % m]);
            half.insert((u, a));
            half.insert((a, b));
            half.insert((b, u));
        }
    }
    let mut succ: HashMap<usize, usize> = HashMap::new();
    let mut pred: HashMap<usize, usize> = HashMap::new();
    for &(a, b) in &half {
        if !half.contains(&(b, a)) && ring.contains(&a) && ring.contains(&b) {
            succ.insert(a, b);
            pred.insert(b, a);
        }
    }
    let mut out = Vec::with_capacity(ring.len());
    let mut seen: BTreeSet<usize> = BTreeSet::new();
    let mut first = Some(start);
    while seen.len() < ring.len() {
        let seed = match first.take() {
            Some(s) => s,
            None => argmin_geodesic(ring.iter().copied().filter(|u| !seen.contains(u)), geo).unwrap(),
        };
        // find the chain containing the seed
        let mut head = seed;
        let mut closed = false;
        let mut steps = 0;
        while let Some(&p) = pred.get(&head) {
            if p == seed {
                closed = true;
                break;
            }
            steps += 1;
            if seen.contains(&p) || steps > ring.len() {
                break;
            }
            head = p;
        }
        let chain_from = |from: usize, step: &HashMap<usize, usize>, seen: &BTreeSet<usize>| {
            let mut c = vec![from];
            let mut cur = from;
            while let Some(&nx) = step.get(&cur) {
                if nx == from || seen.contains(&nx) || c.contains(&nx) {
                    break;
                }
                c.push(nx);
                cur = nx;
            }
            c
        };
        let chain = if closed {
            chain_from(seed, &succ, &seen)
        } else {
            let forward = chain_from(head, &succ, &seen);
            let tail = *forward.last().unwrap();
            if geo_cmp(tail, head, geo).is_lt() {
                let mut rev = forward;
                rev.reverse();
                rev
            } else {
                forward
            }
        };
        for u in chain {
            if seen.insert(u) {
                out.push(u);
            }
        }
    }
    out
}

/// Builds the padded/truncated spiral table for one mesh.
pub fn build_spiral_table(
    mesh: &Mesh,
    k: usize,
    length: usize,
    reference: ReferenceVertex,
) -> Result<SpiralTable> {
    if length == 0 {
        return Err(Error::InvalidArgument("spiral length must be at least 1".into()));
    }
    let adj = build_adjacency(mesh)?;
    let reference_vertex = match reference {
        ReferenceVertex::MaxZ => mesh.max_z_vertex(),
        ReferenceVertex::Index(i) if i < mesh.num_vertices() => i,
        ReferenceVertex::Index(i) => {
            return Err(Error::InvalidArgument(format!("reference vertex {i} out of range")))
        }
    };
    let geo = graph_geodesic(mesh, reference_vertex);
    let n = mesh.num_vertices();
    let mut indices = Vec::with_capacity(n * length);
    for v in 0..n {
        let s = spiral(&adj, v, k, &geo);
        indices.extend(s.iter().take(length).map(|&u| u as i64));
        indices.extend(std::iter::repeat_n(PAD, length.saturating_sub(s.len())));
    }
    Ok(SpiralTable {
        level: 0,
        length,
        indices,
        reference_vertex,
    })
}

/// Default spiral length for one-ring spirals: the largest closed one-disk.
pub fn default_length(mesh: &Mesh) -> Result<usize> {
    let adj = build_adjacency(mesh)?;
    Ok(1 + (0..adj.len()).map(|v| adj.degree(v)).max().unwrap_or(0))
}
