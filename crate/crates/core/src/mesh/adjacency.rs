use super::Mesh;
use crate::error::{Error, Result};

/// Per-vertex neighbourhoods.
///
/// `neighbors[v]` is sorted ascending. `rings[v]` holds the same vertices in
/// counter-clockwise order around `v` (w.r.t. outward face orientation). For
/// boundary vertices the ring is an open path and `closed[v]` is false.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyList {
    pub neighbors: Vec<Vec<usize>>,
    pub rings: Vec<Vec<usize>>,
    pub closed: Vec<bool>,
}

impl AdjacencyList {
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        !self.closed[v]
    }
}

pub fn build_adjacency(mesh: &Mesh) -> Result<AdjacencyList> {
    let n = mesh.num_vertices();
    // link[v] collects directed edges (a -> b) opposite v in its incident faces
    let mut link: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for f in mesh.faces() {
        for k in 0..3 {
            link[f[k]].push((f[(k + 1) % 3], f[(k + 2) % 3]));
        }
    }
    let mut neighbors = Vec::with_capacity(n);
    let mut rings = Vec::with_capacity(n);
    let mut closed = Vec::with_capacity(n);
    for (v, edges) in link.iter().enumerate() {
        let (ring, is_closed) = order_link(v, edges)?;
        let mut sorted = ring.clone();
        sorted.sort_unstable();
        neighbors.push(sorted);
        rings.push(ring);
        closed.push(is_closed);
    }
    Ok(AdjacencyList {
        neighbors,
        rings,
        closed,
    })
}

/// Chains the link edges of `v` into one cycle or path.
fn order_link(v: usize, edges: &[(usize, usize)]) -> Result<(Vec<usize>, bool)> {
    if edges.is_empty() {
        return Ok((Vec::new(), false));
    }
    let mut succ: Vec<(usize, usize)> = edges.to_vec();
    succ.sort_unstable();
    let next = |a: usize| -> Option<usize> {
        succ.binary_search_by_key(&a, |e| e.0).ok().map(|i| succ[i].1)
    };
    for w in succ.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::NonManifoldVertex(v));
        }
    }
    let mut has_pred: Vec<usize> = edges.iter().map(|e| e.1).collect();
    has_pred.sort_unstable();
    for w in has_pred.windows(2) {
        if w[0] == w[1] {
            return Err(Error::NonManifoldVertex(v));
        }
    }
    let heads: Vec<usize> = succ
        .iter()
        .map(|e| e.0)
        .filter(|a| has_pred.binary_search(a).is_err())
        .collect();
    let (start, is_closed) = match heads.len() {
        0 => (succ[0].0, true),
        1 => (heads[0], false),
        _ => return Err(Error::NonManifoldVertex(v)),
    };
    let mut ring = vec![start];
    let mut cur = start;
    while let Some(nx) = next(cur) {
        if nx == start {
            break;
        }
        ring.push(nx);
        cur = nx;
        if ring.len() > edges.len() + 1 {
            return Err(Error::NonManifoldVertex(v));
        }
    }
    let expected = if is_closed { edges.len() } else { edges.len() + 1 };
    if ring.len() != expected {
        return Err(Error::NonManifoldVertex(v));
    }
    Ok((ring, is_closed))
}
