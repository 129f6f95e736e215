//! Barycentric up-sampling matrices.

use super::sparse::SparseMatrix;
use crate::error::{Error, Result};
use crate::mesh::{dot, sub, Mesh, Vec3};

/// Up-sampling matrix plus the number of discarded vertices whose planar
/// projection fell outside their nearest coarse triangle and was clamped.
#[derive(Debug, Clone)]
pub struct UpMatrix {
    pub matrix: SparseMatrix,
    pub clamped: usize,
}

/// Closest point on triangle `abc` to `p`, as barycentric weights.
pub fn closest_point_barycentric(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> [f64; 3] {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(&ab, &ap);
    let d2 = dot(&ac, &ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return [1.0, 0.0, 0.0];
    }
    let bp = sub(p, b);
    let d3 = dot(&ab, &bp);
    let d4 = dot(&ac, &bp);
    if d3 >= 0.0 && d4 <= d3 {
        return [0.0, 1.0, 0.0];
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return [1.0 - v, v, 0.0];
    }
    let cp = sub(p, c);
    let d5 = dot(&ab, &cp);
    let d6 = dot(&ac, &cp);
    if d6 >= 0.0 && d5 <= d6 {
        return [0.0, 0.0, 1.0];
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return [1.0 - w, 0.0, w];
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return [0.0, 1.0 - w, w];
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    [1.0 - v - w, v, w]
}

/// Barycentric coordinates of the projection of `p` onto the plane of `abc`
/// (may be negative).
fn planar_barycentric(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> [f64; 3] {
    let v0 = sub(b, a);
    let v1 = sub(c, a);
    let v2 = sub(p, a);
    let d00 = dot(&v0, &v0);
    let d01 = dot(&v0, &v1);
    let d11 = dot(&v1, &v1);
    let d20 = dot(&v2, &v0);
    let d21 = dot(&v2, &v1);
    let den = d00 * d11 - d01 * d01;
    let v = (d11 * d20 - d01 * d21) / den;
    let w = (d00 * d21 - d01 * d20) / den;
    [1.0 - v - w, v, w]
}

fn point_at(bary: &[f64; 3], a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    std::array::from_fn(|k| bary[0] * a[k] + bary[1] * b[k] + bary[2] * c[k])
}

struct Node {
    lo: Vec3,
    hi: Vec3,
    // leaf: start..start+count into order; inner: count == 0 and children
    start: usize,
    count: usize,
    left: usize,
    right: usize,
}

/// Bounding volume hierarchy over triangles for exact nearest queries.
struct TriangleBvh<'a> {
    mesh: &'a Mesh,
    nodes: Vec<Node>,
    order: Vec<usize>,
}

impl<'a> TriangleBvh<'a> {
    fn new(mesh: &'a Mesh) -> Self {
        let mut order: Vec<usize> = (0..mesh.num_faces()).collect();
        let mut nodes = Vec::new();
        let centroids: Vec<Vec3> = mesh
            .faces()
            .iter()
            .map(|f| {
                let v = mesh.vertices();
                std::array::from_fn(|k| (v[f[0]][k] + v[f[1]][k] + v[f[2]][k]) / 3.0)
            })
            .collect();
        let n = order.len();
        Self::build(mesh, &centroids, &mut order, 0, n, &mut nodes);
        TriangleBvh { mesh, nodes, order }
    }

    fn build(
        mesh: &Mesh,
        centroids: &[Vec3],
        order: &mut [usize],
        start: usize,
        end: usize,
        nodes: &mut Vec<Node>,
    ) -> usize {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &f in &order[start..end] {
            for &v in &mesh.faces()[f] {
                let p = mesh.vertices()[v];
                for k in 0..3 {
                    lo[k] = lo[k].min(p[k]);
                    hi[k] = hi[k].max(p[k]);
                }
            }
        }
        let id = nodes.len();
        nodes.push(Node {
            lo,
            hi,
            start,
            count: end - start,
            left: 0,
            right: 0,
        });
        if end - start <= 4 {
            return id;
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap();
        let mid = (start + end) / 2;
        order[start..end].sort_by(|&x, &y| {
            centroids[x][axis].total_cmp(&centroids[y][axis]).then(x.cmp(&y))
        });
        let left = Self::build(mesh, centroids, order, start, mid, nodes);
        let right = Self::build(mesh, centroids, order, mid, end, nodes);
        let node = &mut nodes[id];
        node.count = 0;
        node.left = left;
        node.right = right;
        id
    }

    fn box_dist2(node: &Node, p: &Vec3) -> f64 {
        (0..3)
            .map(|k| {
                let d = (node.lo[k] - p[k]).max(0.0).max(p[k] - node.hi[k]);
                d * d
            })
            .sum()
    }

    /// Nearest triangle (lowest index on ties) with closest-point weights.
    fn nearest(&self, p: &Vec3) -> (usize, [f64; 3]) {
        let v = self.mesh.vertices();
        let mut best = (f64::INFINITY, usize::MAX, [0.0; 3]);
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if Self::box_dist2(node, p) > best.0 {
                continue;
            }
            if node.count > 0 {
                for &f in &self.order[node.start..node.start + node.count] {
                    let t = self.mesh.faces()[f];
                    let bary = closest_point_barycentric(p, &v[t[0]], &v[t[1]], &v[t[2]]);
                    let q = point_at(&bary, &v[t[0]], &v[t[1]], &v[t[2]]);
                    let d = sub(p, &q);
                    let d2 = dot(&d, &d);
                    if d2 < best.0 || (d2 == best.0 && f < best.1) {
                        best = (d2, f, bary);
                    }
                }
            } else {
                let (l, r) = (node.left, node.right);
                let (dl, dr) = (
                    Self::box_dist2(&self.nodes[l], p),
                    Self::box_dist2(&self.nodes[r], p),
                );
                // pop the nearer child first
                if dl <= dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        (best.1, best.2)
    }
}

/// Builds the `fine.N x coarse.N` up-sampling matrix for a decimation.
///
/// Surviving fine vertices get a one-hot row on their coarse counterpart.
/// Discarded vertices get three entries: the closest-point barycentric
/// weights on the nearest coarse triangle (ties to the lowest triangle
/// index). Weights on a triangle edge or corner are stored as explicit zeros
/// so the entry count still identifies discarded rows.
pub fn build_up_matrix(fine: &Mesh, coarse: &Mesh, kept: &[usize]) -> Result<UpMatrix> {
    if kept.len() != coarse.num_vertices() {
        return Err(Error::Shape(format!(
            "kept map has {} entries, coarse mesh {} vertices",
            kept.len(),
            coarse.num_vertices()
        )));
    }
    let mut coarse_of = vec![usize::MAX; fine.num_vertices()];
    for (j, &v) in kept.iter().enumerate() {
        if v >= fine.num_vertices() || coarse.vertices()[j] != fine.vertices()[v] {
            return Err(Error::InvalidArgument(format!(
                "coarse vertex {j} is not fine vertex {v}"
            )));
        }
        coarse_of[v] = j;
    }
    let bvh = TriangleBvh::new(coarse);
    let cv = coarse.vertices();
    let mut entries = Vec::with_capacity(fine.num_vertices() * 3);
    let mut clamped = 0;
    for (i, p) in fine.vertices().iter().enumerate() {
        if coarse_of[i] != usize::MAX {
            entries.push((i, coarse_of[i], 1.0));
            continue;
        }
        let (f, bary) = bvh.nearest(p);
        let t = coarse.faces()[f];
        let planar = planar_barycentric(p, &cv[t[0]], &cv[t[1]], &cv[t[2]]);
        if planar.iter().any(|&w| w < -1e-12) {
            clamped += 1;
        }
        let s: f64 = bary.iter().sum();
        for k in 0..3 {
            entries.push((i, t[k], (bary[k] / s).max(0.0)));
        }
    }
    let matrix = SparseMatrix::from_triplets(fine.num_vertices(), coarse.num_vertices(), entries)?;
    Ok(UpMatrix { matrix, clamped })
}
