//! Procedural meshes used by tests, examples and the synthetic dataset.

use std::collections::HashMap;

use super::{Mesh, Vec3};

/// Closed tetrahedron, outward CCW faces.
pub fn tetrahedron() -> Mesh {
    Mesh::new(
        vec![[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]],
        vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]],
    )
    .expect("tetrahedron is valid")
}

/// Center vertex 0 surrounded by `n` rim vertices `1..=n` on the unit circle
/// (z = 0), faces CCW seen from +z.
pub fn fan(n: usize) -> Mesh {
    assert!(n >= 3);
    let mut v = vec![[0.0, 0.0, 0.0]];
    for i in 0..n {
        let a = std::f64::consts::TAU * i as f64 / n as f64;
        v.push([a.cos(), a.sin(), 0.0]);
    }
    let faces = (0..n).map(|i| [0, 1 + i, 1 + (i + 1) % n]).collect();
    Mesh::new(v, faces).expect("fan is valid")
}

/// Two rows of `n + 1` vertices spaced `spacing` apart; bottom row is
/// `0..=n` along the x axis.
pub fn strip(n: usize, spacing: f64) -> Mesh {
    let mut v = Vec::new();
    for row in 0..2 {
        for i in 0..=n {
            v.push([i as f64 * spacing, row as f64 * spacing, 0.0]);
        }
    }
    let mut faces = Vec::new();
    for i in 0..n {
        let (b0, b1, t0, t1) = (i, i + 1, n + 1 + i, n + 2 + i);
        faces.push([b0, b1, t1]);
        faces.push([b0, t1, t0]);
    }
    Mesh::new(v, faces).expect("strip is valid")
}

/// Icosahedron refined `subdivisions` times by edge-midpoint splitting with
/// projection onto the sphere. Vertex count is `10 * 4^k + 2`.
pub fn icosphere(subdivisions: usize, radius: f64) -> Mesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    for v in verts.iter_mut() {
        *v = normalize(*v);
    }
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let (p, q) = (verts[a], verts[b]);
                verts.push(normalize([(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0, (p[2] + q[2]) / 2.0]));
                verts.len() - 1
            })
        };
        for f in &faces {
            let ab = midpoint(f[0], f[1], &mut verts);
            let bc = midpoint(f[1], f[2], &mut verts);
            let ca = midpoint(f[2], f[0], &mut verts);
            next.push([f[0], ab, ca]);
            next.push([f[1], bc, ab]);
            next.push([f[2], ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    let verts = verts
        .into_iter()
        .map(|v| [v[0] * radius, v[1] * radius, v[2] * radius])
        .collect();
    Mesh::new(verts, faces).expect("icosphere is valid")
}

fn normalize(v: Vec3) -> Vec3 {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Open, face-like height field: an elliptic dome with a nose bump, looking
/// along +z. `width` is the x extent in mm; the y extent is `1.25 * width`.
/// The nose tip is the vertex of maximal z.
pub fn face_grid(rows: usize, cols: usize, width: f64) -> Mesh {
    assert!(rows >= 2 && cols >= 2);
    let height = 1.25 * width;
    let depth = 0.45 * width;
    let mut v = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let y = -height / 2.0 + height * r as f64 / (rows - 1) as f64;
        for c in 0..cols {
            let x = -width / 2.0 + width * c as f64 / (cols - 1) as f64;
            let (u, w) = (x / (0.6 * width), y / (0.6 * height));
            let dome = depth * (1.0 - u * u - w * w).max(0.0).sqrt();
            let nx = x / (0.08 * width);
            let ny = (y - 0.02 * height) / (0.14 * height);
            let nose = 0.18 * width * (-(nx * nx + ny * ny)).exp();
            v.push([x, y, dome + nose]);
        }
    }
    let mut faces = Vec::with_capacity(2 * (rows - 1) * (cols - 1));
    for r in 0..rows - 1 {
        for c in 0..cols - 1 {
            let v00 = r * cols + c;
            let v01 = v00 + 1;
            let v10 = v00 + cols;
            let v11 = v10 + 1;
            faces.push([v00, v01, v11]);
            faces.push([v00, v11, v10]);
        }
    }
    Mesh::new(v, faces).expect("grid is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_counts() {
        for k in 0..=4 {
            let m = icosphere(k, 1.0);
            assert_eq!(m.num_vertices(), 10 * 4usize.pow(k as u32) + 2);
            assert_eq!(m.num_faces(), 20 * 4usize.pow(k as u32));
        }
    }

    #[test]
    fn icosphere_faces_point_outward() {
        let m = icosphere(2, 2.0);
        for f in m.faces() {
            let [a, b, c] = [m.vertices()[f[0]], m.vertices()[f[1]], m.vertices()[f[2]]];
            let n = super::super::cross(&super::super::sub(&b, &a), &super::super::sub(&c, &a));
            assert!(super::super::dot(&n, &a) > 0.0);
        }
    }

    #[test]
    fn face_grid_nose_is_top() {
        let m = face_grid(21, 17, 100.0);
        let tip = m.vertices()[m.max_z_vertex()];
        assert!(tip[0].abs() < 1e-9);
    }
}
