//! Quadric decimation pyramid and barycentric up-sampling matrices.

use spiralface::mesh::primitives::icosphere;
use spiralface::sampling::{build_hierarchy, upsample};

fn main() -> spiralface::Result<()> {
    let mesh = icosphere(4, 80.0);
    let h = build_hierarchy(&mesh, &[5.0, 5.0, 5.0])?;
    println!("levels (coarse to fine): {:?}", h.sizes());
    for (k, q) in h.up.iter().enumerate() {
        let sums = (0..q.rows()).map(|r| q.row(r).iter().map(|e| e.2).sum::<f64>());
        let worst = sums.map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
        println!("up[{k}]: {}x{}, {} nonzeros, max |row sum - 1| = {worst:.1e}", q.rows(), q.cols(), q.nnz());
    }
    // up-sample the coarsest level's z coordinate to the full mesh
    let z: Vec<f64> = h.coarsest().vertices().iter().map(|p| p[2]).collect();
    let mut f = z;
    for q in &h.up {
        f = upsample(&f, 1, q)?;
    }
    let err = f
        .iter()
        .zip(mesh.vertices())
        .map(|(a, p)| (a - p[2]).abs())
        .sum::<f64>()
        / f.len() as f64;
    println!("mean |z| reconstruction error through the pyramid: {err:.3} mm");
    Ok(())
}
