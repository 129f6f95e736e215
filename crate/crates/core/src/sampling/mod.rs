//! Mesh resolution pyramid and the sparse matrices that move vertex features
//! from one level to the next finer one.

mod decimate;
mod sparse;
mod upmatrix;

pub use decimate::{decimate, Decimation};
pub use sparse::{upsample, SparseMatrix};
pub use upmatrix::{build_up_matrix, closest_point_barycentric, UpMatrix};

use log::{info, warn};

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Reduction factors of the decoder pyramid: four levels, 5x each.
pub const DEFAULT_FACTORS: [f64; 4] = [5.0, 5.0, 5.0, 5.0];

/// Meshes ordered coarse to fine with the up-sampling matrices between them.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingHierarchy {
    pub levels: Vec<Mesh>,
    /// `up[k]` maps level `k` features to level `k + 1`.
    pub up: Vec<SparseMatrix>,
    /// `down_maps[k][j]` is the level `k + 1` index of level-`k` vertex `j`.
    pub down_maps: Vec<Vec<usize>>,
}

impl SamplingHierarchy {
    pub fn sizes(&self) -> Vec<usize> {
        self.levels.iter().map(Mesh::num_vertices).collect()
    }

    pub fn finest(&self) -> &Mesh {
        self.levels.last().expect("hierarchy has levels")
    }

    pub fn coarsest(&self) -> &Mesh {
        &self.levels[0]
    }

    /// Checks the structural invariants: shapes, row stochasticity, one-hot
    /// rows exactly on surviving vertices.
    pub fn validate(&self) -> Result<()> {
        if self.levels.len() != self.up.len() + 1 || self.down_maps.len() != self.up.len() {
            return Err(Error::Shape("hierarchy level/matrix count mismatch".into()));
        }
        for (k, q) in self.up.iter().enumerate() {
            if q.cols() != self.levels[k].num_vertices() || q.rows() != self.levels[k + 1].num_vertices() {
                return Err(Error::Shape(format!("up[{k}] has wrong shape")));
            }
            let mut survivor = vec![false; q.rows()];
            for &f in &self.down_maps[k] {
                survivor[f] = true;
            }
            for (r, &surv) in survivor.iter().enumerate() {
                let row = q.row(r);
                let sum: f64 = row.iter().map(|e| e.2).sum();
                if (sum - 1.0).abs() > 1e-9 || row.iter().any(|e| e.2 < 0.0) {
                    return Err(Error::InvalidArgument(format!("up[{k}] row {r} not stochastic")));
                }
                let ok = if surv { row.len() == 1 && row[0].2 == 1.0 } else { row.len() == 3 };
                if !ok {
                    return Err(Error::InvalidArgument(format!("up[{k}] row {r} has wrong support")));
                }
            }
        }
        Ok(())
    }
}

/// Repeatedly decimates `mesh` by each factor (target `ceil(N / factor)`)
/// and links consecutive levels with barycentric up-sampling matrices.
pub fn build_hierarchy(mesh: &Mesh, factors: &[f64]) -> Result<SamplingHierarchy> {
    if factors.is_empty() {
        return Err(Error::InvalidArgument("no reduction factors".into()));
    }
    if let Some(f) = factors.iter().find(|f| !(**f >= 1.0)) {
        return Err(Error::InvalidArgument(format!("reduction factor {f} below 1")));
    }
    let mut levels = vec![mesh.clone()];
    let mut up = Vec::new();
    let mut down_maps = Vec::new();
    for &factor in factors {
        let fine = levels.last().unwrap();
        let target = ((fine.num_vertices() as f64 / factor).ceil() as usize).max(4);
        let dec = decimate(fine, target)?;
        let upm = build_up_matrix(fine, &dec.coarse, &dec.kept)?;
        if upm.clamped > 0 {
            warn!(
                "{} of {} discarded vertices clamped onto their nearest coarse triangle",
                upm.clamped,
                fine.num_vertices() - dec.kept.len()
            );
        }
        info!("decimated {} -> {} vertices", fine.num_vertices(), dec.coarse.num_vertices());
        up.push(upm.matrix);
        down_maps.push(dec.kept);
        levels.push(dec.coarse);
    }
    levels.reverse();
    up.reverse();
    down_maps.reverse();
    let h = SamplingHierarchy {
        levels,
        up,
        down_maps,
    };
    h.validate()?;
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;

    #[test]
    fn empty_factors_rejected() {
        assert!(build_hierarchy(&primitives::icosphere(1, 1.0), &[]).is_err());
    }

    #[test]
    fn icosphere_pyramid_sizes() {
        let m = primitives::icosphere(4, 80.0);
        let h = build_hierarchy(&m, &[5.0, 5.0, 5.0]).unwrap();
        assert_eq!(h.sizes(), vec![21, 103, 513, 2562]);
        for (k, n) in h.sizes().iter().enumerate() {
            let ideal = 2562.0 / 5f64.powi(3 - k as i32);
            assert!((*n as f64 - ideal).abs() <= 0.1 * ideal + 1.0);
        }
    }

    #[test]
    fn deterministic_bitwise() {
        let m = primitives::face_grid(20, 16, 100.0);
        let a = build_hierarchy(&m, &[4.0, 4.0]).unwrap();
        let b = build_hierarchy(&m, &[4.0, 4.0]).unwrap();
        assert_eq!(a, b);
    }
}
