//! Reconstruction plus temporal-coherence loss, in mm.

use crate::autodiff::{Graph, Real, Var};
use crate::error::{Error, Result};
use crate::mesh::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    /// `mean |x̂_t - x_t|` over frames, vertices and coordinates.
    pub reconstruction: f64,
    /// `mean |Δx̂_t - Δx_t|` over `t >= 1`; zero for a single frame.
    pub coherence: f64,
}

impl LossTerms {
    pub fn total(&self) -> f64 {
        self.reconstruction + self.coherence
    }
}

fn check_shapes(pred: &[Vec<Vec3>], gt: &[Vec<Vec3>]) -> Result<()> {
    if pred.is_empty() {
        return Err(Error::InvalidArgument("loss over zero frames".into()));
    }
    if pred.len() != gt.len() {
        return Err(Error::Shape(format!("{} predicted vs {} target frames", pred.len(), gt.len())));
    }
    let n = gt[0].len();
    if pred.iter().chain(gt).any(|f| f.len() != n) {
        return Err(Error::Shape("frames differ in vertex count".into()));
    }
    Ok(())
}

pub fn loss_terms(pred: &[Vec<Vec3>], gt: &[Vec<Vec3>]) -> Result<LossTerms> {
    check_shapes(pred, gt)?;
    let per_frame = (gt[0].len() * 3) as f64;
    let mut r = 0.0;
    for (p, q) in pred.iter().zip(gt) {
        for (a, b) in p.iter().zip(q) {
            r += (a[0] - b[0]).abs() + (a[1] - b[1]).abs() + (a[2] - b[2]).abs();
        }
    }
    let mut c = 0.0;
    for t in 1..pred.len() {
        for v in 0..gt[0].len() {
            for k in 0..3 {
                let dp = pred[t][v][k] - pred[t - 1][v][k];
                let dg = gt[t][v][k] - gt[t - 1][v][k];
                c += (dp - dg).abs();
            }
        }
    }
    let frames = pred.len() as f64;
    Ok(LossTerms {
        reconstruction: r / (frames * per_frame),
        coherence: if pred.len() > 1 { c / ((frames - 1.0) * per_frame) } else { 0.0 },
    })
}

/// `L_r + L_c` of two frame sequences.
pub fn loss(pred: &[Vec<Vec3>], gt: &[Vec<Vec3>]) -> Result<f64> {
    Ok(loss_terms(pred, gt)?.total())
}

/// The same loss on the graph. `pred` and `target` are `(T * N) x 3`
/// frame-major stacks; any per-vertex offset common to both (such as the
/// neutral) cancels, so displacements can stand in for positions.
pub fn loss_graph<T: Real>(g: &mut Graph<T>, pred: Var, target: Var, frames: usize) -> Result<Var> {
    if frames == 0 {
        return Err(Error::InvalidArgument("loss over zero frames".into()));
    }
    let rows = g.value(pred).rows();
    if rows % frames != 0 || g.value(target).shape() != g.value(pred).shape() {
        return Err(Error::Shape(format!(
            "loss on {:?} vs {:?} for {frames} frames",
            g.value(pred).shape(),
            g.value(target).shape()
        )));
    }
    let lr = g.l1_loss(pred, target)?;
    if frames == 1 {
        return Ok(lr);
    }
    let n = rows / frames;
    let span = (frames - 1) * n;
    let diff = |g: &mut Graph<T>, x: Var| -> Result<Var> {
        let later = g.slice_rows(x, n, span)?;
        let earlier = g.slice_rows(x, 0, span)?;
        g.sub(later, earlier)
    };
    let dp = diff(g, pred)?;
    let dt = diff(g, target)?;
    let lc = g.l1_loss(dp, dt)?;
    g.add(lr, lc)
}
