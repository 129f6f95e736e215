//! Baseline, metrics, classifier and latent interpolation.

mod classifier;
mod pca;
mod report;

pub use classifier::{
    classification_metrics, classify_and_report, resample_indices, ClassMetrics, Classifier, ClassifierConfig, Mlp,
};
pub use pca::{fit_pca, PcaBasis};
pub use report::{EvalReport, ModelScores};

use crate::autodiff::Real;
use crate::data::{Expression, ExpressionSequence};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Vec3};
use crate::model::{compose, DecoderTopology, GeneratorParams, LATENT};

/// Baseline blendshapes are scaled by this many standard deviations, so the
/// LSTM's `(-1, 1)` outputs span the data.
pub const BLEND_SIGMAS: f64 = 3.0;

fn check_pair(pred: &[Vec<Vec3>], gt: &[Vec<Vec3>]) -> Result<()> {
    if pred.len() != gt.len() || pred.iter().zip(gt).any(|(a, b)| a.len() != b.len()) {
        return Err(Error::Shape(format!(
            "sequences differ in shape: {} vs {} frames",
            pred.len(),
            gt.len()
        )));
    }
    if pred.is_empty() || pred[0].is_empty() {
        return Err(Error::Shape("empty sequence".into()));
    }
    Ok(())
}

/// Mean Euclidean vertex distance over all frames and vertices (mm).
pub fn per_vertex_error(pred: &[Vec<Vec3>], gt: &[Vec<Vec3>]) -> Result<f64> {
    check_pair(pred, gt)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (a, b) in pred.iter().zip(gt) {
        for (p, q) in a.iter().zip(b) {
            sum += ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
        }
        count += a.len();
    }
    Ok(sum / count as f64)
}

/// Mean absolute coordinate error of each frame.
pub fn per_frame_l1(pred: &[Vec<Vec3>], gt: &[Vec<Vec3>]) -> Result<Vec<f64>> {
    check_pair(pred, gt)?;
    Ok(pred
        .iter()
        .zip(gt)
        .map(|(a, b)| {
            let s: f64 = a.iter().zip(b).map(|(p, q)| (0..3).map(|i| (p[i] - q[i]).abs()).sum::<f64>()).sum();
            s / (3 * a.len()) as f64
        })
        .collect())
}

/// Per-index mean of curves of possibly different lengths.
pub fn mean_curve(curves: &[Vec<f64>]) -> Vec<f64> {
    let len = curves.iter().map(Vec::len).max().unwrap_or(0);
    (0..len)
        .map(|t| {
            let vals: Vec<f64> = curves.iter().filter_map(|c| c.get(t).copied()).collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        })
        .collect()
}

/// `mean + sum_i z_i * component_i` as an `N x 3` field. Extra latent
/// entries beyond the basis size are ignored.
pub fn blendshape_decode(z: &[f64], basis: &PcaBasis) -> Vec<Vec3> {
    let k = z.len().min(basis.k());
    basis.reconstruct(&z[..k]).chunks(3).map(|c| [c[0], c[1], c[2]]).collect()
}

/// PCA of every frame's displacement from its subject's neutral.
pub fn fit_deformation_basis(train: &[ExpressionSequence], k: usize) -> Result<PcaBasis> {
    let samples: Vec<Vec<f64>> = train
        .iter()
        .flat_map(|s| (0..s.num_frames()).map(move |t| s.displacement(t)))
        .collect();
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    fit_pca(&samples, k)
}

/// Baseline generator over a frozen basis: blendshape `i` is
/// `component_i * BLEND_SIGMAS * sigma_i`, so its decoder equals
/// [`blendshape_decode`] of the rescaled latent.
pub fn baseline_params<T: Real>(basis: &PcaBasis, seed: u64) -> Result<GeneratorParams<T>> {
    if basis.k() > LATENT {
        return Err(Error::InvalidArgument(format!("{} components exceed the latent size", basis.k())));
    }
    let rows: Vec<Vec<f64>> = basis
        .components
        .iter()
        .zip(&basis.variances)
        .map(|(u, v)| {
            let s = BLEND_SIGMAS * v.sqrt();
            u.iter().map(|x| x * s).collect()
        })
        .collect();
    GeneratorParams::blendshape(&basis.mean, &rows, seed)
}

/// Error of one generated sequence against its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceScore {
    pub subject: String,
    pub expression: Expression,
    pub frames: usize,
    pub per_vertex: f64,
    pub curve: Vec<f64>,
}

/// Generates each sequence from its own neutral and label and scores it.
/// Sequences are processed in parallel.
pub fn score_model<T: Real>(
    params: &GeneratorParams<T>,
    topo: &DecoderTopology,
    seqs: &[ExpressionSequence],
) -> Result<Vec<SequenceScore>> {
    params.check_topology(topo)?;
    generate_all(params, topo, seqs)?
        .into_iter()
        .zip(seqs)
        .map(|(frames, s)| {
            Ok(SequenceScore {
                subject: s.subject.clone(),
                expression: s.label.expression,
                frames: s.num_frames(),
                per_vertex: per_vertex_error(&frames, &s.frames)?,
                curve: per_frame_l1(&frames, &s.frames)?,
            })
        })
        .collect()
}

/// Frame positions generated for every sequence's neutral and label.
pub fn generate_all<T: Real>(
    params: &GeneratorParams<T>,
    topo: &DecoderTopology,
    seqs: &[ExpressionSequence],
) -> Result<Vec<Vec<Vec<Vec3>>>> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(seqs.len().max(1));
    let chunk = seqs.len().div_ceil(threads).max(1);
    let results: Vec<Result<Vec<Vec<Vec<Vec3>>>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = seqs
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|s| {
                            let d = params.displacements(&s.label, topo)?;
                            Ok(compose(&s.neutral, &d)?.into_iter().map(|m| m.vertices().to_vec()).collect())
                        })
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("generation thread panicked")).collect()
    });
    let mut out = Vec::with_capacity(seqs.len());
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// Decodes `alpha * zb + (1 - alpha) * za` for `alpha = i / (steps - 1)`
/// onto `neutral`.
pub fn interpolate_latents<T: Real>(
    za: &[f64],
    zb: &[f64],
    steps: usize,
    neutral: &Mesh,
    params: &GeneratorParams<T>,
    topo: &DecoderTopology,
) -> Result<Vec<Mesh>> {
    if steps < 2 {
        return Err(Error::InvalidArgument(format!("interpolation needs at least 2 steps, got {steps}")));
    }
    if za.len() != params.hidden || zb.len() != params.hidden {
        return Err(Error::Shape(format!(
            "latents of length {} and {}, model expects {}",
            za.len(),
            zb.len(),
            params.hidden
        )));
    }
    let zs: Vec<Vec<f64>> = (0..steps)
        .map(|i| {
            let a = i as f64 / (steps - 1) as f64;
            za.iter().zip(zb).map(|(x, y)| a * y + (1.0 - a) * x).collect()
        })
        .collect();
    compose(neutral, &params.decode(&zs, topo)?)
}

#[cfg(test)]
mod tests;
