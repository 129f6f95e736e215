//! PCA blendshape baseline against the spiral decoder on held-out subjects.

use spiralface::cache::{build_level_tables, HierarchyCache};
use spiralface::data::{synth_dataset, SynthConfig};
use spiralface::eval::{baseline_params, fit_deformation_basis, score_model, ModelScores};
use spiralface::mesh::primitives::icosphere;
use spiralface::model::{displacement_scale, train, DecoderTopology, GeneratorParams, TrainConfig};
use spiralface::sampling::build_hierarchy;
use spiralface::spiral::ReferenceVertex;

fn main() -> spiralface::Result<()> {
    let template = icosphere(3, 80.0);
    let h = build_hierarchy(&template, &[5.0, 5.0])?;
    let tables = build_level_tables(&h, 1, None, ReferenceVertex::MaxZ)?;
    let topo = DecoderTopology::from_cache(&HierarchyCache::new(h, tables, "example")?)?;

    let base = SynthConfig { frames: 12, ..Default::default() };
    let (train_set, _) = synth_dataset(&template, &SynthConfig { n_subjects: 4, ..base.clone() })?;
    let (test_set, _) = synth_dataset(&template, &SynthConfig { n_subjects: 2, first_subject: 4, ..base })?;

    let basis = fit_deformation_basis(&train_set, 64)?;
    let explained: f64 = basis.variances.iter().take(6).sum::<f64>() / basis.variances.iter().sum::<f64>();
    println!("first 6 of 64 components hold {:.1}% of the fitted variance", 100.0 * explained);

    let tc = TrainConfig { epochs: 20, ..Default::default() };
    let mut spiral = GeneratorParams::<f32>::spiral(&topo, 1)?;
    spiral.set_output_scale(&displacement_scale(&train_set)?)?;
    train(&mut spiral, &train_set, &topo, &tc)?;
    let mut blend = baseline_params::<f32>(&basis, 1)?;
    train(&mut blend, &train_set, &topo, &tc)?;

    for (name, p) in [("spiral", &spiral), ("baseline", &blend)] {
        let s = ModelScores::from_scores(name, &score_model(p, &topo, &test_set)?)?;
        println!("{name:<9} held-out per-vertex error {:.3} mm", s.total);
    }
    Ok(())
}
