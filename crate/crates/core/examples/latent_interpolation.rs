//! Decode the straight line between two expressions' apex latents.

use spiralface::cache::{build_level_tables, HierarchyCache};
use spiralface::data::{label_signal, synth_dataset, Expression, MotionLabel, SynthConfig};
use spiralface::eval::interpolate_latents;
use spiralface::mesh::primitives::icosphere;
use spiralface::model::{displacement_scale, train, DecoderTopology, GeneratorParams, TrainConfig};
use spiralface::sampling::build_hierarchy;
use spiralface::spiral::ReferenceVertex;

fn main() -> spiralface::Result<()> {
    let template = icosphere(3, 80.0);
    let h = build_hierarchy(&template, &[5.0, 5.0])?;
    let tables = build_level_tables(&h, 1, None, ReferenceVertex::MaxZ)?;
    let topo = DecoderTopology::from_cache(&HierarchyCache::new(h, tables, "example")?)?;
    let (data, _) = synth_dataset(&template, &SynthConfig { n_subjects: 2, frames: 12, ..Default::default() })?;
    let mut params = GeneratorParams::<f32>::spiral(&topo, 2)?;
    params.set_output_scale(&displacement_scale(&data)?)?;
    train(&mut params, &data, &topo, &TrainConfig { epochs: 20, ..Default::default() })?;

    let apex = |e| -> spiralface::Result<Vec<f64>> {
        let label = MotionLabel::new(e, 12, [2, 4, 8, 10], 1.0)?;
        Ok(params.encode(&label_signal(&label))?[6].clone())
    };
    let (za, zb) = (apex(Expression::Happy)?, apex(Expression::Angry)?);
    let path = interpolate_latents(&za, &zb, 8, &data[0].neutral, &params, &topo)?;
    for (i, m) in path.iter().enumerate() {
        let d: f64 = m
            .vertices()
            .iter()
            .zip(data[0].neutral.vertices())
            .map(|(a, b)| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt())
            .sum::<f64>()
            / m.num_vertices() as f64;
        println!("alpha {:.3}: mean displacement {d:.3} mm", i as f64 / 7.0);
    }
    Ok(())
}
