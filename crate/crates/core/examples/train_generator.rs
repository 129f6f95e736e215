//! Train the spiral generator on a few synthetic sequences, then generate a
//! new sequence for an unseen label and write it as OBJ frames.

use spiralface::cache::{build_level_tables, HierarchyCache};
use spiralface::data::{synth_dataset, Expression, MotionLabel, SynthConfig};
use spiralface::mesh::primitives::icosphere;
use spiralface::mesh::{save_mesh, MeshFormat};
use spiralface::model::{displacement_scale, generate, train, DecoderTopology, GeneratorParams, TrainConfig};
use spiralface::sampling::build_hierarchy;
use spiralface::spiral::ReferenceVertex;

fn main() -> spiralface::Result<()> {
    let template = icosphere(3, 80.0);
    let h = build_hierarchy(&template, &[5.0, 5.0])?;
    let tables = build_level_tables(&h, 1, None, ReferenceVertex::MaxZ)?;
    let topo = DecoderTopology::from_cache(&HierarchyCache::new(h, tables, "example")?)?;

    let cfg = SynthConfig { n_subjects: 2, frames: 16, ..Default::default() };
    let (data, _) = synth_dataset(&template, &cfg)?;
    let mut params = GeneratorParams::<f32>::spiral(&topo, 0)?;
    params.set_output_scale(&displacement_scale(&data)?)?;
    println!("decoder shapes: {:?}", params.shape_trace(&topo)?);

    let history = train(&mut params, &data, &topo, &TrainConfig { epochs: 30, ..Default::default() })?;
    let l = history.losses();
    println!("loss: epoch 1 {:.3} mm -> epoch {} {:.3} mm", l[0], l.len(), l[l.len() - 1]);

    let label = MotionLabel::new(Expression::Surprise, 40, [4, 12, 28, 36], 0.8)?;
    let frames = generate(&data[0].neutral, &label, &params, &topo)?;
    let dir = std::env::temp_dir().join("spiralface_generated");
    std::fs::create_dir_all(&dir).map_err(|e| spiralface::Error::InvalidArgument(e.to_string()))?;
    for (t, m) in frames.iter().enumerate() {
        save_mesh(m, dir.join(spiralface::data::frame_file_name(t)), MeshFormat::Obj)?;
    }
    println!("wrote {} frames to {}", frames.len(), dir.display());
    Ok(())
}
