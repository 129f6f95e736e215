//! Synthetic labeled sequences, extremeness scales and the on-disk layout.

use spiralface::data::{load_dataset, mean_abs_deformation, save_dataset, synth_dataset, SynthConfig};
use spiralface::mesh::primitives::icosphere;

fn main() -> spiralface::Result<()> {
    let template = icosphere(3, 80.0);
    let cfg = SynthConfig { n_subjects: 3, frames: 12, ..Default::default() };
    let (seqs, stats) = synth_dataset(&template, &cfg)?;
    for s in seqs.iter().take(6) {
        println!(
            "{} {:<9} T={} timestamps {:?} m = {:.3} mm scale s = {:.3}",
            s.subject,
            s.label.expression.name(),
            s.num_frames(),
            s.label.timestamps(),
            mean_abs_deformation(s),
            s.label.scale
        );
    }
    println!("stats: {stats:?}");

    let root = std::env::temp_dir().join("spiralface_dataset");
    save_dataset(&root, &seqs, &["s002".to_string()], "example")?;
    let (back, _) = load_dataset(&root)?;
    println!("wrote and reloaded {} sequences under {}", back.len(), root.display());
    Ok(())
}
