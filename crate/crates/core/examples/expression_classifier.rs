//! Expression classifier on PCA frame codes, with its metrics table.

use spiralface::data::{synth_dataset, SynthConfig};
use spiralface::eval::{classify_and_report, Classifier, ClassifierConfig, EvalReport};
use spiralface::mesh::primitives::icosphere;

fn main() -> spiralface::Result<()> {
    let template = icosphere(3, 80.0);
    let base = SynthConfig { frames: 20, ..Default::default() };
    let (train_set, _) = synth_dataset(&template, &SynthConfig { n_subjects: 8, ..base.clone() })?;
    let (test_set, _) = synth_dataset(&template, &SynthConfig { n_subjects: 3, first_subject: 8, ..base })?;

    let cfg = ClassifierConfig::default();
    let (clf, history) = Classifier::train(&train_set, &cfg)?;
    println!("training loss by epoch: {:.4?}", history);
    let metrics = classify_and_report(&clf, &test_set)?;
    let report = EvalReport {
        classifier: Some(cfg),
        classification: vec![("held-out".into(), metrics)],
        ..EvalReport::default()
    };
    print!("{}", report.to_text());
    Ok(())
}
