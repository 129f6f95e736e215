use super::*;
use crate::cache::{build_level_tables, HierarchyCache};
use crate::data::{label_signal, synth_dataset, MotionLabel, SynthConfig};
use crate::mesh::primitives::face_grid;
use crate::sampling::build_hierarchy;
use crate::spiral::ReferenceVertex;

fn tiny() -> (Mesh, DecoderTopology) {
    let m = face_grid(8, 6, 60.0);
    let h = build_hierarchy(&m, &[2.0, 2.0]).unwrap();
    let tables = build_level_tables(&h, 1, None, ReferenceVertex::MaxZ).unwrap();
    let topo = DecoderTopology::from_cache(&HierarchyCache::new(h, tables, "test").unwrap()).unwrap();
    (m, topo)
}

fn seq(vals: impl Fn(usize, usize, usize) -> f64, t: usize, n: usize) -> Vec<Vec<Vec3>> {
    (0..t)
        .map(|f| (0..n).map(|v| [vals(f, v, 0), vals(f, v, 1), vals(f, v, 2)]).collect())
        .collect()
}

#[test]
fn metric_identities() {
    let a = seq(|f, v, c| (f * 7 + v * 3 + c) as f64 * 0.1, 4, 5);
    let shifted = seq(|f, v, c| (f * 7 + v * 3 + c) as f64 * 0.1 + if c == 0 { 1.0 } else { 0.0 }, 4, 5);
    assert_eq!(per_vertex_error(&a, &a).unwrap(), 0.0);
    assert!(per_frame_l1(&a, &a).unwrap().iter().all(|&x| x == 0.0));
    assert!((per_vertex_error(&shifted, &a).unwrap() - 1.0).abs() < 1e-12);
    let b = seq(|f, v, c| ((f + 1) * (v + 2) * (c + 3)) as f64 * 0.01, 4, 5);
    assert_eq!(per_vertex_error(&a, &b).unwrap(), per_vertex_error(&b, &a).unwrap());
    assert_eq!(per_frame_l1(&a, &b).unwrap(), per_frame_l1(&b, &a).unwrap());
    assert!(per_vertex_error(&a, &b).unwrap() > 0.0);
}

#[test]
fn localized_error_spikes_one_frame() {
    let a = seq(|_, _, _| 0.0, 6, 4);
    let mut b = a.clone();
    b[3][2][1] = 1.2;
    let c = per_frame_l1(&b, &a).unwrap();
    assert_eq!(c, vec![0.0, 0.0, 0.0, 1.2 / 12.0, 0.0, 0.0]);
}

#[test]
fn shape_mismatch_is_rejected() {
    let a = seq(|_, _, _| 0.0, 3, 4);
    assert!(per_vertex_error(&a, &a[..2]).is_err());
    assert!(per_frame_l1(&a, &seq(|_, _, _| 0.0, 3, 5)).is_err());
}

#[test]
fn mean_curve_handles_ragged_lengths() {
    assert_eq!(mean_curve(&[vec![1.0, 2.0], vec![3.0]]), vec![2.0, 2.0]);
}

fn toy_basis() -> PcaBasis {
    let samples: Vec<Vec<f64>> = (0..10)
        .map(|i| (0..12).map(|j| ((i * 5 + j * 3) % 7) as f64 - 3.0 + 0.1 * (i * j) as f64).collect())
        .collect();
    fit_pca(&samples, 4).unwrap()
}

#[test]
fn blendshape_decode_is_affine() {
    let b = toy_basis();
    let mean: Vec<Vec3> = b.mean.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
    assert_eq!(blendshape_decode(&[0.0; 4], &b), mean);
    let (z1, z2) = ([0.5, -1.0, 2.0, 0.25], [1.5, 0.0, -0.5, 3.0]);
    let sum: Vec<f64> = z1.iter().zip(&z2).map(|(a, c)| a + c).collect();
    let d1 = blendshape_decode(&z1, &b);
    let d2 = blendshape_decode(&z2, &b);
    let ds = blendshape_decode(&sum, &b);
    for v in 0..4 {
        for c in 0..3 {
            // D(z1 + z2) = D(z1) + D(z2) - mean
            assert!((ds[v][c] - (d1[v][c] + d2[v][c] - mean[v][c])).abs() < 1e-12);
        }
    }
}

#[test]
fn baseline_decoder_is_rescaled_blendshape_decode() {
    let b = toy_basis();
    let p = baseline_params::<f64>(&b, 3).unwrap();
    let (_, topo) = {
        // the blendshape decoder only needs a topology with matching N
        let m = face_grid(2, 2, 1.0);
        let h = build_hierarchy(&m, &[2.0]).unwrap();
        let t = build_level_tables(&h, 1, None, ReferenceVertex::MaxZ).unwrap();
        (m, DecoderTopology::from_cache(&HierarchyCache::new(h, t, "x").unwrap()).unwrap())
    };
    let z: Vec<f64> = (0..LATENT).map(|i| ((i * 37) % 11) as f64 / 11.0 - 0.5).collect();
    let ours = p.decode_frame(&z, &topo).unwrap();
    let scaled: Vec<f64> = (0..4).map(|i| z[i] * BLEND_SIGMAS * b.variances[i].sqrt()).collect();
    let expected = blendshape_decode(&scaled, &b);
    for (a, e) in ours.iter().zip(&expected) {
        for c in 0..3 {
            assert!((a[c] - e[c]).abs() < 1e-12);
        }
    }
}

#[test]
fn interpolation_endpoints_and_constant_path() {
    let (m, topo) = tiny();
    let p = GeneratorParams::<f64>::spiral(&topo, 4).unwrap();
    let label = MotionLabel::new(Expression::Happy, 10, [1, 3, 6, 8], 1.0).unwrap();
    let z = p.encode(&label_signal(&label)).unwrap();
    let (za, zb) = (&z[0], &z[5]);
    let path = interpolate_latents(za, zb, 5, &m, &p, &topo).unwrap();
    assert_eq!(path.len(), 5);
    let ends = compose(&m, &p.decode(&[za.clone(), zb.clone()], &topo).unwrap()).unwrap();
    assert_eq!(path[0], ends[0]);
    assert_eq!(path[4], ends[1]);
    let flat = interpolate_latents(za, za, 4, &m, &p, &topo).unwrap();
    for f in &flat[1..] {
        for (a, b) in f.vertices().iter().zip(flat[0].vertices()) {
            assert!((0..3).all(|c| (a[c] - b[c]).abs() < 1e-12));
        }
    }
    assert!(interpolate_latents(za, zb, 1, &m, &p, &topo).is_err());
    assert!(interpolate_latents(&za[..3], zb, 3, &m, &p, &topo).is_err());
}

#[test]
fn interpolation_steps_shrink_with_step_count() {
    // Finer sampling of the same path moves each vertex less per step.
    let (m, topo) = tiny();
    let p = GeneratorParams::<f64>::spiral(&topo, 6).unwrap();
    let za = vec![0.9; LATENT];
    let zb = vec![-0.9; LATENT];
    let max_step = |steps: usize| {
        let path = interpolate_latents(&za, &zb, steps, &m, &p, &topo).unwrap();
        path.windows(2)
            .flat_map(|w| {
                w[0].vertices()
                    .iter()
                    .zip(w[1].vertices())
                    .map(|(a, b)| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt())
                    .collect::<Vec<_>>()
            })
            .fold(0.0, f64::max)
    };
    assert!(max_step(21) < max_step(5));
}

fn synth(frames: usize, subjects: usize) -> (Mesh, DecoderTopology, Vec<ExpressionSequence>) {
    let (m, topo) = tiny();
    let cfg = SynthConfig {
        n_subjects: subjects,
        frames,
        ..Default::default()
    };
    let data = synth_dataset(&m, &cfg).unwrap().0;
    (m, topo, data)
}

#[test]
fn zero_model_scores_equal_mean_deformation() {
    let (_, topo, data) = synth(8, 2);
    let mut p = GeneratorParams::<f64>::spiral(&topo, 1).unwrap();
    p.zero_decoder();
    let scores = score_model(&p, &topo, &data).unwrap();
    for (s, d) in scores.iter().zip(&data) {
        assert!((s.per_vertex - crate::data::mean_abs_deformation(d)).abs() < 1e-12);
        assert_eq!(s.curve.len(), 8);
    }
    let agg = ModelScores::from_scores("zero", &scores).unwrap();
    // totals: frame-weighted mean of the per-expression rows
    let frames: usize = agg.per_expression.iter().map(|p| p.2).sum();
    let from_rows: f64 = agg.per_expression.iter().map(|p| p.1 * p.2 as f64).sum::<f64>() / frames as f64;
    let direct: f64 = scores.iter().map(|s| s.per_vertex * s.frames as f64).sum::<f64>()
        / scores.iter().map(|s| s.frames).sum::<usize>() as f64;
    assert!((agg.total - from_rows).abs() < 1e-12);
    assert!((agg.total - direct).abs() < 1e-12);
    assert_eq!(agg.per_expression.len(), 6);
}

#[test]
fn classifier_pipeline_and_report_files() {
    let (_, topo, data) = synth(10, 3);
    let cfg = ClassifierConfig {
        frames: 5,
        components: 8,
        hidden: [32, 16],
        epochs: 20,
        ..ClassifierConfig::default()
    };
    let (clf, hist) = Classifier::train(&data, &cfg).unwrap();
    assert_eq!(hist.len(), 20);
    let metrics = classify_and_report(&clf, &data).unwrap();
    assert!(metrics.accuracy > 0.9, "{metrics:?}");
    let p = clf.predict_proba(&data[0]).unwrap();
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("clf.bin");
    clf.save(&path, "abc").unwrap();
    let back = Classifier::load(&path).unwrap();
    assert_eq!(back, clf);

    let missing: Vec<_> = data.iter().filter(|s| s.label.expression != Expression::Fear).cloned().collect();
    assert!(Classifier::train(&missing, &cfg).is_err());

    let mut p = GeneratorParams::<f64>::spiral(&topo, 1).unwrap();
    p.zero_decoder();
    let report = EvalReport {
        config_hash: "abc".into(),
        hierarchy: topo.fingerprint().into(),
        models: vec![ModelScores::from_scores("spiral", &score_model(&p, &topo, &data).unwrap()).unwrap()],
        classifier: Some(cfg),
        classification: vec![("ground_truth".into(), metrics)],
    };
    report.write(dir.path(), "report").unwrap();
    let text = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(text.contains("config_hash abc") && text.contains("macro"));
    let table = std::fs::read_to_string(dir.path().join("report.tsv")).unwrap();
    assert!(table.lines().skip(1).all(|l| l.split('\t').count() == 5));
    let curve = std::fs::read_to_string(dir.path().join("curve_spiral.txt")).unwrap();
    let rows: Vec<&str> = curve.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r.split(' ').count() == 2));
}
