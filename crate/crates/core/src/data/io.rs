//! On-disk dataset layout:
//!
//! ```text
//! root/split.txt                          test subject ids, one per line
//! root/<subject>/neutral.obj              optional; frame 0 otherwise
//! root/<subject>/<expression>/label.txt   "expression onset apex_start apex_end offset_end"
//! root/<subject>/<expression>/frame_%04d.obj
//! ```
//!
//! Scales are never stored: they are recomputed from the loaded data.

use std::fs;
use std::path::{Path, PathBuf};

use super::{apply_scales, Expression, ExpressionSequence, ExpressionStats, MotionLabel};
use crate::error::{Error, Result};
use crate::mesh::{load_mesh, save_mesh_with_header, Mesh, MeshFormat};

pub const LABEL_FILE: &str = "label.txt";
pub const NEUTRAL_FILE: &str = "neutral.obj";
pub const SPLIT_FILE: &str = "split.txt";

pub fn frame_file_name(t: usize) -> String {
    format!("frame_{t:04}.obj")
}

fn sorted_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if entry.path().is_dir() {
            out.push(entry.path());
        }
    }
    out.sort();
    Ok(out)
}

fn parse_label(text: &str, path: &Path) -> Result<(Expression, [usize; 4])> {
    let line = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .ok_or_else(|| Error::Format(format!("{}: empty label file", path.display())))?;
    let toks: Vec<&str> = line.split_whitespace().collect();
    if toks.len() != 5 {
        return Err(Error::Format(format!(
            "{}: expected `expression onset apex_start apex_end offset_end`, got {line:?}",
            path.display()
        )));
    }
    let e: Expression = toks[0].parse()?;
    let mut ts = [0usize; 4];
    for (k, tok) in toks[1..].iter().enumerate() {
        ts[k] = tok
            .parse()
            .map_err(|_| Error::Format(format!("{}: bad timestamp {tok:?}", path.display())))?;
    }
    Ok((e, ts))
}

/// Writes the label line, preceded by `header` as `#` comments.
pub fn write_label_file(path: impl AsRef<Path>, label: &MotionLabel, header: &str) -> Result<()> {
    let path = path.as_ref();
    let [a, b, c, d] = label.timestamps();
    let mut text: String = header.lines().map(|l| format!("# {l}\n")).collect();
    text.push_str(&format!("{} {a} {b} {c} {d}\n", label.expression));
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn load_sequence(subject: &str, dir: &Path, neutral: Option<&Mesh>) -> Result<ExpressionSequence> {
    let label_path = dir.join(LABEL_FILE);
    if !label_path.exists() {
        return Err(Error::Format(format!("missing label file {}", label_path.display())));
    }
    let text = fs::read_to_string(&label_path).map_err(|e| Error::io(&label_path, e))?;
    let (expression, ts) = parse_label(&text, &label_path)?;

    let mut frame_paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("frame_") && name.ends_with(".obj") {
            frame_paths.push(p);
        }
    }
    frame_paths.sort();
    if frame_paths.is_empty() {
        return Err(Error::Format(format!("no frames in {}", dir.display())));
    }
    let first = load_mesh(&frame_paths[0], MeshFormat::Obj)?;
    let neutral = neutral.cloned().unwrap_or_else(|| first.clone());
    let mut frames = Vec::with_capacity(frame_paths.len());
    for p in &frame_paths {
        let m = if frames.is_empty() { first.clone() } else { load_mesh(p, MeshFormat::Obj)? };
        if !m.same_topology(&neutral) {
            return Err(Error::Topology(format!(
                "{}: {} vertices / {} faces differ from the subject's neutral ({} / {})",
                p.display(),
                m.num_vertices(),
                m.num_faces(),
                neutral.num_vertices(),
                neutral.num_faces()
            )));
        }
        frames.push(m.vertices().to_vec());
    }
    let label = MotionLabel::new(expression, frames.len(), ts, 1.0)
        .map_err(|e| Error::Format(format!("{}: {e}", label_path.display())))?;
    ExpressionSequence::new(subject, neutral, frames, label)
}

/// Loads every `subject/expression` sequence under `root` (sorted by
/// subject, then expression) and recomputes the extremeness scales.
pub fn load_dataset(root: impl AsRef<Path>) -> Result<(Vec<ExpressionSequence>, ExpressionStats)> {
    let root = root.as_ref();
    let mut seqs = Vec::new();
    for sdir in sorted_dirs(root)? {
        let subject = sdir.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        let neutral_path = sdir.join(NEUTRAL_FILE);
        let neutral = if neutral_path.exists() {
            Some(load_mesh(&neutral_path, MeshFormat::Obj)?)
        } else {
            None
        };
        let mut subject_seqs = Vec::new();
        for edir in sorted_dirs(&sdir)? {
            subject_seqs.push(load_sequence(&subject, &edir, neutral.as_ref())?);
        }
        subject_seqs.sort_by_key(|s| s.label.expression);
        seqs.extend(subject_seqs);
    }
    if seqs.is_empty() {
        return Err(Error::Format(format!("no sequences under {}", root.display())));
    }
    let reference = &seqs[0].neutral;
    if let Some(bad) = seqs.iter().find(|s| !s.neutral.same_topology(reference)) {
        return Err(Error::Topology(format!(
            "subject {} does not share the topology of subject {}",
            bad.subject, seqs[0].subject
        )));
    }
    let stats = ExpressionStats::from_sequences(&seqs);
    apply_scales(&mut seqs, &stats);
    Ok((seqs, stats))
}

/// Test subject ids from `root/split.txt`; empty when the file is absent.
pub fn load_split(root: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = root.as_ref().join(SPLIT_FILE);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

/// Writes sequences in the layout above. `test_subjects` goes to the split
/// file; `header` is written as a comment into every file.
pub fn save_dataset(
    root: impl AsRef<Path>,
    seqs: &[ExpressionSequence],
    test_subjects: &[String],
    header: &str,
) -> Result<()> {
    let root = root.as_ref();
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let mut written = std::collections::BTreeSet::new();
    for s in seqs {
        let sdir = root.join(&s.subject);
        let edir = sdir.join(s.label.expression.name());
        fs::create_dir_all(&edir).map_err(|e| Error::io(&edir, e))?;
        if written.insert(s.subject.clone()) {
            save_mesh_with_header(&s.neutral, sdir.join(NEUTRAL_FILE), MeshFormat::Obj, header)?;
        }
        write_label_file(edir.join(LABEL_FILE), &s.label, header)?;
        for t in 0..s.num_frames() {
            save_mesh_with_header(&s.frame_mesh(t), edir.join(frame_file_name(t)), MeshFormat::Obj, header)?;
        }
    }
    let split = root.join(SPLIT_FILE);
    let mut text: String = header.lines().map(|l| format!("# {l}\n")).collect();
    for id in test_subjects {
        text.push_str(id);
        text.push('\n');
    }
    fs::write(&split, text).map_err(|e| Error::io(&split, e))
}

/// Splits sequences into `(train, test)` by subject id.
pub fn split_by_subject(seqs: Vec<ExpressionSequence>, test_subjects: &[String]) -> (Vec<ExpressionSequence>, Vec<ExpressionSequence>) {
    seqs.into_iter().partition(|s| !test_subjects.contains(&s.subject))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_dataset, SynthConfig};
    use crate::mesh::primitives::{icosphere, tetrahedron};

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = icosphere(1, 80.0);
        let cfg = SynthConfig {
            n_subjects: 2,
            frames: 6,
            expressions: vec![Expression::Happy, Expression::Fear],
            ..Default::default()
        };
        let (seqs, stats) = synth_dataset(&m, &cfg).unwrap();
        save_dataset(dir.path(), &seqs, &["s001".to_string()], "config_hash 0123").unwrap();
        let (back, back_stats) = load_dataset(dir.path()).unwrap();
        assert_eq!(back.len(), 4);
        for (a, b) in seqs.iter().zip(&back) {
            assert_eq!(a.label, b.label);
            assert_eq!(a.subject, b.subject);
            for (fa, fb) in a.frames.iter().zip(&b.frames) {
                for (p, q) in fa.iter().zip(fb) {
                    assert!((0..3).all(|c| (p[c] - q[c]).abs() < 1e-9));
                }
            }
        }
        for e in 0..6 {
            assert!((stats.mean[e] - back_stats.mean[e]).abs() < 1e-9);
        }
        assert_eq!(load_split(dir.path()).unwrap(), vec!["s001"]);
        let (train, test) = split_by_subject(back, &["s001".to_string()]);
        assert_eq!((train.len(), test.len()), (2, 2));
    }

    fn write_tet_sequence(dir: &Path, frames: usize) {
        let e = dir.join("subj").join("happy");
        fs::create_dir_all(&e).unwrap();
        fs::write(e.join(LABEL_FILE), "happy 1 3 5 8\n").unwrap();
        for t in 0..frames {
            crate::mesh::save_mesh(&tetrahedron(), e.join(frame_file_name(t)), MeshFormat::Obj).unwrap();
        }
    }

    #[test]
    fn one_subject_ten_frames() {
        let dir = tempfile::tempdir().unwrap();
        write_tet_sequence(dir.path(), 10);
        let (seqs, _) = load_dataset(dir.path()).unwrap();
        assert_eq!(seqs.len(), 1);
        assert_eq!(seqs[0].num_frames(), 10);
        assert_eq!(seqs[0].label.timestamps(), [1, 3, 5, 8]);
    }

    #[test]
    fn topology_error_names_frame() {
        let dir = tempfile::tempdir().unwrap();
        write_tet_sequence(dir.path(), 10);
        let bad = dir.path().join("subj/happy").join(frame_file_name(4));
        fs::write(&bad, "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 3 2\nf 1 2 4\n").unwrap();
        let err = load_dataset(dir.path()).unwrap_err().to_string();
        assert!(err.contains("frame_0004.obj"), "{err}");
    }

    #[test]
    fn missing_label_file() {
        let dir = tempfile::tempdir().unwrap();
        write_tet_sequence(dir.path(), 3);
        fs::remove_file(dir.path().join("subj/happy").join(LABEL_FILE)).unwrap();
        assert!(load_dataset(dir.path()).unwrap_err().to_string().contains("label"));
    }
}
