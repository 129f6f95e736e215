//! End-to-end behaviour of the `spiralface` binary.

use std::path::Path;
use std::process::{Command, Output};

use spiralface::mesh::{load_mesh, MeshFormat};

const CONFIG: &str = r#"
template = "face_grid:12x10"
factors = [2.0, 2.0]
subjects = 2
test_subjects = 1
frames = 8
epochs = 1
baseline_components = 8
"#;

fn spiralface(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spiralface"))
        .current_dir(dir)
        .args(args)
        .args(["--config", "run.toml"])
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = spiralface(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn err(dir: &Path, args: &[&str]) -> String {
    let out = spiralface(dir, args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    let e = String::from_utf8(out.stderr).unwrap();
    assert!(e.starts_with("error: "), "{e}");
    e
}

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), CONFIG).unwrap();
    dir
}

#[test]
fn generate_writes_one_obj_per_frame() {
    let dir = workspace();
    let d = dir.path();
    for cmd in ["precompute", "synth-data", "train"] {
        ok(d, &[cmd]);
    }
    let stdout = ok(
        d,
        &["generate", "--expression", "happy", "--frames", "100", "--timestamps", "10,30,80,95"],
    );
    assert!(stdout.contains("config_hash"), "config echo missing: {stdout}");
    let out = d.join("output/generate");
    let mut objs: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".obj"))
        .collect();
    objs.sort();
    assert_eq!(objs.len(), 100);
    assert_eq!(objs[0], "frame_0000.obj");
    assert_eq!(objs[99], "frame_0099.obj");
    let m = load_mesh(out.join("frame_0055.obj"), MeshFormat::Obj).unwrap();
    assert_eq!(m.num_vertices(), 120);
    let label = std::fs::read_to_string(out.join("label.txt")).unwrap();
    assert!(label.contains("happy"), "{label}");

    // a shorter rerun replaces the old frames
    ok(d, &["generate", "--frames", "20", "--timestamps", "2,5,12,16"]);
    let n = std::fs::read_dir(&out).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "obj")).count();
    assert_eq!(n, 20);
}

#[test]
fn missing_cache_is_reported() {
    let dir = workspace();
    let e = err(dir.path(), &["train"]);
    assert!(e.contains("hierarchy.bin"), "{e}");
}

#[test]
fn cache_version_mismatch_is_refused() {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["precompute"]);
    let path = d.join("cache/hierarchy.bin");
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[8] = bytes[8].wrapping_add(1);
    std::fs::write(&path, bytes).unwrap();
    let e = err(d, &["train"]);
    assert!(e.contains("version"), "{e}");
}

#[test]
fn invalid_labels_and_keys_are_rejected() {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["precompute"]);
    ok(d, &["synth-data"]);
    ok(d, &["train"]);
    let e = err(d, &["generate", "--timestamps", "30,10,80,95"]);
    assert!(e.contains("timestamps"), "{e}");
    let e = err(d, &["generate", "--timestamps", "3,10,80"]);
    assert!(e.contains("4 values"), "{e}");
    let e = err(d, &["generate", "--expression", "boredom"]);
    assert!(e.contains("boredom"), "{e}");
    let e = err(d, &["generate", "--scale", "1.5"]);
    assert!(e.contains("scale"), "{e}");
    let e = err(d, &["generate", "--set", "no_such_key=1"]);
    assert!(e.contains("no_such_key"), "{e}");
}

#[test]
fn evaluate_refuses_checkpoints_from_another_hierarchy() {
    let dir = workspace();
    let d = dir.path();
    for cmd in ["precompute", "synth-data", "train"] {
        ok(d, &[cmd]);
    }
    ok(d, &["precompute", "--set", "factors=[3.0]"]);
    let e = err(d, &["evaluate", "--set", "factors=[3.0]"]);
    assert!(e.contains("refusing"), "{e}");
}
