use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Mesh, Vec3};
use crate::error::{Error, Result};

/// Supported on-disk mesh formats. PLY is ascii only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase) {
            Some(e) if e == "obj" => Ok(MeshFormat::Obj),
            Some(e) if e == "ply" => Ok(MeshFormat::Ply),
            _ => Err(Error::InvalidArgument(format!(
                "cannot infer mesh format from {}",
                path.display()
            ))),
        }
    }
}

pub fn load_mesh(path: impl AsRef<Path>, format: MeshFormat) -> Result<Mesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        MeshFormat::Obj => parse_obj(&text),
        MeshFormat::Ply => parse_ply(&text),
    }
}

pub fn save_mesh(mesh: &Mesh, path: impl AsRef<Path>, format: MeshFormat) -> Result<()> {
    save_mesh_with_header(mesh, path, format, "")
}

/// Like [`save_mesh`], with each line of `header` written as a comment.
pub fn save_mesh_with_header(mesh: &Mesh, path: impl AsRef<Path>, format: MeshFormat, header: &str) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        MeshFormat::Obj => {
            let mut s: String = header.lines().map(|l| format!("# {l}\n")).collect();
            s.push_str(&write_obj(mesh));
            s
        }
        MeshFormat::Ply => {
            let comments: String = header.lines().map(|l| format!("comment {l}\n")).collect();
            write_ply(mesh).replacen("format ascii 1.0\n", &format!("format ascii 1.0\n{comments}"), 1)
        }
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_f64(tok: Option<&str>, line: usize) -> Result<f64> {
    let tok = tok.ok_or_else(|| Error::Parse {
        line,
        msg: "missing coordinate".into(),
    })?;
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad number {tok:?}"),
    })
}

pub(crate) fn parse_obj(text: &str) -> Result<Mesh> {
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut faces = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let mut toks = raw.split_whitespace();
        match toks.next() {
            Some("v") => {
                let x = parse_f64(toks.next(), line)?;
                let y = parse_f64(toks.next(), line)?;
                let z = parse_f64(toks.next(), line)?;
                vertices.push([x, y, z]);
            }
            Some("f") => {
                let idx: Vec<&str> = toks.collect();
                if idx.len() != 3 {
                    return Err(Error::Parse {
                        line,
                        msg: format!("expected a triangle, got {} indices", idx.len()),
                    });
                }
                let mut face = [0usize; 3];
                for (k, tok) in idx.iter().enumerate() {
                    let head = tok.split('/').next().unwrap_or("");
                    let value: i64 = head.parse().map_err(|_| Error::Parse {
                        line,
                        msg: format!("bad face index {tok:?}"),
                    })?;
                    face[k] = match value {
                        0 => {
                            return Err(Error::Parse {
                                line,
                                msg: "face index 0 (OBJ indices are 1-based)".into(),
                            })
                        }
                        v if v > 0 => (v - 1) as usize,
                        v => {
                            let rel = vertices.len() as i64 + v;
                            if rel < 0 {
                                return Err(Error::Parse {
                                    line,
                                    msg: format!("relative index {v} before first vertex"),
                                });
                            }
                            rel as usize
                        }
                    };
                }
                faces.push(face);
            }
            _ => {}
        }
    }
    Mesh::new(vertices, faces)
}

pub(crate) fn parse_ply(text: &str) -> Result<Mesh> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: "missing ply magic".into(),
            })
        }
    }
    let mut n_vertices = None;
    let mut n_faces = None;
    let mut current = "";
    let mut vertex_props: Vec<String> = Vec::new();
    for (i, raw) in lines.by_ref() {
        let toks: Vec<&str> = raw.split_whitespace().collect();
        match toks.as_slice() {
            ["format", fmt, ..] => {
                if *fmt != "ascii" {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: format!("unsupported ply format {fmt}"),
                    });
                }
            }
            ["element", name, count] => {
                let count: usize = count.parse().map_err(|_| Error::Parse {
                    line: i + 1,
                    msg: format!("bad element count {count:?}"),
                })?;
                match *name {
                    "vertex" => n_vertices = Some(count),
                    "face" => n_faces = Some(count),
                    _ => {}
                }
                current = if *name == "vertex" { "vertex" } else { "other" };
            }
            ["property", .., prop] if current == "vertex" => vertex_props.push(prop.to_string()),
            ["end_header"] => break,
            _ => {}
        }
    }
    let (nv, nf) = match (n_vertices, n_faces) {
        (Some(v), Some(f)) => (v, f),
        _ => {
            return Err(Error::Parse {
                line: 0,
                msg: "ply header lacks vertex or face element".into(),
            })
        }
    };
    let axis = |name: &str| {
        vertex_props.iter().position(|p| p == name).ok_or_else(|| Error::Parse {
            line: 0,
            msg: format!("ply vertex lacks property {name}"),
        })
    };
    let (ix, iy, iz) = (axis("x")?, axis("y")?, axis("z")?);
    let mut vertices = Vec::with_capacity(nv);
    let mut faces = Vec::with_capacity(nf);
    let mut body = lines.filter(|(_, l)| !l.trim().is_empty());
    for _ in 0..nv {
        let (i, raw) = body.next().ok_or_else(|| Error::Parse {
            line: 0,
            msg: "unexpected end of vertex list".into(),
        })?;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        let get = |k: usize| parse_f64(toks.get(k).copied(), i + 1);
        vertices.push([get(ix)?, get(iy)?, get(iz)?]);
    }
    for _ in 0..nf {
        let (i, raw) = body.next().ok_or_else(|| Error::Parse {
            line: 0,
            msg: "unexpected end of face list".into(),
        })?;
        let toks: Vec<usize> = raw
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse {
                line: i + 1,
                msg: format!("bad face line {raw:?}"),
            })?;
        if toks.len() != 4 || toks[0] != 3 {
            return Err(Error::Parse {
                line: i + 1,
                msg: "expected a triangle face".into(),
            });
        }
        faces.push([toks[1], toks[2], toks[3]]);
    }
    Mesh::new(vertices, faces)
}

// `{}` on f64 prints the shortest representation that parses back exactly.
pub(crate) fn write_obj(mesh: &Mesh) -> String {
    let mut s = String::with_capacity(mesh.num_vertices() * 32 + mesh.num_faces() * 20);
    for v in mesh.vertices() {
        let _ = writeln!(s, "v {} {} {}", v[0], v[1], v[2]);
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}

fn write_ply(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nelement face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.num_vertices(),
        mesh.num_faces()
    );
    for v in mesh.vertices() {
        let _ = writeln!(s, "{} {} {}", v[0], v[1], v[2]);
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
    }
    s
}
