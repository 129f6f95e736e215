//! Binary cache of a sampling hierarchy plus its per-level spiral tables.
//!
//! Layout (little-endian, counts are `u64`):
//!
//! ```text
//! magic    8 bytes "SPFHIER\0"
//! version  u8
//! config   u64 len + UTF-8 (hash of the producing config)
//! levels   count x { nv, nv x 3 f64, nf, nf x 3 u64 }
//! up       count x { rows, cols, nnz, nnz x (u64 row, u64 col, f64 w) }
//! kept     count x { len, len x u64 }
//! spirals  count x { level, length, reference, n, n x i64 }
//! ```

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::autodiff::Reader;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::sampling::{SamplingHierarchy, SparseMatrix};
use crate::spiral::{build_spiral_table, default_length, ReferenceVertex, SpiralTable};

pub const CACHE_MAGIC: &[u8; 8] = b"SPFHIER\0";
pub const CACHE_VERSION: u8 = 1;

/// Everything the decoder needs about the mesh topology.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyCache {
    pub hierarchy: SamplingHierarchy,
    /// One table per level, coarse to fine.
    pub tables: Vec<SpiralTable>,
    pub config_hash: String,
}

/// Spiral tables for every level. `length = None` picks the one-disk size of
/// each level. An explicit reference index refers to the finest level and is
/// carried down while the vertex survives; otherwise the level's max-z
/// vertex is used.
pub fn build_level_tables(
    h: &SamplingHierarchy,
    k: usize,
    length: Option<usize>,
    reference: ReferenceVertex,
) -> Result<Vec<SpiralTable>> {
    let n_levels = h.levels.len();
    // reference index per level, fine to coarse
    let mut refs = vec![ReferenceVertex::MaxZ; n_levels];
    if let ReferenceVertex::Index(i) = reference {
        let mut cur = Some(i);
        for lvl in (0..n_levels).rev() {
            refs[lvl] = cur.map_or(ReferenceVertex::MaxZ, ReferenceVertex::Index);
            if lvl > 0 {
                cur = cur.and_then(|v| h.down_maps[lvl - 1].iter().position(|&f| f == v));
            }
        }
    }
    h.levels
        .iter()
        .enumerate()
        .map(|(lvl, mesh)| {
            let len = match length {
                Some(l) => l,
                None => default_length(mesh)?,
            };
            let mut t = build_spiral_table(mesh, k, len, refs[lvl])?;
            t.level = lvl;
            Ok(t)
        })
        .collect()
}

impl HierarchyCache {
    pub fn new(hierarchy: SamplingHierarchy, tables: Vec<SpiralTable>, config_hash: impl Into<String>) -> Result<Self> {
        let c = HierarchyCache {
            hierarchy,
            tables,
            config_hash: config_hash.into(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.hierarchy.validate()?;
        if self.tables.len() != self.hierarchy.levels.len() {
            return Err(Error::Shape(format!(
                "{} spiral tables for {} levels",
                self.tables.len(),
                self.hierarchy.levels.len()
            )));
        }
        for (lvl, (t, m)) in self.tables.iter().zip(&self.hierarchy.levels).enumerate() {
            if t.num_vertices() != m.num_vertices() {
                return Err(Error::Shape(format!(
                    "level {lvl}: spiral table for {} vertices, mesh has {}",
                    t.num_vertices(),
                    m.num_vertices()
                )));
            }
            t.validate()?;
        }
        Ok(())
    }

    /// Hex SHA-256 of the topology content (everything but the config hash).
    pub fn fingerprint(&self) -> String {
        let mut body = Vec::new();
        encode_body(&mut body, &self.hierarchy, &self.tables);
        hex(&Sha256::digest(&body))[..16].to_string()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CACHE_MAGIC);
        out.push(CACHE_VERSION);
        put_u64(&mut out, self.config_hash.len() as u64);
        out.extend_from_slice(self.config_hash.as_bytes());
        encode_body(&mut out, &self.hierarchy, &self.tables);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(8)? != CACHE_MAGIC {
            return Err(Error::Format("not a hierarchy cache (bad magic)".into()));
        }
        let version = r.take(1)?[0];
        if version != CACHE_VERSION {
            return Err(Error::Format(format!(
                "hierarchy cache version {version}, this build reads version {CACHE_VERSION}; rerun precompute"
            )));
        }
        let config_hash = r.string()?;

        let n_levels = r.u64()? as usize;
        let mut levels = Vec::with_capacity(n_levels.min(64));
        for _ in 0..n_levels {
            let nv = r.u64()? as usize;
            let mut verts = Vec::with_capacity(nv.min(1 << 24));
            for _ in 0..nv {
                verts.push([r.f64()?, r.f64()?, r.f64()?]);
            }
            let nf = r.u64()? as usize;
            let mut faces = Vec::with_capacity(nf.min(1 << 24));
            for _ in 0..nf {
                faces.push([r.u64()? as usize, r.u64()? as usize, r.u64()? as usize]);
            }
            levels.push(Mesh::new(verts, faces)?);
        }
        let n_up = r.u64()? as usize;
        let mut up = Vec::with_capacity(n_up.min(64));
        for _ in 0..n_up {
            let (rows, cols, nnz) = (r.u64()? as usize, r.u64()? as usize, r.u64()? as usize);
            let mut entries = Vec::with_capacity(nnz.min(1 << 24));
            for _ in 0..nnz {
                entries.push((r.u64()? as usize, r.u64()? as usize, r.f64()?));
            }
            up.push(SparseMatrix::from_triplets(rows, cols, entries)?);
        }
        let n_maps = r.u64()? as usize;
        let mut down_maps = Vec::with_capacity(n_maps.min(64));
        for _ in 0..n_maps {
            let len = r.u64()? as usize;
            down_maps.push((0..len).map(|_| r.u64().map(|x| x as usize)).collect::<Result<Vec<_>>>()?);
        }
        let n_tables = r.u64()? as usize;
        let mut tables = Vec::with_capacity(n_tables.min(64));
        for _ in 0..n_tables {
            let level = r.u64()? as usize;
            let length = r.u64()? as usize;
            let reference_vertex = r.u64()? as usize;
            let n = r.u64()? as usize;
            let indices = (0..n).map(|_| r.i64()).collect::<Result<Vec<_>>>()?;
            if length == 0 || n % length != 0 {
                return Err(Error::Format(format!("spiral table {level}: {n} entries for L = {length}")));
            }
            tables.push(SpiralTable {
                level,
                length,
                indices,
                reference_vertex,
            });
        }
        if r.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after hierarchy cache".into()));
        }
        HierarchyCache::new(SamplingHierarchy { levels, up, down_maps }, tables, config_hash)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::Format(format!(
                "hierarchy cache {} not found; run precompute first",
                path.display()
            )));
        }
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        HierarchyCache::decode(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

fn put_u64(out: &mut Vec<u8>, x: u64) {
    out.extend_from_slice(&x.to_le_bytes());
}

fn encode_body(out: &mut Vec<u8>, h: &SamplingHierarchy, tables: &[SpiralTable]) {
    put_u64(out, h.levels.len() as u64);
    for m in &h.levels {
        put_u64(out, m.num_vertices() as u64);
        for p in m.vertices() {
            for c in p {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        put_u64(out, m.num_faces() as u64);
        for f in m.faces() {
            for &i in f {
                put_u64(out, i as u64);
            }
        }
    }
    put_u64(out, h.up.len() as u64);
    for q in &h.up {
        put_u64(out, q.rows() as u64);
        put_u64(out, q.cols() as u64);
        put_u64(out, q.nnz() as u64);
        for &(r, c, w) in q.entries() {
            put_u64(out, r as u64);
            put_u64(out, c as u64);
            out.extend_from_slice(&w.to_le_bytes());
        }
    }
    put_u64(out, h.down_maps.len() as u64);
    for map in &h.down_maps {
        put_u64(out, map.len() as u64);
        for &i in map {
            put_u64(out, i as u64);
        }
    }
    put_u64(out, tables.len() as u64);
    for t in tables {
        put_u64(out, t.level as u64);
        put_u64(out, t.length as u64);
        put_u64(out, t.reference_vertex as u64);
        put_u64(out, t.indices.len() as u64);
        for &i in &t.indices {
            out.extend_from_slice(&i.to_le_bytes());
        }
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
