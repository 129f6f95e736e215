//! Spiral orderings and the per-level tables the decoder convolves over.

use spiralface::cache::build_level_tables;
use spiralface::mesh::build_adjacency;
use spiralface::mesh::primitives::{fan, icosphere};
use spiralface::sampling::build_hierarchy;
use spiralface::spiral::{build_spiral_table, k_disk, ReferenceVertex, PAD};

fn main() -> spiralface::Result<()> {
    let f = fan(6);
    for len in [4, 7, 9] {
        let t = build_spiral_table(&f, 1, len, ReferenceVertex::Index(1))?;
        let row: Vec<String> = t.indices[..len]
            .iter()
            .map(|&i| if i == PAD { "PAD".into() } else { i.to_string() })
            .collect();
        println!("fan, L = {len}: [{}]", row.join(", "));
    }

    let sphere = icosphere(3, 1.0);
    let adj = build_adjacency(&sphere)?;
    println!("icosphere(3) vertex 0 two-disk: {} vertices", k_disk(&adj, 0, 2).len());

    let h = build_hierarchy(&icosphere(4, 80.0), &[5.0, 5.0, 5.0])?;
    for t in build_level_tables(&h, 1, None, ReferenceVertex::MaxZ)? {
        println!("level {}: {} vertices, L = {}", t.level, t.num_vertices(), t.length);
    }
    Ok(())
}
