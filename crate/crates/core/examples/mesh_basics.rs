//! Primitives, OBJ round trip, one-rings and edge-graph distances.

use spiralface::mesh::primitives::{fan, icosphere};
use spiralface::mesh::{build_adjacency, graph_geodesic, load_mesh, save_mesh, MeshFormat};

fn main() -> spiralface::Result<()> {
    let sphere = icosphere(2, 1.0);
    println!("icosphere(2): {} vertices, {} faces", sphere.num_vertices(), sphere.num_faces());

    let path = std::env::temp_dir().join("spiralface_sphere.obj");
    save_mesh(&sphere, &path, MeshFormat::Obj)?;
    let back = load_mesh(&path, MeshFormat::Obj)?;
    println!("OBJ round trip exact: {}", back == sphere);

    let f = fan(6);
    let adj = build_adjacency(&f)?;
    println!("fan centre degree {}, rim vertex 1 on boundary: {}", adj.degree(0), adj.is_boundary(1));

    let d = graph_geodesic(&sphere, sphere.max_z_vertex());
    let far = d.iter().cloned().fold(0.0, f64::max);
    println!("largest edge-graph distance from the top vertex: {far:.3}");
    Ok(())
}
