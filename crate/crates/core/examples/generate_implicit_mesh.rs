//! Writes the coarse mesh of `(x − z²)² + y² + z² = 1` shipped in `data/`.
//!
//! A frequency-10 geodesic sphere (1002 vertices) is pushed onto the surface
//! by `(X, Y, Z) ↦ (X + Z², Y, Z)`, which maps the unit sphere onto it, and
//! then projected with the same closest-point iteration used everywhere else.
//!
//! Usage: `cargo run --example generate_implicit_mesh -- [frequency] [out.off]`

use std::collections::HashMap;

use surface_nzt::geometry::{SurfaceModel, Vec3};
use surface_nzt::io_formats::write_off;
use surface_nzt::mesh::{make_icosphere, SurfaceMesh};

fn geodesic_sphere(freq: usize) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let ico = make_icosphere(&SurfaceModel::sphere(1.0).unwrap(), 0).unwrap();
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut index: HashMap<[i64; 3], usize> = HashMap::new();
    let mut id = |p: Vec3, vertices: &mut Vec<Vec3>| -> usize {
        let u = p.normalize();
        let key = [u.x, u.y, u.z].map(|c| (c * 1e9).round() as i64);
        *index.entry(key).or_insert_with(|| {
            vertices.push(u);
            vertices.len() - 1
        })
    };
    let mut faces = Vec::new();
    for tri in ico.faces() {
        let [a, b, c] = tri.map(|v| ico.vertices()[v]);
        let n = freq as f64;
        let pt = |i: usize, j: usize| a + (b - a) * (i as f64 / n) + (c - a) * (j as f64 / n);
        let mut grid = vec![vec![0usize; freq + 1]; freq + 1];
        for i in 0..=freq {
            for j in 0..=freq - i {
                grid[i][j] = id(pt(i, j), &mut vertices);
            }
        }
        for i in 0..freq {
            for j in 0..freq - i {
                faces.push([grid[i][j], grid[i + 1][j], grid[i][j + 1]]);
                if i + j + 1 < freq {
                    faces.push([grid[i + 1][j], grid[i + 1][j + 1], grid[i][j + 1]]);
                }
            }
        }
    }
    (vertices, faces)
}

fn main() {
    let mut args = std::env::args().skip(1);
    let freq: usize = args.next().map_or(10, |s| s.parse().expect("frequency"));
    let out = args.next().unwrap_or_else(|| "crates/core/data/implicit_coarse.off".into());
    let (sphere, faces) = geodesic_sphere(freq);
    let sheared: Vec<Vec3> = sphere.iter().map(|p| Vec3::new(p.x + p.z * p.z, p.y, p.z)).collect();
    let surface = SurfaceModel::sheared_sphere();
    let mut projected = Vec::with_capacity(sheared.len());
    for x in &sheared {
        projected.push(surface.probe(x).expect("projection").projection);
    }
    let mesh = SurfaceMesh::from_parts(projected, faces).expect("valid mesh");
    assert_eq!(mesh.euler_characteristic(), 2);
    std::fs::write(&out, write_off(&mesh.to_off())).expect("write");
    println!(
        "{out}: {} vertices, {} edges, {} faces, h = {:.3}",
        mesh.n_vertices(),
        mesh.n_edges(),
        mesh.n_faces(),
        mesh.h()
    );
}
