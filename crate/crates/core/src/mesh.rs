//! Triangulated surfaces Γ_h with vertices on γ: generators, import,
//! uniform refinement with projection, face frames, edge records and anchor
//! faces.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::Matrix3x2;
use thiserror::Error;

use crate::geometry::{GeometryError, SurfaceModel, Vec3};
use crate::io_formats::{parse_off, FormatError, OffDocument};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("edge ({0}, {1}) is not shared by exactly two faces ({2} found)")]
    NonManifold(usize, usize, usize),
    #[error("edge ({0}, {1}) is traversed in the same direction by both faces")]
    InconsistentOrientation(usize, usize),
    #[error("line {line}: non-triangular face with {count} vertices")]
    NonTriangular { line: usize, count: usize },
    #[error("parse error: {0}")]
    ParseError(FormatError),
    #[error("projection of point {point:?} failed: {source}")]
    ProjectionFailure { point: [f64; 3], source: GeometryError },
    #[error("face {0} is degenerate")]
    DegenerateFace(usize),
    #[error("face {face} references vertex {vertex} out of range")]
    InvalidIndex { face: usize, vertex: usize },
    #[error("vertex {0} belongs to no face")]
    IsolatedVertex(usize),
    #[error("invalid mesh parameters: {0}")]
    InvalidParameters(String),
}

impl From<FormatError> for MeshError {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::NonTriangular { line, count } => MeshError::NonTriangular { line, count },
            e => MeshError::ParseError(e),
        }
    }
}

/// Flat geometry of one face. `t1` is the direction of the first edge and
/// `t2 = ν × t1`; `local` holds the vertex coordinates in this frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceFrame {
    pub normal: Vec3,
    pub t1: Vec3,
    pub t2: Vec3,
    pub origin: Vec3,
    pub area: f64,
    pub diameter: f64,
    pub local: [[f64; 2]; 3],
}

impl FaceFrame {
    fn new(p: [Vec3; 3]) -> Option<Self> {
        let e1 = p[1] - p[0];
        let e2 = p[2] - p[0];
        let cross = e1.cross(&e2);
        let diameter = e1.norm().max(e2.norm()).max((p[2] - p[1]).norm());
        let area = 0.5 * cross.norm();
        if !(area > 1e-14 * diameter * diameter) {
            return None;
        }
        let normal = cross / cross.norm();
        let t1 = e1 / e1.norm();
        let t2 = normal.cross(&t1);
        Some(FaceFrame {
            normal,
            t1,
            t2,
            origin: p[0],
            area,
            diameter,
            local: [[0.0, 0.0], [e1.norm(), 0.0], [e2.dot(&t1), e2.dot(&t2)]],
        })
    }

    /// The 3×2 matrix `[t1 t2]`.
    pub fn basis(&self) -> Matrix3x2<f64> {
        Matrix3x2::from_columns(&[self.t1, self.t2])
    }

    pub fn to_ambient(&self, g: [f64; 2]) -> Vec3 {
        self.t1 * g[0] + self.t2 * g[1]
    }

    pub fn to_local(&self, v: &Vec3) -> [f64; 2] {
        [v.dot(&self.t1), v.dot(&self.t2)]
    }

    /// Ambient point at local coordinates.
    pub fn point(&self, x: [f64; 2]) -> Vec3 {
        self.origin + self.to_ambient(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeRecord {
    /// Endpoints `(a, b)`, in the order traversed by `faces[0]`.
    pub vertices: [usize; 2],
    pub faces: [usize; 2],
    /// Local index of the edge in each face (the opposite local vertex).
    pub local_edge: [usize; 2],
    pub length: f64,
    /// Unit vector from `a` to `b`.
    pub tangent: Vec3,
    /// Outward in-plane unit conormals with respect to each face.
    pub conormals: [Vec3; 2],
}

#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    frames: Vec<FaceFrame>,
    edges: Vec<EdgeRecord>,
    face_edges: Vec<[usize; 3]>,
    vertex_faces: Vec<Vec<usize>>,
    anchors: Vec<usize>,
    h: f64,
}

impl SurfaceMesh {
    /// Builds connectivity and geometry; faces must be consistently oriented.
    pub fn from_parts(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let nv = vertices.len();
        if faces.is_empty() {
            return Err(MeshError::InvalidParameters("mesh has no faces".into()));
        }
        let mut frames = Vec::with_capacity(faces.len());
        let mut vertex_faces = vec![Vec::new(); nv];
        for (f, tri) in faces.iter().enumerate() {
            for &v in tri {
                if v >= nv {
                    return Err(MeshError::InvalidIndex { face: f, vertex: v });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::DegenerateFace(f));
            }
            let frame = FaceFrame::new(tri.map(|v| vertices[v])).ok_or(MeshError::DegenerateFace(f))?;
            frames.push(frame);
            for &v in tri {
                vertex_faces[v].push(f);
            }
        }
        if let Some(v) = vertex_faces.iter().position(Vec::is_empty) {
            return Err(MeshError::IsolatedVertex(v));
        }

        // half-edge (a → b) of local edge i runs from vertex i+1 to i+2
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut partial: Vec<(usize, usize, usize, usize, Option<(usize, usize)>, usize)> = Vec::new();
        let mut face_edges = vec![[0; 3]; faces.len()];
        for (f, tri) in faces.iter().enumerate() {
            for i in 0..3 {
                let (a, b) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
                let key = (a.min(b), a.max(b));
                match index.get(&key) {
                    None => {
                        index.insert(key, partial.len());
                        face_edges[f][i] = partial.len();
                        partial.push((a, b, f, i, None, 1));
                    }
                    Some(&e) => {
                        let rec = &mut partial[e];
                        rec.5 += 1;
                        if rec.5 > 2 {
                            return Err(MeshError::NonManifold(key.0, key.1, rec.5));
                        }
                        if rec.0 == a {
                            return Err(MeshError::InconsistentOrientation(key.0, key.1));
                        }
                        rec.4 = Some((f, i));
                        face_edges[f][i] = e;
                    }
                }
            }
        }
        let mut edges = Vec::with_capacity(partial.len());
        for (a, b, f1, i1, second, count) in partial {
            let Some((f2, i2)) = second else {
                return Err(MeshError::NonManifold(a.min(b), a.max(b), count));
            };
            let d = vertices[b] - vertices[a];
            let length = d.norm();
            let tangent = d / length;
            let n1 = tangent.cross(&frames[f1].normal).normalize();
            let n2 = (-tangent).cross(&frames[f2].normal).normalize();
            edges.push(EdgeRecord {
                vertices: [a, b],
                faces: [f1, f2],
                local_edge: [i1, i2],
                length,
                tangent,
                conormals: [n1, n2],
            });
        }
        let h = frames.iter().map(|f| f.diameter).fold(0.0, f64::max);
        let mut mesh = SurfaceMesh {
            vertices,
            faces,
            frames,
            edges,
            face_edges,
            vertex_faces,
            anchors: Vec::new(),
            h,
        };
        mesh.assign_anchors();
        Ok(mesh)
    }

    /// Anchor of every vertex: the incident face with the smallest index.
    pub fn assign_anchors(&mut self) {
        self.anchors = self.vertex_faces.iter().map(|fs| *fs.iter().min().expect("incident face")).collect();
    }

    /// Replaces the anchor faces; each must be incident to its vertex.
    pub fn with_anchors(mut self, anchors: Vec<usize>) -> Result<Self, MeshError> {
        if anchors.len() != self.vertices.len() {
            return Err(MeshError::InvalidParameters("one anchor per vertex required".into()));
        }
        for (v, &k) in anchors.iter().enumerate() {
            if !self.vertex_faces[v].contains(&k) {
                return Err(MeshError::InvalidParameters(format!("face {k} is not incident to vertex {v}")));
            }
        }
        self.anchors = anchors;
        Ok(self)
    }

    /// Same surface with faces listed in the order `perm` (new face `k` is old
    /// face `perm[k]`).
    pub fn with_face_order(&self, perm: &[usize]) -> Result<Self, MeshError> {
        let mut seen = vec![false; self.faces.len()];
        if perm.len() != self.faces.len() || perm.iter().any(|&p| p >= seen.len() || std::mem::replace(&mut seen[p], true)) {
            return Err(MeshError::InvalidParameters("not a permutation of the faces".into()));
        }
        Self::from_parts(self.vertices.clone(), perm.iter().map(|&p| self.faces[p]).collect())
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn frames(&self) -> &[FaceFrame] {
        &self.frames
    }

    pub fn frame(&self, face: usize) -> &FaceFrame {
        &self.frames[face]
    }

    pub fn edges(&self) -> &[EdgeRecord] {
        &self.edges
    }

    /// Edge index of each local edge of each face.
    pub fn face_edges(&self) -> &[[usize; 3]] {
        &self.face_edges
    }

    pub fn vertex_faces(&self, v: usize) -> &[usize] {
        &self.vertex_faces[v]
    }

    pub fn anchors(&self) -> &[usize] {
        &self.anchors
    }

    pub fn anchor(&self, v: usize) -> usize {
        self.anchors[v]
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Maximal face diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn min_diameter(&self) -> f64 {
        self.frames.iter().map(|f| f.diameter).fold(f64::INFINITY, f64::min)
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges.len() as i64 + self.faces.len() as i64
    }

    pub fn area(&self) -> f64 {
        self.frames.iter().map(|f| f.area).sum()
    }

    pub fn centroid(&self, face: usize) -> Vec3 {
        let [a, b, c] = self.faces[face];
        (self.vertices[a] + self.vertices[b] + self.vertices[c]) / 3.0
    }

    /// Local position of vertex `v` in face `face`.
    pub fn local_index(&self, face: usize, v: usize) -> Option<usize> {
        self.faces[face].iter().position(|&w| w == v)
    }

    pub fn max_vertex_distance(&self, surface: &SurfaceModel) -> Result<f64, MeshError> {
        let mut worst: f64 = 0.0;
        for v in &self.vertices {
            worst = worst.max(probe(surface, v)?.distance.abs());
        }
        Ok(worst)
    }

    /// Largest `|d|` over edge midpoints before projection.
    pub fn max_midpoint_distance(&self, surface: &SurfaceModel) -> Result<f64, MeshError> {
        let mut worst: f64 = 0.0;
        for e in &self.edges {
            let m = (self.vertices[e.vertices[0]] + self.vertices[e.vertices[1]]) * 0.5;
            worst = worst.max(probe(surface, &m)?.distance.abs());
        }
        Ok(worst)
    }

    /// Splits every face into four at projected edge midpoints. New vertex
    /// `V + e` sits on edge `e`.
    pub fn refine(&self, surface: &SurfaceModel) -> Result<Self, MeshError> {
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.reserve(self.edges.len());
        for e in &self.edges {
            let m = (self.vertices[e.vertices[0]] + self.vertices[e.vertices[1]]) * 0.5;
            vertices.push(probe(surface, &m)?.projection);
        }
        let mut faces = Vec::with_capacity(4 * self.faces.len());
        for (f, &[a, b, c]) in self.faces.iter().enumerate() {
            let fe = self.face_edges[f];
            // local edge 2 joins a-b, 0 joins b-c, 1 joins c-a
            let (mab, mbc, mca) = (nv + fe[2], nv + fe[0], nv + fe[1]);
            faces.push([a, mab, mca]);
            faces.push([mab, b, mbc]);
            faces.push([mca, mbc, c]);
            faces.push([mab, mbc, mca]);
        }
        Self::from_parts(vertices, faces)
    }

    pub fn to_off(&self) -> OffDocument {
        OffDocument {
            vertices: self.vertices.iter().map(|v| [v.x, v.y, v.z]).collect(),
            faces: self.faces.clone(),
        }
    }
}

fn probe(surface: &SurfaceModel, x: &Vec3) -> Result<crate::geometry::GeometryProbe, MeshError> {
    surface.probe(x).map_err(|source| MeshError::ProjectionFailure {
        point: [x.x, x.y, x.z],
        source,
    })
}

/// Icosahedron with two vertices on the y axis, projected onto `surface` and
/// refined `level` times.
pub fn make_icosphere(surface: &SurfaceModel, level: usize) -> Result<SurfaceMesh, MeshError> {
    if level > 8 {
        return Err(MeshError::InvalidParameters(format!("icosphere level {level} exceeds 8")));
    }
    // poles on the y axis, pentagonal rings at y = ±1/√5
    let ring_y = 1.0 / 5f64.sqrt();
    let ring_r = 2.0 * ring_y;
    let mut raw = vec![Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, -1.0, 0.0)];
    for k in 0..5 {
        let a = 2.0 * PI * k as f64 / 5.0;
        raw.push(Vec3::new(ring_r * a.sin(), ring_y, ring_r * a.cos()));
        let b = a + PI / 5.0;
        raw.push(Vec3::new(ring_r * b.sin(), -ring_y, ring_r * b.cos()));
    }
    // faces are the triples of mutually adjacent vertices
    let edge = (raw[0] - raw[2]).norm();
    let adjacent = |i: usize, j: usize| ((raw[i] - raw[j]).norm() - edge).abs() < 1e-9;
    let mut faces = Vec::with_capacity(20);
    for i in 0..12 {
        for j in i + 1..12 {
            for k in j + 1..12 {
                if adjacent(i, j) && adjacent(j, k) && adjacent(i, k) {
                    let n = (raw[j] - raw[i]).cross(&(raw[k] - raw[i]));
                    faces.push(if n.dot(&raw[i]) > 0.0 { [i, j, k] } else { [i, k, j] });
                }
            }
        }
    }
    let scale = surface.scale();
    let mut vertices = Vec::with_capacity(12);
    for v in &raw {
        vertices.push(probe(surface, &(v.normalize() * scale))?.projection);
    }
    let mut mesh = SurfaceMesh::from_parts(vertices, faces)?;
    for _ in 0..level {
        mesh = mesh.refine(surface)?;
    }
    Ok(mesh)
}

/// Structured `(θ, φ)` grid on a torus; each quad `(i, j)` is split along
/// the diagonal from `(i, j)` to `(i + 1, j + 1)`.
pub fn make_torus_mesh(surface: &SurfaceModel, n_theta: usize, n_phi: usize) -> Result<SurfaceMesh, MeshError> {
    let &SurfaceModel::Torus { major, minor } = surface else {
        return Err(MeshError::InvalidParameters("torus mesh requires a torus surface".into()));
    };
    if n_theta < 3 || n_phi < 3 {
        return Err(MeshError::InvalidParameters(format!(
            "torus grid needs at least 3x3 cells, got {n_theta}x{n_phi}"
        )));
    }
    let mut vertices = Vec::with_capacity(n_theta * n_phi);
    for i in 0..n_theta {
        let theta = 2.0 * PI * i as f64 / n_theta as f64;
        for j in 0..n_phi {
            let phi = 2.0 * PI * j as f64 / n_phi as f64;
            let w = major + minor * theta.cos();
            vertices.push(Vec3::new(w * phi.cos(), w * phi.sin(), minor * theta.sin()));
        }
    }
    let id = |i: usize, j: usize| (i % n_theta) * n_phi + (j % n_phi);
    let mut faces = Vec::with_capacity(2 * n_theta * n_phi);
    for i in 0..n_theta {
        for j in 0..n_phi {
            let (v00, v01, v10, v11) = (id(i, j), id(i, j + 1), id(i + 1, j), id(i + 1, j + 1));
            faces.push([v00, v01, v11]);
            faces.push([v00, v11, v10]);
        }
    }
    SurfaceMesh::from_parts(vertices, faces)
}

/// Imports an OFF mesh, projecting its vertices onto `surface` and turning
/// every face outward.
pub fn load_off(text: &str, surface: &SurfaceModel) -> Result<SurfaceMesh, MeshError> {
    let doc = parse_off(text)?;
    let mut vertices = Vec::with_capacity(doc.vertices.len());
    for v in &doc.vertices {
        vertices.push(probe(surface, &Vec3::from(*v))?.projection);
    }
    let mut faces = doc.faces;
    for f in faces.iter_mut() {
        let [a, b, c] = f.map(|v| vertices[v]);
        let n = (b - a).cross(&(c - a));
        let outward = probe(surface, &((a + b + c) / 3.0))?.normal;
        if n.dot(&outward) < 0.0 {
            f.swap(1, 2);
        }
    }
    SurfaceMesh::from_parts(vertices, faces)
}

pub fn load_off_file(path: &std::path::Path, surface: &SurfaceModel) -> Result<SurfaceMesh, MeshError> {
    let text = std::fs::read_to_string(path).map_err(|e| MeshError::ParseError(FormatError::Io(e)))?;
    load_off(&text, surface)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_sphere() -> SurfaceModel {
        SurfaceModel::sphere(1.0).unwrap()
    }

    fn torus() -> SurfaceModel {
        SurfaceModel::torus(1.0, 0.6).unwrap()
    }

    const OCTAHEDRON: &str = "OFF\n6 8 12\n1.5 0 0\n-1.5 0 0\n0 1.5 0\n0 -1.5 0\n0 0 1.5\n0 0 -1.5\n\
        3 0 2 4\n3 2 1 4\n3 1 3 4\n3 3 0 4\n3 2 0 5\n3 1 2 5\n3 3 1 5\n3 0 3 5\n";

    #[test]
    fn icosahedron_counts() {
        let m = make_icosphere(&unit_sphere(), 0).unwrap();
        assert_eq!((m.n_vertices(), m.n_faces(), m.n_edges()), (12, 20, 30));
        assert_eq!(m.euler_characteristic(), 2);
        for f in 0..m.n_faces() {
            assert!(m.frame(f).normal.dot(&m.centroid(f)) > 0.0);
        }
    }

    #[test]
    fn icosphere_vertex_counts() {
        let s = unit_sphere();
        let mut m = make_icosphere(&s, 0).unwrap();
        for level in 1..=3 {
            m = m.refine(&s).unwrap();
            assert_eq!(m.n_vertices(), 10 * 4usize.pow(level) + 2);
            assert_eq!(m.euler_characteristic(), 2);
        }
        assert!(m.max_vertex_distance(&s).unwrap() <= 1e-14);
        assert_eq!(make_icosphere(&s, 2).unwrap().n_vertices() * 3, 486);
        assert!(make_icosphere(&s, 9).is_err());
    }

    #[test]
    fn torus_counts_and_orientation() {
        let t = torus();
        let m = make_torus_mesh(&t, 3, 3).unwrap();
        assert_eq!((m.n_vertices(), m.n_faces(), m.n_edges()), (9, 18, 27));
        assert_eq!(m.euler_characteristic(), 0);
        let m = make_torus_mesh(&t, 16, 32).unwrap();
        assert_eq!(m.n_vertices(), 512);
        for f in 0..m.n_faces() {
            let c = m.centroid(f);
            assert!(m.frame(f).normal.dot(&t.probe(&c).unwrap().normal) > 0.9);
        }
        let r = m.refine(&t).unwrap();
        assert_eq!(3 * r.n_vertices(), 6144);
        assert_eq!(r.euler_characteristic(), 0);
        assert!(make_torus_mesh(&t, 2, 5).is_err());
        assert!(make_torus_mesh(&unit_sphere(), 4, 4).is_err());
    }

    #[test]
    fn frames_and_conormals() {
        let m = make_icosphere(&unit_sphere(), 2).unwrap();
        for fr in m.frames() {
            assert!((fr.t1.norm() - 1.0).abs() < 1e-14 && (fr.t2.norm() - 1.0).abs() < 1e-14);
            assert!(fr.t1.dot(&fr.t2).abs() < 1e-14);
            assert!((fr.t1.cross(&fr.t2) - fr.normal).norm() < 1e-14);
        }
        for e in m.edges() {
            let mid = (m.vertices()[e.vertices[0]] + m.vertices()[e.vertices[1]]) * 0.5;
            for k in 0..2 {
                let n = e.conormals[k];
                let fr = m.frame(e.faces[k]);
                assert!((n.norm() - 1.0).abs() < 1e-14);
                assert!(n.dot(&fr.normal).abs() < 1e-14 && n.dot(&e.tangent).abs() < 1e-14);
                assert!(n.dot(&(mid - m.centroid(e.faces[k]))) > 0.0);
                let tri = m.faces()[e.faces[k]];
                let le = e.local_edge[k];
                let ends = [tri[(le + 1) % 3], tri[(le + 2) % 3]];
                assert!(ends.contains(&e.vertices[0]) && ends.contains(&e.vertices[1]));
                assert_eq!(m.face_edges()[e.faces[k]][le], m.edges().iter().position(|x| x == e).unwrap());
            }
            assert!((e.conormals[0] + e.conormals[1]).norm() > 0.0);
        }
    }

    #[test]
    fn conormal_mismatch_decreases_with_h() {
        let s = unit_sphere();
        let mut m = make_icosphere(&s, 1).unwrap();
        let mismatch = |m: &SurfaceMesh| m.edges().iter().map(|e| (e.conormals[0] + e.conormals[1]).norm()).fold(0.0, f64::max);
        let mut prev = mismatch(&m);
        for _ in 0..3 {
            m = m.refine(&s).unwrap();
            let cur = mismatch(&m);
            let ratio = prev / cur;
            assert!(ratio > 1.7 && ratio < 2.3, "{ratio}");
            assert!(cur <= m.h());
            prev = cur;
        }
    }

    #[test]
    fn refinement_halves_h_and_stays_quasi_uniform() {
        let s = unit_sphere();
        let mut m = make_icosphere(&s, 1).unwrap();
        for _ in 0..3 {
            let r = m.refine(&s).unwrap();
            let ratio = r.h() / m.h();
            assert!((0.45..=0.55).contains(&ratio), "{ratio}");
            assert!(r.h() / r.min_diameter() <= 3.0);
            m = r;
        }
        let t = torus();
        let mut m = make_torus_mesh(&t, 16, 32).unwrap();
        let mut prev = m.max_midpoint_distance(&t).unwrap();
        for _ in 0..2 {
            m = m.refine(&t).unwrap();
            assert!(m.h() / m.min_diameter() <= 3.0);
            let cur = m.max_midpoint_distance(&t).unwrap();
            let ratio = prev / cur;
            assert!(ratio > 3.5 && ratio < 4.5, "{ratio}");
            prev = cur;
        }
    }

    #[test]
    fn anchors_are_minimal_incident_faces() {
        let mut m = make_icosphere(&unit_sphere(), 0).unwrap();
        let first = m.anchors().to_vec();
        for v in 0..m.n_vertices() {
            let k = m.anchor(v);
            assert!(m.faces()[k].contains(&v));
            let min = (0..m.n_faces()).find(|&f| m.faces()[f].contains(&v)).unwrap();
            assert_eq!(k, min);
        }
        m.assign_anchors();
        assert_eq!(m.anchors(), &first[..]);
        let bad = m.clone().with_anchors(vec![0; 12]);
        assert!(bad.is_err());
    }

    #[test]
    fn face_permutation() {
        let m = make_icosphere(&unit_sphere(), 1).unwrap();
        let perm: Vec<usize> = (0..m.n_faces()).rev().collect();
        let p = m.with_face_order(&perm).unwrap();
        assert_eq!(p.n_edges(), m.n_edges());
        assert!(m.with_face_order(&[0, 0]).is_err());
    }

    #[test]
    fn octahedron_import() {
        let s = unit_sphere();
        let m = load_off(OCTAHEDRON, &s).unwrap();
        assert_eq!(m.n_vertices(), 6);
        assert_eq!(m.euler_characteristic(), 2);
        assert!(m.max_vertex_distance(&s).unwrap() < 1e-15);
        for f in 0..m.n_faces() {
            assert!(m.frame(f).normal.dot(&m.centroid(f)) > 0.0);
        }
        // inward-oriented input is flipped
        let flipped = OCTAHEDRON.replace("3 0 2 4", "3 0 4 2");
        let m2 = load_off(&flipped, &s).unwrap();
        assert_eq!(m2.n_faces(), 8);
    }

    #[test]
    fn open_surface_rejected() {
        let open = "OFF\n6 7 0\n1.5 0 0\n-1.5 0 0\n0 1.5 0\n0 -1.5 0\n0 0 1.5\n0 0 -1.5\n\
            3 0 2 4\n3 2 1 4\n3 1 3 4\n3 3 0 4\n3 2 0 5\n3 1 2 5\n3 3 1 5\n";
        assert!(matches!(load_off(open, &unit_sphere()), Err(MeshError::NonManifold(..))));
        let quad = "OFF\n4 1 0\n1 0 0\n0 1 0\n-1 0 0\n0 -1 0\n4 0 1 2 3\n";
        assert!(matches!(load_off(quad, &unit_sphere()), Err(MeshError::NonTriangular { .. })));
        let far = OCTAHEDRON.replace("0 0 -1.5", "0 0 0");
        assert!(matches!(load_off(&far, &unit_sphere()), Err(MeshError::ProjectionFailure { .. })));
    }

    #[test]
    fn inconsistent_orientation_detected() {
        let v = vec![Vec3::x(), Vec3::y(), Vec3::z(), -Vec3::x()];
        let r = SurfaceMesh::from_parts(v, vec![[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]]);
        assert!(matches!(r, Err(MeshError::InconsistentOrientation(..))));
    }
}
