//! Global system for `a_h(w, v) = Σ_K ∫ Δw Δv + Σ_e h_e⁻¹ ∫_e [∇w·n][∇v·n]`
//! and the mean-corrected load vector.

use nalgebra::SMatrix;
use thiserror::Error;

use crate::geometry::{GeometryError, Vec3};
use crate::mesh::SurfaceMesh;
use crate::nzt_element::{ElementError, LocalMatrix, LocalVector, MonomialTable, ShapeBasis, N_LOCAL};
use crate::piola_dofs::{DofError, DofSystem};
use crate::quadrature::{edge_gauss4, triangle_degree6, TriangleRule};
use crate::sparse::CsrMatrix;
use crate::surface_calculus::ManufacturedCase;

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("element construction failed on face {face}: {source}")]
    Element { face: usize, source: ElementError },
    #[error(transparent)]
    Dof(#[from] DofError),
    #[error("source evaluation failed at {point:?}: {source}")]
    Geometry { point: [f64; 3], source: GeometryError },
}

pub type EdgeMatrix = SMatrix<f64, 18, 18>;

#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub a: CsrMatrix,
    pub b: Vec<f64>,
    /// `m_i = ∫_{Γ_h} Φ_i`
    pub m: Vec<f64>,
    pub kernel: Vec<f64>,
    /// `|Γ_h|`
    pub area: f64,
    /// `∫_{Γ_h} f^e` before the mean correction.
    pub load_integral: f64,
}

/// Which parts of `a_h` to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Terms {
    pub volume: bool,
    pub jump: bool,
}

impl Terms {
    pub const ALL: Terms = Terms { volume: true, jump: true };
}

pub fn face_bases(mesh: &SurfaceMesh) -> Result<Vec<ShapeBasis>, AssemblyError> {
    mesh.frames()
        .iter()
        .enumerate()
        .map(|(face, fr)| ShapeBasis::build(fr.local).map_err(|source| AssemblyError::Element { face, source }))
        .collect()
}

/// Monomial tables at the points of a rule.
pub fn rule_tables(rule: &TriangleRule) -> Vec<MonomialTable> {
    rule.points.iter().map(MonomialTable::at).collect()
}

/// `S_ij = ∫_K ΔN_i ΔN_j` in face-frame DoFs.
pub fn element_stiffness(basis: &ShapeBasis, rule: &TriangleRule) -> LocalMatrix {
    let mut s = LocalMatrix::zeros();
    for (l, w) in rule.points.iter().zip(&rule.weights) {
        let v = basis.eval(l);
        let lap = LocalVector::from_column_slice(&v.lap);
        s += lap * lap.transpose() * (w * basis.area);
    }
    s
}

/// Barycentric coordinates in face `faces[k]` of the point `(1 − t) a + t b`
/// of edge `(a, b)`.
pub fn edge_point_barycentric(mesh: &SurfaceMesh, edge: usize, k: usize, t: f64) -> [f64; 3] {
    let e = &mesh.edges()[edge];
    let le = e.local_edge[k];
    let tri = mesh.faces()[e.faces[k]];
    let mut l = [0.0; 3];
    let ia = (le + 1) % 3;
    let ib = (le + 2) % 3;
    debug_assert!(tri[ia] == e.vertices[0] || tri[ia] == e.vertices[1]);
    if tri[ia] == e.vertices[0] {
        l[ia] = 1.0 - t;
        l[ib] = t;
    } else {
        l[ia] = t;
        l[ib] = 1.0 - t;
    }
    l
}

/// Conormal derivative of the 9 local basis functions of `faces[k]` at an
/// edge parameter.
pub fn conormal_derivatives(mesh: &SurfaceMesh, bases: &[ShapeBasis], edge: usize, k: usize, t: f64) -> [f64; N_LOCAL] {
    let e = &mesh.edges()[edge];
    let f = e.faces[k];
    let n = mesh.frame(f).to_local(&e.conormals[k]);
    let v = bases[f].eval(&edge_point_barycentric(mesh, edge, k, t));
    std::array::from_fn(|j| v.grad[j][0] * n[0] + v.grad[j][1] * n[1])
}

/// `h_e⁻¹ ∫_e J(Φ_i) J(Φ_j)` over the face-frame DoFs of `K1` then `K2`,
/// with `J(v) = ∇v|_{K1}·n1 + ∇v|_{K2}·n2`.
pub fn edge_stabilization(mesh: &SurfaceMesh, bases: &[ShapeBasis], edge: usize) -> EdgeMatrix {
    let rule = edge_gauss4();
    let mut m = EdgeMatrix::zeros();
    for (t, w) in rule.points.iter().zip(&rule.weights) {
        let j1 = conormal_derivatives(mesh, bases, edge, 0, *t);
        let j2 = conormal_derivatives(mesh, bases, edge, 1, *t);
        let j = SMatrix::<f64, 18, 1>::from_fn(|i, _| if i < 9 { j1[i] } else { j2[i - 9] });
        // h_e⁻¹ ∫_e = Σ_q w_q (weights are relative to the length)
        m += j * j.transpose() * *w;
    }
    m
}

/// Self-inclusive sorted neighbour lists: vertices sharing a face or lying
/// opposite each other across an edge.
pub fn vertex_neighbors(mesh: &SurfaceMesh) -> Vec<Vec<usize>> {
    let mut nb: Vec<Vec<usize>> = (0..mesh.n_vertices()).map(|v| vec![v]).collect();
    for tri in mesh.faces() {
        for &a in tri {
            for &b in tri {
                nb[a].push(b);
            }
        }
    }
    for e in mesh.edges() {
        let opp = [0, 1].map(|k| mesh.faces()[e.faces[k]][e.local_edge[k]]);
        nb[opp[0]].push(opp[1]);
        nb[opp[1]].push(opp[0]);
    }
    for l in nb.iter_mut() {
        l.sort_unstable();
        l.dedup();
    }
    nb
}

fn add_outer(a: &mut CsrMatrix, idx: &[usize], g: &[f64], w: f64) {
    // w·(g_p g_q) keeps (i, j) and (j, i) bitwise equal
    for (p, &i) in idx.iter().enumerate() {
        for (q, &j) in idx.iter().enumerate() {
            a.add(i, j, w * (g[p] * g[q]));
        }
    }
}

/// Transposed transfer applied to a local vector: global-DoF weights of a
/// local functional.
fn transfer_transpose(dofs: &DofSystem, face: usize, local: &[f64; N_LOCAL]) -> [f64; N_LOCAL] {
    let mut out = *local;
    for k in 0..3 {
        let b = dofs.block(face, k);
        out[3 * k + 1] = b[(0, 0)] * local[3 * k + 1] + b[(1, 0)] * local[3 * k + 2];
        out[3 * k + 2] = b[(0, 1)] * local[3 * k + 1] + b[(1, 1)] * local[3 * k + 2];
    }
    out
}

pub fn assemble_matrix(mesh: &SurfaceMesh, dofs: &DofSystem, bases: &[ShapeBasis], terms: Terms) -> CsrMatrix {
    let mut a = CsrMatrix::from_vertex_pattern(&vertex_neighbors(mesh));
    if terms.volume {
        let rule = triangle_degree6();
        let tables = rule_tables(rule);
        for f in 0..mesh.n_faces() {
            let idx = dofs.face_dofs(f);
            let basis = &bases[f];
            for (mt, w) in tables.iter().zip(&rule.weights) {
                let lap = transfer_transpose(dofs, f, &basis.eval_table(mt).lap);
                add_outer(&mut a, &idx, &lap, w * basis.area);
            }
        }
    }
    if terms.jump {
        let rule = edge_gauss4();
        for (ei, e) in mesh.edges().iter().enumerate() {
            let i1 = dofs.face_dofs(e.faces[0]);
            let i2 = dofs.face_dofs(e.faces[1]);
            // the two faces share 6 global DoFs; merge into 12 columns
            let mut idx: Vec<usize> = i1.iter().chain(i2.iter()).copied().collect();
            idx.sort_unstable();
            idx.dedup();
            for (t, w) in rule.points.iter().zip(&rule.weights) {
                let g1 = transfer_transpose(dofs, e.faces[0], &conormal_derivatives(mesh, bases, ei, 0, *t));
                let g2 = transfer_transpose(dofs, e.faces[1], &conormal_derivatives(mesh, bases, ei, 1, *t));
                let mut g = vec![0.0; idx.len()];
                for (p, &i) in i1.iter().enumerate() {
                    g[idx.binary_search(&i).unwrap()] += g1[p];
                }
                for (p, &i) in i2.iter().enumerate() {
                    g[idx.binary_search(&i).unwrap()] += g2[p];
                }
                add_outer(&mut a, &idx, &g, *w);
            }
        }
    }
    a
}

/// `(∫ f^e Φ_i, ∫ Φ_i, ∫ f^e)` with `f^e` evaluated at ambient quadrature
/// points of Γ_h.
pub fn assemble_load(
    mesh: &SurfaceMesh,
    dofs: &DofSystem,
    bases: &[ShapeBasis],
    f: &dyn Fn(&Vec3) -> Result<f64, GeometryError>,
) -> Result<(Vec<f64>, Vec<f64>, f64), AssemblyError> {
    let rule = triangle_degree6();
    let tables = rule_tables(rule);
    let n = dofs.n_dofs();
    let mut b = vec![0.0; n];
    let mut m = vec![0.0; n];
    let mut total = 0.0;
    for face in 0..mesh.n_faces() {
        let idx = dofs.face_dofs(face);
        let basis = &bases[face];
        let [pa, pb, pc] = mesh.faces()[face].map(|v| mesh.vertices()[v]);
        let mut bl = [0.0; N_LOCAL];
        let mut ml = [0.0; N_LOCAL];
        for ((l, mt), w) in rule.points.iter().zip(&tables).zip(&rule.weights) {
            let x = pa * l[0] + pb * l[1] + pc * l[2];
            let fx = f(&x).map_err(|source| AssemblyError::Geometry {
                point: [x.x, x.y, x.z],
                source,
            })?;
            let wa = w * basis.area;
            total += wa * fx;
            let v = basis.eval_table(mt);
            for j in 0..N_LOCAL {
                bl[j] += wa * fx * v.value[j];
                ml[j] += wa * v.value[j];
            }
        }
        let bg = transfer_transpose(dofs, face, &bl);
        let mg = transfer_transpose(dofs, face, &ml);
        for j in 0..N_LOCAL {
            b[idx[j]] += bg[j];
            m[idx[j]] += mg[j];
        }
    }
    Ok((b, m, total))
}

/// Full system for a manufactured case with `f^e(x) = f(p(x))`.
pub fn assemble(mesh: &SurfaceMesh, dofs: &DofSystem, case: &ManufacturedCase) -> Result<SparseSystem, AssemblyError> {
    let bases = face_bases(mesh)?;
    let surface = case.surface();
    let source = |x: &Vec3| -> Result<f64, GeometryError> {
        let p = surface.probe(x)?.projection;
        case.exact_source(&p)
    };
    assemble_with_source(mesh, dofs, &bases, &source)
}

pub fn assemble_with_source(
    mesh: &SurfaceMesh,
    dofs: &DofSystem,
    bases: &[ShapeBasis],
    source: &dyn Fn(&Vec3) -> Result<f64, GeometryError>,
) -> Result<SparseSystem, AssemblyError> {
    let a = assemble_matrix(mesh, dofs, bases, Terms::ALL);
    let (mut b, m, total) = assemble_load(mesh, dofs, bases, source)?;
    let area = mesh.area();
    let mean = total / area;
    for (bi, mi) in b.iter_mut().zip(&m) {
        *bi -= mean * mi;
    }
    Ok(SparseSystem {
        a,
        b,
        m,
        kernel: dofs.kernel(),
        area,
        load_integral: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SurfaceModel;
    use crate::mesh::make_icosphere;
    use crate::quadrature::triangle_degree8;
    use rand::{Rng, SeedableRng};

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    fn quadratic_dofs(basis: &ShapeBasis) -> LocalVector {
        let v = basis.triangle.map(|p| p[0] * p[0] + p[1] * p[1]);
        let g = basis.triangle.map(|p| [2.0 * p[0], 2.0 * p[1]]);
        ShapeBasis::dofs_from(v, g)
    }

    #[test]
    fn stiffness_of_constants_and_radial_quadratic() {
        let b = ShapeBasis::build([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let s = element_stiffness(&b, triangle_degree6());
        let one = ShapeBasis::dofs_from([1.0; 3], [[0.0; 2]; 3]);
        assert!((s * one).norm() < 1e-12);
        let q = quadratic_dofs(&b);
        assert!(((q.transpose() * s * q)[0] - 8.0).abs() < 1e-11);
        assert!((s - s.transpose()).norm() == 0.0);
        let s8 = element_stiffness(&b, triangle_degree8());
        assert!((s - s8).norm() <= 1e-13 * s.norm());
        let eig = s.symmetric_eigen().eigenvalues;
        assert!(eig.min() > -1e-10 * eig.max());
    }

    /// Square `[0,1]²` split on its diagonal over an apex below: the two top
    /// faces are coplanar.
    fn flat_patch() -> SurfaceMesh {
        SurfaceMesh::from_parts(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(0.5, 0.5, -1.0),
            ],
            vec![[0, 1, 2], [0, 2, 3], [0, 4, 1], [1, 4, 2], [2, 4, 3], [3, 4, 0]],
        )
        .unwrap()
    }

    fn local_dofs_of(mesh: &SurfaceMesh, face: usize, f: impl Fn(&Vec3) -> (f64, Vec3)) -> LocalVector {
        let fr = mesh.frame(face);
        let tri = mesh.faces()[face];
        let mut v = [0.0; 3];
        let mut g = [[0.0; 2]; 3];
        for k in 0..3 {
            let (val, grad) = f(&mesh.vertices()[tri[k]]);
            v[k] = val;
            g[k] = fr.to_local(&grad);
        }
        ShapeBasis::dofs_from(v, g)
    }

    #[test]
    fn flat_patch_annihilates_smooth_quadratic() {
        let mesh = flat_patch();
        let bases = face_bases(&mesh).unwrap();
        let diag = mesh.edges().iter().position(|e| e.faces.contains(&0) && e.faces.contains(&1)).unwrap();
        let e = &mesh.edges()[diag];
        assert!((e.conormals[0] + e.conormals[1]).norm() < 1e-15);
        let m = edge_stabilization(&mesh, &bases, diag);
        let q = |x: &Vec3| {
            (
                x.x * x.x - 0.5 * x.x * x.y + 2.0 * x.y * x.y + x.x,
                Vec3::new(2.0 * x.x - 0.5 * x.y + 1.0, -0.5 * x.x + 4.0 * x.y, 0.0),
            )
        };
        let d1 = local_dofs_of(&mesh, e.faces[0], q);
        let d2 = local_dofs_of(&mesh, e.faces[1], q);
        let x = SMatrix::<f64, 18, 1>::from_fn(|i, _| if i < 9 { d1[i] } else { d2[i - 9] });
        assert!((m * x).norm() < 1e-12);
        let one = SMatrix::<f64, 18, 1>::from_fn(|i, _| if i % 3 == 0 { 1.0 } else { 0.0 });
        assert!((m * one).norm() < 1e-13);
    }

    #[test]
    fn jump_energy_matches_per_edge_resummation() {
        let s = SurfaceModel::sphere(1.0).unwrap();
        let mesh = make_icosphere(&s, 2).unwrap();
        let dofs = DofSystem::new(&mesh).unwrap();
        let bases = face_bases(&mesh).unwrap();
        let a = assemble_matrix(&mesh, &dofs, &bases, Terms { volume: false, jump: true });
        let mut rng = rand::rngs::StdRng::seed_from_u64(21);
        let v: Vec<f64> = (0..dofs.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let energy = dot(&v, &a.matvec(&v));
        // independent: local coefficients, direct gradient evaluation, sum
        let rule = edge_gauss4();
        let mut direct = 0.0;
        for (ei, e) in mesh.edges().iter().enumerate() {
            let c = [0, 1].map(|k| dofs.local_coefficients(e.faces[k], &v));
            let mut int = 0.0;
            for (t, w) in rule.points.iter().zip(&rule.weights) {
                let mut jump = 0.0;
                for k in 0..2 {
                    let f = e.faces[k];
                    let (_, g, _) = bases[f].eval_combination(&c[k], &edge_point_barycentric(&mesh, ei, k, *t));
                    jump += mesh.frame(f).to_ambient(g).dot(&e.conormals[k]);
                }
                int += w * e.length * jump * jump;
            }
            direct += int / e.length;
        }
        assert!((energy - direct).abs() <= 1e-12 * direct.abs(), "{energy} vs {direct}");
    }

    #[test]
    fn assembled_system_invariants() {
        let case = ManufacturedCase::sphere();
        let mesh = make_icosphere(case.surface(), 2).unwrap();
        let dofs = DofSystem::new(&mesh).unwrap();
        let sys = assemble(&mesh, &dofs, &case).unwrap();
        assert_eq!(sys.a.n(), 486);
        assert!(sys.a.is_symmetric());
        let norm = sys.a.norm_inf();
        let ak = sys.a.matvec(&sys.kernel);
        assert!(ak.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= 1e-10 * norm);
        let bnorm = dot(&sys.b, &sys.b).sqrt();
        assert!(dot(&sys.kernel, &sys.b).abs() <= 1e-10 * bnorm);
        assert!((dot(&sys.m, &sys.kernel) - sys.area).abs() <= 1e-12 * sys.area);
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        for _ in 0..20 {
            let x: Vec<f64> = (0..486).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let q = dot(&x, &sys.a.matvec(&x));
            assert!(q >= -1e-10 * norm * dot(&x, &x));
        }
        let again = assemble(&mesh, &dofs, &case).unwrap();
        assert_eq!(again.a, sys.a);
        assert_eq!(again.b, sys.b);
    }

    #[test]
    fn zero_source_gives_zero_load() {
        let s = SurfaceModel::sphere(1.0).unwrap();
        let mesh = make_icosphere(&s, 0).unwrap();
        let dofs = DofSystem::new(&mesh).unwrap();
        let bases = face_bases(&mesh).unwrap();
        let sys = assemble_with_source(&mesh, &dofs, &bases, &|_| Ok(0.0)).unwrap();
        assert!(sys.b.iter().all(|&v| v == 0.0));
        // the matrix has only the constant null direction
        let eig = sys.a.to_dense().symmetric_eigen().eigenvalues;
        let mut e: Vec<f64> = eig.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        assert!(e[0].abs() < 1e-10 * e[35]);
        assert!(e[1] > 1e-6 * e[35]);
    }
}
