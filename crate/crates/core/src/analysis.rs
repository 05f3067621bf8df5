//! Interpolation, the continuous companion `Π_h^c`, discrete error
//! functionals and observed convergence orders.

use nalgebra::{Matrix2, Vector2};
use thiserror::Error;

use crate::assembly::{assemble_load, conormal_derivatives, edge_point_barycentric, AssemblyError};
use crate::geometry::{mu_h_from_probe, GeometryError, Mat3, SurfaceModel, Vec3};
use crate::mesh::SurfaceMesh;
use crate::nzt_element::{LocalVector, ShapeBasis, N_LOCAL};
use crate::piola_dofs::{surface_piola_pull, DofSystem};
use crate::quadrature::{edge_gauss4, triangle_degree6, triangle_degree8};
use crate::surface_calculus::ManufacturedCase;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("geometry evaluation failed at {point:?}: {source}")]
    Geometry { point: [f64; 3], source: GeometryError },
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

fn at(x: &Vec3) -> impl FnOnce(GeometryError) -> AnalysisError {
    let point = [x.x, x.y, x.z];
    move |source| AnalysisError::Geometry { point, source }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Ambient point of Γ_h at barycentric coordinates of a face.
fn face_point(mesh: &SurfaceMesh, face: usize, l: &[f64; 3]) -> Vec3 {
    let [a, b, c] = mesh.faces()[face].map(|v| mesh.vertices()[v]);
    a * l[0] + b * l[1] + c * l[2]
}

/// `m_i = ∫_{Γ_h} Φ_i`.
pub fn mass_vector(mesh: &SurfaceMesh, dofs: &DofSystem, bases: &[ShapeBasis]) -> Result<Vec<f64>, AnalysisError> {
    Ok(assemble_load(mesh, dofs, bases, &|_| Ok(0.0))?.1)
}

/// Removes the Γ_h mean of `v` along the constants.
pub fn subtract_mean(v: &mut [f64], m: &[f64], kernel: &[f64]) {
    let c = dot(m, v) / dot(m, kernel);
    for (vi, ki) in v.iter_mut().zip(kernel) {
        *vi -= c * ki;
    }
}

/// Coefficients of `Ĩ_h u` before mean removal: vertex values of `u` and the
/// anchor-frame components of the Piola pull of `∇_γ u`.
pub fn interpolate_raw(case: &ManufacturedCase, mesh: &SurfaceMesh, dofs: &DofSystem) -> Result<Vec<f64>, AnalysisError> {
    let mut c = vec![0.0; dofs.n_dofs()];
    for (v, x) in mesh.vertices().iter().enumerate() {
        let data = case.exact_data(x, false).map_err(at(x))?;
        let frame = dofs.anchor_frame(v);
        let pulled = surface_piola_pull(case.surface(), frame, &data.gradient, x).map_err(at(x))?;
        let g = frame.to_local(&pulled);
        c[DofSystem::value_dof(v)] = data.value;
        let [i, j] = DofSystem::gradient_dofs(v);
        c[i] = g[0];
        c[j] = g[1];
    }
    Ok(c)
}

/// `I_h u`: the interpolant with its Γ_h mean removed.
pub fn interpolate(
    case: &ManufacturedCase,
    mesh: &SurfaceMesh,
    dofs: &DofSystem,
    bases: &[ShapeBasis],
) -> Result<Vec<f64>, AnalysisError> {
    let mut c = interpolate_raw(case, mesh, dofs)?;
    subtract_mean(&mut c, &mass_vector(mesh, dofs, bases)?, &dofs.kernel());
    Ok(c)
}

/// Face-frame DoFs of `Π_h^c v` on every face. Vertex values are kept; at each
/// vertex of a face the derivatives along its two edges are replaced by their
/// averages over the faces sharing each edge, and the in-plane gradient is
/// recovered from those two directional derivatives.
pub fn conforming_relative(mesh: &SurfaceMesh, dofs: &DofSystem, v: &[f64]) -> Vec<LocalVector> {
    let local: Vec<LocalVector> = (0..mesh.n_faces()).map(|f| dofs.local_coefficients(f, v)).collect();
    let vertex_gradient = |face: usize, vertex: usize| -> Vec3 {
        let k = mesh.local_index(face, vertex).expect("vertex of face");
        mesh.frame(face).to_ambient([local[face][3 * k + 1], local[face][3 * k + 2]])
    };
    // averaged tangential derivative at both endpoints of every edge
    let edge_derivs: Vec<[f64; 2]> = mesh
        .edges()
        .iter()
        .map(|e| {
            e.vertices.map(|a| {
                0.5 * (vertex_gradient(e.faces[0], a).dot(&e.tangent) + vertex_gradient(e.faces[1], a).dot(&e.tangent))
            })
        })
        .collect();
    (0..mesh.n_faces())
        .map(|face| {
            let tri = mesh.faces()[face];
            let frame = mesh.frame(face);
            let mut out = local[face];
            for k in 0..3 {
                let mut rows = Matrix2::zeros();
                let mut rhs = Vector2::zeros();
                for (r, le) in [(k + 1) % 3, (k + 2) % 3].into_iter().enumerate() {
                    let eid = mesh.face_edges()[face][le];
                    let e = &mesh.edges()[eid];
                    let end = if e.vertices[0] == tri[k] { 0 } else { 1 };
                    let t = frame.to_local(&e.tangent);
                    rows[(r, 0)] = t[0];
                    rows[(r, 1)] = t[1];
                    rhs[r] = edge_derivs[eid][end];
                }
                let g = rows.lu().solve(&rhs).expect("edges of a face span its plane");
                out[3 * k + 1] = g[0];
                out[3 * k + 2] = g[1];
            }
            out
        })
        .collect()
}

/// Largest value mismatch of a per-face field across edges, sampled at
/// interior Gauss points and the endpoints.
pub fn max_edge_mismatch(mesh: &SurfaceMesh, bases: &[ShapeBasis], fields: &[LocalVector]) -> f64 {
    let mut samples = vec![0.0, 1.0];
    samples.extend(&edge_gauss4().points);
    let mut worst: f64 = 0.0;
    for (eid, e) in mesh.edges().iter().enumerate() {
        for &t in &samples {
            let v = |k: usize| {
                let f = e.faces[k];
                bases[f].eval_combination(&fields[f], &edge_point_barycentric(mesh, eid, k, t)).0
            };
            worst = worst.max((v(0) - v(1)).abs());
        }
    }
    worst
}

/// `‖w‖_{L²(Γ_h)}` of a per-face field.
pub fn l2_norm_local(mesh: &SurfaceMesh, bases: &[ShapeBasis], fields: &[LocalVector]) -> f64 {
    let rule = triangle_degree8();
    let mut s = 0.0;
    for face in 0..mesh.n_faces() {
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let v = bases[face].eval_combination(&fields[face], l).0;
            s += w * bases[face].area * v * v;
        }
    }
    s.sqrt()
}

/// `‖v‖_{L²}` and `|v|_{H¹_h}` of a global coefficient vector.
pub fn discrete_norms(mesh: &SurfaceMesh, dofs: &DofSystem, bases: &[ShapeBasis], v: &[f64]) -> (f64, f64) {
    let rule = triangle_degree8();
    let (mut l2, mut h1) = (0.0, 0.0);
    for face in 0..mesh.n_faces() {
        let c = dofs.local_coefficients(face, v);
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let (val, g, _) = bases[face].eval_combination(&c, l);
            let wa = w * bases[face].area;
            l2 += wa * val * val;
            h1 += wa * (g[0] * g[0] + g[1] * g[1]);
        }
    }
    (l2.sqrt(), h1.sqrt())
}

/// Which exact gradient `E1` compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientError {
    /// `∇_{Γ_h} u^e = P_h (P − dH) (∇_γ u)^e`
    Full,
    /// `P_h (∇_γ u)^e`, free of curvature.
    Projected,
}

impl GradientError {
    /// Curvature-free comparison on level-set surfaces.
    pub fn for_surface(surface: &SurfaceModel) -> Self {
        if surface.is_level_set() {
            GradientError::Projected
        } else {
            GradientError::Full
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            GradientError::Full => "E1",
            GradientError::Projected => "E1star",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub dofs: usize,
    pub h: f64,
    pub e0: f64,
    pub e1: f64,
    pub e_delta: f64,
    /// Square root of `Σ_e h_e⁻¹ ‖[∇_{Γ_h} u_h · n]‖²`.
    pub e_jump: f64,
}

impl ErrorRow {
    pub fn values(&self) -> [f64; 4] {
        [self.e0, self.e1, self.e_delta, self.e_jump]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderRow {
    pub orders: [f64; 4],
    /// `h_{k+1} / h_k`; the orders assume exactly one half.
    pub h_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub gradient: GradientError,
    pub rows: Vec<ErrorRow>,
}

impl ErrorReport {
    pub fn new(gradient: GradientError) -> Self {
        ErrorReport {
            gradient,
            rows: Vec::new(),
        }
    }

    /// Orders between consecutive rows.
    pub fn orders(&self) -> Vec<OrderRow> {
        self.rows
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0].values(), w[1].values());
                OrderRow {
                    orders: std::array::from_fn(|i| convergence_order(a[i], b[i])),
                    h_ratio: w[1].h / w[0].h,
                }
            })
            .collect()
    }
}

/// `log₂(coarse / fine)`.
pub fn convergence_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// Orders of a column of errors on successive uniform refinements.
pub fn convergence_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| convergence_order(w[0], w[1])).collect()
}

/// Discrete errors of `u_h` against the exact solution of `case`.
pub fn compute_errors(
    case: &ManufacturedCase,
    mesh: &SurfaceMesh,
    dofs: &DofSystem,
    bases: &[ShapeBasis],
    u_h: &[f64],
    gradient: GradientError,
) -> Result<ErrorRow, AnalysisError> {
    let surface = case.surface();
    let rule = triangle_degree8();
    let (mut e0, mut e1, mut ed) = (0.0, 0.0, 0.0);
    for face in 0..mesh.n_faces() {
        let basis = &bases[face];
        let frame = mesh.frame(face);
        let c = dofs.local_coefficients(face, u_h);
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let x = face_point(mesh, face, l);
            let probe = surface.probe(&x).map_err(at(&x))?;
            let data = case.exact_data(&probe.projection, false).map_err(at(&x))?;
            let g_exact = match gradient {
                GradientError::Full => probe.projection_jacobian() * data.gradient,
                GradientError::Projected => data.gradient,
            };
            let ge = frame.to_local(&g_exact);
            let (v, g, lap) = basis.eval_combination(&c, l);
            let wa = w * basis.area;
            e0 += wa * (data.value - v).powi(2);
            e1 += wa * ((ge[0] - g[0]).powi(2) + (ge[1] - g[1]).powi(2));
            ed += wa * (data.laplacian - lap).powi(2);
        }
    }
    Ok(ErrorRow {
        dofs: dofs.n_dofs(),
        h: mesh.h(),
        e0: e0.sqrt(),
        e1: e1.sqrt(),
        e_delta: ed.sqrt(),
        e_jump: jump_seminorm(mesh, dofs, bases, u_h),
    })
}

/// `(Σ_e h_e⁻¹ ‖[∇_{Γ_h} v · n]‖²_{L²(e)})^{1/2}`.
pub fn jump_seminorm(mesh: &SurfaceMesh, dofs: &DofSystem, bases: &[ShapeBasis], v: &[f64]) -> f64 {
    let rule = edge_gauss4();
    let local: Vec<LocalVector> = (0..mesh.n_faces()).map(|f| dofs.local_coefficients(f, v)).collect();
    let mut s = 0.0;
    for (eid, e) in mesh.edges().iter().enumerate() {
        for (t, w) in rule.points.iter().zip(&rule.weights) {
            let mut j = 0.0;
            for k in 0..2 {
                let d = conormal_derivatives(mesh, bases, eid, k, *t);
                j += (0..N_LOCAL).map(|i| d[i] * local[e.faces[k]][i]).sum::<f64>();
            }
            s += w * j * j;
        }
    }
    s.sqrt()
}

/// `max_e |e|⁻¹ |∫_e [∇_{Γ_h} v · n] ds|`, which vanishes for every discrete `v`.
pub fn jump_mean_defect(mesh: &SurfaceMesh, dofs: &DofSystem, bases: &[ShapeBasis], v: &[f64]) -> f64 {
    let rule = edge_gauss4();
    let local: Vec<LocalVector> = (0..mesh.n_faces()).map(|f| dofs.local_coefficients(f, v)).collect();
    let mut worst: f64 = 0.0;
    for (eid, e) in mesh.edges().iter().enumerate() {
        let mut mean = 0.0;
        for (t, w) in rule.points.iter().zip(&rule.weights) {
            for k in 0..2 {
                let d = conormal_derivatives(mesh, bases, eid, k, *t);
                mean += w * (0..N_LOCAL).map(|i| d[i] * local[e.faces[k]][i]).sum::<f64>();
            }
        }
        worst = worst.max(mean.abs());
    }
    worst
}

/// Worst pointwise geometric discrepancies over the faces of a mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryDiscrepancy {
    /// `max |1 − μ_h|`
    pub measure: f64,
    /// `max |ν∘p − ν_h|`
    pub normal: f64,
    /// `max |∇_{Γ_h}(u∘p) − pull(∇_γ u)|` for the case solution.
    pub piola: f64,
}

pub fn geometry_discrepancy(case: &ManufacturedCase, mesh: &SurfaceMesh) -> Result<GeometryDiscrepancy, AnalysisError> {
    let surface = case.surface();
    let rule = triangle_degree6();
    let mut out = GeometryDiscrepancy {
        measure: 0.0,
        normal: 0.0,
        piola: 0.0,
    };
    for face in 0..mesh.n_faces() {
        let frame = mesh.frame(face);
        let ph: Mat3 = Mat3::identity() - frame.normal * frame.normal.transpose();
        for l in &rule.points {
            let x = face_point(mesh, face, l);
            let probe = surface.probe(&x).map_err(at(&x))?;
            let g = case.exact_tangential_gradient(&probe.projection).map_err(at(&x))?;
            let grad_ext = ph * probe.projection_jacobian() * g;
            let pulled = surface_piola_pull(surface, frame, &g, &x).map_err(at(&x))?;
            out.measure = out.measure.max((1.0 - mu_h_from_probe(&probe, &frame.t1, &frame.t2)).abs());
            out.normal = out.normal.max((probe.normal - frame.normal).norm());
            out.piola = out.piola.max((grad_ext - pulled).norm());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::face_bases;
    use crate::mesh::{make_icosphere, SurfaceMesh};
    use rand::{Rng, SeedableRng};

    struct Level {
        mesh: SurfaceMesh,
        dofs: DofSystem,
        bases: Vec<ShapeBasis>,
    }

    fn sphere_level(case: &ManufacturedCase, level: usize) -> Level {
        let mesh = make_icosphere(case.surface(), level).unwrap();
        let dofs = DofSystem::new(&mesh).unwrap();
        let bases = face_bases(&mesh).unwrap();
        Level { mesh, dofs, bases }
    }

    #[test]
    fn orders_of_halving_and_quartering() {
        assert_eq!(convergence_orders(&[1.0, 0.5, 0.25]), vec![1.0, 1.0]);
        assert!((convergence_order(1.91e-2, 4.78e-3) - 2.00).abs() < 5e-3);
        assert!((convergence_order(2.15e1, 1.13e1) - 0.93).abs() < 5e-3);
        let mut r = ErrorReport::new(GradientError::Full);
        for (k, e) in [1.0, 0.25].into_iter().enumerate() {
            r.rows.push(ErrorRow {
                dofs: 3 << (2 * k),
                h: 0.5f64.powi(k as i32),
                e0: e,
                e1: e,
                e_delta: e.sqrt(),
                e_jump: e.sqrt(),
            });
        }
        let o = r.orders();
        assert_eq!(o.len(), 1);
        assert_eq!(o[0].orders, [2.0, 2.0, 1.0, 1.0]);
        assert_eq!(o[0].h_ratio, 0.5);
    }

    #[test]
    fn constants_interpolate_to_zero() {
        let case = ManufacturedCase::sphere();
        let lv = sphere_level(&case, 1);
        let m = mass_vector(&lv.mesh, &lv.dofs, &lv.bases).unwrap();
        let mut c = lv.dofs.kernel();
        c.iter_mut().for_each(|v| *v *= 3.5);
        subtract_mean(&mut c, &m, &lv.dofs.kernel());
        assert!(c.iter().all(|v| v.abs() < 1e-14));
        assert!((dot(&m, &lv.dofs.kernel()) - lv.mesh.area()).abs() < 1e-12);
    }

    #[test]
    fn interpolant_has_mean_zero_and_vertex_values() {
        let case = ManufacturedCase::sphere();
        let lv = sphere_level(&case, 2);
        let raw = interpolate_raw(&case, &lv.mesh, &lv.dofs).unwrap();
        let c = interpolate(&case, &lv.mesh, &lv.dofs, &lv.bases).unwrap();
        let m = mass_vector(&lv.mesh, &lv.dofs, &lv.bases).unwrap();
        assert!(dot(&m, &c).abs() < 1e-13);
        let shift = raw[0] - c[0];
        for v in 0..lv.mesh.n_vertices() {
            assert!((raw[3 * v] - c[3 * v] - shift).abs() < 1e-14);
            assert_eq!(raw[3 * v + 1], c[3 * v + 1]);
            let x = lv.mesh.vertices()[v];
            assert!((raw[3 * v] - case.exact_value(&x).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn interpolation_error_rates_on_the_sphere() {
        let case = ManufacturedCase::sphere();
        let rows: Vec<ErrorRow> = (1..=3)
            .map(|k| {
                let lv = sphere_level(&case, k);
                let c = interpolate(&case, &lv.mesh, &lv.dofs, &lv.bases).unwrap();
                compute_errors(&case, &lv.mesh, &lv.dofs, &lv.bases, &c, GradientError::Full).unwrap()
            })
            .collect();
        for w in rows.windows(2) {
            let r = |i: usize| w[0].values()[i] / w[1].values()[i];
            // values converge faster than the h² bound (observed about ×10)
            assert!(r(0) >= 3.2, "E0 ratio {}", r(0));
            assert!((3.2..5.0).contains(&r(1)), "E1 ratio {}", r(1));
            assert!((1.6..2.5).contains(&r(3)), "jump ratio {}", r(3));
        }
    }

    #[test]
    fn derivative_errors_ignore_constant_shifts() {
        let case = ManufacturedCase::sphere();
        let lv = sphere_level(&case, 2);
        let c = interpolate(&case, &lv.mesh, &lv.dofs, &lv.bases).unwrap();
        let mut shifted = c.clone();
        for (s, k) in shifted.iter_mut().zip(lv.dofs.kernel()) {
            *s += 0.7 * k;
        }
        let a = compute_errors(&case, &lv.mesh, &lv.dofs, &lv.bases, &c, GradientError::Full).unwrap();
        let b = compute_errors(&case, &lv.mesh, &lv.dofs, &lv.bases, &shifted, GradientError::Full).unwrap();
        assert!((a.e1 - b.e1).abs() <= 1e-13 * a.e1.max(1.0));
        assert!((a.e_delta - b.e_delta).abs() <= 1e-13 * a.e_delta.max(1.0));
        assert!((a.e_jump - b.e_jump).abs() <= 1e-13 * a.e_jump.max(1.0));
        // ‖u − v − 0.7‖ against ‖u − v‖: the shift dominates E0
        assert!(b.e0 > 0.5 * (lv.mesh.area()).sqrt());
    }

    #[test]
    fn projected_gradient_error_differs_by_curvature_term_only() {
        let case = ManufacturedCase::sphere();
        let lv = sphere_level(&case, 2);
        let c = interpolate(&case, &lv.mesh, &lv.dofs, &lv.bases).unwrap();
        let full = compute_errors(&case, &lv.mesh, &lv.dofs, &lv.bases, &c, GradientError::Full).unwrap();
        let star = compute_errors(&case, &lv.mesh, &lv.dofs, &lv.bases, &c, GradientError::Projected).unwrap();
        assert_eq!(full.e0, star.e0);
        assert_eq!(full.e_delta, star.e_delta);
        assert!((full.e1 - star.e1).abs() < 0.5 * full.e1);
        assert_eq!(GradientError::for_surface(case.surface()), GradientError::Full);
        assert_eq!(GradientError::Projected.label(), "E1star");
    }

    fn random_vector(rng: &mut impl Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn discrete_fields_have_mean_free_jumps() {
        let case = ManufacturedCase::sphere();
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        for level in [1, 2] {
            let lv = sphere_level(&case, level);
            for _ in 0..100 {
                let v = random_vector(&mut rng, lv.dofs.n_dofs());
                let d = jump_mean_defect(&lv.mesh, &lv.dofs, &lv.bases, &v);
                assert!(d < 1e-12, "level {level}: {d}");
            }
        }
    }

    #[test]
    fn conforming_relative_is_continuous_and_close() {
        let case = ManufacturedCase::sphere();
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        let mut ratios = Vec::new();
        for level in 1..=3 {
            let lv = sphere_level(&case, level);
            let v = random_vector(&mut rng, lv.dofs.n_dofs());
            let pi = conforming_relative(&lv.mesh, &lv.dofs, &v);
            assert!(max_edge_mismatch(&lv.mesh, &lv.bases, &pi) <= 1e-11);
            let local: Vec<LocalVector> = (0..lv.mesh.n_faces()).map(|f| lv.dofs.local_coefficients(f, &v)).collect();
            assert!(max_edge_mismatch(&lv.mesh, &lv.bases, &local) > 1e-5);
            let diff: Vec<LocalVector> = pi.iter().zip(&local).map(|(a, b)| a - b).collect();
            ratios.push(l2_norm_local(&lv.mesh, &lv.bases, &diff) / l2_norm_local(&lv.mesh, &lv.bases, &local));
        }
        // at least the O(h) rate; shared vertex gradients give about ×8
        for w in ratios.windows(2) {
            let r = w[0] / w[1];
            assert!(r >= 1.6, "ratio {r}");
        }
    }

    #[test]
    fn conforming_relative_keeps_fields_with_matching_derivatives() {
        // vanishing vertex gradients: every edge average is already zero
        let case = ManufacturedCase::sphere();
        let lv = sphere_level(&case, 1);
        let mut rng = rand::rngs::StdRng::seed_from_u64(8);
        let v: Vec<f64> = (0..lv.dofs.n_dofs())
            .map(|i| if i % 3 == 0 { rng.gen_range(-1.0..1.0) } else { 0.0 })
            .collect();
        let pi = conforming_relative(&lv.mesh, &lv.dofs, &v);
        for (f, p) in pi.iter().enumerate() {
            assert!((p - lv.dofs.local_coefficients(f, &v)).amax() < 1e-15);
        }
        assert!(max_edge_mismatch(&lv.mesh, &lv.bases, &pi) < 1e-13);
    }

    /// Mean-zero vector mixing a linear field `a·x` with DoF noise.
    fn smooth_plus_noise(rng: &mut impl Rng, lv: &Level, m: &[f64]) -> Vec<f64> {
        let a = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let noise = rng.gen_range(0.0..1.0) * lv.mesh.h();
        let mut v = vec![0.0; lv.dofs.n_dofs()];
        for (i, x) in lv.mesh.vertices().iter().enumerate() {
            let g = lv.dofs.anchor_frame(i).to_local(&(a - x * (a.dot(x) / x.norm_squared())));
            v[3 * i] = a.dot(x) + noise * rng.gen_range(-1.0..1.0);
            v[3 * i + 1] = g[0] + noise * rng.gen_range(-1.0..1.0);
            v[3 * i + 2] = g[1] + noise * rng.gen_range(-1.0..1.0);
        }
        subtract_mean(&mut v, m, &lv.dofs.kernel());
        v
    }

    #[test]
    fn poincare_constant_is_stable() {
        let case = ManufacturedCase::sphere();
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        let mut worst = Vec::new();
        for level in [2, 3] {
            let lv = sphere_level(&case, level);
            let m = mass_vector(&lv.mesh, &lv.dofs, &lv.bases).unwrap();
            let mut c: f64 = 0.0;
            for _ in 0..50 {
                let v = smooth_plus_noise(&mut rng, &lv, &m);
                let (l2, h1) = discrete_norms(&lv.mesh, &lv.dofs, &lv.bases, &v);
                c = c.max(l2 / h1);
            }
            worst.push(c);
        }
        // unit sphere: first eigenvalue 2, so the sharp constant is 1/√2
        for c in &worst {
            assert!((0.6..0.8).contains(c), "{c}");
        }
        assert!((worst[0] - worst[1]).abs() < 0.05 * worst[0]);
    }

    #[test]
    fn geometry_discrepancies_shrink_at_expected_rates() {
        let case = ManufacturedCase::sphere();
        let g: Vec<GeometryDiscrepancy> =
            (1..=4).map(|k| geometry_discrepancy(&case, &make_icosphere(case.surface(), k).unwrap()).unwrap()).collect();
        for w in g.windows(2) {
            let (m, n, p) = (w[0].measure / w[1].measure, w[0].normal / w[1].normal, w[0].piola / w[1].piola);
            assert!((3.0..5.0).contains(&m), "measure {m}");
            assert!((1.5..2.5).contains(&n), "normal {n}");
            assert!((3.0..5.0).contains(&p), "piola {p}");
        }
    }
}
