//! Exact-surface queries: signed distance, closest-point projection, unit
//! normal and Weingarten map for spheres, tori and level-set surfaces, plus
//! the pointwise area ratio between a flat facet and the surface.
//!
//! Closed forms are used for the sphere and the torus. Level sets are
//! projected iteratively and differentiated through the converged projection
//! with [`Jet`] arithmetic.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use thiserror::Error;

use crate::jet::{Jet, MAX_ORDER};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("closest-point projection did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("point at estimated distance {distance:.3e} is outside the tube of radius {radius:.3e}")]
    OutsideTube { distance: f64, radius: f64 },
    #[error("level-set field supplies derivatives up to order {available}, {required} required")]
    DerivativeOrderUnavailable { required: usize, available: usize },
    #[error("point is {distance:.3e} away from the surface, expected to lie on it")]
    NotOnSurface { distance: f64 },
    #[error("invalid surface parameters: {0}")]
    InvalidSurface(String),
}

/// A smooth ambient scalar field that can be expanded in Taylor jets.
pub trait ScalarField: Send + Sync + fmt::Debug {
    fn taylor(&self, x: &[Jet; 3]) -> Jet;

    /// Highest derivative order the field can be expanded to.
    fn max_derivative_order(&self) -> usize {
        MAX_ORDER
    }

    fn value(&self, x: &Vec3) -> f64 {
        self.taylor(&Jet::point((*x).into(), 0)).value()
    }

    fn value_and_gradient(&self, x: &Vec3) -> (f64, Vec3) {
        let j = self.taylor(&Jet::point((*x).into(), 1));
        (j.value(), Vec3::from(j.gradient()))
    }
}

/// Adapter turning a plain function on jets into a [`ScalarField`].
#[derive(Clone, Copy)]
pub struct FnField {
    pub name: &'static str,
    pub f: fn(&[Jet; 3]) -> Jet,
}

impl fmt::Debug for FnField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnField({})", self.name)
    }
}

impl ScalarField for FnField {
    fn taylor(&self, x: &[Jet; 3]) -> Jet {
        (self.f)(x)
    }
}

/// `x² + y² + z² − R²`
#[derive(Debug, Clone, Copy)]
pub struct SphereLevelSet {
    pub radius: f64,
}

impl ScalarField for SphereLevelSet {
    fn taylor(&self, x: &[Jet; 3]) -> Jet {
        let [x, y, z] = *x;
        x * x + y * y + z * z - self.radius * self.radius
    }
}

/// `(√(x² + y²) − R)² + z² − r²`
#[derive(Debug, Clone, Copy)]
pub struct TorusLevelSet {
    pub major: f64,
    pub minor: f64,
}

impl ScalarField for TorusLevelSet {
    fn taylor(&self, x: &[Jet; 3]) -> Jet {
        let [x, y, z] = *x;
        let w = (x * x + y * y).sqrt() - self.major;
        w * w + z * z - self.minor * self.minor
    }
}

/// `(x − z²)² + y² + z² − 1`, the image of the unit sphere under
/// `(x, y, z) ↦ (x + z², y, z)`.
#[derive(Debug, Clone, Copy)]
pub struct ShearedSphereLevelSet;

impl ScalarField for ShearedSphereLevelSet {
    fn taylor(&self, x: &[Jet; 3]) -> Jet {
        let [x, y, z] = *x;
        let s = x - z * z;
        s * s + y * y + z * z - 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionConfig {
    /// Stopping tolerance on `|phi| / |∇phi|`, relative to the surface scale.
    pub tol_proj: f64,
    /// Stopping tolerance on `|(x − y) × ν(y)|`, relative to the surface scale.
    pub tol_align: f64,
    pub max_iter: usize,
    /// Points with `|phi| / |∇phi|` above this are rejected.
    pub tube_radius: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig {
            tol_proj: 1e-13,
            tol_align: 1e-12,
            max_iter: 50,
            tube_radius: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LevelSetSurface {
    field: Arc<dyn ScalarField>,
    config: ProjectionConfig,
    scale: f64,
}

impl LevelSetSurface {
    pub fn field(&self) -> &dyn ScalarField {
        self.field.as_ref()
    }

    pub fn config(&self) -> &ProjectionConfig {
        &self.config
    }
}

/// Analytic or implicit description of a closed surface.
#[derive(Debug, Clone)]
pub enum SurfaceModel {
    Sphere { radius: f64 },
    Torus { major: f64, minor: f64 },
    LevelSet(LevelSetSurface),
}

/// Result of [`SurfaceModel::probe`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryProbe {
    pub point: Vec3,
    pub distance: f64,
    pub projection: Vec3,
    pub normal: Vec3,
    pub weingarten: Mat3,
}

impl GeometryProbe {
    /// `P = I − ν ⊗ ν`.
    pub fn tangent_projector(&self) -> Mat3 {
        tangent_projector(&self.normal)
    }

    /// `∇p = P − d H`.
    pub fn projection_jacobian(&self) -> Mat3 {
        self.tangent_projector() - self.weingarten * self.distance
    }
}

pub fn tangent_projector(nu: &Vec3) -> Mat3 {
    Mat3::identity() - nu * nu.transpose()
}

impl SurfaceModel {
    pub fn sphere(radius: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(GeometryError::InvalidSurface(format!(
                "sphere radius must be positive, got {radius}"
            )));
        }
        Ok(SurfaceModel::Sphere { radius })
    }

    pub fn torus(major: f64, minor: f64) -> Result<Self, GeometryError> {
        if !(minor > 0.0 && minor < major && major.is_finite()) {
            return Err(GeometryError::InvalidSurface(format!(
                "torus radii must satisfy 0 < r < R, got R={major}, r={minor}"
            )));
        }
        Ok(SurfaceModel::Torus { major, minor })
    }

    pub fn level_set(field: Arc<dyn ScalarField>) -> Self {
        Self::level_set_with(field, ProjectionConfig::default(), 1.0)
    }

    pub fn level_set_with(field: Arc<dyn ScalarField>, config: ProjectionConfig, scale: f64) -> Self {
        SurfaceModel::LevelSet(LevelSetSurface {
            field,
            config,
            scale,
        })
    }

    /// The surface `(x − z²)² + y² + z² = 1`.
    pub fn sheared_sphere() -> Self {
        Self::level_set(Arc::new(ShearedSphereLevelSet))
    }

    /// Characteristic length used for relative tolerances.
    pub fn scale(&self) -> f64 {
        match self {
            SurfaceModel::Sphere { radius } => *radius,
            SurfaceModel::Torus { major, .. } => *major,
            SurfaceModel::LevelSet(ls) => ls.scale,
        }
    }

    pub fn is_level_set(&self) -> bool {
        matches!(self, SurfaceModel::LevelSet(_))
    }

    /// Signed distance, closest point, normal and Weingarten map at `x`.
    pub fn probe(&self, x: &Vec3) -> Result<GeometryProbe, GeometryError> {
        match self {
            SurfaceModel::Sphere { radius } => probe_sphere(*radius, x),
            SurfaceModel::Torus { major, minor } => probe_torus(*major, *minor, x),
            SurfaceModel::LevelSet(ls) => probe_level_set(ls, x),
        }
    }

    /// Probes `x` and checks that it lies on the surface.
    pub fn probe_on_surface(&self, x: &Vec3) -> Result<GeometryProbe, GeometryError> {
        let probe = self.probe(x)?;
        if probe.distance.abs() > 1e-9 * self.scale() {
            return Err(GeometryError::NotOnSurface {
                distance: probe.distance,
            });
        }
        Ok(probe)
    }

    /// Area ratio `μ_h` with `dσ(p(x)) = μ_h(x) dσ_h(x)` for a flat facet with
    /// orthonormal tangents `t1`, `t2` through `x`.
    pub fn mu_h(&self, t1: &Vec3, t2: &Vec3, x: &Vec3) -> Result<f64, GeometryError> {
        Ok(mu_h_from_probe(&self.probe(x)?, t1, t2))
    }
}

pub fn mu_h_from_probe(probe: &GeometryProbe, t1: &Vec3, t2: &Vec3) -> f64 {
    let jac = probe.projection_jacobian();
    (jac * t1).cross(&(jac * t2)).norm()
}

fn probe_sphere(radius: f64, x: &Vec3) -> Result<GeometryProbe, GeometryError> {
    let n = x.norm();
    let distance = n - radius;
    if distance.abs() >= radius {
        return Err(GeometryError::OutsideTube {
            distance: distance.abs(),
            radius,
        });
    }
    let normal = x / n;
    Ok(GeometryProbe {
        point: *x,
        distance,
        projection: normal * radius,
        normal,
        weingarten: tangent_projector(&normal) / n,
    })
}

fn probe_torus(major: f64, minor: f64, x: &Vec3) -> Result<GeometryProbe, GeometryError> {
    let s = x.xy().norm();
    let w = s - major;
    let rho = (w * w + x.z * x.z).sqrt();
    // tube of radius min(r, R - r) around the surface
    let reach = minor.min(major - minor);
    if (rho - minor).abs() >= reach || rho < 1e-14 * major || s < 1e-14 * major {
        return Err(GeometryError::OutsideTube {
            distance: (rho - minor).abs(),
            radius: minor,
        });
    }
    let e_s = Vec3::new(x.x / s, x.y / s, 0.0);
    let e_z = Vec3::z();
    let e_phi = Vec3::new(-x.y / s, x.x / s, 0.0);
    let normal = e_s * (w / rho) + e_z * (x.z / rho);
    let e_theta = e_s * (-x.z / rho) + e_z * (w / rho);
    let distance = rho - minor;
    let weingarten =
        e_theta * e_theta.transpose() / rho + e_phi * e_phi.transpose() * (w / (rho * s));
    Ok(GeometryProbe {
        point: *x,
        distance,
        projection: x - normal * distance,
        normal,
        weingarten,
    })
}

struct Projected {
    point: Vec3,
    gradient: Vec3,
    /// Multiplier `t` with `x − y = t ∇phi(y)`.
    multiplier: f64,
}

fn misalignment(x: &Vec3, y: &Vec3, grad: &Vec3) -> f64 {
    (x - y).cross(&(grad / grad.norm())).norm()
}

/// First-order projection iteration with a Newton polish once the iterate is
/// close to the foot point.
fn project_level_set(ls: &LevelSetSurface, x: &Vec3) -> Result<Projected, GeometryError> {
    let field = ls.field();
    let cfg = &ls.config;
    let (phi_x, grad_x) = field.value_and_gradient(x);
    let gnorm = grad_x.norm();
    let estimate = if gnorm > 0.0 { phi_x.abs() / gnorm } else { f64::INFINITY };
    if estimate > cfg.tube_radius {
        return Err(GeometryError::OutsideTube {
            distance: estimate,
            radius: cfg.tube_radius,
        });
    }
    let sign = if phi_x < 0.0 { -1.0 } else { 1.0 };
    let tol_phi = cfg.tol_proj * ls.scale;
    let tol_align = cfg.tol_align * ls.scale;

    let mut y = *x;
    let (mut phi, mut grad) = (phi_x, grad_x);
    let mut residual = f64::INFINITY;
    for _ in 0..cfg.max_iter {
        let dist_phi = phi.abs() / grad.norm();
        let align = misalignment(x, &y, &grad);
        residual = dist_phi.max(align);
        if dist_phi <= tol_phi && align <= tol_align {
            let multiplier = (x - y).dot(&grad) / grad.norm_squared();
            return Ok(Projected {
                point: y,
                gradient: grad,
                multiplier,
            });
        }
        if residual < 1e-4 * ls.scale {
            // Newton on y − x + t∇phi(y) = 0, phi(y) = 0
            let j = field.taylor(&Jet::point(y.into(), 2));
            let hess = Mat3::from(j.hessian()).transpose();
            let t = (x - y).dot(&grad) / grad.norm_squared();
            let mut jac = Matrix4::zeros();
            jac.fixed_view_mut::<3, 3>(0, 0)
                .copy_from(&(Mat3::identity() + hess * t));
            jac.fixed_view_mut::<3, 1>(0, 3).copy_from(&grad);
            jac.fixed_view_mut::<1, 3>(3, 0).copy_from(&grad.transpose());
            let g1 = y - x + grad * t;
            let rhs = Vector4::new(g1.x, g1.y, g1.z, phi);
            let step = jac.lu().solve(&rhs).ok_or(GeometryError::NonConvergence {
                iterations: 0,
                residual,
            })?;
            y -= step.fixed_rows::<3>(0);
        } else {
            let y1 = y - grad * (phi / grad.norm_squared());
            let (_, g1) = field.value_and_gradient(&y1);
            let dist = sign * (x - y1).norm();
            y = x - g1 * (dist / g1.norm());
        }
        let (p, g) = field.value_and_gradient(&y);
        phi = p;
        grad = g;
    }
    Err(GeometryError::NonConvergence {
        iterations: cfg.max_iter,
        residual,
    })
}

/// Taylor expansion of the closest-point map `p` around `x0` together with
/// `∇phi ∘ p`, obtained by implicit differentiation of the converged
/// projection (a chord iteration in jet arithmetic gains one order per step).
fn projection_jets(
    ls: &LevelSetSurface,
    x0: &Vec3,
    foot: &Projected,
    order: usize,
) -> Result<([Jet; 3], [Jet; 3]), GeometryError> {
    let field = ls.field();
    let available = field.max_derivative_order();
    if order + 1 > available {
        return Err(GeometryError::DerivativeOrderUnavailable {
            required: order + 1,
            available,
        });
    }
    let y0 = foot.point;
    let t0 = foot.multiplier;
    // phi expanded around y0, as a polynomial in the displacement
    let phi_poly = field.taylor(&Jet::point(y0.into(), order + 1));
    let grad_poly = [phi_poly.diff(0), phi_poly.diff(1), phi_poly.diff(2)];
    let hess = Mat3::from(phi_poly.hessian()).transpose();
    let grad0 = foot.gradient;
    let mut jac = Matrix4::zeros();
    jac.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(Mat3::identity() + hess * t0));
    jac.fixed_view_mut::<3, 1>(0, 3).copy_from(&grad0);
    jac.fixed_view_mut::<1, 3>(3, 0).copy_from(&grad0.transpose());
    let jac_inv = jac.try_inverse().ok_or(GeometryError::NonConvergence {
        iterations: 0,
        residual: f64::NAN,
    })?;

    let xs = Jet::point((*x0).into(), order);
    let mut ys = [
        Jet::constant(y0.x, order),
        Jet::constant(y0.y, order),
        Jet::constant(y0.z, order),
    ];
    let mut t = Jet::constant(t0, order);
    let mut grads = ys;
    for _ in 0..=order {
        let mut delta = [ys[0] - y0.x, ys[1] - y0.y, ys[2] - y0.z];
        for d in delta.iter_mut() {
            // composition needs an exactly vanishing constant term
            *d = *d - d.value();
        }
        grads = [
            grad_poly[0].compose(&delta),
            grad_poly[1].compose(&delta),
            grad_poly[2].compose(&delta),
        ];
        let phi = phi_poly.compose(&delta);
        let g: [Jet; 4] = [
            ys[0] - xs[0] + t * grads[0],
            ys[1] - xs[1] + t * grads[1],
            ys[2] - xs[2] + t * grads[2],
            phi,
        ];
        let n = g[0].coeffs().len();
        let mut step = [Jet::constant(0.0, order); 4];
        let mut coeffs = vec![[0.0; 4]; n];
        for (i, c) in coeffs.iter_mut().enumerate() {
            let r = Vector4::new(
                g[0].coeffs()[i],
                g[1].coeffs()[i],
                g[2].coeffs()[i],
                g[3].coeffs()[i],
            );
            let s = jac_inv * r;
            *c = [s[0], s[1], s[2], s[3]];
        }
        for (k, st) in step.iter_mut().enumerate() {
            *st = Jet::from_coeffs(order, coeffs.iter().map(|c| c[k]));
        }
        ys = [ys[0] - step[0], ys[1] - step[1], ys[2] - step[2]];
        t -= step[3];
    }
    // keep the exact converged foot point as the constant term
    ys[0] = ys[0] - (ys[0].value() - y0.x);
    ys[1] = ys[1] - (ys[1].value() - y0.y);
    ys[2] = ys[2] - (ys[2].value() - y0.z);
    Ok((ys, grads))
}

/// Closest-point map expanded around `x0` to the given order.
pub(crate) fn closest_point_jets(
    ls: &LevelSetSurface,
    x0: &Vec3,
    order: usize,
) -> Result<[Jet; 3], GeometryError> {
    let foot = project_level_set(ls, x0)?;
    Ok(projection_jets(ls, x0, &foot, order)?.0)
}

fn probe_level_set(ls: &LevelSetSurface, x: &Vec3) -> Result<GeometryProbe, GeometryError> {
    let foot = project_level_set(ls, x)?;
    let (_, grads) = projection_jets(ls, x, &foot, 1)?;
    let norm = (grads[0] * grads[0] + grads[1] * grads[1] + grads[2] * grads[2]).sqrt();
    let nu = [grads[0] / norm, grads[1] / norm, grads[2] / norm];
    let normal = Vec3::new(nu[0].value(), nu[1].value(), nu[2].value());
    // H = ∇(ν ∘ p), symmetric up to round-off
    let mut h = Mat3::zeros();
    for (i, comp) in nu.iter().enumerate() {
        let g = comp.gradient();
        for (j, gj) in g.iter().enumerate() {
            h[(i, j)] = *gj;
        }
    }
    let weingarten = (h + h.transpose()) * 0.5;
    let distance = (x - foot.point).dot(&normal);
    Ok(GeometryProbe {
        point: *x,
        distance,
        projection: foot.point,
        normal,
        weingarten,
    })
}
