//! Manufactured exact solutions `u` on closed surfaces together with their
//! tangential gradient, Laplace-Beltrami operator and the biharmonic source
//! `f = Δ_γ² u`.
//!
//! Three evaluation strategies are supported:
//! * closed forms for the spherical harmonic `r⁻³(3x²y − y³)` on a sphere,
//! * coordinate AD in toroidal angles for `sin(3φ) cos(3θ + φ)` on a torus,
//! * closest-point extension for any ambient `u` on a level-set surface,
//!   using `Δ_γ v = Δ(v ∘ p)` on γ and nesting it for the source.

use std::fmt;
use std::sync::Arc;

use crate::geometry::{closest_point_jets, FnField, GeometryError, ScalarField, SurfaceModel, Vec3};
use crate::jet::Jet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvaluationMode {
    ClosedForm,
    CoordinateAd,
    ClosestPointAd,
}

#[derive(Clone)]
enum Solution {
    SphereHarmonic,
    TorusMode,
    Ambient(Arc<dyn ScalarField>),
}

impl fmt::Debug for Solution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Solution::SphereHarmonic => write!(f, "SphereHarmonic"),
            Solution::TorusMode => write!(f, "TorusMode"),
            Solution::Ambient(u) => write!(f, "Ambient({u:?})"),
        }
    }
}

/// Exact data at one surface point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactData {
    pub value: f64,
    pub gradient: Vec3,
    pub laplacian: f64,
    /// Only filled when requested.
    pub source: Option<f64>,
}

/// A surface paired with a manufactured solution.
#[derive(Debug, Clone)]
pub struct ManufacturedCase {
    surface: SurfaceModel,
    solution: Solution,
}

fn sphere_harmonic_poly(x: &[Jet; 3]) -> Jet {
    let [x, y, _] = *x;
    3.0 * x * x * y - y * y * y
}

/// `u = y`
pub const COORDINATE_Y: FnField = FnField {
    name: "y",
    f: |x| x[1],
};

/// `r⁻³ (3x²y − y³)` as an ambient field.
pub const SPHERE_HARMONIC: FnField = FnField {
    name: "r^-3 (3x^2 y - y^3)",
    f: |x| {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        sphere_harmonic_poly(x) * r2.powf(-1.5)
    },
};

/// `sin(3φ) cos(3θ + φ)` in toroidal angles for the torus with major
/// radius 1, as an ambient field.
pub const TORUS_MODE_UNIT_MAJOR: FnField = FnField {
    name: "sin(3 phi) cos(3 theta + phi)",
    f: |x| {
        let s = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let theta = x[2].atan2(&(s - 1.0));
        let phi = x[1].atan2(&x[0]);
        (3.0 * phi).sin() * (3.0 * theta + phi).cos()
    },
};

impl ManufacturedCase {
    /// Unit sphere with `u = r⁻³(3x²y − y³)`.
    pub fn sphere() -> Self {
        ManufacturedCase {
            surface: SurfaceModel::Sphere { radius: 1.0 },
            solution: Solution::SphereHarmonic,
        }
    }

    /// Torus `R = 1`, `r = 0.6` with `u = sin(3φ) cos(3θ + φ)`.
    pub fn torus() -> Self {
        Self::torus_with(1.0, 0.6).expect("valid torus radii")
    }

    pub fn torus_with(major: f64, minor: f64) -> Result<Self, GeometryError> {
        Ok(ManufacturedCase {
            surface: SurfaceModel::torus(major, minor)?,
            solution: Solution::TorusMode,
        })
    }

    /// `(x − z²)² + y² + z² = 1` with `u = y`.
    pub fn implicit() -> Self {
        ManufacturedCase {
            surface: SurfaceModel::sheared_sphere(),
            solution: Solution::Ambient(Arc::new(COORDINATE_Y)),
        }
    }

    /// Any ambient field on a level-set surface, evaluated through the
    /// closest-point extension.
    pub fn closest_point(surface: SurfaceModel, u: Arc<dyn ScalarField>) -> Result<Self, GeometryError> {
        if !surface.is_level_set() {
            return Err(GeometryError::InvalidSurface(
                "closest-point evaluation requires a level-set surface".into(),
            ));
        }
        Ok(ManufacturedCase {
            surface,
            solution: Solution::Ambient(u),
        })
    }

    pub fn surface(&self) -> &SurfaceModel {
        &self.surface
    }

    pub fn mode(&self) -> EvaluationMode {
        match self.solution {
            Solution::SphereHarmonic => EvaluationMode::ClosedForm,
            Solution::TorusMode => EvaluationMode::CoordinateAd,
            Solution::Ambient(_) => EvaluationMode::ClosestPointAd,
        }
    }

    pub fn exact_value(&self, x: &Vec3) -> Result<f64, GeometryError> {
        self.surface.probe_on_surface(x)?;
        Ok(match &self.solution {
            Solution::SphereHarmonic => SPHERE_HARMONIC.value(x),
            Solution::TorusMode => {
                let (theta, phi) = self.torus_angles(x);
                (3.0 * phi).sin() * (3.0 * theta + phi).cos()
            }
            Solution::Ambient(u) => u.value(x),
        })
    }

    pub fn exact_tangential_gradient(&self, x: &Vec3) -> Result<Vec3, GeometryError> {
        let probe = self.surface.probe_on_surface(x)?;
        let ambient = match &self.solution {
            Solution::SphereHarmonic => ambient_gradient(&SPHERE_HARMONIC, x),
            Solution::TorusMode => self.torus_ambient_gradient(x),
            Solution::Ambient(u) => ambient_gradient(u.as_ref(), x),
        };
        Ok(probe.tangent_projector() * ambient)
    }

    pub fn exact_laplace_beltrami(&self, x: &Vec3) -> Result<f64, GeometryError> {
        Ok(self.exact_data(x, false)?.laplacian)
    }

    pub fn exact_source(&self, x: &Vec3) -> Result<f64, GeometryError> {
        Ok(self.exact_data(x, true)?.source.expect("source requested"))
    }

    /// Value, tangential gradient, Laplace-Beltrami and optionally the source
    /// at a point of the surface, sharing the expansion work.
    pub fn exact_data(&self, x: &Vec3, with_source: bool) -> Result<ExactData, GeometryError> {
        let probe = self.surface.probe_on_surface(x)?;
        let proj = probe.tangent_projector();
        match &self.solution {
            Solution::SphereHarmonic => {
                let r = self.sphere_radius();
                let value = SPHERE_HARMONIC.value(x);
                Ok(ExactData {
                    value,
                    gradient: proj * ambient_gradient(&SPHERE_HARMONIC, x),
                    laplacian: -12.0 * value / (r * r),
                    source: with_source.then(|| 144.0 * value / r.powi(4)),
                })
            }
            Solution::TorusMode => {
                let (theta, phi) = self.torus_angles(x);
                let order = if with_source { 4 } else { 2 };
                let u = self.torus_mode_jet(theta, phi, order);
                let lap = self.torus_laplacian(&u, theta);
                Ok(ExactData {
                    value: u.value(),
                    gradient: self.torus_metric_gradient(theta, phi, &u),
                    laplacian: lap.value(),
                    source: with_source.then(|| self.torus_laplacian(&lap, theta).value()),
                })
            }
            Solution::Ambient(u) => {
                let SurfaceModel::LevelSet(ls) = &self.surface else {
                    unreachable!("ambient solutions are built on level sets")
                };
                let order = if with_source { 4 } else { 2 };
                let p = closest_point_jets(ls, x, order)?;
                let composed = u.taylor(&p);
                let source = if with_source {
                    // f = Δ(w ∘ p) with w = Δ(u ∘ p) on γ
                    let lap = composed.laplacian();
                    let mut shift = [p[0].truncate(2), p[1].truncate(2), p[2].truncate(2)];
                    for s in shift.iter_mut() {
                        *s = *s - s.value();
                    }
                    Some(lap.compose(&shift).laplacian_value())
                } else {
                    None
                };
                Ok(ExactData {
                    value: composed.value(),
                    gradient: Vec3::from(composed.gradient()),
                    laplacian: composed.laplacian_value(),
                    source,
                })
            }
        }
    }

    fn sphere_radius(&self) -> f64 {
        match self.surface {
            SurfaceModel::Sphere { radius } => radius,
            _ => unreachable!(),
        }
    }

    fn torus_radii(&self) -> (f64, f64) {
        match self.surface {
            SurfaceModel::Torus { major, minor } => (major, minor),
            _ => unreachable!(),
        }
    }

    /// Toroidal angles `(θ, φ)` of a point.
    pub fn torus_angles(&self, x: &Vec3) -> (f64, f64) {
        let (major, _) = self.torus_radii();
        let s = x.xy().norm();
        (x.z.atan2(s - major), x.y.atan2(x.x))
    }

    /// `u(θ, φ)` expanded in the angles (variables 0 and 1).
    fn torus_mode_jet(&self, theta: f64, phi: f64, order: usize) -> Jet {
        let th = Jet::variable(theta, 0, order);
        let ph = Jet::variable(phi, 1, order);
        (3.0 * ph).sin() * (3.0 * th + ph).cos()
    }

    /// Coordinate Laplace-Beltrami operator on the torus applied to a jet in
    /// `(θ, φ)` expanded at angle `theta`; lowers the order by two.
    fn torus_laplacian(&self, u: &Jet, theta: f64) -> Jet {
        let (major, minor) = self.torus_radii();
        let th = Jet::variable(theta, 0, u.order());
        let w = major + minor * th.cos();
        let d_theta = (w / minor * u.diff(0)).diff(0);
        let d_phi = (minor / w * u.diff(1)).diff(1);
        (d_theta + d_phi) / (minor * w)
    }

    fn torus_metric_gradient(&self, theta: f64, phi: f64, u: &Jet) -> Vec3 {
        let (major, minor) = self.torus_radii();
        let g = u.gradient();
        let w = major + minor * theta.cos();
        let x_theta = Vec3::new(
            -minor * theta.sin() * phi.cos(),
            -minor * theta.sin() * phi.sin(),
            minor * theta.cos(),
        );
        let x_phi = Vec3::new(-w * phi.sin(), w * phi.cos(), 0.0);
        x_theta * (g[0] / (minor * minor)) + x_phi * (g[1] / (w * w))
    }

    fn torus_ambient_gradient(&self, x: &Vec3) -> Vec3 {
        let (major, _) = self.torus_radii();
        let [px, py, pz] = Jet::point((*x).into(), 1);
        let s = (px * px + py * py).sqrt();
        let theta = pz.atan2(&(s - major));
        let phi = py.atan2(&px);
        let u = (3.0 * phi).sin() * (3.0 * theta + phi).cos();
        Vec3::from(u.gradient())
    }

    /// Tangential gradient in the metric form
    /// `g^{θθ} ∂_θu x_θ + g^{φφ} ∂_φu x_φ` (torus only).
    pub fn torus_gradient_metric_form(&self, x: &Vec3) -> Vec3 {
        let (theta, phi) = self.torus_angles(x);
        let u = self.torus_mode_jet(theta, phi, 1);
        self.torus_metric_gradient(theta, phi, &u)
    }

    /// Point of the torus at angles `(θ, φ)`.
    pub fn torus_point(&self, theta: f64, phi: f64) -> Vec3 {
        let (major, minor) = self.torus_radii();
        let w = major + minor * theta.cos();
        Vec3::new(w * phi.cos(), w * phi.sin(), minor * theta.sin())
    }
}

fn ambient_gradient(u: &dyn ScalarField, x: &Vec3) -> Vec3 {
    u.value_and_gradient(x).1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{SphereLevelSet, TorusLevelSet};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn printed_negative_laplacian(major: f64, minor: f64, theta: f64, phi: f64) -> f64 {
        let w = major + minor * theta.cos();
        9.0 / (minor * minor) * (3.0 * phi).sin() * (3.0 * theta + phi).cos()
            - 3.0 / (minor * w) * theta.sin() * (3.0 * phi).sin() * (3.0 * theta + phi).sin()
            + (10.0 * (3.0 * phi).sin() * (3.0 * theta + phi).cos()
                + 6.0 * (3.0 * phi).cos() * (3.0 * theta + phi).sin())
                / (w * w)
    }

    fn random_sphere_point(rng: &mut impl Rng) -> Vec3 {
        Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).normalize()
    }

    #[test]
    fn sphere_values() {
        let c = ManufacturedCase::sphere();
        assert_relative_eq!(c.exact_value(&Vec3::y()).unwrap(), -1.0);
        assert_relative_eq!(c.exact_source(&Vec3::y()).unwrap(), -144.0);
        let g = c.exact_tangential_gradient(&Vec3::x()).unwrap();
        assert_relative_eq!(g, Vec3::new(0.0, 3.0, 0.0), epsilon = 1e-14);
        assert!(c.exact_value(&Vec3::new(1.1, 0.0, 0.0)).is_err());
    }

    #[test]
    fn sphere_source_is_eigen_multiple() {
        let c = ManufacturedCase::sphere();
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        for _ in 0..1000 {
            let x = random_sphere_point(&mut rng);
            let d = c.exact_data(&x, true).unwrap();
            assert!((d.source.unwrap() - 144.0 * d.value).abs() <= 1e-12 * (1.0 + d.value.abs() * 144.0));
            assert!((d.laplacian + 12.0 * d.value).abs() <= 1e-12 * (1.0 + d.value.abs() * 12.0));
        }
    }

    #[test]
    fn torus_values_at_outer_equator() {
        let c = ManufacturedCase::torus();
        let x = Vec3::new(1.6, 0.0, 0.0);
        assert!(c.exact_value(&x).unwrap().abs() < 1e-15);
        let a = c.exact_tangential_gradient(&x).unwrap();
        let b = c.torus_gradient_metric_form(&x);
        assert!((a - b).norm() < 1e-10);
    }

    #[test]
    fn torus_laplacian_matches_printed_formula() {
        let c = ManufacturedCase::torus();
        let (theta, phi) = (PI / 2.0, PI / 6.0);
        let x = c.torus_point(theta, phi);
        let lap = c.exact_laplace_beltrami(&x).unwrap();
        assert!((lap + printed_negative_laplacian(1.0, 0.6, theta, phi)).abs() < 1e-10);
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        for _ in 0..100 {
            let (theta, phi) = (rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI));
            let x = c.torus_point(theta, phi);
            let d = c.exact_data(&x, false).unwrap();
            assert!((d.laplacian + printed_negative_laplacian(1.0, 0.6, theta, phi)).abs() < 1e-10);
            let g = c.exact_tangential_gradient(&x).unwrap();
            assert!((g - d.gradient).norm() < 1e-10);
        }
    }

    #[test]
    fn torus_source_equals_laplacian_of_printed_expression() {
        // apply the coordinate operator to the printed −Δu via finite
        // differences in (θ, φ) and compare with the double-AD source
        let c = ManufacturedCase::torus();
        let (major, minor) = (1.0, 0.6);
        let lap = |t: f64, p: f64| -printed_negative_laplacian(major, minor, t, p);
        for &(theta, phi) in &[(0.0, 0.0), (0.7, 2.1), (3.0, -1.2)] {
            let h = 1e-3;
            let w = |t: f64| major + minor * t.cos();
            let term_theta = (w(theta + h / 2.0) / minor * (lap(theta + h, phi) - lap(theta, phi)) / h
                - w(theta - h / 2.0) / minor * (lap(theta, phi) - lap(theta - h, phi)) / h)
                / h;
            let term_phi = minor / w(theta) * (lap(theta, phi + h) - 2.0 * lap(theta, phi) + lap(theta, phi - h)) / (h * h);
            let fd = (term_theta + term_phi) / (minor * w(theta));
            let x = c.torus_point(theta, phi);
            let f = c.exact_source(&x).unwrap();
            assert!((f - fd).abs() < 1e-3 * f.abs().max(1.0), "{f} vs {fd}");
        }
    }

    #[test]
    fn implicit_case_values() {
        let c = ManufacturedCase::implicit();
        assert_eq!(c.mode(), EvaluationMode::ClosestPointAd);
        assert_relative_eq!(c.exact_value(&Vec3::y()).unwrap(), 1.0);
        let x = Vec3::new(0.0, 1.0, 0.0);
        let g = c.exact_tangential_gradient(&x).unwrap();
        // normal at (0,1,0) is e_y
        assert!(g.norm() < 1e-14);
    }

    #[test]
    fn closest_point_pipeline_reproduces_sphere() {
        let ls = SurfaceModel::level_set(Arc::new(SphereLevelSet { radius: 1.0 }));
        let c = ManufacturedCase::closest_point(ls, Arc::new(SPHERE_HARMONIC)).unwrap();
        let closed = ManufacturedCase::sphere();
        let mut rng = rand::rngs::StdRng::seed_from_u64(9);
        for _ in 0..20 {
            let x = random_sphere_point(&mut rng);
            let a = c.exact_data(&x, true).unwrap();
            let b = closed.exact_data(&x, true).unwrap();
            let scale = 1.0;
            assert!((a.value - b.value).abs() <= 1e-6 * scale);
            assert!((a.gradient - b.gradient).norm() <= 1e-6 * 3.0);
            assert!((a.laplacian - b.laplacian).abs() <= 1e-7 * 12.0);
            assert!((a.source.unwrap() - b.source.unwrap()).abs() <= 1e-6 * 144.0, "{:?} {:?}", a, b);
        }
    }

    #[test]
    fn closest_point_pipeline_reproduces_torus() {
        let ls = SurfaceModel::level_set(Arc::new(TorusLevelSet { major: 1.0, minor: 0.6 }));
        let c = ManufacturedCase::closest_point(ls, Arc::new(TORUS_MODE_UNIT_MAJOR)).unwrap();
        let closed = ManufacturedCase::torus();
        let mut rng = rand::rngs::StdRng::seed_from_u64(13);
        for _ in 0..20 {
            let x = closed.torus_point(rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI));
            let a = c.exact_data(&x, true).unwrap();
            let b = closed.exact_data(&x, true).unwrap();
            let rel = |p: f64, q: f64, s: f64| (p - q).abs() / s;
            assert!(rel(a.value, b.value, 1.0) <= 1e-6);
            assert!((a.gradient - b.gradient).norm() / b.gradient.norm().max(1.0) <= 1e-6);
            assert!(rel(a.laplacian, b.laplacian, b.laplacian.abs().max(1.0)) <= 1e-6);
            let (fa, fb) = (a.source.unwrap(), b.source.unwrap());
            assert!(rel(fa, fb, fb.abs().max(1.0)) <= 1e-5, "{fa} vs {fb}");
        }
    }
}
