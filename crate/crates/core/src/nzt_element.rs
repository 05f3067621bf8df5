//! Nodal basis of the NZT triangle: `P₂ + span{q₁₂, q₁₃, q₂₃}` with degrees
//! of freedom the three vertex values and the two in-plane gradient
//! components at each vertex.
//!
//! Basis functions are stored as homogeneous quartic polynomials in the
//! barycentric coordinates (15 coefficients). Local DoF order is
//! `[v₀, ∂₁v₀, ∂₂v₀, v₁, ∂₁v₁, ∂₂v₁, v₂, ∂₁v₂, ∂₂v₂]` with derivatives taken
//! along the axes of the face frame.

use std::sync::OnceLock;

use nalgebra::{Matrix2, SMatrix, SVector};
use thiserror::Error;

use crate::quadrature::edge_gauss4;

pub const N_MONOMIALS: usize = 15;
pub const N_LOCAL: usize = 9;

pub type CoeffMatrix = SMatrix<f64, N_LOCAL, N_MONOMIALS>;
pub type LocalVector = SVector<f64, N_LOCAL>;
pub type LocalMatrix = SMatrix<f64, N_LOCAL, N_LOCAL>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ElementError {
    #[error("degenerate triangle: area {area:e} with diameter {diameter:e}")]
    DegenerateTriangle { area: f64, diameter: f64 },
    #[error("DoF matrix condition estimate {condition:e} exceeds 1e12")]
    IllConditioned { condition: f64 },
}

/// Exponents `(i, j, k)` with `i + j + k = 4`, ordered lexicographically
/// from `λ₁⁴`.
pub fn quartic_exponents() -> &'static [[usize; 3]; N_MONOMIALS] {
    static TABLE: OnceLock<[[usize; 3]; N_MONOMIALS]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [[0; 3]; N_MONOMIALS];
        let mut n = 0;
        for i in (0..=4).rev() {
            for j in (0..=4 - i).rev() {
                t[n] = [i, j, 4 - i - j];
                n += 1;
            }
        }
        t
    })
}

fn quartic_index(e: [usize; 3]) -> usize {
    quartic_exponents()
        .iter()
        .position(|m| *m == e)
        .expect("quartic exponent")
}

/// Dense polynomial in `(λ₁, λ₂, λ₃)` with per-variable degree at most 4.
#[derive(Clone, Copy)]
struct Poly([f64; 125]);

impl Poly {
    fn zero() -> Self {
        Poly([0.0; 125])
    }

    fn constant(c: f64) -> Self {
        let mut p = Self::zero();
        p.0[0] = c;
        p
    }

    fn lambda(i: usize) -> Self {
        let mut e = [0; 3];
        e[i] = 1;
        let mut p = Self::zero();
        p.0[Self::idx(e)] = 1.0;
        p
    }

    fn idx(e: [usize; 3]) -> usize {
        e[0] * 25 + e[1] * 5 + e[2]
    }

    fn terms(&self) -> impl Iterator<Item = ([usize; 3], f64)> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(n, c)| ([n / 25, (n / 5) % 5, n % 5], *c))
    }

    fn add(&self, o: &Poly) -> Poly {
        let mut r = *self;
        for (a, b) in r.0.iter_mut().zip(o.0.iter()) {
            *a += b;
        }
        r
    }

    fn scale(&self, s: f64) -> Poly {
        let mut r = *self;
        for a in r.0.iter_mut() {
            *a *= s;
        }
        r
    }

    fn mul(&self, o: &Poly) -> Poly {
        let mut r = Poly::zero();
        for (ea, ca) in self.terms() {
            for (eb, cb) in o.terms() {
                let e = [ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]];
                assert!(e.iter().sum::<usize>() <= 4, "degree exceeds 4");
                r.0[Self::idx(e)] += ca * cb;
            }
        }
        r
    }

    /// Homogeneous quartic form equal to `self` on `λ₁ + λ₂ + λ₃ = 1`.
    fn homogenize(&self) -> [f64; N_MONOMIALS] {
        let sum = Poly::lambda(0).add(&Poly::lambda(1)).add(&Poly::lambda(2));
        let mut out = [0.0; N_MONOMIALS];
        for (e, c) in self.terms() {
            let mut term = Poly::zero();
            term.0[Self::idx(e)] = c;
            for _ in e.iter().sum::<usize>()..4 {
                term = term.mul(&sum);
            }
            for (f, d) in term.terms() {
                out[quartic_index(f)] += d;
            }
        }
        out
    }
}

/// Values and barycentric derivatives of the quartic monomials at a point.
#[derive(Debug, Clone, Copy)]
pub struct MonomialTable {
    pub value: [f64; N_MONOMIALS],
    /// `∂/∂λ_i`
    pub first: [[f64; N_MONOMIALS]; 3],
    /// `∂²/∂λ_i∂λ_j`
    pub second: [[[f64; N_MONOMIALS]; 3]; 3],
}

impl MonomialTable {
    pub fn at(l: &[f64; 3]) -> Self {
        let pw = |x: f64, n: isize| if n < 0 { 0.0 } else { x.powi(n as i32) };
        let mut t = MonomialTable {
            value: [0.0; N_MONOMIALS],
            first: [[0.0; N_MONOMIALS]; 3],
            second: [[[0.0; N_MONOMIALS]; 3]; 3],
        };
        for (m, e) in quartic_exponents().iter().enumerate() {
            let e = e.map(|v| v as isize);
            let eval = |d: [isize; 3]| -> f64 {
                let mut c = 1.0;
                for k in 0..3 {
                    for s in 0..d[k] {
                        c *= (e[k] - s) as f64;
                    }
                }
                if c == 0.0 {
                    return 0.0;
                }
                c * (0..3).map(|k| pw(l[k], e[k] - d[k])).product::<f64>()
            };
            t.value[m] = eval([0, 0, 0]);
            for i in 0..3 {
                let mut d = [0; 3];
                d[i] = 1;
                t.first[i][m] = eval(d);
                for j in 0..3 {
                    let mut d2 = d;
                    d2[j] += 1;
                    t.second[i][j][m] = eval(d2);
                }
            }
        }
        t
    }
}

/// Value, face-frame gradient and Laplacian of each basis function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisValues {
    pub value: [f64; N_LOCAL],
    pub grad: [[f64; 2]; N_LOCAL],
    pub lap: [f64; N_LOCAL],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeBasis {
    pub triangle: [[f64; 2]; 3],
    pub coeffs: CoeffMatrix,
    pub grad_lambda: [[f64; 2]; 3],
    pub area: f64,
    pub diameter: f64,
    pub condition: f64,
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn norm1(m: &LocalMatrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// The spanning set `λ₁, λ₂, λ₃, λ₁λ₂, λ₁λ₃, λ₂λ₃, q₁₂, q₁₃, q₂₃` (0-based
/// indices in code) in quartic coordinates.
fn spanning_set(grad_lambda: &[[f64; 2]; 3]) -> [[f64; N_MONOMIALS]; N_LOCAL] {
    let l = [Poly::lambda(0), Poly::lambda(1), Poly::lambda(2)];
    let bubble = l[0].mul(&l[1]).mul(&l[2]);
    let q = |i: usize, j: usize| {
        let k = 3 - i - j;
        let gk = grad_lambda[k];
        let c = dot(sub(grad_lambda[i], grad_lambda[j]), gk) / dot(gk, gk);
        let cubic = l[i].mul(&l[i]).mul(&l[j]).add(&l[i].mul(&l[j]).mul(&l[j]).scale(-1.0));
        let factor = l[i]
            .add(&l[j].scale(-1.0))
            .scale(2.0)
            .add(&l[k].scale(2.0).add(&Poly::constant(-1.0)).scale(3.0 * c));
        cubic.add(&factor.mul(&bubble))
    };
    [
        l[0],
        l[1],
        l[2],
        l[0].mul(&l[1]),
        l[0].mul(&l[2]),
        l[1].mul(&l[2]),
        q(0, 1),
        q(0, 2),
        q(1, 2),
    ]
    .map(|p| p.homogenize())
}

impl ShapeBasis {
    pub fn build(triangle: [[f64; 2]; 3]) -> Result<Self, ElementError> {
        let [p0, p1, p2] = triangle;
        let e1 = sub(p1, p0);
        let e2 = sub(p2, p0);
        let diameter = [e1, e2, sub(p2, p1)]
            .iter()
            .map(|e| dot(*e, *e).sqrt())
            .fold(0.0, f64::max);
        let area = 0.5 * (e1[0] * e2[1] - e1[1] * e2[0]);
        if !(area.abs() > 1e-14 * diameter * diameter) {
            return Err(ElementError::DegenerateTriangle { area, diameter });
        }
        let jac = Matrix2::new(e1[0], e2[0], e1[1], e2[1]);
        let inv = jac.try_inverse().ok_or(ElementError::DegenerateTriangle { area, diameter })?;
        let g1 = [inv[(0, 0)], inv[(0, 1)]];
        let g2 = [inv[(1, 0)], inv[(1, 1)]];
        let grad_lambda = [[-g1[0] - g2[0], -g1[1] - g2[1]], g1, g2];

        let span = spanning_set(&grad_lambda);
        // dof[f][s]: functional f on spanning function s, with derivative
        // functionals scaled by the diameter
        let mut dof = LocalMatrix::zeros();
        for vertex in 0..3 {
            let mut l = [0.0; 3];
            l[vertex] = 1.0;
            let mt = MonomialTable::at(&l);
            for (s, c) in span.iter().enumerate() {
                let value: f64 = (0..N_MONOMIALS).map(|m| c[m] * mt.value[m]).sum();
                let mut grad = [0.0; 2];
                for i in 0..3 {
                    let d: f64 = (0..N_MONOMIALS).map(|m| c[m] * mt.first[i][m]).sum();
                    grad[0] += d * grad_lambda[i][0];
                    grad[1] += d * grad_lambda[i][1];
                }
                dof[(3 * vertex, s)] = value;
                dof[(3 * vertex + 1, s)] = diameter * grad[0];
                dof[(3 * vertex + 2, s)] = diameter * grad[1];
            }
        }
        let dof_inv = dof
            .try_inverse()
            .ok_or(ElementError::IllConditioned { condition: f64::INFINITY })?;
        let condition = norm1(&dof) * norm1(&dof_inv);
        if !(condition <= 1e12) {
            return Err(ElementError::IllConditioned { condition });
        }
        let span_matrix = SMatrix::<f64, N_LOCAL, N_MONOMIALS>::from_fn(|s, m| span[s][m]);
        // nodal function t = Σ_s dof_inv[s][t] φ_s, rescaled to unscaled
        // derivative functionals
        let mut coeffs = dof_inv.transpose() * span_matrix;
        for vertex in 0..3 {
            for r in 1..3 {
                let mut row = coeffs.row_mut(3 * vertex + r);
                row *= diameter;
            }
        }
        Ok(ShapeBasis {
            triangle,
            coeffs,
            grad_lambda,
            area: area.abs(),
            diameter,
            condition,
        })
    }

    /// Barycentric coordinates of a point given in the face frame.
    pub fn barycentric(&self, x: [f64; 2]) -> [f64; 3] {
        let d = sub(x, self.triangle[0]);
        let l1 = dot(self.grad_lambda[1], d);
        let l2 = dot(self.grad_lambda[2], d);
        [1.0 - l1 - l2, l1, l2]
    }

    /// Face-frame point at barycentric coordinates.
    pub fn point(&self, l: &[f64; 3]) -> [f64; 2] {
        let t = &self.triangle;
        [
            l[0] * t[0][0] + l[1] * t[1][0] + l[2] * t[2][0],
            l[0] * t[0][1] + l[1] * t[1][1] + l[2] * t[2][1],
        ]
    }

    pub fn eval_table(&self, mt: &MonomialTable) -> BasisValues {
        let mut out = BasisValues {
            value: [0.0; N_LOCAL],
            grad: [[0.0; 2]; N_LOCAL],
            lap: [0.0; N_LOCAL],
        };
        let gl = &self.grad_lambda;
        let mut gg = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                gg[i][j] = dot(gl[i], gl[j]);
            }
        }
        for t in 0..N_LOCAL {
            let c = self.coeffs.row(t);
            let contract = |v: &[f64; N_MONOMIALS]| -> f64 { (0..N_MONOMIALS).map(|m| c[m] * v[m]).sum() };
            out.value[t] = contract(&mt.value);
            let mut g = [0.0; 2];
            for i in 0..3 {
                let d = contract(&mt.first[i]);
                g[0] += d * gl[i][0];
                g[1] += d * gl[i][1];
            }
            out.grad[t] = g;
            let mut lap = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    lap += contract(&mt.second[i][j]) * gg[i][j];
                }
            }
            out.lap[t] = lap;
        }
        out
    }

    pub fn eval(&self, l: &[f64; 3]) -> BasisValues {
        self.eval_table(&MonomialTable::at(l))
    }

    pub fn eval_basis(&self, points: &[[f64; 3]]) -> Vec<BasisValues> {
        points.iter().map(|l| self.eval(l)).collect()
    }

    /// Value, gradient and Laplacian of `Σ coeffs_t N_t` at a point.
    pub fn eval_combination(&self, coeffs: &LocalVector, l: &[f64; 3]) -> (f64, [f64; 2], f64) {
        let b = self.eval(l);
        let mut v = 0.0;
        let mut g = [0.0; 2];
        let mut lap = 0.0;
        for t in 0..N_LOCAL {
            v += coeffs[t] * b.value[t];
            g[0] += coeffs[t] * b.grad[t][0];
            g[1] += coeffs[t] * b.grad[t][1];
            lap += coeffs[t] * b.lap[t];
        }
        (v, g, lap)
    }

    /// Outward unit normal of local edge `i` (opposite vertex `i`).
    pub fn edge_normal(&self, i: usize) -> [f64; 2] {
        let g = self.grad_lambda[i];
        let n = dot(g, g).sqrt();
        [-g[0] / n, -g[1] / n]
    }

    /// `|mean of ∂v/∂n over edge i − average of ∂v/∂n at its endpoints|` for
    /// `v = Σ coeffs_t N_t`.
    pub fn edge_mean_residual(&self, edge: usize, coeffs: &LocalVector) -> f64 {
        let (a, b) = ((edge + 1) % 3, (edge + 2) % 3);
        let n = self.edge_normal(edge);
        let dn = |l: [f64; 3]| dot(self.eval_combination(coeffs, &l).1, n);
        let rule = edge_gauss4();
        let mut mean = 0.0;
        for (t, w) in rule.points.iter().zip(&rule.weights) {
            let mut l = [0.0; 3];
            l[a] = 1.0 - t;
            l[b] = *t;
            mean += w * dn(l);
        }
        let mut la = [0.0; 3];
        la[a] = 1.0;
        let mut lb = [0.0; 3];
        lb[b] = 1.0;
        (mean - 0.5 * (dn(la) + dn(lb))).abs()
    }

    /// Local DoF vector of a function with given vertex values and face-frame
    /// gradients.
    pub fn dofs_from(values: [f64; 3], grads: [[f64; 2]; 3]) -> LocalVector {
        let mut v = LocalVector::zeros();
        for k in 0..3 {
            v[3 * k] = values[k];
            v[3 * k + 1] = grads[k][0];
            v[3 * k + 2] = grads[k][1];
        }
        v
    }
}
