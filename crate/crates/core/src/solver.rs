//! Solution of the singular but consistent system `A u = b` on the
//! mean-zero subspace `mᵀu = 0`.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use thiserror::Error;

use crate::assembly::SparseSystem;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMethod {
    ProjectedCg,
    DenseFallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    Diagonal,
    /// Inverse of the 3×3 diagonal block of each vertex.
    VertexBlock,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub method: SolverMethod,
    pub rel_tol: f64,
    /// `None` means `max(20 √n + 2000, n)`; Jacobi-PCG on this operator needs
    /// roughly `0.27 n` iterations at 30k unknowns.
    pub max_iter: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: SolverMethod::ProjectedCg,
            rel_tol: 1e-10,
            max_iter: None,
            preconditioner: Preconditioner::Diagonal,
        }
    }
}

impl SolverConfig {
    pub fn max_iter_for(&self, n: usize) -> usize {
        self.max_iter
            .unwrap_or_else(|| ((20.0 * (n as f64).sqrt()).ceil() as usize + 2000).max(n))
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-2) {
            return Err(SolverError::InvalidConfig(format!(
                "rel_tol must lie in (0, 1e-2], got {}",
                self.rel_tol
            )));
        }
        if self.max_iter == Some(0) {
            return Err(SolverError::InvalidConfig("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("no convergence after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("operator is singular beyond the constants (after {iterations} iterations, relative residual {residual:e})")]
    SingularBeyondKernel { iterations: usize, residual: f64 },
    #[error("dense solver limited to n <= {limit}, got {n}")]
    TooLarge { n: usize, limit: usize },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

pub const DENSE_LIMIT: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub u: Vec<f64>,
    pub iterations: usize,
    /// `‖A u − b‖ / ‖b‖`
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Removes the `k` component of `r` (orthogonal projection).
fn deflate(r: &mut [f64], k: &[f64], kk: f64) {
    let c = dot(r, k) / kk;
    axpy(-c, k, r);
}

/// `u ← u − (mᵀu / mᵀk) k`
fn enforce_mean_zero(u: &mut [f64], sys: &SparseSystem) {
    let c = dot(&sys.m, u) / dot(&sys.m, &sys.kernel);
    axpy(-c, &sys.kernel, u);
}

fn true_residual(sys: &SparseSystem, u: &[f64]) -> Vec<f64> {
    sys.a.residual_accurate(u, &sys.b)
}

/// `‖A u − b‖ / ‖b‖` evaluated with compensated sums.
pub fn relative_residual(sys: &SparseSystem, u: &[f64]) -> f64 {
    norm(&true_residual(sys, u)) / norm(&sys.b)
}

pub fn solve(sys: &SparseSystem, config: &SolverConfig) -> Result<SolveOutcome, SolverError> {
    config.validate()?;
    let n = sys.b.len();
    let bnorm = norm(&sys.b);
    if bnorm == 0.0 {
        return Ok(SolveOutcome {
            u: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    match config.method {
        SolverMethod::ProjectedCg => projected_cg(sys, config, bnorm, &BlockJacobi::new(&sys.a, config.preconditioner)),
        SolverMethod::DenseFallback => dense_kkt(sys, bnorm),
    }
}

/// A symmetric positive (semi)definite approximation of `A⁻¹`.
pub trait Precondition {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

/// Inverse 3×3 vertex blocks: identity, the diagonal, or the full block.
#[derive(Debug, Clone)]
pub struct BlockJacobi {
    blocks: Vec<Matrix3<f64>>,
}

impl BlockJacobi {
    pub fn new(a: &CsrMatrix, kind: Preconditioner) -> Self {
        let inv = |d: f64| if d > 0.0 { 1.0 / d } else { 1.0 };
        let blocks = (0..a.n() / 3)
            .map(|v| {
                let o = 3 * v;
                match kind {
                    Preconditioner::None => Matrix3::identity(),
                    Preconditioner::Diagonal => {
                        Matrix3::from_diagonal(&Vector3::new(inv(a.get(o, o)), inv(a.get(o + 1, o + 1)), inv(a.get(o + 2, o + 2))))
                    }
                    Preconditioner::VertexBlock => {
                        let b = Matrix3::from_fn(|i, j| a.get(o + i, o + j));
                        b.cholesky().map(|c| c.inverse()).unwrap_or_else(Matrix3::identity)
                    }
                }
            })
            .collect();
        BlockJacobi { blocks }
    }
}

impl Precondition for BlockJacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for (v, b) in self.blocks.iter().enumerate() {
            let zv = b * Vector3::new(r[3 * v], r[3 * v + 1], r[3 * v + 2]);
            z[3 * v..3 * v + 3].copy_from_slice(zv.as_slice());
        }
    }
}

/// Projected CG with a caller-supplied preconditioner; `config.method` and
/// `config.preconditioner` are ignored.
pub fn solve_with(sys: &SparseSystem, config: &SolverConfig, pc: &dyn Precondition) -> Result<SolveOutcome, SolverError> {
    config.validate()?;
    let bnorm = norm(&sys.b);
    if bnorm == 0.0 {
        return Ok(SolveOutcome {
            u: vec![0.0; sys.b.len()],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    projected_cg(sys, config, bnorm, pc)
}

/// Consecutive true-residual restarts without halving the best residual
/// before CG gives up.
const STALLED_RESTARTS: usize = 5;

fn projected_cg(sys: &SparseSystem, config: &SolverConfig, bnorm: f64, pc: &dyn Precondition) -> Result<SolveOutcome, SolverError> {
    let n = sys.b.len();
    let max_iter = config.max_iter_for(n);
    let tol = config.rel_tol * bnorm;
    let k = &sys.kernel;
    let kk = dot(k, k);
    let precondition = |r: &[f64], z: &mut [f64]| {
        pc.apply(r, z);
        // keep search directions in the complement of the constants
        deflate(z, k, kk);
    };

    let mut u = vec![0.0; n];
    let mut r = sys.b.clone();
    deflate(&mut r, k, kk);
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    let mut rnorm = norm(&r);
    let mut best_true = f64::INFINITY;
    let mut stalled = 0;
    while iterations < max_iter {
        if rnorm <= tol {
            // confirm with the true residual, restart from it otherwise
            let mut tr = true_residual(sys, &u);
            let trn = norm(&tr);
            if trn <= tol {
                break;
            }
            // below the rounding floor of A u restarts stop paying off
            if trn < 0.5 * best_true {
                best_true = trn;
                stalled = 0;
            } else {
                stalled += 1;
                if stalled >= STALLED_RESTARTS {
                    break;
                }
            }
            deflate(&mut tr, k, kk);
            r = tr;
            precondition(&r, &mut z);
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            rnorm = norm(&r);
            if rnorm <= tol {
                // the remaining residual lies along the constants
                break;
            }
        }
        sys.a.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(SolverError::SingularBeyondKernel {
                iterations,
                residual: norm(&true_residual(sys, &u)) / bnorm,
            });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut u);
        axpy(-alpha, &ap, &mut r);
        deflate(&mut r, k, kk);
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rnorm = norm(&r);
        iterations += 1;
    }
    enforce_mean_zero(&mut u, sys);
    let relative_residual = norm(&true_residual(sys, &u)) / bnorm;
    if relative_residual > config.rel_tol {
        return Err(SolverError::NoConvergence {
            iterations,
            residual: relative_residual,
        });
    }
    Ok(SolveOutcome {
        u,
        iterations,
        relative_residual,
    })
}

/// LU on `[[A, m], [mᵀ, 0]] [u; λ] = [b; 0]`.
fn dense_kkt(sys: &SparseSystem, bnorm: f64) -> Result<SolveOutcome, SolverError> {
    let n = sys.b.len();
    if n > DENSE_LIMIT {
        return Err(SolverError::TooLarge { n, limit: DENSE_LIMIT });
    }
    let mut kkt = DMatrix::zeros(n + 1, n + 1);
    kkt.view_mut((0, 0), (n, n)).copy_from(&sys.a.to_dense());
    for i in 0..n {
        kkt[(i, n)] = sys.m[i];
        kkt[(n, i)] = sys.m[i];
    }
    let mut rhs = DVector::zeros(n + 1);
    rhs.rows_mut(0, n).copy_from_slice(&sys.b);
    let sol = kkt.lu().solve(&rhs).ok_or(SolverError::SingularBeyondKernel {
        iterations: 0,
        residual: 1.0,
    })?;
    let mut u: Vec<f64> = sol.rows(0, n).iter().copied().collect();
    enforce_mean_zero(&mut u, sys);
    let relative_residual = norm(&true_residual(sys, &u)) / bnorm;
    if !relative_residual.is_finite() || relative_residual > 1e-6 {
        return Err(SolverError::SingularBeyondKernel {
            iterations: 0,
            residual: relative_residual,
        });
    }
    Ok(SolveOutcome {
        u,
        iterations: 1,
        relative_residual,
    })
}
