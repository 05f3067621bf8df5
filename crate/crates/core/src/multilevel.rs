//! Geometric V-cycle over a uniform refinement hierarchy, used as a CG
//! preconditioner. Coarse functions are transferred by evaluating them at
//! the fine vertices; the coarsest level is solved exactly.

use nalgebra::{DMatrix, DVector};

use crate::assembly::edge_point_barycentric;
use crate::mesh::SurfaceMesh;
use crate::nzt_element::{ShapeBasis, N_LOCAL};
use crate::piola_dofs::{gradient_block, DofError, DofSystem};
use crate::solver::{Precondition, SolverError};
use crate::sparse::CsrMatrix;

/// Rectangular sparse map from coarse to fine coefficients, stored by fine
/// rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Prolongation {
    n_coarse: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl Prolongation {
    pub fn n_fine(&self) -> usize {
        self.rows.len()
    }

    pub fn n_coarse(&self) -> usize {
        self.n_coarse
    }

    pub fn apply(&self, coarse: &[f64], fine: &mut [f64]) {
        for (f, row) in fine.iter_mut().zip(&self.rows) {
            *f = row.iter().map(|&(j, w)| w * coarse[j]).sum();
        }
    }

    pub fn apply_transpose(&self, fine: &[f64], coarse: &mut [f64]) {
        coarse.iter_mut().for_each(|c| *c = 0.0);
        for (f, row) in fine.iter().zip(&self.rows) {
            for &(j, w) in row {
                coarse[j] += w * f;
            }
        }
    }
}

fn merged(mut row: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    row.sort_by_key(|e| e.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(row.len());
    for (j, w) in row {
        match out.last_mut() {
            Some(last) if last.0 == j => last.1 += w,
            _ => out.push((j, w)),
        }
    }
    out.retain(|e| e.1 != 0.0);
    out
}

/// Transfer from `coarse` to `fine = coarse.refine(..)`. Old vertices keep
/// their value and carry their gradient to the fine anchor plane; a midpoint
/// vertex takes the average over the two faces of its edge of the coarse
/// value and gradient at the edge midpoint.
pub fn prolongation(
    coarse: &SurfaceMesh,
    coarse_dofs: &DofSystem,
    coarse_bases: &[ShapeBasis],
    fine: &SurfaceMesh,
    fine_dofs: &DofSystem,
) -> Result<Prolongation, DofError> {
    let nvc = coarse.n_vertices();
    assert_eq!(fine.n_vertices(), nvc + coarse.n_edges(), "fine mesh is not a refinement of the coarse one");
    let mut rows = vec![Vec::new(); fine_dofs.n_dofs()];
    for v in 0..nvc {
        let g = gradient_block(coarse_dofs.anchor_frame(v), fine_dofs.anchor_frame(v))?;
        rows[3 * v].push((3 * v, 1.0));
        for r in 0..2 {
            rows[3 * v + 1 + r] = vec![(3 * v + 1, g[(r, 0)]), (3 * v + 2, g[(r, 1)])];
        }
    }
    for (eid, e) in coarse.edges().iter().enumerate() {
        let vf = nvc + eid;
        let target = fine_dofs.anchor_frame(vf);
        for k in 0..2 {
            let face = e.faces[k];
            let b = coarse_bases[face].eval(&edge_point_barycentric(coarse, eid, k, 0.5));
            let t = coarse_dofs.local_transfer(face);
            let idx = coarse_dofs.face_dofs(face);
            let g = gradient_block(coarse.frame(face), target)?;
            for s in 0..N_LOCAL {
                let (mut val, mut gx, mut gy) = (0.0, 0.0, 0.0);
                for l in 0..N_LOCAL {
                    val += b.value[l] * t[(l, s)];
                    gx += b.grad[l][0] * t[(l, s)];
                    gy += b.grad[l][1] * t[(l, s)];
                }
                rows[3 * vf].push((idx[s], 0.5 * val));
                rows[3 * vf + 1].push((idx[s], 0.5 * (g[(0, 0)] * gx + g[(0, 1)] * gy)));
                rows[3 * vf + 2].push((idx[s], 0.5 * (g[(1, 0)] * gx + g[(1, 1)] * gy)));
            }
        }
    }
    Ok(Prolongation {
        n_coarse: coarse_dofs.n_dofs(),
        rows: rows.into_iter().map(merged).collect(),
    })
}

struct Level {
    a: CsrMatrix,
    inv_diag: Vec<f64>,
}

/// Symmetric V-cycle: forward Gauss-Seidel before and backward after the
/// coarse correction, exact coarsest solve on the complement of the
/// constants.
pub struct MultilevelPreconditioner {
    levels: Vec<Level>,
    prolongations: Vec<Prolongation>,
    coarse: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    coarse_kernel: Vec<f64>,
    sweeps: usize,
}

/// Largest coarsest level factorized densely.
pub const COARSE_LIMIT: usize = 4000;

impl MultilevelPreconditioner {
    /// `matrices` from coarsest to finest; `prolongations[l]` maps level `l`
    /// to level `l + 1`. The value DoFs `3v` span the kernel on every level.
    pub fn new(matrices: Vec<CsrMatrix>, prolongations: Vec<Prolongation>, sweeps: usize) -> Result<Self, SolverError> {
        assert!(!matrices.is_empty());
        assert_eq!(prolongations.len() + 1, matrices.len());
        for (l, p) in prolongations.iter().enumerate() {
            assert_eq!(p.n_coarse(), matrices[l].n());
            assert_eq!(p.n_fine(), matrices[l + 1].n());
        }
        let a0 = &matrices[0];
        let n0 = a0.n();
        if n0 > COARSE_LIMIT {
            return Err(SolverError::TooLarge { n: n0, limit: COARSE_LIMIT });
        }
        let kernel: Vec<f64> = (0..n0).map(|i| if i % 3 == 0 { 1.0 } else { 0.0 }).collect();
        let kk = (n0 / 3) as f64;
        // A + α k kᵀ / (kᵀk) is definite when the constants are the only kernel
        let alpha = a0.diagonal().iter().fold(0.0f64, |m, d| m.max(*d));
        let mut dense = a0.to_dense();
        for i in (0..n0).step_by(3) {
            for j in (0..n0).step_by(3) {
                dense[(i, j)] += alpha / kk;
            }
        }
        let coarse = dense.cholesky().ok_or(SolverError::SingularBeyondKernel {
            iterations: 0,
            residual: f64::NAN,
        })?;
        let levels = matrices
            .into_iter()
            .map(|a| {
                let inv_diag = a.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 }).collect();
                Level { a, inv_diag }
            })
            .collect();
        Ok(MultilevelPreconditioner {
            levels,
            prolongations,
            coarse,
            coarse_kernel: kernel,
            sweeps,
        })
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    fn gauss_seidel(level: &Level, x: &mut [f64], r: &[f64], forward: bool) {
        let n = x.len();
        let mut step = |i: usize| {
            let mut s = r[i];
            for (j, v) in level.a.row(i) {
                s -= v * x[j];
            }
            x[i] += s * level.inv_diag[i];
        };
        if forward {
            (0..n).for_each(&mut step);
        } else {
            (0..n).rev().for_each(&mut step);
        }
    }

    fn cycle(&self, l: usize, r: &[f64], x: &mut [f64]) {
        if l == 0 {
            let k = &self.coarse_kernel;
            let kk: f64 = k.iter().sum();
            let c = r.iter().zip(k).map(|(a, b)| a * b).sum::<f64>() / kk;
            let rhs = DVector::from_iterator(r.len(), r.iter().zip(k).map(|(a, b)| a - c * b));
            let sol = self.coarse.solve(&rhs);
            x.copy_from_slice(sol.as_slice());
            return;
        }
        let level = &self.levels[l];
        x.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..self.sweeps {
            Self::gauss_seidel(level, x, r, true);
        }
        let mut res = level.a.matvec(x);
        for (ri, bi) in res.iter_mut().zip(r) {
            *ri = bi - *ri;
        }
        let p = &self.prolongations[l - 1];
        let mut rc = vec![0.0; p.n_coarse()];
        p.apply_transpose(&res, &mut rc);
        let mut xc = vec![0.0; p.n_coarse()];
        self.cycle(l - 1, &rc, &mut xc);
        let mut corr = vec![0.0; p.n_fine()];
        p.apply(&xc, &mut corr);
        for (xi, ci) in x.iter_mut().zip(&corr) {
            *xi += ci;
        }
        for _ in 0..self.sweeps {
            Self::gauss_seidel(level, x, r, false);
        }
    }
}

impl Precondition for MultilevelPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.cycle(self.levels.len() - 1, r, z);
    }
}

/// Dense `P` for tests.
pub fn prolongation_dense(p: &Prolongation) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(p.n_fine(), p.n_coarse());
    for (i, row) in p.rows.iter().enumerate() {
        for &(j, w) in row {
            d[(i, j)] = w;
        }
    }
    d
}
