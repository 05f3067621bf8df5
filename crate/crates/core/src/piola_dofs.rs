//! Global degrees of freedom: per vertex one value and two gradient
//! components in the frame of the anchor face, plus the transfer of anchor
//! gradients to the other incident faces.

use nalgebra::Matrix2;
use thiserror::Error;

use crate::geometry::{mu_h_from_probe, GeometryError, Mat3, SurfaceModel, Vec3};
use crate::mesh::{FaceFrame, SurfaceMesh};
use crate::nzt_element::{LocalMatrix, LocalVector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DofError {
    #[error("normals of anchor and face are nearly orthogonal or flipped (cosine {cosine})")]
    NearTangentFlip { cosine: f64 },
}

/// Threshold on `ν_{K_a}·ν_K` below which the transfer is rejected.
pub const FLIP_THRESHOLD: f64 = 0.1;

/// `(ν_a·ν_K) I − ν_a ⊗ ν_K`, mapping tangent vectors of the anchor plane to
/// the plane of `K`.
pub fn mka_matrix(nu_anchor: &Vec3, nu_k: &Vec3) -> Result<Mat3, DofError> {
    let c = nu_anchor.dot(nu_k);
    if !(c > FLIP_THRESHOLD) {
        return Err(DofError::NearTangentFlip { cosine: c });
    }
    Ok(Mat3::identity() * c - nu_anchor * nu_k.transpose())
}

/// `F_Kᵀ M F_{K_a}`: face-frame gradient components from anchor-frame ones.
pub fn gradient_block(anchor: &FaceFrame, face: &FaceFrame) -> Result<Matrix2<f64>, DofError> {
    let m = mka_matrix(&anchor.normal, &face.normal)?;
    Ok(face.basis().transpose() * m * anchor.basis())
}

#[derive(Debug, Clone)]
pub struct DofSystem {
    n_vertices: usize,
    faces: Vec<[usize; 3]>,
    blocks: Vec<[Matrix2<f64>; 3]>,
    anchor_frames: Vec<FaceFrame>,
}

impl DofSystem {
    pub fn new(mesh: &SurfaceMesh) -> Result<Self, DofError> {
        let mut blocks = Vec::with_capacity(mesh.n_faces());
        for (f, tri) in mesh.faces().iter().enumerate() {
            let mut b = [Matrix2::identity(); 3];
            for k in 0..3 {
                let anchor = mesh.anchor(tri[k]);
                if anchor != f {
                    b[k] = gradient_block(mesh.frame(anchor), mesh.frame(f))?;
                }
            }
            blocks.push(b);
        }
        Ok(DofSystem {
            n_vertices: mesh.n_vertices(),
            faces: mesh.faces().to_vec(),
            blocks,
            anchor_frames: mesh.anchors().iter().map(|&k| *mesh.frame(k)).collect(),
        })
    }

    pub fn n_dofs(&self) -> usize {
        3 * self.n_vertices
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn value_dof(v: usize) -> usize {
        3 * v
    }

    pub fn gradient_dofs(v: usize) -> [usize; 2] {
        [3 * v + 1, 3 * v + 2]
    }

    pub fn anchor_frame(&self, v: usize) -> &FaceFrame {
        &self.anchor_frames[v]
    }

    /// Gradient transfer block of local vertex `k` of `face`.
    pub fn block(&self, face: usize, k: usize) -> &Matrix2<f64> {
        &self.blocks[face][k]
    }

    /// Global indices of the 9 local DoFs of a face.
    pub fn face_dofs(&self, face: usize) -> [usize; 9] {
        let t = self.faces[face];
        std::array::from_fn(|i| 3 * t[i / 3] + i % 3)
    }

    /// `T` with `local = T · global[face_dofs]`.
    pub fn local_transfer(&self, face: usize) -> LocalMatrix {
        let mut t = LocalMatrix::zeros();
        for k in 0..3 {
            t[(3 * k, 3 * k)] = 1.0;
            let b = &self.blocks[face][k];
            for r in 0..2 {
                for c in 0..2 {
                    t[(3 * k + 1 + r, 3 * k + 1 + c)] = b[(r, c)];
                }
            }
        }
        t
    }

    /// Local (face-frame) DoFs of a global coefficient vector.
    pub fn local_coefficients(&self, face: usize, global: &[f64]) -> LocalVector {
        let idx = self.face_dofs(face);
        let g = LocalVector::from_fn(|i, _| global[idx[i]]);
        let mut out = g;
        for k in 0..3 {
            let b = &self.blocks[face][k];
            out[3 * k + 1] = b[(0, 0)] * g[3 * k + 1] + b[(0, 1)] * g[3 * k + 2];
            out[3 * k + 2] = b[(1, 0)] * g[3 * k + 1] + b[(1, 1)] * g[3 * k + 2];
        }
        out
    }

    /// Coefficients of the constant function 1.
    pub fn kernel(&self) -> Vec<f64> {
        (0..self.n_dofs()).map(|i| if i % 3 == 0 { 1.0 } else { 0.0 }).collect()
    }
}

/// `μ_h [I − ν⊗ν_h/(ν·ν_h)] [I − dH]⁻¹ g` at a point `x` of the facet with
/// frame `face`, where `g` is tangent to γ at `p(x)`.
pub fn surface_piola_pull(surface: &SurfaceModel, face: &FaceFrame, g: &Vec3, x: &Vec3) -> Result<Vec3, GeometryError> {
    let probe = surface.probe(x)?;
    let nu = probe.normal;
    let nu_h = face.normal;
    let mu = mu_h_from_probe(&probe, &face.t1, &face.t2);
    let shape = Mat3::identity() - probe.weingarten * probe.distance;
    let y = shape
        .lu()
        .solve(g)
        .ok_or_else(|| GeometryError::InvalidSurface("I - dH is singular".into()))?;
    Ok((y - nu * (nu_h.dot(&y) / nu.dot(&nu_h))) * mu)
}
