//! Stabilized nonconforming New-Zienkiewicz-type (NZT) finite elements for
//! the surface biharmonic problem `Δ_γ² u = f` on closed surfaces.

pub mod analysis;
pub mod assembly;
pub mod experiments;
pub mod geometry;
pub mod io_formats;
pub mod jet;
pub mod mesh;
pub mod multilevel;
pub mod nzt_element;
pub mod piola_dofs;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod surface_calculus;
