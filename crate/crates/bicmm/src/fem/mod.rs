//! P1 finite-element Neumann eigensolver for the cavity: meshing, assembly,
//! generalized eigensolve, branch tracking and boundary traces.

pub mod assemble;
pub mod band;
pub mod eigen;
pub mod mesh;
pub mod trace;
pub mod track;

pub use assemble::{assemble, grad_norm_sq_in};
pub use band::SymBand;
pub use eigen::{rel_residual, solve_eigen, EigenBasis, SolveOpts};
pub use mesh::{build_mesh, build_mesh_with_snaps, Mesh};
pub use trace::{boundary_trace, to_cavity_basis, PointLocator};
pub use track::{align_to_reference, sorted_order, track_branches, StepReport};
