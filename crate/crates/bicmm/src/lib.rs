//! Mode-matching solver for Friedrich-Wintgen bound states in the continuum
//! (BICs) in two-dimensional cavity-waveguide structures.
//!
//! The pipeline: compute Neumann eigenpairs of the closed cavity (closed
//! form or P1 finite elements), couple them to the waveguide's transverse
//! modes across the opening, reduce the resulting linear system down to two
//! governing scalar equations, and locate BICs as intersections of the two
//! implicit curves they define in the (delta, mu) plane. A complex resonance
//! tracer provides the independent certificate that the imaginary part of
//! the tracked resonance vanishes at the located point.

pub mod basis;
pub mod bic;
pub mod cavity_analytic;
pub mod error;
pub mod fem;
pub mod geom;
pub mod modematch;
pub mod presets;
pub mod problem;
pub mod resonance;
pub mod sweep;

pub use basis::{CavityBasis, Provenance, TraceFn};
pub use error::{Error, Result};
pub use problem::{validate_spec, Perturbation, ProblemSpec, Tolerances, Truncation, ValidatedSpec};
