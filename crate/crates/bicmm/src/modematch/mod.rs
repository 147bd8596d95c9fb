//! Waveguide basis, junction overlaps, and the reduction of the coupled
//! linear system to the two governing scalar equations.

pub mod overlap;
pub mod reduce;
pub mod waveguide;

pub use overlap::{overlaps, OverlapTable};
pub use reduce::{build_reduction, full_matrix, reduce_via_schur, ReducedSystem};
pub use waveguide::{alpha, WaveguideBasis};
