//! Ready-made problem descriptions: the two worked six-disk examples and
//! the homogeneous rectangles used by the scaling and symmetry studies.

use crate::geom::Inclusion;
use crate::problem::{Perturbation, ProblemSpec, Tolerances, Truncation};
use std::f64::consts::PI;

/// Six-disk cavity, waveguide width `h = 2 pi / 9`, index sweep
/// `n in [1.40, 1.52]`. The tracked pair is the sixth and seventh
/// eigenvalue branches counting the Neumann kernel as the first (0-based
/// indices 5 and 6), which cross near `n = 1.461` at `lambda = 1.695`.
pub fn example1() -> ProblemSpec {
    let mut inclusions = Vec::new();
    for &cy in &[PI / 3.0, -PI / 3.0, -PI] {
        for &sgn in &[1.0, -1.0] {
            inclusions.push(Inclusion {
                center: [-PI / 2.0 + sgn * 0.8, cy],
                radius: 0.48,
                region_id: 1,
            });
        }
    }
    ProblemSpec {
        cavity_corner_lo: [0.0, -4.0 * PI / 3.0],
        cavity_corner_hi: [-PI, 2.0 * PI / 3.0],
        inclusions,
        waveguide_width: 2.0 * PI / 9.0,
        clear_zone: None,
        perturbation: Perturbation::IndexSweep {
            region_ids: vec![1],
            n_base: 0.0,
        },
        delta_range: [1.40, 1.52],
        mu_band: None,
        truncation: Truncation {
            m_cav: 60,
            j_wg: 40,
            m: 7,
        },
        tolerances: Tolerances::default(),
    }
}

/// Same cavity with the wider waveguide `h = 4 pi / 9`.
pub fn example2() -> ProblemSpec {
    let mut spec = example1();
    spec.waveguide_width = 4.0 * PI / 9.0;
    spec.delta_range = [1.30, 1.46];
    spec
}

/// Homogeneous `pi x 2 pi` rectangle, opening centered on the symmetry
/// axis, under horizontal scaling. The branches `(1,0)` and `(0,2)` are
/// degenerate at `delta = 0` and cross transversally as the cavity
/// stretches; both couple to the radiation channel.
pub fn scaling_rectangle() -> ProblemSpec {
    ProblemSpec {
        cavity_corner_lo: [0.0, -PI],
        cavity_corner_hi: [-PI, PI],
        inclusions: Vec::new(),
        waveguide_width: 2.0 * PI / 9.0,
        clear_zone: None,
        perturbation: Perturbation::BoundaryScaling { c_r: 1.0 },
        delta_range: [-0.12, 0.12],
        mu_band: None,
        truncation: Truncation {
            m_cav: 60,
            j_wg: 40,
            m: 4,
        },
        tolerances: Tolerances::default(),
    }
}

/// The same symmetric rectangle used for symmetry-protected studies.
pub fn symmetric_rectangle() -> ProblemSpec {
    scaling_rectangle()
}

/// Homogeneous copy of the example-1 hull (no inclusions), opening off the
/// symmetry line so that every low mode couples: the fixture for the
/// truncation and forcing diagnostics.
pub fn offset_rectangle() -> ProblemSpec {
    ProblemSpec {
        cavity_corner_lo: [0.0, -4.0 * PI / 3.0],
        cavity_corner_hi: [-PI, 2.0 * PI / 3.0],
        inclusions: Vec::new(),
        waveguide_width: 2.0 * PI / 9.0,
        clear_zone: None,
        perturbation: Perturbation::IndexSweep {
            region_ids: vec![],
            n_base: 1.0,
        },
        delta_range: [-0.1, 0.1],
        mu_band: None,
        truncation: Truncation {
            m_cav: 60,
            j_wg: 40,
            m: 7,
        },
        tolerances: Tolerances::default(),
    }
}
