//! Closed-form Neumann eigenpairs and opening overlaps for homogeneous
//! rectangular cavities. Serves as the exact oracle for the finite-element
//! path and as the engine for scaling perturbations and symmetry-protected
//! studies.

use crate::basis::{CavityBasis, Provenance, TraceFn};
use crate::geom::Rect;

/// One Neumann mode of a homogeneous rectangle `(-L, 0) x (y_lo, y_lo + W)`.
///
/// `psi_{pq}(x) = norm_const * cos(p pi (x1 + L) / L) * cos(q pi (x2 + y0) / W)`
/// with `y0 = -y_lo` the offset of the opening center from the lower edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectMode {
    pub p: usize,
    pub q: usize,
    pub l: f64,
    pub w: f64,
    pub y0: f64,
    pub lambda: f64,
    pub norm_const: f64,
}

impl RectMode {
    pub fn new(p: usize, q: usize, l: f64, w: f64, y0: f64) -> Self {
        let pi = std::f64::consts::PI;
        let lambda = (p as f64 * pi / l).powi(2) + (q as f64 * pi / w).powi(2);
        let cp = if p == 0 { 1.0 } else { 2.0 };
        let cq = if q == 0 { 1.0 } else { 2.0 };
        RectMode {
            p,
            q,
            l,
            w,
            y0,
            lambda,
            norm_const: (cp * cq / (l * w)).sqrt(),
        }
    }

    /// Eigenfunction value at a point of the cavity.
    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        let pi = std::f64::consts::PI;
        self.norm_const
            * (self.p as f64 * pi * (x1 + self.l) / self.l).cos()
            * (self.q as f64 * pi * (x2 + self.y0) / self.w).cos()
    }

    /// Trace on the `x1 = 0` wall as a closed-form cosine.
    pub fn trace(&self) -> TraceFn {
        let pi = std::f64::consts::PI;
        let sign = if self.p % 2 == 0 { 1.0 } else { -1.0 };
        TraceFn::Cosine {
            amp: self.norm_const * sign,
            omega: self.q as f64 * pi / self.w,
            theta: self.q as f64 * pi * self.y0 / self.w,
        }
    }

    /// Value at the opening center `o = (0, 0)`.
    pub fn at_origin(&self) -> f64 {
        self.eval(0.0, 0.0)
    }
}

/// First `count` Neumann eigenpairs of the rectangle, eigenvalues ascending,
/// ties broken by `(p, q)` lexicographic order.
pub fn rect_eigenpairs(l: f64, w: f64, count: usize) -> Vec<RectMode> {
    assert!(l > 0.0 && w > 0.0 && count >= 1);
    let pi = std::f64::consts::PI;
    // Weyl counting gives a first guess for the eigenvalue bound; grow it
    // until the bound provably covers `count` modes.
    let mut bound = 4.0 * pi * (count as f64 + 2.0) / (l * w)
        + (pi * (l + w) / (l * w)).powi(2)
        + 1.0;
    loop {
        let p_max = (l * bound.sqrt() / pi).ceil() as usize;
        let q_max = (w * bound.sqrt() / pi).ceil() as usize;
        let mut modes = Vec::new();
        for p in 0..=p_max {
            for q in 0..=q_max {
                let lam = (p as f64 * pi / l).powi(2) + (q as f64 * pi / w).powi(2);
                if lam <= bound {
                    modes.push((lam, p, q));
                }
            }
        }
        if modes.len() >= count {
            modes.sort_by(|a, b| {
                a.0.partial_cmp(&b.0)
                    .unwrap()
                    .then(a.1.cmp(&b.1))
                    .then(a.2.cmp(&b.2))
            });
            return modes
                .into_iter()
                .take(count)
                .map(|(_, p, q)| RectMode::new(p, q, l, w, 0.0))
                .collect();
        }
        bound *= 2.0;
    }
}

/// Exact opening overlap `(phi_j, psi_mode)_{Gamma_h}`; sums of sine terms,
/// no quadrature.
pub fn overlap_rect(mode: &RectMode, j: usize, h: f64) -> f64 {
    mode.trace().overlap_phi(j, h)
}

/// Analytic basis for a homogeneous rectangle whose opening is centered at
/// the origin of the `x1 = 0` wall.
///
/// Under `BoundaryScaling` the cavity length is `stretch * L`; `q = 0`
/// eigenvalues then scale by `stretch^{-2}` exactly while the wall trace
/// keeps its transverse profile.
pub fn rect_basis(cavity: &Rect, stretch: f64, delta: f64, count: usize) -> CavityBasis {
    let l = cavity.width() * stretch;
    let w = cavity.height();
    let y0 = -cavity.y_lo;
    let modes: Vec<RectMode> = rect_eigenpairs(l, w, count)
        .into_iter()
        .map(|m| RectMode { y0, ..m })
        .collect();
    CavityBasis {
        delta,
        lambdas: modes.iter().map(|m| m.lambda).collect(),
        traces: modes.iter().map(|m| m.trace()).collect(),
        origin_values: modes.iter().map(|m| m.at_origin()).collect(),
        provenance: Provenance::Analytic,
    }
}

/// The modes backing `rect_basis`, for field reconstruction.
pub fn rect_basis_modes(cavity: &Rect, stretch: f64, count: usize) -> Vec<RectMode> {
    let l = cavity.width() * stretch;
    let w = cavity.height();
    let y0 = -cavity.y_lo;
    rect_eigenpairs(l, w, count)
        .into_iter()
        .map(|m| RectMode { y0, ..m })
        .collect()
}
