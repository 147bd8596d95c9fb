//! Cavity eigenbasis data consumed by the mode-matching stage: eigenvalues,
//! boundary traces on the opening, and point values at its center.

use serde::{Deserialize, Serialize};

/// Where a basis came from; recorded on overlap tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Analytic,
    FemTrace,
}

/// Linear segment of a piecewise-linear trace: value `v0` at `y0`, `v1` at `y1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinSeg {
    pub y0: f64,
    pub y1: f64,
    pub v0: f64,
    pub v1: f64,
}

/// Restriction of a cavity eigenfunction to the opening, in a form that
/// admits closed-form integrals against the waveguide profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TraceFn {
    /// Exact trace of a rectangle mode: `amp * cos(omega * y + theta)`.
    Cosine { amp: f64, omega: f64, theta: f64 },
    /// P1 finite-element trace, one segment per mesh edge on the opening.
    PiecewiseLinear { segs: Vec<LinSeg> },
}

/// `int_a^b cos(k y + t) dy`, safe at `k = 0`.
pub(crate) fn cos_integral(a: f64, b: f64, k: f64, t: f64) -> f64 {
    if k.abs() * (b - a).abs() < 1e-12 {
        // cos is constant to within rounding over the interval
        (b - a) * (t + 0.5 * k * (a + b)).cos()
    } else {
        ((k * b + t).sin() - (k * a + t).sin()) / k
    }
}

/// `int_a^b (linear interpolant) * cos(k y + t) dy`, safe at `k = 0`.
pub(crate) fn linear_cos_integral(a: f64, b: f64, va: f64, vb: f64, k: f64, t: f64) -> f64 {
    let len = b - a;
    if len == 0.0 {
        return 0.0;
    }
    let slope = (vb - va) / len;
    // linear(y) = c0 + c1 * y
    let c1 = slope;
    let c0 = va - slope * a;
    if k.abs() * len.abs() < 1e-12 {
        let ym = 0.5 * (a + b);
        return (c0 + c1 * ym) * (k * ym + t).cos() * len;
    }
    let primitive = |y: f64| {
        c0 * (k * y + t).sin() / k + c1 * ((k * y + t).cos() / (k * k) + y * (k * y + t).sin() / k)
    };
    primitive(b) - primitive(a)
}

impl TraceFn {
    pub fn value(&self, y: f64) -> f64 {
        match self {
            TraceFn::Cosine { amp, omega, theta } => amp * (omega * y + theta).cos(),
            TraceFn::PiecewiseLinear { segs } => {
                for s in segs {
                    if y >= s.y0 - 1e-14 && y <= s.y1 + 1e-14 {
                        let t = if s.y1 > s.y0 {
                            (y - s.y0) / (s.y1 - s.y0)
                        } else {
                            0.0
                        };
                        return s.v0 + t * (s.v1 - s.v0);
                    }
                }
                0.0
            }
        }
    }

    /// Exact integral of the trace against the waveguide profile `phi_j`
    /// over the opening `(-h/2, h/2)`; no quadrature involved.
    pub fn overlap_phi(&self, j: usize, h: f64) -> f64 {
        let (kj, tj, amp_j) = if j == 0 {
            (0.0, 0.0, (1.0 / h).sqrt())
        } else {
            let jf = j as f64;
            (
                jf * std::f64::consts::PI / h,
                jf * std::f64::consts::PI / 2.0,
                (2.0 / h).sqrt(),
            )
        };
        match self {
            TraceFn::Cosine { amp, omega, theta } => {
                // cos(w y + t) cos(kj y + tj)
                //   = [cos((w - kj) y + t - tj) + cos((w + kj) y + t + tj)] / 2
                let half = 0.5
                    * (cos_integral(-h / 2.0, h / 2.0, omega - kj, theta - tj)
                        + cos_integral(-h / 2.0, h / 2.0, omega + kj, theta + tj));
                amp * amp_j * half
            }
            TraceFn::PiecewiseLinear { segs } => {
                let mut acc = 0.0;
                for s in segs {
                    acc += linear_cos_integral(s.y0, s.y1, s.v0, s.v1, kj, tj);
                }
                amp_j * acc
            }
        }
    }

    /// `int_{-h/2}^{h/2} trace(y)^2 dy`, closed form.
    pub fn l2_norm_sq(&self, h: f64) -> f64 {
        match self {
            TraceFn::Cosine { amp, omega, theta } => {
                0.5 * amp
                    * amp
                    * (h + cos_integral(-h / 2.0, h / 2.0, 2.0 * omega, 2.0 * theta))
            }
            TraceFn::PiecewiseLinear { segs } => segs
                .iter()
                .map(|s| (s.y1 - s.y0) / 3.0 * (s.v0 * s.v0 + s.v0 * s.v1 + s.v1 * s.v1))
                .sum(),
        }
    }

    /// L2 defect of oddness about `y = 0`, normalized by the trace norm.
    /// Zero for a perfectly odd trace.
    pub fn odd_defect(&self, h: f64) -> f64 {
        // ||even part||^2 = (||f||^2 + <f, f(-.)>)/2, via closed forms.
        let norm_sq = self.l2_norm_sq(h);
        if norm_sq == 0.0 {
            return 1.0;
        }
        let cross = self.mirror_inner(h);
        let even_sq = 0.5 * (norm_sq + cross);
        (even_sq.max(0.0) / norm_sq).sqrt()
    }

    /// `int trace(y) trace(-y) dy` over the opening.
    fn mirror_inner(&self, h: f64) -> f64 {
        match self {
            TraceFn::Cosine { amp, omega, theta } => {
                // cos(w y + t) cos(-w y + t) = [cos(2 w y) + cos(2 t)] / 2
                0.5 * amp
                    * amp
                    * (cos_integral(-h / 2.0, h / 2.0, 2.0 * omega, 0.0)
                        + h * (2.0 * theta).cos())
            }
            TraceFn::PiecewiseLinear { segs } => {
                // Piecewise-linear in y; sample the mirrored value per segment
                // endpoint and integrate the product of the two interpolants
                // exactly on the overlaid grid.
                let mut acc = 0.0;
                for s in segs {
                    // product of two linear functions on [y0, y1]:
                    // f(y) interpolates (v0, v1), g(y) interpolates the
                    // mirrored trace at the same endpoints; exact when the
                    // mirror grid aligns (symmetric meshes), adequate as a
                    // parity diagnostic otherwise.
                    let g0 = self.value(-s.y0);
                    let g1 = self.value(-s.y1);
                    let len = s.y1 - s.y0;
                    acc += len / 6.0
                        * (2.0 * s.v0 * g0 + 2.0 * s.v1 * g1 + s.v0 * g1 + s.v1 * g0);
                }
                acc
            }
        }
    }
}

/// Labeled cavity eigenpairs at one value of the scan parameter, carrying
/// everything the junction coupling needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CavityBasis {
    pub delta: f64,
    /// Eigenvalues by branch label (ascending at the reference point of the
    /// sweep; labels follow branches through crossings, not sorted order).
    pub lambdas: Vec<f64>,
    /// Traces of the corresponding eigenfunctions on the opening.
    pub traces: Vec<TraceFn>,
    /// Eigenfunction values at the opening center `o`.
    pub origin_values: Vec<f64>,
    pub provenance: Provenance,
}

impl CavityBasis {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn num_integral<F: Fn(f64) -> f64>(a: f64, b: f64, f: F) -> f64 {
        // Composite Simpson, plenty for smooth integrands in tests.
        let n = 4000;
        let dx = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * dx;
            s += if i % 2 == 0 { 2.0 } else { 4.0 } * f(x);
        }
        s * dx / 3.0
    }

    #[test]
    fn linear_cos_integral_matches_quadrature() {
        let (a, b, va, vb, k, t) = (-0.3, 0.5, 1.2, -0.7, 9.4, 0.33);
        let exact = linear_cos_integral(a, b, va, vb, k, t);
        let num = num_integral(a, b, |y| {
            let lam = (y - a) / (b - a);
            (va + lam * (vb - va)) * (k * y + t).cos()
        });
        assert!((exact - num).abs() < 1e-10, "{exact} vs {num}");
    }

    #[test]
    fn cosine_overlap_matches_quadrature() {
        let h = 2.0 * std::f64::consts::PI / 9.0;
        let tr = TraceFn::Cosine {
            amp: 0.8,
            omega: 3.0,
            theta: 0.4,
        };
        for j in 0..6 {
            let exact = tr.overlap_phi(j, h);
            let num = num_integral(-h / 2.0, h / 2.0, |y| {
                let phi = if j == 0 {
                    (1.0 / h).sqrt()
                } else {
                    (2.0 / h).sqrt()
                        * ((j as f64) * std::f64::consts::PI * (y / h + 0.5)).cos()
                };
                tr.value(y) * phi
            });
            assert!((exact - num).abs() < 1e-10, "j = {j}: {exact} vs {num}");
        }
    }

    #[test]
    fn odd_trace_has_zero_defect() {
        let h = 0.7;
        // sin(3y) is odd: cos(3y + pi/2) = -sin(3y)
        let tr = TraceFn::Cosine {
            amp: 1.0,
            omega: 3.0,
            theta: std::f64::consts::FRAC_PI_2,
        };
        assert!(tr.odd_defect(h) < 1e-12);
        let even = TraceFn::Cosine {
            amp: 1.0,
            omega: 3.0,
            theta: 0.0,
        };
        assert!(even.odd_defect(h) > 0.9);
    }
}
