//! Transverse waveguide modes and longitudinal wavenumbers.

use num_complex::Complex64;

/// Longitudinal wavenumber `alpha_j = sqrt(mu - (j pi / h)^2)`.
///
/// The branch is the analytic continuation from the single-mode band on the
/// real axis: the propagating channel `j = 0` uses the principal square root
/// of `mu` (cut on the negative reals), while evanescent channels `j >= 1`
/// are evaluated as `i * sqrt((j pi / h)^2 - mu)` so that `i alpha_j` stays
/// continuous when `mu` moves off the real axis. For real `mu` in the band
/// this yields `alpha_0 > 0` and `i alpha_j < 0` for `j >= 1`.
pub fn alpha(mu: Complex64, j: usize, h: f64) -> Complex64 {
    if j == 0 {
        mu.sqrt()
    } else {
        let cj = (j as f64 * std::f64::consts::PI / h).powi(2);
        Complex64::i() * (Complex64::new(cj, 0.0) - mu).sqrt()
    }
}

/// `i alpha_j` for real `mu` below the `j`-th cutoff: the real, negative
/// decay rate of an evanescent channel.
pub fn i_alpha_evanescent(mu: f64, j: usize, h: f64) -> f64 {
    debug_assert!(j >= 1);
    let cj = (j as f64 * std::f64::consts::PI / h).powi(2);
    debug_assert!(mu < cj, "channel {j} is propagating at mu = {mu}");
    -(cj - mu).sqrt()
}

/// Cosine/sine transverse profiles on the opening `(-h/2, h/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveguideBasis {
    /// Opening width.
    pub h: f64,
    /// Highest transverse index kept (inclusive).
    pub j_wg: usize,
}

impl WaveguideBasis {
    pub fn new(h: f64, j_wg: usize) -> Self {
        assert!(h > 0.0 && j_wg >= 1);
        WaveguideBasis { h, j_wg }
    }

    /// First cutoff `pi^2 / h^2`; only `j = 0` propagates below it.
    pub fn cutoff(&self) -> f64 {
        (std::f64::consts::PI / self.h).powi(2)
    }

    /// `phi_j(y)`, orthonormal on the opening.
    pub fn phi(&self, j: usize, y: f64) -> f64 {
        let pi = std::f64::consts::PI;
        if j == 0 {
            (1.0 / self.h).sqrt()
        } else {
            let jf = j as f64;
            (2.0 / self.h).sqrt() * (jf * pi * y / self.h + jf * pi / 2.0).cos()
        }
    }

    /// `eta_j(y)`, the sine companion family (used only by diagnostics).
    pub fn eta(&self, j: usize, y: f64) -> f64 {
        let pi = std::f64::consts::PI;
        let jf = j as f64;
        (2.0 / self.h).sqrt() * (jf * pi * y / self.h + jf * pi / 2.0).sin()
    }

    pub fn alpha(&self, mu: Complex64, j: usize) -> Complex64 {
        alpha(mu, j, self.h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn alpha_examples() {
        let h = 2.0 * PI / 9.0;
        let a0 = alpha(Complex64::new(1.0, 0.0), 0, h);
        assert!((a0 - Complex64::new(1.0, 0.0)).norm() < 1e-14);

        // (j pi / h)^2 = 4.5^2 = 20.25, so i alpha_1 = -sqrt(19.25)
        let a1 = alpha(Complex64::new(1.0, 0.0), 1, h);
        let ia1 = Complex64::i() * a1;
        assert!((ia1.re + 19.25f64.sqrt()).abs() < 1e-12, "{ia1}");
        assert!(ia1.im.abs() < 1e-14);
        assert!((i_alpha_evanescent(1.0, 1, h) + 19.25f64.sqrt()).abs() < 1e-12);

        // second-sheet continuation just below the real axis
        let a = alpha(Complex64::new(1.7, -0.01), 0, h);
        assert!(a.re > 0.0 && a.im < 0.0, "{a}");

        // evanescent branch stays continuous across Im mu = 0
        let above = alpha(Complex64::new(1.7, 1e-9), 3, h);
        let below = alpha(Complex64::new(1.7, -1e-9), 3, h);
        assert!((above - below).norm() < 1e-8, "{above} vs {below}");
    }

    #[test]
    fn profiles_are_orthonormal() {
        let h = 0.77;
        let wg = WaveguideBasis::new(h, 6);
        let n = 20000;
        for i in 0..=4 {
            for j in 0..=4 {
                let mut acc = 0.0;
                for k in 0..n {
                    let y = -h / 2.0 + h * (k as f64 + 0.5) / n as f64;
                    acc += wg.phi(i, y) * wg.phi(j, y) * h / n as f64;
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((acc - expect).abs() < 1e-6, "({i},{j}): {acc}");
            }
        }
    }

    #[test]
    fn phi_parity_alternates() {
        let h = 1.3;
        let wg = WaveguideBasis::new(h, 4);
        for j in 0..4 {
            let y = 0.29;
            let sym = wg.phi(j, y) - wg.phi(j, -y);
            let asym = wg.phi(j, y) + wg.phi(j, -y);
            if j % 2 == 0 {
                assert!(sym.abs() < 1e-12, "phi_{j} should be even");
            } else {
                assert!(asym.abs() < 1e-12, "phi_{j} should be odd");
            }
        }
    }
}
