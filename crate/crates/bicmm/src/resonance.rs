//! Complex resonance tracing from the truncated junction matrix: Newton on
//! a bordered (implicit-determinant) system, with continuation along the
//! scan parameter. Provides the independent certificate that the tracked
//! resonance becomes real at a BIC.

use crate::error::{Error, Result};
use crate::modematch::overlap::OverlapTable;
use crate::modematch::reduce::{full_matrix, sigma_min, spectral_norm};
use crate::modematch::waveguide::alpha;
use crate::modematch::{overlaps, WaveguideBasis};
use crate::problem::ValidatedSpec;
use crate::sweep::BasisProvider;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

/// One converged resonance.
#[derive(Debug, Clone, Serialize)]
pub struct ResonancePoint {
    pub delta: f64,
    pub branch: usize,
    pub re_mu: f64,
    pub im_mu: f64,
    pub sigma_min_rel: f64,
    pub iterations: usize,
}

/// `dT/dmu` for the truncated junction matrix.
fn full_matrix_derivative(
    mu: Complex64,
    table: &OverlapTable,
    n: usize,
    coupling_scale: f64,
) -> DMatrix<Complex64> {
    let h = table.h;
    let mut t = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for i in 0..n {
        t[(i, i)] = Complex64::new(-1.0, 0.0);
    }
    for j in 0..table.j_count() {
        // d(i alpha_j)/dmu, on the same branch as `alpha`
        let g = if j == 0 {
            Complex64::i() / (2.0 * mu.sqrt())
        } else {
            let cj = (j as f64 * std::f64::consts::PI / h).powi(2);
            1.0 / (2.0 * (Complex64::new(cj, 0.0) - mu).sqrt())
        };
        let w = g * coupling_scale;
        let row = &table.entries[j];
        for a in 0..n {
            let wa = w * row[a];
            for b in 0..n {
                t[(a, b)] -= wa * row[b];
            }
        }
    }
    t
}

/// Newton steps on the bordered system
/// `[T(mu) c; c^H 0] [x; f] = [0; 1]`: zeros of the scalar `f(mu)`
/// coincide with singular points of `T`.
fn newton_resonance(
    mu0: Complex64,
    table: &OverlapTable,
    lambdas: &[f64],
    coupling_scale: f64,
    cutoff: f64,
) -> Result<(Complex64, f64, usize)> {
    let n = lambdas.len();
    let t0 = full_matrix(mu0, table, lambdas, coupling_scale);
    // border with the current best null-direction estimate
    let svd = t0.clone().svd(true, true);
    let vt = svd.v_t.as_ref().expect("requested V^T");
    let idx = (0..n)
        .min_by(|&a, &b| {
            svd.singular_values[a]
                .partial_cmp(&svd.singular_values[b])
                .unwrap()
        })
        .unwrap();
    let c = DVector::from_iterator(n, (0..n).map(|k| vt[(idx, k)].conj()));

    let mut mu = mu0;
    let mut t = t0;
    for it in 0..60 {
        let mut z = DMatrix::from_element(n + 1, n + 1, Complex64::new(0.0, 0.0));
        z.view_mut((0, 0), (n, n)).copy_from(&t);
        for k in 0..n {
            z[(k, n)] = c[k];
            z[(n, k)] = c[k].conj();
        }
        let lu = z.lu();
        let mut rhs = DVector::from_element(n + 1, Complex64::new(0.0, 0.0));
        rhs[n] = Complex64::new(1.0, 0.0);
        let sol = lu.solve(&rhs).ok_or(Error::NoConvergence {
            converged: 0,
            requested: 1,
            tol: 0.0,
        })?;
        let f = sol[n];
        let x = sol.rows(0, n).into_owned();

        let dt = full_matrix_derivative(mu, table, n, coupling_scale);
        let mut rhs2 = DVector::from_element(n + 1, Complex64::new(0.0, 0.0));
        let dtx = &dt * &x;
        for k in 0..n {
            rhs2[k] = -dtx[k];
        }
        let sol2 = lu.solve(&rhs2).ok_or(Error::NoConvergence {
            converged: 0,
            requested: 1,
            tol: 0.0,
        })?;
        let fp = sol2[n];
        if fp.norm() == 0.0 {
            return Err(Error::NoConvergence {
                converged: 0,
                requested: 1,
                tol: 0.0,
            });
        }
        let step = f / fp;
        mu -= step;
        if mu.re <= 0.0 || mu.re >= cutoff || !mu.re.is_finite() || !mu.im.is_finite() {
            return Err(Error::EscapedBand {
                re: mu.re,
                im: mu.im,
            });
        }
        t = full_matrix(mu, table, lambdas, coupling_scale);
        if step.norm() < 1e-13 * (1.0 + mu.norm()) {
            let smin = sigma_min(&t);
            let tnorm = spectral_norm(&t);
            return Ok((mu, smin / tnorm, it + 1));
        }
    }
    Err(Error::NoConvergence {
        converged: 0,
        requested: 1,
        tol: 1e-13,
    })
}

/// Context shared by the resonance operations.
pub struct ResonanceContext<'a> {
    pub provider: &'a dyn BasisProvider,
    pub v: &'a ValidatedSpec,
}

impl<'a> ResonanceContext<'a> {
    fn table_at(&self, delta: f64) -> Result<(Vec<f64>, OverlapTable)> {
        let basis = self.provider.basis_at(delta)?;
        let wg = WaveguideBasis::new(self.v.h(), self.v.spec.truncation.j_wg);
        let table = overlaps(&basis, &wg);
        Ok((basis.lambdas, table))
    }

    /// Finds the resonance nearest `mu_guess` at one scan value.
    pub fn find_resonance(
        &self,
        delta: f64,
        mu_guess: Complex64,
        branch: usize,
    ) -> Result<ResonancePoint> {
        let (lambdas, table) = self.table_at(delta)?;
        let cutoff = self.v.cutoff();
        if mu_guess.re <= 0.0 || mu_guess.re >= cutoff {
            return Err(Error::EscapedBand {
                re: mu_guess.re,
                im: mu_guess.im,
            });
        }
        let scale = self.provider.coupling_scale(delta);
        let (mu, sig_rel, iterations) =
            newton_resonance(mu_guess, &table, &lambdas, scale, cutoff)?;
        Ok(ResonancePoint {
            delta,
            branch,
            re_mu: mu.re,
            im_mu: mu.im,
            sigma_min_rel: sig_rel,
            iterations,
        })
    }

    /// Continuation over a delta grid for the listed branches; each branch
    /// is seeded by its closed-cavity eigenvalue at the first grid point
    /// and then by the previous root.
    pub fn scan_resonances(
        &self,
        deltas: &[f64],
        branches: &[usize],
    ) -> Result<Vec<ResonancePoint>> {
        let mut out = Vec::new();
        for &branch in branches {
            let mut guess: Option<Complex64> = None;
            let mut steps: Vec<f64> = Vec::new();
            let mut prev: Option<Complex64> = None;
            for &d in deltas {
                let g = match guess {
                    Some(g) => g,
                    None => {
                        let basis = self.provider.basis_at(d)?;
                        Complex64::new(basis.lambdas[branch], 0.0)
                    }
                };
                let point = self.find_resonance(d, g, branch)?;
                let mu = Complex64::new(point.re_mu, point.im_mu);
                if let Some(p) = prev {
                    let jump = (mu - p).norm();
                    if steps.len() >= 4 {
                        let mut s = steps.clone();
                        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
                        let median = s[s.len() / 2];
                        if median > 0.0 && jump > 10.0 * median {
                            return Err(Error::BranchJump {
                                jump,
                                limit: 10.0 * median,
                            });
                        }
                    }
                    steps.push(jump);
                }
                prev = Some(mu);
                guess = Some(mu);
                out.push(point);
            }
        }
        Ok(out)
    }
}

/// Sweep summary for one branch: where `|Im mu|` bottoms out.
#[derive(Debug, Clone, Serialize)]
pub struct ImagMinimum {
    pub branch: usize,
    pub delta: f64,
    pub re_mu: f64,
    pub min_abs_im: f64,
    pub below_certificate: bool,
}

/// Scans the trajectories for the per-branch minimum of `|Im mu|`.
pub fn imag_minima(points: &[ResonancePoint], certificate: f64) -> Vec<ImagMinimum> {
    let mut branches: Vec<usize> = points.iter().map(|p| p.branch).collect();
    branches.sort_unstable();
    branches.dedup();
    branches
        .into_iter()
        .map(|b| {
            let best = points
                .iter()
                .filter(|p| p.branch == b)
                .min_by(|x, y| x.im_mu.abs().partial_cmp(&y.im_mu.abs()).unwrap())
                .expect("branch has points");
            ImagMinimum {
                branch: b,
                delta: best.delta,
                re_mu: best.re_mu,
                min_abs_im: best.im_mu.abs(),
                below_certificate: best.im_mu.abs() < certificate,
            }
        })
        .collect()
}

/// `alpha`-branch self-check used by diagnostics: outgoing continuation has
/// `Re alpha_0 > 0` and decaying evanescent channels near the scan band.
pub fn branch_sanity(mu: Complex64, h: f64) -> bool {
    let a0 = alpha(mu, 0, h);
    let a1 = alpha(mu, 1, h);
    a0.re > 0.0 && (Complex64::i() * a1).re < 0.0
}
