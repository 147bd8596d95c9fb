//! Assembly of the truncated junction matrix and its reduction, by
//! elimination of far cavity modes, to a 3x2 system whose two determinant
//! conditions are the governing equations of the BIC search.

use crate::error::{Error, Result};
use crate::modematch::overlap::OverlapTable;
use crate::modematch::waveguide::{alpha, i_alpha_evanescent};
use nalgebra::{DMatrix, DVector, Matrix3x2};
use num_complex::Complex64;

/// Coupling floor below which the interference mechanism is numerically
/// indistinguishable from symmetry protection.
pub fn coupling_floor(h: f64) -> f64 {
    1e-6 * h.sqrt()
}

/// Smallest singular value of a complex matrix.
pub fn sigma_min(t: &DMatrix<Complex64>) -> f64 {
    let sv = t.clone().singular_values();
    sv.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Largest singular value (spectral norm) of a complex matrix.
pub fn spectral_norm(t: &DMatrix<Complex64>) -> f64 {
    let sv = t.clone().singular_values();
    sv.iter().cloned().fold(0.0, f64::max)
}

/// Full truncated junction matrix
/// `T(mu) = diag(lambda_m - mu) - s * sum_{j=0}^{J_wg} i alpha_j v_j v_j^T`.
///
/// `coupling_scale` is `1/(1 + delta C_R)` for boundary scaling and 1 for
/// index sweeps.
pub fn full_matrix(
    mu: Complex64,
    table: &OverlapTable,
    lambdas: &[f64],
    coupling_scale: f64,
) -> DMatrix<Complex64> {
    let n = lambdas.len();
    assert!(n <= table.m_count(), "overlap table narrower than the basis");
    let mut t = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        lambdas.iter().map(|&l| Complex64::new(l, 0.0) - mu),
    ));
    for j in 0..table.j_count() {
        let w = Complex64::i() * alpha(mu, j, table.h) * coupling_scale;
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

/// The truncated blocks of the reduction and the six scalars of the reduced
/// 3x2 system, at real `(delta, mu)` inside the single-mode band.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub delta: f64,
    pub mu: f64,
    pub m: usize,
    pub m_cav: usize,
    pub j_wg: usize,
    /// Head-block coupling `A` (MxM).
    pub a: DMatrix<f64>,
    /// Scaled tail-block coupling `B`.
    pub b: DMatrix<f64>,
    /// Scaled tail-head coupling `V`.
    pub v: DMatrix<f64>,
    /// Diagonal of `D = diag(1/sqrt(lambda_m - mu))`, tail modes.
    pub d: DVector<f64>,
    pub c00: DMatrix<f64>,
    pub c01: DMatrix<f64>,
    pub c10: DMatrix<f64>,
    pub c11: DMatrix<f64>,
    /// Diagonals `lambda_i - mu` of the two L blocks.
    pub l00: DVector<f64>,
    pub l11: [f64; 2],
    pub a00: f64,
    pub a01: f64,
    pub a10: f64,
    pub a11: f64,
    pub a20: f64,
    pub a21: f64,
    pub f0: f64,
    pub f1: f64,
    /// Condition number of `L00 - C00`.
    pub head_cond: f64,
}

impl ReducedSystem {
    /// The reduced 3x2 system matrix.
    pub fn matrix_3x2(&self) -> Matrix3x2<f64> {
        Matrix3x2::new(
            self.l11[0] + self.a00,
            self.a01,
            self.a10,
            self.l11[1] + self.a11,
            self.a20,
            self.a21,
        )
    }

    pub fn sigma_min_3x2(&self) -> f64 {
        let sv = self.matrix_3x2().singular_values();
        sv[1].min(sv[0])
    }

    /// Null direction `(d_{M-2}, d_{M-1})` of the 3x2 system (right singular
    /// vector of the smallest singular value).
    pub fn null_pair(&self) -> [f64; 2] {
        let svd = self.matrix_3x2().svd(false, true);
        let vt = svd.v_t.expect("requested V^T");
        [vt[(1, 0)], vt[(1, 1)]]
    }

    /// Extends the pair coefficients to the remaining head modes through the
    /// eliminated block, then to the tail modes. Returns all `M_cav`
    /// coefficients in branch order.
    pub fn back_substitute(&self, pair: [f64; 2]) -> DVector<f64> {
        let mr = self.m - 2;
        // head rest: (L00 - C00)^{-1} C01 * pair
        let l00c00 =
            DMatrix::from_diagonal(&self.l00) - &self.c00;
        let rhs = &self.c01 * DVector::from_column_slice(&pair);
        let rest = l00c00
            .lu()
            .solve(&rhs)
            .expect("head block verified well-conditioned");
        let mut head = DVector::zeros(self.m);
        for i in 0..mr {
            head[i] = rest[i];
        }
        head[self.m - 2] = pair[0];
        head[self.m - 1] = pair[1];
        // tail: D (I - B)^{-1} V * head
        let n_tail = self.m_cav - self.m;
        let eye = DMatrix::identity(n_tail, n_tail);
        let i_minus_b = eye - &self.b;
        let tail = i_minus_b
            .lu()
            .solve(&(&self.v * &head))
            .expect("I - B is coercive");
        let mut full = DVector::zeros(self.m_cav);
        for i in 0..self.m {
            full[i] = head[i];
        }
        for i in 0..n_tail {
            full[self.m + i] = self.d[i] * tail[i];
        }
        full
    }
}

/// Builds every block of the reduction at real `(delta, mu)` and evaluates
/// the governing functions `f0`, `f1`.
///
/// Preconditions checked here: `mu` below the first cutoff, all tail
/// eigenvalues above `mu` (else [`Error::BandViolation`]), the eliminated
/// head block well conditioned, and the radiation couplings `a20`, `a21`
/// above [`coupling_floor`] (else [`Error::NearZeroCoupling`]).
pub fn build_reduction(
    delta: f64,
    mu: f64,
    table: &OverlapTable,
    lambdas: &[f64],
    m: usize,
    coupling_scale: f64,
) -> Result<ReducedSystem> {
    let n = lambdas.len();
    let h = table.h;
    assert!(m >= 3 && n > m, "need M >= 3 and M_cav > M");
    assert!(
        mu < (std::f64::consts::PI / h).powi(2),
        "mu = {mu} above the first cutoff"
    );
    let j_wg = table.j_count() - 1;

    for (i, &lam) in lambdas.iter().enumerate().skip(m) {
        if lam <= mu {
            return Err(Error::BandViolation {
                delta,
                index: i,
                lambda: lam,
                mu,
            });
        }
    }

    // Evanescent coupling sum over all kept modes.
    let mut c_full = DMatrix::zeros(n, n);
    for j in 1..=j_wg {
        let w = coupling_scale * i_alpha_evanescent(mu, j, h);
        let row = &table.entries[j];
        for a in 0..n {
            let wa = w * row[a];
            for b in 0..n {
                c_full[(a, b)] += wa * row[b];
            }
        }
    }

    let a_block = c_full.view((0, 0), (m, m)).into_owned();
    let n_tail = n - m;
    let d = DVector::from_iterator(n_tail, (m..n).map(|i| 1.0 / (lambdas[i] - mu).sqrt()));
    let mut b = c_full.view((m, m), (n_tail, n_tail)).into_owned();
    for i in 0..n_tail {
        for k in 0..n_tail {
            b[(i, k)] *= d[i] * d[k];
        }
    }
    let mut v = c_full.view((m, 0), (n_tail, m)).into_owned();
    for i in 0..n_tail {
        for k in 0..m {
            v[(i, k)] *= d[i];
        }
    }

    let eye = DMatrix::identity(n_tail, n_tail);
    let i_minus_b = &eye - &b;
    let lu_ib = i_minus_b.clone().lu();
    let x = lu_ib.solve(&v).expect("I - B is coercive");

    // Head-block Schur complement G = A + V^T (I - B)^{-1} V.
    let g = &a_block + v.transpose() * &x;

    let mr = m - 2;
    let c00 = g.view((0, 0), (mr, mr)).into_owned();
    let c01 = g.view((0, mr), (mr, 2)).into_owned();
    let c10 = c01.transpose();
    let c11 = g.view((mr, mr), (2, 2)).into_owned();
    let l00 = DVector::from_iterator(mr, (0..mr).map(|i| lambdas[i] - mu));
    let l11 = [lambdas[m - 2] - mu, lambdas[m - 1] - mu];

    let l00c00 = DMatrix::from_diagonal(&l00) - &c00;
    let sv = l00c00.clone().singular_values();
    let (s_max, s_min) = sv
        .iter()
        .fold((0.0f64, f64::INFINITY), |(hi, lo), &s| (hi.max(s), lo.min(s)));
    let head_cond = s_max / s_min;
    if !head_cond.is_finite() || head_cond > 1e12 {
        return Err(Error::IllConditioned { cond: head_cond });
    }
    let s_mat = l00c00.lu().solve(&c01).expect("cond checked above");

    let ab = -(&c11) - &c10 * &s_mat;

    // Radiation row: r = v0_head^T + v0_tail^T D (I - B)^{-1} V, then fold
    // the eliminated head modes through S.
    let v0_head = table.v_j(0, 0, m);
    let v0_tail = table.v_j(0, m, n);
    let dv0 = DVector::from_iterator(n_tail, (0..n_tail).map(|i| d[i] * v0_tail[i]));
    let w_row = x.transpose() * dv0;
    let r_full = v0_head + w_row;
    let r_rest = r_full.rows(0, mr).into_owned();
    let folded = s_mat.transpose() * r_rest;
    let a20 = r_full[m - 2] + folded[0];
    let a21 = r_full[m - 1] + folded[1];

    let a00 = ab[(0, 0)];
    let a01 = ab[(0, 1)];
    let a10 = ab[(1, 0)];
    let a11 = ab[(1, 1)];

    // Radiation couplings below the floor normally mean the interference
    // mechanism is gone. The exception is exact parity decoupling, where the
    // matching cross term vanishes identically and the ratio simply drops
    // out of the governing function.
    let floor = coupling_floor(h);
    let near_zero = Error::NearZeroCoupling {
        delta,
        a20: a20.abs(),
        a21: a21.abs(),
        floor,
    };
    if a20.abs() < floor && a21.abs() < floor {
        return Err(near_zero);
    }
    let f0 = if a21.abs() < floor {
        if a01.abs() > floor {
            return Err(near_zero);
        }
        a00
    } else {
        a00 - a01 * a20 / a21
    };
    let f1 = if a20.abs() < floor {
        if a10.abs() > floor {
            return Err(near_zero);
        }
        a11
    } else {
        a11 - a10 * a21 / a20
    };

    Ok(ReducedSystem {
        delta,
        mu,
        m,
        m_cav: n,
        j_wg,
        a: a_block,
        b,
        v,
        d,
        c00,
        c01,
        c10,
        c11,
        l00,
        l11,
        a00,
        a01,
        a10,
        a11,
        a20,
        a21,
        f0,
        f1,
        head_cond,
    })
}

/// Independent route to the same 3x2 system: one-shot Schur elimination of
/// every mode except the crossing pair from the full real system, with the
/// radiation row reduced alongside. Exercises none of the nested-inverse
/// algebra of [`build_reduction`].
pub fn reduce_via_schur(
    mu: f64,
    table: &OverlapTable,
    lambdas: &[f64],
    m: usize,
    coupling_scale: f64,
) -> Matrix3x2<f64> {
    let n = lambdas.len();
    let h = table.h;
    let j_wg = table.j_count() - 1;

    let mut r = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        lambdas.iter().map(|&l| l - mu),
    ));
    for j in 1..=j_wg {
        let w = coupling_scale * i_alpha_evanescent(mu, j, h);
        let row = &table.entries[j];
        for a in 0..n {
            let wa = w * row[a];
            for b in 0..n {
                r[(a, b)] -= wa * row[b];
            }
        }
    }

    let pair = [m - 2, m - 1];
    let elim: Vec<usize> = (0..n).filter(|i| !pair.contains(i)).collect();
    let ne = elim.len();
    let mut r_ee = DMatrix::zeros(ne, ne);
    let mut r_et = DMatrix::zeros(ne, 2);
    let mut r_te = DMatrix::zeros(2, ne);
    let mut r_tt = DMatrix::zeros(2, 2);
    for (i, &ei) in elim.iter().enumerate() {
        for (k, &ek) in elim.iter().enumerate() {
            r_ee[(i, k)] = r[(ei, ek)];
        }
        for (t, &pt) in pair.iter().enumerate() {
            r_et[(i, t)] = r[(ei, pt)];
            r_te[(t, i)] = r[(pt, ei)];
        }
    }
    for (s, &ps) in pair.iter().enumerate() {
        for (t, &pt) in pair.iter().enumerate() {
            r_tt[(s, t)] = r[(ps, pt)];
        }
    }

    let x = r_ee.lu().solve(&r_et).expect("eliminated block invertible");
    let top = r_tt - &r_te * &x;

    let v0 = table.v_j(0, 0, n);
    let v0_e = DVector::from_iterator(ne, elim.iter().map(|&i| v0[i]));
    let v0_t = [v0[pair[0]], v0[pair[1]]];
    let folded = x.transpose() * v0_e;
    let bottom = [v0_t[0] - folded[0], v0_t[1] - folded[1]];

    Matrix3x2::new(
        top[(0, 0)],
        top[(0, 1)],
        top[(1, 0)],
        top[(1, 1)],
        bottom[0],
        bottom[1],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Provenance;
    use crate::cavity_analytic::rect_basis;
    use crate::geom::Rect;
    use crate::modematch::overlap::overlaps;
    use crate::modematch::waveguide::WaveguideBasis;
    use std::f64::consts::PI;

    fn offset_rect() -> Rect {
        // the worked-example hull: opening off the symmetry line
        Rect {
            x_lo: -PI,
            x_hi: 0.0,
            y_lo: -4.0 * PI / 3.0,
            y_hi: 2.0 * PI / 3.0,
        }
    }

    fn setup(m_cav: usize, j_wg: usize, h: f64) -> (crate::basis::CavityBasis, OverlapTable) {
        let basis = rect_basis(&offset_rect(), 1.0, 0.0, m_cav);
        let wg = WaveguideBasis::new(h, j_wg);
        let table = overlaps(&basis, &wg);
        (basis, table)
    }

    #[test]
    fn full_matrix_structure_in_band() {
        let h = 2.0 * PI / 9.0;
        let (basis, table) = setup(24, 20, h);
        let mu = 2.1;
        let t = full_matrix(Complex64::new(mu, 0.0), &table, &basis.lambdas, 1.0);
        // Im(T) = -alpha_0 v0 v0^T: rank one
        let n = basis.len();
        let alpha0 = mu.sqrt();
        for a in 0..n {
            for b in 0..n {
                let expect = -alpha0 * table.entries[0][a] * table.entries[0][b];
                assert!(
                    (t[(a, b)].im - expect).abs() < 1e-12,
                    "Im T[{a}][{b}] = {} vs {expect}",
                    t[(a, b)].im
                );
            }
        }
        // Re(T) - diag(lambda - mu) is PSD (each evanescent term adds
        // |i alpha_j| v v^T)
        let mut re_off = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                re_off[(a, b)] = t[(a, b)].re;
                if a == b {
                    re_off[(a, b)] -= basis.lambdas[a] - mu;
                }
            }
        }
        let eig = re_off.symmetric_eigenvalues();
        assert!(eig.iter().all(|&e| e > -1e-10), "{eig:?}");
    }

    #[test]
    fn reduction_matches_one_shot_schur() {
        let h = 2.0 * PI / 9.0;
        let (basis, table) = setup(30, 24, h);
        // M = 7: pair (lambda_5, lambda_6) = (2, 2.25)
        let m = 7;
        let mu = 2.1;
        let red = build_reduction(0.0, mu, &table, &basis.lambdas, m, 1.0).unwrap();
        let direct = reduce_via_schur(mu, &table, &basis.lambdas, m, 1.0);
        let ours = red.matrix_3x2();
        let denom = direct.norm().max(1e-30);
        assert!(
            (ours - direct).norm() / denom < 1e-10,
            "reduction mismatch:\n{ours}\nvs\n{direct}"
        );
        let s_ours = red.sigma_min_3x2();
        let sv = direct.singular_values();
        let s_direct = sv[0].min(sv[1]);
        assert!((s_ours - s_direct).abs() <= 1e-10 * s_direct.max(1.0));
    }

    #[test]
    fn band_violation_detected() {
        let h = 2.0 * PI / 9.0;
        let (basis, table) = setup(20, 16, h);
        // mu above lambda_M for M = 7 (lambda_7 = 3.25)
        let err = build_reduction(0.0, 3.3, &table, &basis.lambdas, 7, 1.0).unwrap_err();
        assert!(matches!(err, Error::BandViolation { .. }), "{err}");
    }

    #[test]
    fn centered_cavity_decouples_parity() {
        // symmetric cavity, centered opening, pair = one even + one odd
        // branch: the cross couplings a01, a10 vanish and f0 = a00.
        let cavity = Rect {
            x_lo: -PI,
            x_hi: 0.0,
            y_lo: -PI,
            y_hi: PI,
        };
        let basis = rect_basis(&cavity, 1.0, 0.0, 30);
        let wg = WaveguideBasis::new(2.0 * PI / 9.0, 24);
        let table = overlaps(&basis, &wg);
        assert_eq!(table.provenance, Provenance::Analytic);
        // spectrum: 0, 0.25, 1 (0,2), 1 (1,0), 1.25 (1,1), ...
        // M = 5 pairs lambda_3 = 1 (1,0 even) with lambda_4 = 1.25 (1,1 odd)
        let m = 5;
        let mu = 1.1;
        let red = build_reduction(0.0, mu, &table, &basis.lambdas, m, 1.0).unwrap();
        assert!(red.a01.abs() < 1e-12 && red.a10.abs() < 1e-12);
        assert!((red.f0 - red.a00).abs() < 1e-12);
        assert!((red.f1 - red.a11).abs() < 1e-12);
    }

    #[test]
    fn forcing_vanishes_as_h_shrinks() {
        // max(|f0|, |f1|) decreases monotonically along h, h/2, h/4, h/8
        let m = 7;
        let mu = 2.1;
        let h0 = 2.0 * PI / 9.0;
        let mut prev = f64::INFINITY;
        for k in 0..4 {
            let h = h0 / 2f64.powi(k);
            let (basis, table) = setup(60, 40, h);
            let red = build_reduction(0.0, mu, &table, &basis.lambdas, m, 1.0).unwrap();
            let fmax = red.f0.abs().max(red.f1.abs());
            assert!(
                fmax < prev,
                "h = {h}: max|f| = {fmax} did not decrease from {prev}"
            );
            prev = fmax;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn radiation_coupling_asymptotics() {
        // a20 / sqrt(h) approaches psi_{M-2}(o) with an O(sqrt h) gap
        let m = 7;
        let mu = 2.1;
        let h0 = 2.0 * PI / 9.0;
        let basis = rect_basis(&offset_rect(), 1.0, 0.0, 60);
        let psi_o = basis.origin_values[m - 2];
        let mut gaps = Vec::new();
        for k in 0..4 {
            let h = h0 / 2f64.powi(k);
            let wg = WaveguideBasis::new(h, 40);
            let table = overlaps(&basis, &wg);
            let red = build_reduction(0.0, mu, &table, &basis.lambdas, m, 1.0).unwrap();
            gaps.push((h, (red.a20 / h.sqrt() - psi_o).abs()));
        }
        // log-log slope of the gap vs h over the sweep
        let slope = {
            let n = gaps.len() as f64;
            let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
            for &(h, g) in &gaps {
                let (x, y) = (h.ln(), g.ln());
                sx += x;
                sy += y;
                sxx += x * x;
                sxy += x * y;
            }
            (n * sxy - sx * sy) / (n * sxx - sx * sx)
        };
        assert!(slope > 0.4, "gap slope {slope}, gaps {gaps:?}");
    }
}
