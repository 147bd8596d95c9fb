//! Junction coupling coefficients `(phi_j, psi_m)_{Gamma_h}`.

use crate::basis::{CavityBasis, Provenance};
use crate::modematch::waveguide::WaveguideBasis;
use nalgebra::DVector;

/// Table of coupling coefficients, `entries[j][m] = (phi_j, psi_m)_{Gamma_h}`
/// for `0 <= j <= J_wg`, `0 <= m < M_cav`.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapTable {
    pub entries: Vec<Vec<f64>>,
    pub provenance: Provenance,
    pub h: f64,
}

/// Computes every entry by exact per-segment antiderivatives of the trace
/// against `phi_j`; no quadrature.
pub fn overlaps(basis: &CavityBasis, wg: &WaveguideBasis) -> OverlapTable {
    let entries = (0..=wg.j_wg)
        .map(|j| {
            basis
                .traces
                .iter()
                .map(|tr| tr.overlap_phi(j, wg.h))
                .collect()
        })
        .collect();
    OverlapTable {
        entries,
        provenance: basis.provenance,
        h: wg.h,
    }
}

impl OverlapTable {
    pub fn j_count(&self) -> usize {
        self.entries.len()
    }

    pub fn m_count(&self) -> usize {
        self.entries.first().map_or(0, |r| r.len())
    }

    /// Column `m` over a sub-range of modes, as the vector `v_j` restricted
    /// to `m_lo..m_hi`.
    pub fn v_j(&self, j: usize, m_lo: usize, m_hi: usize) -> DVector<f64> {
        DVector::from_iterator(m_hi - m_lo, self.entries[j][m_lo..m_hi].iter().copied())
    }

    /// Bessel-type consistency: for every mode, the summed squared couplings
    /// may not exceed the trace norm on the opening (plus a tolerance).
    /// Returns the worst excess.
    pub fn bessel_excess(&self, basis: &CavityBasis) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for m in 0..self.m_count() {
            let sum: f64 = self.entries.iter().map(|row| row[m] * row[m]).sum();
            let bound = basis.traces[m].l2_norm_sq(self.h);
            worst = worst.max(sum - bound);
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cavity_analytic::rect_basis;
    use crate::geom::Rect;
    use std::f64::consts::PI;

    fn centered_rect() -> Rect {
        Rect {
            x_lo: -PI,
            x_hi: 0.0,
            y_lo: -PI,
            y_hi: PI,
        }
    }

    #[test]
    fn constant_mode_row_zero() {
        let basis = rect_basis(&centered_rect(), 1.0, 0.0, 8);
        let wg = WaveguideBasis::new(2.0 * PI / 9.0, 10);
        let table = overlaps(&basis, &wg);
        let area = (PI * 2.0 * PI).sqrt();
        assert!((table.entries[0][0] - wg.h.sqrt() / area).abs() < 1e-14);
    }

    #[test]
    fn parity_mismatch_vanishes() {
        // centered opening: even traces decouple from odd profiles and
        // vice versa
        let basis = rect_basis(&centered_rect(), 1.0, 0.0, 12);
        let wg = WaveguideBasis::new(2.0 * PI / 9.0, 10);
        let table = overlaps(&basis, &wg);
        for (m, tr) in basis.traces.iter().enumerate() {
            let odd = tr.odd_defect(wg.h) < 1e-9;
            for j in 0..=wg.j_wg {
                let j_odd = j % 2 == 1;
                if odd != j_odd {
                    assert!(
                        table.entries[j][m].abs() < 1e-12,
                        "m = {m}, j = {j}: {}",
                        table.entries[j][m]
                    );
                }
            }
        }
    }

    #[test]
    fn bessel_consistency() {
        let basis = rect_basis(&centered_rect(), 1.0, 0.0, 20);
        let wg = WaveguideBasis::new(2.0 * PI / 9.0, 40);
        let table = overlaps(&basis, &wg);
        assert!(table.bessel_excess(&basis) <= 1e-12);
    }
}
