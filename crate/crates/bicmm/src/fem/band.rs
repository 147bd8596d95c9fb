//! Symmetric banded matrices with Cholesky factorization, sized for the
//! structured P1 meshes (bandwidth ~ nodes across the short cavity side).

use crate::error::{Error, Result};

/// Symmetric matrix stored by diagonals: `data[i * (hbw + 1) + d] = A[i, i + d]`.
#[derive(Debug, Clone)]
pub struct SymBand {
    pub n: usize,
    pub hbw: usize,
    data: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, hbw: usize) -> Self {
        SymBand {
            n,
            hbw,
            data: vec![0.0; n * (hbw + 1)],
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        debug_assert!(c - r <= self.hbw, "entry ({i}, {j}) outside the band");
        self.data[r * (self.hbw + 1) + (c - r)] += v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        if c - r > self.hbw {
            return 0.0;
        }
        self.data[r * (self.hbw + 1) + (c - r)]
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let w = self.hbw + 1;
        let n = self.n;
        for (i, yi) in y.iter_mut().enumerate() {
            let row = &self.data[i * w..(i + 1) * w];
            let dmax = (n - 1 - i).min(self.hbw);
            let mut acc = 0.0;
            for d in 0..=dmax {
                acc += row[d] * x[i + d];
            }
            // entries below the diagonal come from rows above
            let dlo = i.min(self.hbw);
            for d in 1..=dlo {
                acc += self.data[(i - d) * w + d] * x[i - d];
            }
            *yi = acc;
        }
    }

    /// `self + s * other`, same layout.
    pub fn add_scaled(&self, other: &SymBand, s: f64) -> SymBand {
        assert_eq!(self.n, other.n);
        assert_eq!(self.hbw, other.hbw);
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a + s * b)
            .collect();
        SymBand {
            n: self.n,
            hbw: self.hbw,
            data,
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for d in 0..=self.hbw.min(self.n - 1 - i) {
                m[(i, i + d)] = self.data[i * (self.hbw + 1) + d];
                m[(i + d, i)] = m[(i, i + d)];
            }
        }
        m
    }

    /// Max absolute entry, for relative tolerances.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// Banded Cholesky `A = L L^T`; fails if the matrix is not positive
    /// definite.
    pub fn cholesky(&self) -> Result<BandChol> {
        let n = self.n;
        let hbw = self.hbw;
        let w = hbw + 1;
        // lo[i * w + d] = L[i, i - d]
        let mut lo = vec![0.0; n * w];
        for j in 0..n {
            let kmin = j.saturating_sub(hbw);
            let mut s = self.get(j, j);
            for k in kmin..j {
                let l_jk = lo[j * w + (j - k)];
                s -= l_jk * l_jk;
            }
            if s <= 0.0 || !s.is_finite() {
                return Err(Error::NoConvergence {
                    converged: j,
                    requested: n,
                    tol: s,
                });
            }
            let ljj = s.sqrt();
            lo[j * w] = ljj;
            let imax = (j + hbw).min(n - 1);
            for i in j + 1..=imax {
                let kmin2 = i.saturating_sub(hbw).max(kmin);
                let mut t = self.get(i, j);
                for k in kmin2..j {
                    t -= lo[i * w + (i - k)] * lo[j * w + (j - k)];
                }
                lo[i * w + (i - j)] = t / ljj;
            }
        }
        Ok(BandChol { n, hbw, lo })
    }
}

/// Lower-triangular banded Cholesky factor.
#[derive(Debug, Clone)]
pub struct BandChol {
    pub n: usize,
    pub hbw: usize,
    lo: Vec<f64>,
}

impl BandChol {
    /// Solves `L L^T x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let w = self.hbw + 1;
        let n = self.n;
        // forward
        for i in 0..n {
            let dlo = i.min(self.hbw);
            let mut acc = b[i];
            let row = &self.lo[i * w..i * w + dlo + 1];
            for d in 1..=dlo {
                acc -= row[d] * b[i - d];
            }
            b[i] = acc / row[0];
        }
        // backward (L^T)
        for i in (0..n).rev() {
            let dhi = (n - 1 - i).min(self.hbw);
            let mut acc = b[i];
            for d in 1..=dhi {
                acc -= self.lo[(i + d) * w + d] * b[i + d];
            }
            b[i] = acc / self.lo[i * w];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, hbw: usize, rng: &mut ChaCha8Rng) -> SymBand {
        let mut a = SymBand::zeros(n, hbw);
        for i in 0..n {
            for d in 1..=hbw.min(n - 1 - i) {
                a.add(i, i + d, rng.random_range(-1.0..1.0));
            }
        }
        // diagonal dominance keeps it PD
        for i in 0..n {
            a.add(i, i, 2.0 * hbw as f64 + 1.0);
        }
        a
    }

    #[test]
    fn cholesky_solve_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, hbw) in &[(12usize, 3usize), (40, 7), (90, 1)] {
            let a = random_spd(n, hbw, &mut rng);
            let chol = a.cholesky().unwrap();
            let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let mut b = vec![0.0; n];
            a.matvec(&x_true, &mut b);
            chol.solve_in_place(&mut b);
            for (xa, xb) in b.iter().zip(x_true.iter()) {
                assert!((xa - xb).abs() < 1e-10, "{xa} vs {xb}");
            }
        }
    }

    #[test]
    fn matvec_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_spd(25, 4, &mut rng);
        let dense = a.to_dense();
        let x: Vec<f64> = (0..25).map(|i| (i as f64 * 1.3).cos()).collect();
        let mut y = vec![0.0; 25];
        a.matvec(&x, &mut y);
        let xd = nalgebra::DVector::from_column_slice(&x);
        let yd = dense * xd;
        for i in 0..25 {
            assert!((y[i] - yd[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_matrix_rejected() {
        let mut a = SymBand::zeros(5, 1);
        for i in 0..5 {
            a.add(i, i, -1.0);
        }
        assert!(a.cholesky().is_err());
    }
}
