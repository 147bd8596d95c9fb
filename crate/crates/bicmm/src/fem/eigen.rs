//! Generalized symmetric eigensolver for the pencil `(K, M)`: dense
//! reduction for small problems, spectral-transform subspace iteration with
//! a banded Cholesky for everything else.

use crate::error::{Error, Result};
use crate::fem::band::{BandChol, SymBand};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Eigenpairs of the closed cavity at one scan parameter value.
/// Vectors are M-orthonormal nodal coefficient arrays.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    pub delta: f64,
    pub lambdas: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SolveOpts {
    /// Problems up to this dimension use the dense no-iteration path.
    pub dense_cutoff: usize,
    /// Origin of the spectral transform `(K - sigma M)^{-1} M`. Any value
    /// below the spectrum keeps the factorization positive definite; the
    /// lowest eigenvalue of the Neumann pencil is 0.
    pub sigma: f64,
    pub max_iters: usize,
    pub eig_tol: f64,
    pub seed: u64,
}

impl Default for SolveOpts {
    fn default() -> Self {
        SolveOpts {
            dense_cutoff: 3000,
            sigma: -1.0,
            max_iters: 400,
            eig_tol: 1e-8,
            seed: 0xB1C5EED,
        }
    }
}

/// `||K x - lambda M x||_2 / ||M x||_2`.
pub fn rel_residual(k: &SymBand, m: &SymBand, lambda: f64, x: &[f64]) -> f64 {
    let n = x.len();
    let mut kx = vec![0.0; n];
    let mut mx = vec![0.0; n];
    k.matvec(x, &mut kx);
    m.matvec(x, &mut mx);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        let r = kx[i] - lambda * mx[i];
        num += r * r;
        den += mx[i] * mx[i];
    }
    (num / den).sqrt()
}

/// The `count` lowest eigenpairs of `K x = lambda M x`, ascending and
/// M-orthonormal, with per-pair residuals below `opts.eig_tol`.
///
/// `warm` seeds the iteration (continuation across a sweep); extra or
/// missing columns are handled.
pub fn solve_eigen(
    k: &SymBand,
    m: &SymBand,
    count: usize,
    opts: &SolveOpts,
    warm: Option<&[Vec<f64>]>,
) -> Result<EigenBasis> {
    let n = k.n;
    assert!(count >= 1 && count <= n, "count {count} out of range");
    if n <= opts.dense_cutoff {
        dense_solve(k, m, count, opts)
    } else {
        subspace_solve(k, m, count, opts, warm)
    }
}

fn dense_solve(k: &SymBand, m: &SymBand, count: usize, opts: &SolveOpts) -> Result<EigenBasis> {
    let kd = k.to_dense();
    let md = m.to_dense();
    let chol = nalgebra::Cholesky::new(md).ok_or(Error::NoConvergence {
        converged: 0,
        requested: count,
        tol: opts.eig_tol,
    })?;
    let l = chol.l();
    // C = L^{-1} K L^{-T}
    let b = l
        .solve_lower_triangular(&kd)
        .expect("L has positive diagonal");
    let c = l
        .solve_lower_triangular(&b.transpose())
        .expect("L has positive diagonal");
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..k.n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());

    let mut lambdas = Vec::with_capacity(count);
    let mut vectors = Vec::with_capacity(count);
    for &idx in order.iter().take(count) {
        lambdas.push(eig.eigenvalues[idx]);
        let y = eig.eigenvectors.column(idx).into_owned();
        let x = l.tr_solve_lower_triangular(&y).expect("L is triangular");
        vectors.push(x.iter().copied().collect());
    }
    Ok(EigenBasis {
        delta: 0.0,
        lambdas,
        vectors,
    })
}

/// Column block stored as a dense matrix so the O(n p^2) algebra runs
/// through the cache-blocked gemm path; band solves and matvecs stay
/// parallel over columns.
struct Block {
    n: usize,
    m: DMatrix<f64>,
}

impl Block {
    fn cols(&self) -> usize {
        self.m.ncols()
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.m.as_slice()[j * self.n..(j + 1) * self.n]
    }

    fn apply(op: &SymBand, x: &Block) -> Block {
        let n = x.n;
        let mut out = DMatrix::zeros(n, x.cols());
        out.as_mut_slice()
            .par_chunks_mut(n)
            .zip(x.m.as_slice().par_chunks(n))
            .for_each(|(o, c)| op.matvec(c, o));
        Block { n, m: out }
    }

    fn solve(chol: &BandChol, x: &Block) -> Block {
        let n = x.n;
        let mut out = x.m.clone();
        out.as_mut_slice()
            .par_chunks_mut(n)
            .for_each(|c| chol.solve_in_place(c));
        Block { n, m: out }
    }

    /// `self^T other`.
    fn gram(&self, other: &Block) -> DMatrix<f64> {
        self.m.tr_mul(&other.m)
    }

    /// `self * q`.
    fn rotate(&self, q: &DMatrix<f64>) -> Block {
        Block {
            n: self.n,
            m: &self.m * q,
        }
    }

    fn keep_prefix(&mut self, count: usize) {
        self.m = self.m.columns(0, count).into_owned();
    }

    fn tail(&self, from: usize) -> Block {
        Block {
            n: self.n,
            m: self.m.columns(from, self.cols() - from).into_owned(),
        }
    }

    fn head(&self, count: usize) -> Block {
        Block {
            n: self.n,
            m: self.m.columns(0, count).into_owned(),
        }
    }

    /// Overwrites columns `at..at + src.cols()` with `src`.
    fn put(&mut self, at: usize, src: &Block) {
        self.m
            .columns_mut(at, src.cols())
            .copy_from(&src.m);
    }
}

/// In-place `Z <- Z L^{-T}` (and the same transform on `MZ`), where
/// `G = Z^T M Z = L L^T`.
fn whiten(z: &mut Block, mz: &mut Block, l: &DMatrix<f64>) {
    // W L^T = Z  <=>  W^T = L^{-1} Z^T
    let wt = l
        .solve_lower_triangular(&z.m.transpose())
        .expect("Cholesky factor is nonsingular");
    z.m = wt.transpose();
    let mt = l
        .solve_lower_triangular(&mz.m.transpose())
        .expect("Cholesky factor is nonsingular");
    mz.m = mt.transpose();
}

/// M-orthonormalizes `z` (updating `mz` alongside) by Cholesky QR, applied
/// twice for orthogonality at working precision.
fn m_orthonormalize(z: &mut Block, mz: &mut Block) -> Result<()> {
    for _ in 0..2 {
        let g = z.gram(mz);
        let g = (&g + g.transpose()) * 0.5;
        let chol = nalgebra::Cholesky::new(g).ok_or(Error::NoConvergence {
            converged: 0,
            requested: z.cols(),
            tol: 0.0,
        })?;
        whiten(z, mz, &chol.l());
    }
    Ok(())
}

/// Subspace iteration with the spectral transform `(K - sigma M)^{-1} M`,
/// converged pairs locked out of further solves.
fn subspace_solve(
    k: &SymBand,
    m: &SymBand,
    count: usize,
    opts: &SolveOpts,
    warm: Option<&[Vec<f64>]>,
) -> Result<EigenBasis> {
    let n = k.n;
    let p = (count + (count / 3).max(12)).min(n);
    let shifted = k.add_scaled(m, -opts.sigma);
    let chol = shifted.cholesky().map_err(|_| Error::NoConvergence {
        converged: 0,
        requested: count,
        tol: opts.eig_tol,
    })?;

    // Seed block: warm-start columns, then deterministic noise.
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (n as u64).rotate_left(17));
    let mut cols = Vec::with_capacity(p);
    if let Some(w) = warm {
        for c in w.iter().take(p) {
            assert_eq!(c.len(), n, "warm vector has wrong dimension");
            cols.push(c.clone());
        }
    }
    while cols.len() < p {
        cols.push((0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
    }
    let mut x = Block { n, cols };
    let mut mx = Block::apply(m, &x);
    m_orthonormalize(&mut x, &mut mx)?;

    // Locked prefix: converged eigenpairs that no longer move.
    let mut locked = 0usize;
    let mut lambdas: Vec<f64> = vec![0.0; p];

    let mut best_worst = f64::INFINITY;
    let mut stagnant = 0usize;
    for _it in 0..opts.max_iters {
        let active = p - locked;
        // spectral transform on the active columns
        let mx_active = Block {
            n,
            cols: mx.cols[locked..].to_vec(),
        };
        let mut z = Block::solve(&chol, &mx_active);
        // project out the locked subspace: z -= X_l (MX_l^T z)
        if locked > 0 {
            let mxl = Block {
                n,
                cols: mx.cols[..locked].to_vec(),
            };
            let coef = mxl.gram(&z); // locked x active
            z.cols.par_iter_mut().enumerate().for_each(|(j, col)| {
                for (l, xl) in x.cols[..locked].iter().enumerate() {
                    let w = coef[(l, j)];
                    if w != 0.0 {
                        for (a, b) in col.iter_mut().zip(xl.iter()) {
                            *a -= w * b;
                        }
                    }
                }
            });
        }
        let mut mz = Block::apply(m, &z);
        m_orthonormalize(&mut z, &mut mz)?;

        // Rayleigh-Ritz on the active block
        let kz = Block::apply(k, &z);
        let kp = z.gram(&kz);
        let kp = (&kp + kp.transpose()) * 0.5;
        let eig = SymmetricEigen::new(kp);
        let mut order: Vec<usize> = (0..active).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let q = DMatrix::from_fn(active, active, |i, j| eig.eigenvectors[(i, order[j])]);
        let theta: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();

        let xa = z.rotate(&q);
        let mxa = mz.rotate(&q);
        let kxa = kz.rotate(&q);
        for (i, t) in theta.iter().enumerate() {
            lambdas[locked + i] = *t;
        }
        x.cols.truncate(locked);
        x.cols.extend_from_slice(&xa.cols);
        mx.cols.truncate(locked);
        mx.cols.extend_from_slice(&mxa.cols);

        // residuals of the pairs still wanted; lock the converged prefix
        let mut worst = 0.0f64;
        let mut newly_locked = 0usize;
        let mut prefix_converged = true;
        for i in 0..count.saturating_sub(locked) {
            let r = residual_of(&kxa.cols[i], &mxa.cols[i], theta[i]);
            if prefix_converged && r <= opts.eig_tol {
                newly_locked += 1;
            } else {
                prefix_converged = false;
            }
            if locked + i < count {
                worst = worst.max(r);
            }
        }
        if locked + newly_locked >= count {
            lambdas.truncate(count);
            x.cols.truncate(count);
            // guard against mis-ordered locking: the spectrum must ascend
            let sorted = lambdas.windows(2).all(|w| w[0] <= w[1] + 1e-9);
            if sorted {
                return Ok(EigenBasis {
                    delta: 0.0,
                    lambdas,
                    vectors: x.cols,
                });
            }
            return Err(Error::NoConvergence {
                converged: count,
                requested: count,
                tol: opts.eig_tol,
            });
        }
        locked += newly_locked;

        if worst >= 0.97 * best_worst {
            stagnant += 1;
            if stagnant > 25 {
                return Err(Error::NoConvergence {
                    converged: locked,
                    requested: count,
                    tol: opts.eig_tol,
                });
            }
        } else {
            stagnant = 0;
            best_worst = worst;
        }
    }
    Err(Error::NoConvergence {
        converged: locked,
        requested: count,
        tol: opts.eig_tol,
    })
}
