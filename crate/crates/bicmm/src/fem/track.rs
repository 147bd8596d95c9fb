//! Eigenvalue branch tracking across the scan parameter by M-weighted
//! overlap assignment, so that branch labels follow eigenvectors through
//! crossings instead of sorted order.

use crate::error::{Error, Result};
use crate::fem::band::SymBand;
use crate::fem::eigen::EigenBasis;

/// Assignment applied at one sweep step.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub from_delta: f64,
    pub to_delta: f64,
    /// `permutation[branch] = ` index of the matching vector in the next
    /// (pre-permutation) basis.
    pub permutation: Vec<usize>,
    pub min_margin: f64,
    pub sign_flips: usize,
}

/// Eigenvalue pairs closer than this (relative) count as degenerate; the
/// labeling inside such a cluster is immaterial and excluded from the
/// ambiguity margin.
const DEGENERACY_TOL: f64 = 1e-3;

/// Relabels `bases[1..]` so that for every tracked branch `m` the overlap
/// `<psi_m(delta_k), psi_m(delta_{k+1})>_M` is maximal under a one-to-one
/// assignment, and flips signs so consecutive overlaps are positive. Only
/// the first `track_count` branches are relabeled; the remainder stay in
/// sorted order.
pub fn track_branches(
    bases: &mut [EigenBasis],
    mass: &SymBand,
    track_count: usize,
) -> Result<Vec<StepReport>> {
    let mut reports = Vec::new();
    for k in 0..bases.len().saturating_sub(1) {
        let p = track_count
            .min(bases[k].lambdas.len())
            .min(bases[k + 1].lambdas.len());
        let overlap = overlap_matrix(&bases[k], &bases[k + 1], mass, p);
        let perm = greedy_assign(&overlap);
        let margin = assignment_margin(&overlap, &perm, &bases[k + 1].lambdas);
        if margin < 0.1 {
            return Err(Error::AmbiguousAssignment {
                delta_a: bases[k].delta,
                delta_b: bases[k + 1].delta,
                margin,
            });
        }
        let mut flips = 0;
        apply_permutation(&mut bases[k + 1], &perm);
        for i in 0..p {
            if overlap[i][perm[i]] < 0.0 {
                bases[k + 1].vectors[i].iter_mut().for_each(|v| *v = -*v);
                flips += 1;
            }
        }
        reports.push(StepReport {
            from_delta: bases[k].delta,
            to_delta: bases[k + 1].delta,
            permutation: perm,
            min_margin: margin,
            sign_flips: flips,
        });
    }
    Ok(reports)
}

/// Matches a single basis against a reference (used when bisection lands
/// between sweep grid points). Returns the permutation and relabels `basis`.
pub fn align_to_reference(
    reference: &EigenBasis,
    basis: &mut EigenBasis,
    mass: &SymBand,
    track_count: usize,
) -> Result<StepReport> {
    let mut pair = [reference.clone(), std::mem::replace(basis, empty_basis())];
    let mut reports = track_branches(&mut pair, mass, track_count)?;
    *basis = std::mem::replace(&mut pair[1], empty_basis());
    Ok(reports.pop().expect("one step"))
}

fn empty_basis() -> EigenBasis {
    EigenBasis {
        delta: 0.0,
        lambdas: Vec::new(),
        vectors: Vec::new(),
    }
}

fn overlap_matrix(a: &EigenBasis, b: &EigenBasis, mass: &SymBand, p: usize) -> Vec<Vec<f64>> {
    let n = mass.n;
    let mb: Vec<Vec<f64>> = b.vectors[..p]
        .iter()
        .map(|v| {
            let mut out = vec![0.0; n];
            mass.matvec(v, &mut out);
            out
        })
        .collect();
    (0..p)
        .map(|i| {
            (0..p)
                .map(|j| {
                    a.vectors[i]
                        .iter()
                        .zip(mb[j].iter())
                        .map(|(x, y)| x * y)
                        .sum()
                })
                .collect()
        })
        .collect()
}

fn greedy_assign(overlap: &[Vec<f64>]) -> Vec<usize> {
    let p = overlap.len();
    let mut perm = vec![usize::MAX; p];
    let mut row_done = vec![false; p];
    let mut col_done = vec![false; p];
    for _ in 0..p {
        let mut best = (0usize, 0usize, -1.0f64);
        for i in 0..p {
            if row_done[i] {
                continue;
            }
            for j in 0..p {
                if col_done[j] {
                    continue;
                }
                if overlap[i][j].abs() > best.2 {
                    best = (i, j, overlap[i][j].abs());
                }
            }
        }
        perm[best.0] = best.1;
        row_done[best.0] = true;
        col_done[best.1] = true;
    }
    perm
}

/// Worst gap between the chosen overlap and the best competitor whose
/// eigenvalue is separated from the chosen one. Competitors inside a
/// degenerate cluster do not count: any labeling there is equivalent.
fn assignment_margin(overlap: &[Vec<f64>], perm: &[usize], new_lambdas: &[f64]) -> f64 {
    let p = overlap.len();
    let mut worst = f64::INFINITY;
    for i in 0..p {
        let chosen = overlap[i][perm[i]].abs();
        let lam_chosen = new_lambdas[perm[i]];
        let mut competitor = 0.0f64;
        for j in 0..p {
            if j == perm[i] {
                continue;
            }
            if (new_lambdas[j] - lam_chosen).abs() <= DEGENERACY_TOL * (1.0 + lam_chosen.abs()) {
                continue;
            }
            competitor = competitor.max(overlap[i][j].abs());
        }
        worst = worst.min(chosen - competitor);
    }
    worst
}

fn apply_permutation(basis: &mut EigenBasis, perm: &[usize]) {
    let p = perm.len();
    let mut lambdas = basis.lambdas.clone();
    let mut vectors = basis.vectors.clone();
    for i in 0..p {
        lambdas[i] = basis.lambdas[perm[i]];
        vectors[i] = basis.vectors[perm[i]].clone();
    }
    basis.lambdas = lambdas;
    basis.vectors = vectors;
}

/// Permutation sorting branch labels by eigenvalue, reported alongside
/// sweeps so crossings are visible in the output.
pub fn sorted_order(lambdas: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..lambdas.len()).collect();
    idx.sort_by(|&a, &b| lambdas[a].partial_cmp(&lambdas[b]).unwrap());
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble::assemble;
    use crate::fem::eigen::{solve_eigen, SolveOpts};
    use crate::fem::mesh::build_mesh;
    use crate::problem::validate_spec;
    use std::collections::HashMap;

    fn homogeneous_bases(steps: usize) -> (Vec<EigenBasis>, SymBand) {
        let spec = crate::presets::offset_rectangle();
        let v = validate_spec(&spec).unwrap();
        let mesh = build_mesh(&v, 5).unwrap();
        let (k, m) = assemble(&mesh, &HashMap::from([(0u32, 1.0)])).unwrap();
        let mut bases = Vec::new();
        for s in 0..steps {
            let mut b = solve_eigen(&k, &m, 6, &SolveOpts::default(), None).unwrap();
            b.delta = s as f64;
            bases.push(b);
        }
        (bases, m)
    }

    #[test]
    fn constant_spectrum_keeps_identity() {
        let (mut bases, m) = homogeneous_bases(3);
        let reports = track_branches(&mut bases, &m, 6).unwrap();
        for r in &reports {
            assert_eq!(r.permutation, vec![0, 1, 2, 3, 4, 5]);
            assert!(r.min_margin > 0.5);
        }
    }

    #[test]
    fn sign_flips_are_corrected() {
        let (mut bases, m) = homogeneous_bases(2);
        for v in bases[1].vectors.iter_mut() {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        let reports = track_branches(&mut bases, &m, 6).unwrap();
        assert_eq!(reports[0].sign_flips, 6);
        // consecutive overlaps now positive
        let n = m.n;
        for i in 0..6 {
            let mut mv = vec![0.0; n];
            m.matvec(&bases[1].vectors[i], &mut mv);
            let o: f64 = bases[0].vectors[i]
                .iter()
                .zip(mv.iter())
                .map(|(a, b)| a * b)
                .sum();
            assert!(o > 0.9);
        }
    }

    #[test]
    fn swapped_input_branches_are_restored() {
        let (mut bases, m) = homogeneous_bases(2);
        bases[1].lambdas.swap(2, 3);
        bases[1].vectors.swap(2, 3);
        let reports = track_branches(&mut bases, &m, 6).unwrap();
        assert_eq!(reports[0].permutation[2], 3);
        assert_eq!(reports[0].permutation[3], 2);
        assert!((bases[0].lambdas[2] - bases[1].lambdas[2]).abs() < 1e-9);
    }
}
