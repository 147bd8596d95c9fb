//! Sweep drivers: produce branch-tracked cavity bases as functions of the
//! scan parameter, from the closed-form rectangle engine or the
//! finite-element pipeline, and locate the eigenvalue crossing that anchors
//! the BIC search.

use crate::basis::CavityBasis;
use crate::cavity_analytic::{rect_basis_modes, RectMode};
use crate::error::{Error, Result};
use crate::fem::{
    align_to_reference, assemble, build_mesh_with_snaps, solve_eigen, to_cavity_basis, EigenBasis,
    Mesh, SolveOpts, SymBand,
};
use crate::problem::{Perturbation, ValidatedSpec};
use std::collections::HashMap;
use std::sync::Mutex;

/// Source of branch-tracked cavity bases along the sweep.
pub trait BasisProvider: Sync {
    fn basis_at(&self, delta: f64) -> Result<CavityBasis>;
    /// Junction coupling prefactor at `delta`.
    fn coupling_scale(&self, delta: f64) -> f64;
}

/// Closed-form rectangle basis under horizontal scaling (or constant for
/// index sweeps without inclusions). Branch labels are frozen to the mode
/// list enumerated at `delta = 0`, so they follow `(p, q)` through
/// crossings.
pub struct AnalyticProvider {
    spec: ValidatedSpec,
    modes0: Vec<RectMode>,
}

impl AnalyticProvider {
    pub fn new(v: &ValidatedSpec, count: usize) -> Self {
        let modes0 = rect_basis_modes(&v.cavity, 1.0, count);
        AnalyticProvider {
            spec: v.clone(),
            modes0,
        }
    }

    /// The frozen-label modes at a given `delta`, for field reconstruction.
    pub fn modes_at(&self, delta: f64) -> Vec<RectMode> {
        let s = self.spec.spec.stretch(delta);
        let l = self.spec.cavity.width() * s;
        let w = self.spec.cavity.height();
        self.modes0
            .iter()
            .map(|m| RectMode::new(m.p, m.q, l, w, m.y0))
            .collect()
    }
}

impl BasisProvider for AnalyticProvider {
    fn basis_at(&self, delta: f64) -> Result<CavityBasis> {
        let modes = self.modes_at(delta);
        Ok(CavityBasis {
            delta,
            lambdas: modes.iter().map(|m| m.lambda).collect(),
            traces: modes.iter().map(|m| m.trace()).collect(),
            origin_values: modes.iter().map(|m| m.at_origin()).collect(),
            provenance: crate::basis::Provenance::Analytic,
        })
    }

    fn coupling_scale(&self, delta: f64) -> f64 {
        self.spec.spec.coupling_scale(delta)
    }
}

/// Finite-element sweep engine: one mesh, per-delta stiffness, warm-started
/// eigensolves, and branch labels chained to the nearest already-solved
/// parameter value. Optionally wraps a ratio-2 coarser companion whose
/// eigenvalues drive a Richardson correction.
pub struct FemProvider {
    pub spec: ValidatedSpec,
    pub mesh: Mesh,
    pub mass: SymBand,
    pub count: usize,
    pub opts: SolveOpts,
    track_count: usize,
    cache: Mutex<Vec<(f64, EigenBasis)>>,
    richardson: Option<Box<FemProvider>>,
}

impl FemProvider {
    pub fn new(
        v: &ValidatedSpec,
        resolution: usize,
        count: usize,
        opts: SolveOpts,
        extra_snaps: &[f64],
    ) -> Result<Self> {
        // Sweeps always use the warm-started iterative path; the dense
        // reduction is kept for one-off reference solves only.
        let opts = SolveOpts {
            dense_cutoff: opts.dense_cutoff.min(256),
            ..opts
        };
        let mesh = build_mesh_with_snaps(v, resolution, extra_snaps)?;
        let n_map = Self::index_map(v, v.spec.delta_range[0]);
        let (_, mass) = assemble(&mesh, &n_map)?;
        let track_count = (v.spec.truncation.m + 2).min(count);
        Ok(FemProvider {
            spec: v.clone(),
            mesh,
            mass,
            count,
            opts,
            track_count,
            cache: Mutex::new(Vec::new()),
            richardson: None,
        })
    }

    /// Attaches a ratio-2 coarser companion; eigenvalues are then
    /// extrapolated as `lambda + (lambda_fine - lambda_coarse) / 3`.
    pub fn with_richardson(
        v: &ValidatedSpec,
        resolution: usize,
        count: usize,
        opts: SolveOpts,
        extra_snaps: &[f64],
    ) -> Result<Self> {
        let mut fine = Self::new(v, resolution, count, opts.clone(), extra_snaps)?;
        let coarse = Self::new(v, resolution / 2, count, opts, extra_snaps)?;
        fine.richardson = Some(Box::new(coarse));
        Ok(fine)
    }

    fn index_map(v: &ValidatedSpec, delta: f64) -> HashMap<u32, f64> {
        let mut map = HashMap::from([(0u32, 1.0)]);
        for inc in &v.spec.inclusions {
            map.insert(inc.region_id, v.spec.n_of_region(inc.region_id, delta));
        }
        map
    }

    /// Region-to-index map at a scan value.
    pub fn index_map_at(&self, delta: f64) -> HashMap<u32, f64> {
        Self::index_map(&self.spec, delta)
    }

    /// Raw (uncorrected) tracked eigenbasis at `delta`, with nodal vectors.
    pub fn eigenbasis_at(&self, delta: f64) -> Result<EigenBasis> {
        self.eigen_at(delta)
    }

    fn eigen_at(&self, delta: f64) -> Result<EigenBasis> {
        {
            let cache = self.cache.lock().unwrap();
            if let Some((_, b)) = cache.iter().find(|(d, _)| *d == delta) {
                return Ok(b.clone());
            }
        }
        let n_map = Self::index_map(&self.spec, delta);
        let (k, _) = assemble(&self.mesh, &n_map)?;
        let neighbor = {
            let cache = self.cache.lock().unwrap();
            cache
                .iter()
                .min_by(|a, b| {
                    (a.0 - delta)
                        .abs()
                        .partial_cmp(&(b.0 - delta).abs())
                        .unwrap()
                })
                .map(|(d, b)| (*d, b.clone()))
        };
        // Cold starts seed the subspace with the homogeneous-hull modes
        // sampled at the nodes; the inclusions perturb, not reshape, the
        // low spectrum.
        let seed_cols;
        let warm: Option<&[Vec<f64>]> = match &neighbor {
            Some((_, b)) => Some(b.vectors.as_slice()),
            None => {
                let modes = rect_basis_modes(&self.spec.cavity, 1.0, self.count);
                seed_cols = modes
                    .iter()
                    .map(|mode| {
                        self.mesh
                            .nodes
                            .iter()
                            .map(|p| mode.eval(p[0], p[1]))
                            .collect::<Vec<f64>>()
                    })
                    .collect::<Vec<_>>();
                Some(seed_cols.as_slice())
            }
        };
        let mut basis = solve_eigen(&k, &self.mass, self.count, &self.opts, warm)?;
        basis.delta = delta;
        if let Some((_, reference)) = &neighbor {
            align_to_reference(reference, &mut basis, &self.mass, self.track_count)?;
        }
        let mut cache = self.cache.lock().unwrap();
        cache.push((delta, basis.clone()));
        cache.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        Ok(basis)
    }

    /// Number of eigensolves performed so far.
    pub fn solves(&self) -> usize {
        self.cache.lock().unwrap().len()
    }
}

impl BasisProvider for FemProvider {
    fn basis_at(&self, delta: f64) -> Result<CavityBasis> {
        let basis = self.eigen_at(delta)?;
        let mut cavity = to_cavity_basis(&basis, &self.mesh);
        if let Some(coarse) = &self.richardson {
            let cb = coarse.eigen_at(delta)?;
            for (lam, lc) in cavity.lambdas.iter_mut().zip(cb.lambdas.iter()) {
                *lam += (*lam - lc) / 3.0;
            }
        }
        Ok(cavity)
    }

    fn coupling_scale(&self, delta: f64) -> f64 {
        self.spec.spec.coupling_scale(delta)
    }
}

/// Branch data sampled over a delta grid.
#[derive(Debug, Clone)]
pub struct SweepData {
    pub deltas: Vec<f64>,
    pub bases: Vec<CavityBasis>,
}

/// Evaluates the provider over the grid in order (so finite-element branch
/// chains grow from the left endpoint).
pub fn sweep_grid(provider: &dyn BasisProvider, deltas: &[f64]) -> Result<SweepData> {
    let mut bases = Vec::with_capacity(deltas.len());
    for &d in deltas {
        bases.push(provider.basis_at(d)?);
    }
    Ok(SweepData {
        deltas: deltas.to_vec(),
        bases,
    })
}

pub fn linspace(a: f64, b: f64, steps: usize) -> Vec<f64> {
    assert!(steps >= 2);
    (0..steps)
        .map(|i| a + (b - a) * i as f64 / (steps - 1) as f64)
        .collect()
}

/// A transversal crossing of the tracked pair.
#[derive(Debug, Clone)]
pub struct Crossing {
    pub delta: f64,
    pub lambda: f64,
    /// Tracked-pair gap at the two bracketing grid points.
    pub bracket: [f64; 2],
}

/// Locates the crossing of branches `m-2`, `m-1` on the sweep and refines it
/// by bisection to `tol`.
pub fn detect_crossing(
    provider: &dyn BasisProvider,
    data: &SweepData,
    m: usize,
    tol: f64,
) -> Result<Crossing> {
    let gap = |basis: &CavityBasis| basis.lambdas[m - 2] - basis.lambdas[m - 1];
    let mut bracket = None;
    for w in data.bases.windows(2) {
        let (g0, g1) = (gap(&w[0]), gap(&w[1]));
        if g0 == 0.0 {
            return Ok(Crossing {
                delta: w[0].delta,
                lambda: w[0].lambdas[m - 2],
                bracket: [g0, g1],
            });
        }
        if g0 * g1 < 0.0 {
            bracket = Some((w[0].delta, w[1].delta, g0, g1));
            break;
        }
    }
    let Some((mut a, mut b, mut ga, _gb)) = bracket else {
        return Err(Error::NoCrossing {
            delta_l: data.deltas[0],
            delta_r: *data.deltas.last().unwrap(),
        });
    };
    let bracket0 = [ga, _gb];
    while (b - a).abs() > tol {
        let mid = 0.5 * (a + b);
        let gm = gap(&provider.basis_at(mid)?);
        if gm == 0.0 {
            a = mid;
            b = mid;
            break;
        }
        if ga * gm < 0.0 {
            b = mid;
        } else {
            a = mid;
            ga = gm;
        }
    }
    let delta = 0.5 * (a + b);
    let basis = provider.basis_at(delta)?;
    Ok(Crossing {
        delta,
        lambda: 0.5 * (basis.lambdas[m - 2] + basis.lambdas[m - 1]),
        bracket: bracket0,
    })
}

/// Perturbation-family aware label for the scan parameter, for output
/// headers and logs.
pub fn scan_parameter_name(v: &ValidatedSpec) -> &'static str {
    match v.spec.perturbation {
        Perturbation::IndexSweep { .. } => "n",
        Perturbation::BoundaryScaling { .. } => "delta",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::validate_spec;

    #[test]
    fn analytic_scaling_crossing_at_zero() {
        let spec = crate::presets::scaling_rectangle();
        let v = validate_spec(&spec).unwrap();
        let provider = AnalyticProvider::new(&v, 30);
        let grid = linspace(-0.1, 0.1, 21);
        let data = sweep_grid(&provider, &grid).unwrap();
        let m = v.spec.truncation.m;
        let crossing = detect_crossing(&provider, &data, m, 1e-12).unwrap();
        assert!(
            crossing.delta.abs() < 1e-10,
            "crossing at {} instead of 0",
            crossing.delta
        );
        assert!((crossing.lambda - 1.0).abs() < 1e-10);
    }

    #[test]
    fn analytic_labels_follow_branches() {
        let spec = crate::presets::scaling_rectangle();
        let v = validate_spec(&spec).unwrap();
        let provider = AnalyticProvider::new(&v, 10);
        // at delta = +0.1 the stretched (1,0) eigenvalue dips below (0,2)
        let b = provider.basis_at(0.1).unwrap();
        let m = v.spec.truncation.m;
        // branch m-2 stays the (0,2) mode at lambda = 1
        assert!((b.lambdas[m - 2] - 1.0).abs() < 1e-12);
        assert!(b.lambdas[m - 1] < 1.0);
    }

    #[test]
    fn no_crossing_reported() {
        let spec = crate::presets::offset_rectangle();
        let v = validate_spec(&spec).unwrap();
        let provider = AnalyticProvider::new(&v, 20);
        let grid = linspace(-0.05, 0.05, 5);
        let data = sweep_grid(&provider, &grid).unwrap();
        let err = detect_crossing(&provider, &data, v.spec.truncation.m, 1e-10).unwrap_err();
        assert!(matches!(err, Error::NoCrossing { .. }));
    }
}
