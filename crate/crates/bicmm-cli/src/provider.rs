//! Provider selection and band preparation shared by the subcommands.

use anyhow::{bail, Result};
use bicmm::basis::CavityBasis;
use bicmm::fem::SolveOpts;
use bicmm::sweep::{
    detect_crossing, linspace, sweep_grid, AnalyticProvider, BasisProvider, Crossing, FemProvider,
    SweepData,
};
use bicmm::{Perturbation, ValidatedSpec};

pub enum AnyProvider {
    Analytic(AnalyticProvider),
    Fem(FemProvider),
}

impl BasisProvider for AnyProvider {
    fn basis_at(&self, delta: f64) -> bicmm::Result<CavityBasis> {
        match self {
            AnyProvider::Analytic(p) => p.basis_at(delta),
            AnyProvider::Fem(p) => p.basis_at(delta),
        }
    }

    fn coupling_scale(&self, delta: f64) -> f64 {
        match self {
            AnyProvider::Analytic(p) => p.coupling_scale(delta),
            AnyProvider::Fem(p) => p.coupling_scale(delta),
        }
    }
}

/// Picks the basis engine: finite elements whenever inclusions are present,
/// the closed-form rectangle otherwise.
pub fn make_provider(
    v: &ValidatedSpec,
    resolution: usize,
    richardson: bool,
    eig_seed: u64,
) -> Result<AnyProvider> {
    let count = v.spec.truncation.m_cav;
    if v.spec.inclusions.is_empty() {
        return Ok(AnyProvider::Analytic(AnalyticProvider::new(v, count)));
    }
    if matches!(v.spec.perturbation, Perturbation::BoundaryScaling { .. }) {
        bail!("boundary scaling supports homogeneous rectangular cavities only");
    }
    let opts = SolveOpts {
        eig_tol: v.spec.tolerances.eig_tol,
        seed: eig_seed,
        ..SolveOpts::default()
    };
    let provider = if richardson {
        FemProvider::with_richardson(v, resolution, count, opts, &[])?
    } else {
        FemProvider::new(v, resolution, count, opts, &[])?
    };
    Ok(AnyProvider::Fem(provider))
}

/// Sweeps the scan grid, finds the crossing of the tracked pair, and fills
/// the mu band from the spectrum at the crossing (unless the config pinned
/// one).
pub fn prepare_band(
    v: &mut ValidatedSpec,
    provider: &dyn BasisProvider,
    grid: &[f64],
) -> Result<([f64; 2], Option<Crossing>, SweepData)> {
    let data = sweep_grid(provider, grid)?;
    let m = v.spec.truncation.m;
    match detect_crossing(provider, &data, m, v.spec.tolerances.root_tol.max(1e-10)) {
        Ok(crossing) => {
            let basis = provider.basis_at(crossing.delta)?;
            let band = v.derive_mu_band(&basis.lambdas)?;
            Ok((band, Some(crossing), data))
        }
        Err(e) => {
            if let Some(band) = v.spec.mu_band {
                Ok((band, None, data))
            } else {
                Err(e.into())
            }
        }
    }
}

pub fn scan_grid(v: &ValidatedSpec, steps: usize) -> Vec<f64> {
    linspace(v.spec.delta_range[0], v.spec.delta_range[1], steps.max(2))
}
