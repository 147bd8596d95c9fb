//! Ad-hoc probes of resonance tracing and the symmetry-protected search.

use bicmm::bic::{symmetry_bic, BicContext};
use bicmm::problem::validate_spec;
use bicmm::resonance::ResonanceContext;
use bicmm::sweep::{linspace, AnalyticProvider, BasisProvider};

#[test]
#[ignore]
fn probe_scaling_resonances() {
    let spec = bicmm::presets::scaling_rectangle();
    let mut v = validate_spec(&spec).unwrap();
    let provider = AnalyticProvider::new(&v, spec.truncation.m_cav);
    let basis0 = provider.basis_at(0.0).unwrap();
    v.derive_mu_band(&basis0.lambdas).unwrap();
    let ctx = ResonanceContext {
        provider: &provider,
        v: &v,
    };
    let grid = linspace(-0.02, 0.02, 21);
    let pts = ctx.scan_resonances(&grid, &[2, 3]).unwrap();
    for p in &pts {
        if p.branch == 2 {
            println!(
                "branch 2 delta {:+.4}: mu = {:.8} {:+.3e} i, smin {:.2e}, it {}",
                p.delta, p.re_mu, p.im_mu, p.sigma_min_rel, p.iterations
            );
        }
    }
    let min2 = pts
        .iter()
        .filter(|p| p.branch == 2)
        .min_by(|a, b| a.im_mu.abs().partial_cmp(&b.im_mu.abs()).unwrap())
        .unwrap();
    println!(
        "branch 2 min |Im| = {:.3e} at delta = {:+.5}",
        min2.im_mu.abs(),
        min2.delta
    );
    let max_im3 = pts
        .iter()
        .filter(|p| p.branch == 3)
        .map(|p| p.im_mu.abs())
        .fold(0.0f64, f64::max);
    println!("branch 3 (flat-trace mode) max |Im| = {:.3e}", max_im3);
}

#[test]
#[ignore]
fn probe_symmetry_bic() {
    let spec = bicmm::presets::symmetric_rectangle();
    let mut v = validate_spec(&spec).unwrap();
    let provider = AnalyticProvider::new(&v, spec.truncation.m_cav);
    let basis0 = provider.basis_at(0.0).unwrap();
    v.derive_mu_band(&basis0.lambdas).unwrap();
    let band = v.spec.mu_band.unwrap();
    let ctx = BicContext::new(&provider, &v, band);
    // lowest odd-coupled branch: (0,1) at lambda = 0.25
    let sol = symmetry_bic(&ctx, 0.0, 1).unwrap();
    println!(
        "symmetry BIC: lambda = {:.6}, mu = {:.8}, iters = {}, smin = {:.3e}, b0 = {:.3e}",
        sol.lambda, sol.mu, sol.iterations, sol.sigma_min_rel, sol.b0_rel
    );
    // resonance cross-check: fully real resonance at the odd mu
    let rctx = ResonanceContext {
        provider: &provider,
        v: &v,
    };
    let r = rctx
        .find_resonance(0.0, num_complex::Complex64::new(sol.mu, 0.0), 1)
        .unwrap();
    println!(
        "resonance at odd mu: {:.8} {:+.3e} i, smin {:.2e}",
        r.re_mu, r.im_mu, r.sigma_min_rel
    );
}
