//! Ad-hoc probe of the analytic scaling BIC; run with `--ignored --nocapture`.

use bicmm::bic::{find_bic, BicContext};
use bicmm::problem::validate_spec;
use bicmm::sweep::{AnalyticProvider, BasisProvider};

#[test]
#[ignore]
fn probe_scaling_bic() {
    let spec = bicmm::presets::scaling_rectangle();
    let mut v = validate_spec(&spec).unwrap();
    let provider = AnalyticProvider::new(&v, spec.truncation.m_cav);
    let basis0 = provider.basis_at(0.0).unwrap();
    let band = v.derive_mu_band(&basis0.lambdas).unwrap();
    println!("band = {band:?}");
    println!("lambdas at 0: {:?}", &basis0.lambdas[..6]);
    println!("origin values: {:?}", &basis0.origin_values[..6]);

    let ctx = BicContext::new(&provider, &v, band);
    for &d in &[-0.08, -0.04, 0.0, 0.04, 0.08] {
        let red = ctx.reduction_at(d, 1.02).unwrap();
        println!(
            "delta {d:+.3}: f0 = {:+.6}, f1 = {:+.6}, a20 = {:+.6}, a21 = {:+.6}",
            red.f0, red.f1, red.a20, red.a21
        );
    }
    let sol = find_bic(&ctx, v.spec.delta_range, 41).unwrap();
    println!(
        "BIC: delta* = {:.8}, mu* = {:.8}, sigma_min_rel = {:.3e}, b0_rel = {:.3e}, residuals = {:?}, fp iters = {}",
        sol.delta_star, sol.mu_star, sol.sigma_min_rel, sol.b0_rel, sol.residuals, sol.fixed_point_iterations
    );
}
