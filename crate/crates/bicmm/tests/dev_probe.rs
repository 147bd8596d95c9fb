//! Ad-hoc development probes; run with `--ignored --nocapture`.

use bicmm::fem::SolveOpts;
use bicmm::problem::validate_spec;
use bicmm::sweep::{detect_crossing, linspace, sweep_grid, BasisProvider, FemProvider};
use std::time::Instant;

#[test]
#[ignore]
fn probe_example1_crossing() {
    let spec = bicmm::presets::example1();
    let v = validate_spec(&spec).unwrap();
    for res in [32usize, 48, 64] {
        let t0 = Instant::now();
        let provider = FemProvider::new(&v, res, 12, SolveOpts::default(), &[]).unwrap();
        let grid = linspace(1.40, 1.52, 13);
        let data = sweep_grid(&provider, &grid).unwrap();
        let t1 = t0.elapsed();
        for (d, b) in data.deltas.iter().zip(data.bases.iter()) {
            println!(
                "res {res} n = {d:.3}: l4..l9 = {:?}",
                &b.lambdas[4..10.min(b.lambdas.len())]
                    .iter()
                    .map(|x| (x * 1000.0).round() / 1000.0)
                    .collect::<Vec<_>>()
            );
        }
        let cross = detect_crossing(&provider, &data, 7, 1e-6).unwrap();
        println!(
            "res {res}: crossing n* = {:.5}, lambda = {:.5}, sweep {:?}, total solves {}",
            cross.delta,
            cross.lambda,
            t1,
            provider.solves()
        );
        let basis = provider.basis_at(cross.delta).unwrap();
        println!(
            "  at crossing: psi5(o) = {:.5}, psi6(o) = {:.5}",
            basis.origin_values[5], basis.origin_values[6]
        );
    }
}
