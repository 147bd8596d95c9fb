//! Bundled validation and convergence suites.

use crate::provider::AnyProvider;
use anyhow::Result;
use bicmm::bic::BicContext;
use bicmm::fem::{assemble, grad_norm_sq_in, rel_residual};
use bicmm::modematch::reduce::build_reduction;
use bicmm::modematch::waveguide::i_alpha_evanescent;
use bicmm::modematch::{overlaps, reduce_via_schur, WaveguideBasis};
use bicmm::sweep::BasisProvider;
use bicmm::ValidatedSpec;
use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(list: &mut Vec<Check>, name: &'static str, pass: bool, detail: String) {
    list.push(Check { name, pass, detail });
}

/// Runs the cross-module invariant suite on the configured problem.
/// Band-dependent checks need `band`; they are skipped (and reported) when
/// no band is available.
pub fn run_validate(
    v: &ValidatedSpec,
    provider: &AnyProvider,
    band: [f64; 2],
    crossing_delta: Option<f64>,
    seed: u64,
) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = v.h();
    let trunc = v.spec.truncation;

    // problem: validation idempotent, serialization round trip
    let again = v.revalidate()?;
    check(&mut out, "validate_idempotent", again == *v, String::new());
    let spec2 = bicmm::ProblemSpec::from_json(&v.spec.to_json())?;
    check(&mut out, "config_round_trip", spec2 == v.spec, String::new());

    // cavity_analytic: orthonormality of the hull modes under Gauss
    // quadrature
    {
        let l = v.cavity.width();
        let modes = bicmm::cavity_analytic::rect_basis_modes(&v.cavity, 1.0, 6);
        let gl = [
            (-0.906179845938664, 0.236926885056189),
            (-0.538469310105683, 0.478628670499366),
            (0.0, 0.568888888888889),
            (0.538469310105683, 0.478628670499366),
            (0.906179845938664, 0.236926885056189),
        ];
        let panels = 24usize;
        let pts = |a: f64, b: f64| -> Vec<(f64, f64)> {
            let mut out = Vec::new();
            for k in 0..panels {
                let pa = a + (b - a) * k as f64 / panels as f64;
                let pb = pa + (b - a) / panels as f64;
                for (x, wq) in gl {
                    out.push((0.5 * (pa + pb) + 0.5 * (pb - pa) * x, wq * 0.5 * (pb - pa)));
                }
            }
            out
        };
        let xs = pts(-l, 0.0);
        let ys = pts(v.cavity.y_lo, v.cavity.y_hi);
        let mut worst: f64 = 0.0;
        for (i, mi) in modes.iter().enumerate() {
            for (k, mk) in modes.iter().enumerate() {
                let mut acc = 0.0;
                for &(x, wx) in &xs {
                    let mut row = 0.0;
                    for &(y, wy) in &ys {
                        row += wy * mi.eval(x, y) * mk.eval(x, y);
                    }
                    acc += wx * row;
                }
                let expect = if i == k { 1.0 } else { 0.0 };
                worst = worst.max((acc - expect).abs());
            }
        }
        check(
            &mut out,
            "analytic_gram_identity",
            worst < 1e-9,
            format!("worst defect {worst:.3e}"),
        );
    }

    // finite elements on the configured geometry
    if let AnyProvider::Fem(fem) = provider {
        let delta0 = crossing_delta.unwrap_or(v.spec.delta_range[0]);
        let n_map = fem.index_map_at(delta0);
        let (k, m) = assemble(&fem.mesh, &n_map)?;
        let n = fem.mesh.nodes.len();
        let ones = vec![1.0; n];
        let mut k1 = vec![0.0; n];
        k.matvec(&ones, &mut k1);
        let k1_max = k1.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        check(
            &mut out,
            "stiffness_kernel",
            k1_max < 1e-12 * k.max_abs(),
            format!("||K 1||_inf = {k1_max:.3e}"),
        );
        let mut msum = vec![0.0; n];
        m.matvec(&ones, &mut msum);
        let area: f64 = msum.iter().sum();
        let exact = v.cavity.width() * v.cavity.height();
        check(
            &mut out,
            "mass_partitions_area",
            (area - exact).abs() < 1e-9 * exact,
            format!("sum M = {area:.12}"),
        );

        let basis = fem.eigenbasis_at(delta0)?;
        check(
            &mut out,
            "neumann_kernel_eigenvalue",
            basis.lambdas[0] < 1e-8,
            format!("lambda_0 = {:.3e}", basis.lambdas[0]),
        );
        let worst_res = basis
            .lambdas
            .iter()
            .zip(basis.vectors.iter())
            .map(|(&lam, x)| rel_residual(&k, &m, lam, x))
            .fold(0.0f64, f64::max);
        check(
            &mut out,
            "eigen_residuals",
            worst_res <= v.spec.tolerances.eig_tol,
            format!("worst residual {worst_res:.3e}"),
        );
        let mut worst_gram: f64 = 0.0;
        for i in 0..basis.vectors.len().min(20) {
            let mut mi = vec![0.0; n];
            m.matvec(&basis.vectors[i], &mut mi);
            for j in 0..basis.vectors.len().min(20) {
                let g: f64 = basis.vectors[j]
                    .iter()
                    .zip(mi.iter())
                    .map(|(a, b)| a * b)
                    .sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                worst_gram = worst_gram.max((g - expect).abs());
            }
        }
        check(
            &mut out,
            "mass_orthonormality",
            worst_gram < 1e-10,
            format!("worst Gram defect {worst_gram:.3e}"),
        );

        // index monotonicity: raising n lowers every eigenvalue (or ties)
        if matches!(
            v.spec.perturbation,
            bicmm::Perturbation::IndexSweep { .. }
        ) && !v.spec.inclusions.is_empty()
        {
            let d2 = delta0 + 0.05 * (v.spec.delta_range[1] - v.spec.delta_range[0]);
            let b2 = fem.eigenbasis_at(d2)?;
            let mut sorted_a = basis.lambdas.clone();
            let mut sorted_b = b2.lambdas.clone();
            sorted_a.sort_by(|x, y| x.partial_cmp(y).unwrap());
            sorted_b.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let ok = sorted_a
                .iter()
                .zip(sorted_b.iter())
                .all(|(a, b)| *b <= *a + 1e-10);
            check(
                &mut out,
                "eigenvalue_monotone_in_n",
                ok,
                format!("checked {} pairs", sorted_a.len()),
            );
        }

        // junction estimate: evanescent coupling sum bounded by the clear
        // zone gradient energy
        let wg = WaveguideBasis::new(h, trunc.j_wg);
        let cav = provider.basis_at(delta0)?;
        let table = overlaps(&cav, &wg);
        let n1 = match &v.spec.perturbation {
            bicmm::Perturbation::IndexSweep { n_base, .. } => {
                (n_base + v.spec.delta_range[0])
                    .max(n_base + v.spec.delta_range[1])
                    .max(1.0)
            }
            _ => 1.0,
        };
        let mu_mid = 0.5 * (band[0] + band[1]);
        let mut ok = true;
        let mut worst_ratio = 0.0f64;
        for mode in 0..basis.vectors.len().min(trunc.m + 4) {
            let lhs: f64 = (1..=trunc.j_wg)
                .map(|j| {
                    let w = i_alpha_evanescent(mu_mid, j, h);
                    (w * table.entries[j][mode] * table.entries[j][mode]).abs()
                })
                .sum();
            let rhs =
                n1 * n1 * grad_norm_sq_in(&fem.mesh, &n_map, &basis.vectors[mode], &v.r_h);
            if rhs > 0.0 {
                worst_ratio = worst_ratio.max(lhs / rhs);
            }
            if lhs > rhs * (1.0 + 1e-8) {
                ok = false;
            }
        }
        check(
            &mut out,
            "junction_estimate",
            ok,
            format!("worst lhs/rhs = {worst_ratio:.3}"),
        );
    }

    // modematch invariants at band points
    {
        let ctx = BicContext::new(provider, v, band);
        let delta0 = crossing_delta.unwrap_or(0.5 * (v.spec.delta_range[0] + v.spec.delta_range[1]));
        let (basis, table) = ctx.table_at(delta0)?;

        check(
            &mut out,
            "bessel_consistency",
            table.bessel_excess(&basis) <= 1e-10,
            format!("excess {:.3e}", table.bessel_excess(&basis)),
        );

        // coercivity of I - B at random band points
        let mut worst_quad = f64::INFINITY;
        let mut worst_sigma = f64::INFINITY;
        for _ in 0..10 {
            let mu = band[0] + (band[1] - band[0]) * rng.random::<f64>();
            let red = match build_reduction(
                delta0,
                mu,
                &table,
                &basis.lambdas,
                trunc.m,
                provider.coupling_scale(delta0),
            ) {
                Ok(r) => r,
                Err(_) => continue,
            };
            let nt = red.b.nrows();
            let i_minus_b = DMatrix::identity(nt, nt) - &red.b;
            for _ in 0..10 {
                let x: Vec<f64> = (0..nt).map(|_| rng.random_range(-1.0..1.0)).collect();
                let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
                let xv = nalgebra::DVector::from_vec(x) / norm;
                let q = (&i_minus_b * &xv).dot(&xv);
                worst_quad = worst_quad.min(q - 1.0);
            }
            let sv = i_minus_b.singular_values();
            worst_sigma = worst_sigma.min(sv.iter().cloned().fold(f64::INFINITY, f64::min));
        }
        check(
            &mut out,
            "tail_block_coercive",
            worst_quad >= -1e-10,
            format!("min x^T(I-B)x - 1 = {worst_quad:.3e}"),
        );
        check(
            &mut out,
            "tail_block_sigma_min",
            worst_sigma >= 1.0 - 1e-10,
            format!("min sigma_min(I-B) = {worst_sigma:.12}"),
        );

        // the reduction agrees with the one-shot Schur route
        let mu_mid = 0.5 * (band[0] + band[1]);
        if let Ok(red) = build_reduction(
            delta0,
            mu_mid,
            &table,
            &basis.lambdas,
            trunc.m,
            provider.coupling_scale(delta0),
        ) {
            let direct = reduce_via_schur(
                mu_mid,
                &table,
                &basis.lambdas,
                trunc.m,
                provider.coupling_scale(delta0),
            );
            let diff = (red.matrix_3x2() - direct).norm() / direct.norm().max(1e-30);
            check(
                &mut out,
                "reduction_dual_route",
                diff < 1e-10,
                format!("relative gap {diff:.3e}"),
            );

            // truncation stability: doubling J_wg
            let wg2 = WaveguideBasis::new(h, 2 * trunc.j_wg);
            let table2 = overlaps(&basis, &wg2);
            if let Ok(red2) = build_reduction(
                delta0,
                mu_mid,
                &table2,
                &basis.lambdas,
                trunc.m,
                provider.coupling_scale(delta0),
            ) {
                let df = (red2.f0 - red.f0).abs().max((red2.f1 - red.f1).abs());
                check(
                    &mut out,
                    "jwg_truncation_stable",
                    df < 1e-6,
                    format!("|f(2J) - f(J)| = {df:.3e}"),
                );
            }

            // Lipschitz surrogate in mu over the band
            let mut lip = 0.0f64;
            let steps = 12;
            let dmu = (band[1] - band[0]) / steps as f64;
            let mut prev = (red.f0, red.f1);
            let mut prev_mu = mu_mid;
            for s in 0..steps {
                let mu = band[0] + (s as f64 + 0.5) * dmu;
                if let Ok(r) = build_reduction(
                    delta0,
                    mu,
                    &table,
                    &basis.lambdas,
                    trunc.m,
                    provider.coupling_scale(delta0),
                ) {
                    if s > 0 {
                        let d = (mu - prev_mu).abs();
                        lip = lip
                            .max((r.f0 - prev.0).abs() / d)
                            .max((r.f1 - prev.1).abs() / d);
                    }
                    prev = (r.f0, r.f1);
                    prev_mu = mu;
                }
            }
            check(
                &mut out,
                "lipschitz_below_one",
                lip < 1.0,
                format!("measured Lipschitz {lip:.4}"),
            );
        }
    }

    Ok(out)
}

/// One row of the convergence study table.
pub struct StudyRow {
    pub study: &'static str,
    pub parameter: String,
    pub value: f64,
    pub metric: String,
}

/// Doubling studies over mesh resolution, truncation sizes and the opening
/// width.
pub fn run_converge(
    v: &ValidatedSpec,
    provider: &AnyProvider,
    band: [f64; 2],
    crossing_delta: Option<f64>,
    resolution: usize,
) -> Result<Vec<StudyRow>> {
    let mut rows = Vec::new();
    let delta0 = crossing_delta.unwrap_or(0.5 * (v.spec.delta_range[0] + v.spec.delta_range[1]));
    let mu_mid = 0.5 * (band[0] + band[1]);
    let trunc = v.spec.truncation;
    let scale = provider.coupling_scale(delta0);

    // mesh doubling with Richardson extrapolation per branch
    if matches!(provider, AnyProvider::Fem(_)) && !v.spec.inclusions.is_empty() {
        let opts = bicmm::fem::SolveOpts {
            eig_tol: v.spec.tolerances.eig_tol,
            ..Default::default()
        };
        let coarse =
            bicmm::sweep::FemProvider::new(v, resolution / 2, trunc.m + 2, opts.clone(), &[])?;
        let fine = bicmm::sweep::FemProvider::new(v, resolution, trunc.m + 2, opts, &[])?;
        let bc = coarse.basis_at(delta0)?;
        let bf = fine.basis_at(delta0)?;
        for b in 0..=trunc.m {
            let extrap = bf.lambdas[b] + (bf.lambdas[b] - bc.lambdas[b]) / 3.0;
            rows.push(StudyRow {
                study: "mesh",
                parameter: format!("branch{b}@res{}", resolution / 2),
                value: bc.lambdas[b],
                metric: "lambda".into(),
            });
            rows.push(StudyRow {
                study: "mesh",
                parameter: format!("branch{b}@res{resolution}"),
                value: bf.lambdas[b],
                metric: "lambda".into(),
            });
            rows.push(StudyRow {
                study: "mesh",
                parameter: format!("branch{b}@extrapolated"),
                value: extrap,
                metric: "lambda".into(),
            });
        }
    }

    // M_cav doubling (analytic engines can afford it directly)
    if let AnyProvider::Analytic(_) = provider {
        let doubled = bicmm::sweep::AnalyticProvider::new(v, 2 * trunc.m_cav);
        let basis1 = provider.basis_at(delta0)?;
        let basis2 = doubled.basis_at(delta0)?;
        let wg = WaveguideBasis::new(v.h(), trunc.j_wg);
        let t1 = overlaps(&basis1, &wg);
        let t2 = overlaps(&basis2, &wg);
        let r1 = build_reduction(delta0, mu_mid, &t1, &basis1.lambdas, trunc.m, scale)?;
        let r2 = build_reduction(delta0, mu_mid, &t2, &basis2.lambdas, trunc.m, scale)?;
        rows.push(StudyRow {
            study: "mcav",
            parameter: format!("f0@{}", trunc.m_cav),
            value: r1.f0,
            metric: "f".into(),
        });
        rows.push(StudyRow {
            study: "mcav",
            parameter: format!("f0@{}", 2 * trunc.m_cav),
            value: r2.f0,
            metric: "f".into(),
        });
        rows.push(StudyRow {
            study: "mcav",
            parameter: "delta_f_max".into(),
            value: (r2.f0 - r1.f0).abs().max((r2.f1 - r1.f1).abs()),
            metric: "f_change".into(),
        });
    }

    // J_wg doubling and opening-width halving
    {
        let basis = provider.basis_at(delta0)?;
        let wg1 = WaveguideBasis::new(v.h(), trunc.j_wg);
        let wg2 = WaveguideBasis::new(v.h(), 2 * trunc.j_wg);
        let t1 = overlaps(&basis, &wg1);
        let t2 = overlaps(&basis, &wg2);
        let r1 = build_reduction(delta0, mu_mid, &t1, &basis.lambdas, trunc.m, scale)?;
        let r2 = build_reduction(delta0, mu_mid, &t2, &basis.lambdas, trunc.m, scale)?;
        rows.push(StudyRow {
            study: "jwg",
            parameter: "delta_f_max".into(),
            value: (r2.f0 - r1.f0).abs().max((r2.f1 - r1.f1).abs()),
            metric: "f_change".into(),
        });

        // halving h needs analytic traces (the mesh is pinned to one
        // opening); report for the analytic engine
        if let AnyProvider::Analytic(_) = provider {
            for k in 0..4 {
                let hk = v.h() / 2f64.powi(k);
                let wgk = WaveguideBasis::new(hk, trunc.j_wg);
                let tk = overlaps(&basis, &wgk);
                let rk = build_reduction(delta0, mu_mid, &tk, &basis.lambdas, trunc.m, scale)?;
                rows.push(StudyRow {
                    study: "h",
                    parameter: format!("h/{}", 1 << k),
                    value: rk.f0.abs().max(rk.f1.abs()),
                    metric: "max_abs_f".into(),
                });
            }
        }
    }

    Ok(rows)
}
