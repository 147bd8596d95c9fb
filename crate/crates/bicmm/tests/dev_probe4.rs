//! Ad-hoc numeric sanity probes.

use bicmm::modematch::reduce::{full_matrix, sigma_min, spectral_norm};
use bicmm::modematch::{overlaps, WaveguideBasis};
use bicmm::problem::validate_spec;
use bicmm::sweep::{AnalyticProvider, BasisProvider};
use nalgebra::DMatrix;
use num_complex::Complex64;

#[test]
#[ignore]
fn probe_complex_svd() {
    // diag(3, 2i, 1e-7) has singular values 3, 2, 1e-7
    let mut m = DMatrix::from_element(3, 3, Complex64::new(0.0, 0.0));
    m[(0, 0)] = Complex64::new(3.0, 0.0);
    m[(1, 1)] = Complex64::new(0.0, 2.0);
    m[(2, 2)] = Complex64::new(1e-7, 0.0);
    println!("sigma_min = {:e}, norm = {:e}", sigma_min(&m), spectral_norm(&m));

    // random-ish dense complex
    let a = DMatrix::from_fn(5, 5, |i, j| {
        Complex64::new(((i * 7 + j * 3) as f64).sin(), ((i + 2 * j) as f64).cos())
    });
    let sv = a.clone().singular_values();
    println!("dense sv = {:?}", sv.as_slice());
    // compare against sqrt(eig(A^H A))
    let aha = a.adjoint() * &a;
    let eigs = aha.symmetric_eigenvalues();
    let mut se: Vec<f64> = eigs.iter().map(|e| e.max(0.0).sqrt()).collect();
    se.sort_by(|x, y| y.partial_cmp(x).unwrap());
    println!("from A^H A  = {:?}", se);
}

#[test]
#[ignore]
fn probe_odd_root_location() {
    let spec = bicmm::presets::symmetric_rectangle();
    let mut v = validate_spec(&spec).unwrap();
    let provider = AnalyticProvider::new(&v, spec.truncation.m_cav);
    let basis = provider.basis_at(0.0).unwrap();
    v.derive_mu_band(&basis.lambdas).unwrap();
    let wg = WaveguideBasis::new(v.h(), v.spec.truncation.j_wg);
    let table = overlaps(&basis, &wg);
    for k in 0..40 {
        let mu = 0.2520 + k as f64 * 2e-5;
        let t = full_matrix(Complex64::new(mu, 0.0), &table, &basis.lambdas, 1.0);
        let s = sigma_min(&t);
        println!("mu = {mu:.6}: sigma_min = {s:.6e}");
    }
}

#[test]
#[ignore]
fn probe_odd_schur_consistency() {
    use bicmm::modematch::waveguide::i_alpha_evanescent;
    let spec = bicmm::presets::symmetric_rectangle();
    let mut v = validate_spec(&spec).unwrap();
    let provider = AnalyticProvider::new(&v, spec.truncation.m_cav);
    let basis = provider.basis_at(0.0).unwrap();
    v.derive_mu_band(&basis.lambdas).unwrap();
    let wg = WaveguideBasis::new(v.h(), v.spec.truncation.j_wg);
    let table = overlaps(&basis, &wg);
    let h = v.h();
    let odd: Vec<usize> = (0..basis.len())
        .filter(|&i| basis.traces[i].odd_defect(h) <= 1e-8)
        .collect();
    println!("odd count = {} of {}", odd.len(), basis.len());
    println!("first odd lambdas: {:?}", odd.iter().take(6).map(|&i| basis.lambdas[i]).collect::<Vec<_>>());

    for &mu in &[0.2526471f64, 0.25279488] {
        // sigma_min of the odd-restricted real system
        let p = odd.len();
        let mut sys = DMatrix::zeros(p, p);
        for (a, &ma) in odd.iter().enumerate() {
            for (b, &mb) in odd.iter().enumerate() {
                let mut c = 0.0;
                for j in 1..=wg.j_wg {
                    let w = i_alpha_evanescent(mu, j, h);
                    c += w * table.entries[j][ma] * table.entries[j][mb];
                }
                sys[(a, b)] = if ma == mb { basis.lambdas[ma] - mu - c } else { -c };
            }
        }
        let sv = sys.clone().svd(false, false);
        let smin = sv.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
        // full complex matrix
        let t = full_matrix(Complex64::new(mu, 0.0), &table, &basis.lambdas, 1.0);
        println!(
            "mu = {mu:.7}: odd-restricted sigma_min = {smin:.4e}, full sigma_min = {:.4e}",
            sigma_min(&t)
        );
    }
}

#[test]
#[ignore]
fn probe_large_complex_svd() {
    let spec = bicmm::presets::symmetric_rectangle();
    let mut v = validate_spec(&spec).unwrap();
    let provider = AnalyticProvider::new(&v, spec.truncation.m_cav);
    let basis = provider.basis_at(0.0).unwrap();
    v.derive_mu_band(&basis.lambdas).unwrap();
    let wg = WaveguideBasis::new(v.h(), v.spec.truncation.j_wg);
    let table = overlaps(&basis, &wg);
    for &mu in &[0.2526471f64, 0.25279488] {
        let t = full_matrix(Complex64::new(mu, 0.0), &table, &basis.lambdas, 1.0);
        let s_svd = sigma_min(&t);
        // independent: sqrt of smallest eigenvalue of T^H T (hermitian)
        let tht = t.adjoint() * &t;
        let eigs = tht.symmetric_eigenvalues();
        let s_eig = eigs.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0).sqrt();
        // and via LU inverse iteration
        let lu = t.clone().lu();
        let lu_h = t.adjoint().lu();
        let n = t.nrows();
        let mut x = nalgebra::DVector::from_element(n, Complex64::new(1.0, 0.3));
        x /= Complex64::new(x.norm(), 0.0);
        let mut rho = 0.0f64;
        for _ in 0..40 {
            let y = lu_h.solve(&x).unwrap();
            let z = lu.solve(&y).unwrap();
            rho = z.norm();
            x = z / Complex64::new(rho, 0.0);
        }
        println!(
            "mu = {mu:.7}: svd = {s_svd:.4e}, via T^H T eig = {s_eig:.4e}, via LU inv-iter = {:.4e}",
            1.0 / rho.sqrt()
        );
    }
}

#[test]
#[ignore]
fn probe_block_structure() {
    let spec = bicmm::presets::symmetric_rectangle();
    let mut v = validate_spec(&spec).unwrap();
    let provider = AnalyticProvider::new(&v, spec.truncation.m_cav);
    let basis = provider.basis_at(0.0).unwrap();
    v.derive_mu_band(&basis.lambdas).unwrap();
    let wg = WaveguideBasis::new(v.h(), v.spec.truncation.j_wg);
    let table = overlaps(&basis, &wg);
    let h = v.h();
    let odd: Vec<usize> = (0..basis.len())
        .filter(|&i| basis.traces[i].odd_defect(h) <= 1e-8)
        .collect();
    let mu = 0.25279488;
    let t = full_matrix(Complex64::new(mu, 0.0), &table, &basis.lambdas, 1.0);
    let is_odd = |i: usize| odd.contains(&i);
    let mut max_cross = 0.0f64;
    for a in 0..basis.len() {
        for b in 0..basis.len() {
            if is_odd(a) != is_odd(b) {
                max_cross = max_cross.max(t[(a, b)].norm());
            }
        }
    }
    println!("max |T[odd, even]| = {max_cross:.4e}");
    // sigma_min of the odd sub-block extracted from T itself
    let p = odd.len();
    let sub = DMatrix::from_fn(p, p, |a, b| t[(odd[a], odd[b])]);
    println!("sigma_min(T_odd_sub) = {:.4e}", sigma_min(&sub));
    // overlaps of phi_0 against the first few odd traces
    for &i in odd.iter().take(4) {
        println!("  (phi_0, psi_{i}) = {:.4e}", table.entries[0][i]);
    }
    for j in [2usize, 4] {
        println!("  (phi_{j}, psi_{}) = {:.4e}", odd[0], table.entries[j][odd[0]]);
    }
}

#[test]
#[ignore]
fn probe_parity_classification() {
    let spec = bicmm::presets::symmetric_rectangle();
    let v = validate_spec(&spec).unwrap();
    let provider = AnalyticProvider::new(&v, spec.truncation.m_cav);
    let basis = provider.basis_at(0.0).unwrap();
    let wg = WaveguideBasis::new(v.h(), v.spec.truncation.j_wg);
    let table = overlaps(&basis, &wg);
    let h = v.h();
    let mu = 0.25279488;
    let t = full_matrix(Complex64::new(mu, 0.0), &table, &basis.lambdas, 1.0);
    let odd: Vec<bool> = (0..basis.len())
        .map(|i| basis.traces[i].odd_defect(h) <= 1e-8)
        .collect();
    let modes = bicmm::cavity_analytic::rect_basis_modes(&v.cavity, 1.0, 60);
    let mut worst = (0usize, 0usize, 0.0f64);
    for a in 0..basis.len() {
        for b in 0..basis.len() {
            if odd[a] != odd[b] && t[(a, b)].norm() > worst.2 {
                worst = (a, b, t[(a, b)].norm());
            }
        }
    }
    let (a, b, w) = worst;
    println!(
        "worst cross pair: a = {a} (p{},q{}, defect {:.2e}, odd={}), b = {b} (p{},q{}, defect {:.2e}, odd={}), |T| = {w:.3e}",
        modes[a].p, modes[a].q, basis.traces[a].odd_defect(h), odd[a],
        modes[b].p, modes[b].q, basis.traces[b].odd_defect(h), odd[b],
    );
    for i in 0..20 {
        println!(
            "mode {i}: (p,q) = ({}, {}), lambda = {:.3}, defect = {:.3e}, odd = {}",
            modes[i].p, modes[i].q, basis.lambdas[i], basis.traces[i].odd_defect(h), odd[i]
        );
    }
}

#[test]
#[ignore]
fn write_example_configs() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("example1.json"), bicmm::presets::example1().to_json()).unwrap();
    std::fs::write(dir.join("example2.json"), bicmm::presets::example2().to_json()).unwrap();
    std::fs::write(
        dir.join("scaling_rectangle.json"),
        bicmm::presets::scaling_rectangle().to_json(),
    )
    .unwrap();
    std::fs::write(
        dir.join("symmetric_rectangle.json"),
        bicmm::presets::symmetric_rectangle().to_json(),
    )
    .unwrap();
}
