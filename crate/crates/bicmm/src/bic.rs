//! BIC search: the two governing equations as implicit curves `mu0(delta)`,
//! `mu1(delta)`, their intersection, mode reconstruction, and the
//! symmetry-protected variant on the odd subsystem.

use crate::basis::CavityBasis;
use crate::error::{Error, Result};
use crate::modematch::reduce::{
    build_reduction, coupling_floor, full_matrix, sigma_min, spectral_norm, ReducedSystem,
};
use crate::modematch::waveguide::{alpha, i_alpha_evanescent, WaveguideBasis};
use crate::modematch::{overlaps, OverlapTable};
use crate::problem::ValidatedSpec;
use crate::sweep::{detect_crossing, linspace, sweep_grid, BasisProvider};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

/// Everything the curve solves need at one scan value.
pub struct BicContext<'a> {
    pub provider: &'a dyn BasisProvider,
    pub v: &'a ValidatedSpec,
    pub band: [f64; 2],
}

/// One fixed-point solve of a governing equation.
#[derive(Debug, Clone, Serialize)]
pub struct BranchSolve {
    pub delta: f64,
    pub which: usize,
    pub mu: f64,
    pub iterations: usize,
    /// Consecutive iterate-gap ratios; all below 1 under the contraction.
    pub contraction: Vec<f64>,
    pub used_bisection: bool,
}

/// Sampled curve pair over the scan grid.
#[derive(Debug, Clone, Default, Serialize)]
pub struct BranchCurves {
    pub deltas: Vec<f64>,
    pub mu0: Vec<f64>,
    pub mu1: Vec<f64>,
}

/// A located BIC with its certificates.
#[derive(Debug, Clone, Serialize)]
pub struct BicSolution {
    pub delta_star: f64,
    pub mu_star: f64,
    pub curves: BranchCurves,
    /// Cavity coefficients in branch order, normalized to unit length with
    /// `d_{M-2} >= 0`.
    pub d: Vec<f64>,
    /// Waveguide coefficients `b_j = sum_m d_m (psi_m, phi_j)`.
    pub b: Vec<f64>,
    /// `sigma_min(T) / ||T||` at the solution.
    pub sigma_min_rel: f64,
    /// `|b_0| / ||b||` at the solution.
    pub b0_rel: f64,
    /// Residuals of the two governing equations at the solution.
    pub residuals: [f64; 2],
    pub fixed_point_iterations: usize,
}

impl<'a> BicContext<'a> {
    pub fn new(provider: &'a dyn BasisProvider, v: &'a ValidatedSpec, band: [f64; 2]) -> Self {
        BicContext { provider, v, band }
    }

    fn wg(&self) -> WaveguideBasis {
        WaveguideBasis::new(self.v.h(), self.v.spec.truncation.j_wg)
    }

    pub fn table_at(&self, delta: f64) -> Result<(CavityBasis, OverlapTable)> {
        let basis = self.provider.basis_at(delta)?;
        let table = overlaps(&basis, &self.wg());
        Ok((basis, table))
    }

    pub fn reduction_at(&self, delta: f64, mu: f64) -> Result<ReducedSystem> {
        let (basis, table) = self.table_at(delta)?;
        build_reduction(
            delta,
            mu,
            &table,
            &basis.lambdas,
            self.v.spec.truncation.m,
            self.provider.coupling_scale(delta),
        )
    }

    /// `f_which(delta, mu)` together with the pair eigenvalue it belongs to.
    fn f_and_lambda(&self, delta: f64, mu: f64, which: usize) -> Result<(f64, f64)> {
        let red = self.reduction_at(delta, mu)?;
        let f = if which == 0 { red.f0 } else { red.f1 };
        let lam = red.l11[which] + mu;
        Ok((f, lam))
    }
}

/// Solves `lambda_{M-2+which}(delta) - mu + f_which(delta, mu) = 0` by the
/// contraction `mu <- lambda + f(mu)`, falling back to bisection on the
/// band when the iteration stalls.
pub fn solve_branch(ctx: &BicContext, delta: f64, which: usize) -> Result<BranchSolve> {
    let tol = ctx.v.spec.tolerances.fixed_point_tol;
    let [mu_l, mu_r] = ctx.band;
    let guard = 1e-9 * (mu_r - mu_l);
    let clamp = |mu: f64| mu.clamp(mu_l + guard, mu_r - guard);

    let basis = ctx.provider.basis_at(delta)?;
    let lambda = basis.lambdas[ctx.v.spec.truncation.m - 2 + which];
    let mut mu = clamp(lambda);
    let mut contraction = Vec::new();
    let mut prev_step = f64::NAN;
    for it in 0..30 {
        let (f, _) = ctx.f_and_lambda(delta, mu, which)?;
        let next = clamp(lambda + f);
        let step = (next - mu).abs();
        if prev_step.is_finite() && prev_step > 0.0 {
            contraction.push(step / prev_step);
        }
        prev_step = step;
        mu = next;
        if step < tol {
            // A clamp can fake convergence when lambda + f leaves the band;
            // accept only a genuine root of the governing equation.
            let (f_end, _) = ctx.f_and_lambda(delta, mu, which)?;
            if (lambda - mu + f_end).abs() <= 1e3 * tol * (1.0 + lambda.abs()) {
                return Ok(BranchSolve {
                    delta,
                    which,
                    mu,
                    iterations: it + 1,
                    contraction,
                    used_bisection: false,
                });
            }
            break;
        }
    }

    // Bisection fallback on g(mu) = lambda - mu + f(delta, mu).
    let g = |mu: f64| -> Result<f64> {
        let (f, _) = ctx.f_and_lambda(delta, mu, which)?;
        Ok(lambda - mu + f)
    };
    let mut a = mu_l + guard;
    let mut b = mu_r - guard;
    let mut ga = g(a)?;
    let gb = g(b)?;
    if ga * gb > 0.0 {
        return Err(Error::NoRootInBand {
            delta,
            mu_l,
            mu_r,
            g_l: ga,
            g_r: gb,
        });
    }
    let mut iterations = 30;
    while (b - a).abs() > tol {
        let mid = 0.5 * (a + b);
        let gm = g(mid)?;
        iterations += 1;
        if ga * gm <= 0.0 {
            b = mid;
        } else {
            a = mid;
            ga = gm;
        }
        if iterations > 200 {
            break;
        }
    }
    Ok(BranchSolve {
        delta,
        which,
        mu: 0.5 * (a + b),
        iterations,
        contraction,
        used_bisection: true,
    })
}

fn curve_gap(ctx: &BicContext, delta: f64) -> Result<(f64, f64, usize)> {
    let s0 = solve_branch(ctx, delta, 0)?;
    let s1 = solve_branch(ctx, delta, 1)?;
    Ok((s0.mu, s1.mu, s0.iterations + s1.iterations))
}

/// Locates the FW-BIC on `delta_interval`: verifies the transversal
/// crossing and the radiation coupling of both branches, samples the two
/// implicit curves, and bisects their gap to a root.
pub fn find_bic(
    ctx: &BicContext,
    delta_interval: [f64; 2],
    grid_steps: usize,
) -> Result<BicSolution> {
    let v = ctx.v;
    let m = v.spec.truncation.m;
    let grid = linspace(delta_interval[0], delta_interval[1], grid_steps.max(5));
    let data = sweep_grid(ctx.provider, &grid)?;

    // Condition A.3: the tracked pair crosses transversally.
    let crossing = detect_crossing(ctx.provider, &data, m, v.spec.tolerances.root_tol)?;

    // Condition A.2: both branches see the radiation channel at the
    // crossing.
    let at_cross = ctx.provider.basis_at(crossing.delta)?;
    let floor = coupling_floor(v.h());
    for b in [m - 2, m - 1] {
        if at_cross.origin_values[b].abs() < floor {
            return Err(Error::NearZeroCoupling {
                delta: crossing.delta,
                a20: at_cross.origin_values[m - 2].abs(),
                a21: at_cross.origin_values[m - 1].abs(),
                floor,
            });
        }
    }

    // Sample the curves; points where the band assumptions fail at the far
    // ends of the scan are skipped.
    let mut curves = BranchCurves::default();
    let mut fp_total = 0usize;
    for &d in &grid {
        match curve_gap(ctx, d) {
            Ok((mu0, mu1, its)) => {
                curves.deltas.push(d);
                curves.mu0.push(mu0);
                curves.mu1.push(mu1);
                fp_total += its;
            }
            Err(Error::BandViolation { .. }) | Err(Error::NoRootInBand { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    if curves.deltas.len() < 2 {
        return Err(Error::NoRootInBand {
            delta: crossing.delta,
            mu_l: ctx.band[0],
            mu_r: ctx.band[1],
            g_l: f64::NAN,
            g_r: f64::NAN,
        });
    }

    // Find a sign change of the gap; refine x4 around it before bisecting.
    let gap_of = |i: usize| curves.mu0[i] - curves.mu1[i];
    let mut bracket = None;
    for i in 0..curves.deltas.len() - 1 {
        if gap_of(i) == 0.0 {
            bracket = Some((curves.deltas[i], curves.deltas[i], gap_of(i), gap_of(i)));
            break;
        }
        if gap_of(i) * gap_of(i + 1) < 0.0 {
            bracket = Some((
                curves.deltas[i],
                curves.deltas[i + 1],
                gap_of(i),
                gap_of(i + 1),
            ));
            break;
        }
    }
    let Some((mut a, mut b, mut ga, _)) = bracket else {
        let (mut min_gap, mut at_delta) = (f64::INFINITY, f64::NAN);
        for i in 0..curves.deltas.len() {
            if gap_of(i).abs() < min_gap {
                min_gap = gap_of(i).abs();
                at_delta = curves.deltas[i];
            }
        }
        return Err(Error::NoSignChange { min_gap, at_delta });
    };

    // x4 refinement inside the bracketing cell
    if b > a {
        let refined = linspace(a, b, 5);
        for w in refined.windows(2) {
            let (g0, g1, its0) = {
                let (m0a, m1a, i0) = curve_gap(ctx, w[0])?;
                let (m0b, m1b, i1) = curve_gap(ctx, w[1])?;
                curves.deltas.push(w[0]);
                curves.mu0.push(m0a);
                curves.mu1.push(m1a);
                curves.deltas.push(w[1]);
                curves.mu0.push(m0b);
                curves.mu1.push(m1b);
                (m0a - m1a, m0b - m1b, i0 + i1)
            };
            fp_total += its0;
            if g0 * g1 <= 0.0 {
                a = w[0];
                b = w[1];
                ga = g0;
                break;
            }
        }
    }

    // Bisection on the gap until both governing residuals sit below
    // root_tol.
    let root_tol = v.spec.tolerances.root_tol;
    let mut delta_star;
    let mut mu_star;
    loop {
        delta_star = 0.5 * (a + b);
        let (mu0, mu1, its) = curve_gap(ctx, delta_star)?;
        fp_total += its;
        let gap = mu0 - mu1;
        mu_star = 0.5 * (mu0 + mu1);
        if gap.abs() <= 0.5 * root_tol || (b - a).abs() < f64::EPSILON * (1.0 + delta_star.abs())
        {
            break;
        }
        if ga * gap <= 0.0 {
            b = delta_star;
        } else {
            a = delta_star;
            ga = gap;
        }
    }

    // Reconstruct the coefficient vector and certify.
    let red = ctx.reduction_at(delta_star, mu_star)?;
    let mut pair = red.null_pair();
    if pair[0] < 0.0 {
        pair[0] = -pair[0];
        pair[1] = -pair[1];
    }
    let mut d = red.back_substitute(pair);
    let norm = d.norm();
    d /= norm;
    if d[m - 2] < 0.0 {
        d = -d;
    }

    let (basis, table) = ctx.table_at(delta_star)?;
    let scale = ctx.provider.coupling_scale(delta_star);
    let t = full_matrix(Complex64::new(mu_star, 0.0), &table, &basis.lambdas, scale);
    let smin = sigma_min(&t);
    let tnorm = spectral_norm(&t);
    let b_coef: Vec<f64> = (0..table.j_count())
        .map(|j| {
            (0..basis.len())
                .map(|mm| d[mm] * table.entries[j][mm])
                .sum()
        })
        .collect();
    let b_norm = b_coef.iter().map(|x| x * x).sum::<f64>().sqrt();

    let res0 = (basis.lambdas[m - 2] - mu_star + red.f0).abs();
    let res1 = (basis.lambdas[m - 1] - mu_star + red.f1).abs();

    Ok(BicSolution {
        delta_star,
        mu_star,
        curves,
        d: d.iter().copied().collect(),
        b: b_coef.clone(),
        sigma_min_rel: smin / tnorm,
        b0_rel: b_coef[0].abs() / b_norm.max(1e-300),
        residuals: [res0, res1],
        fixed_point_iterations: fp_total,
    })
}

/// Pointwise cavity mode values, however the basis was produced.
pub trait ModeEval {
    fn value(&self, mode: usize, x1: f64, x2: f64) -> f64;
    fn count(&self) -> usize;
}

/// Reconstructed field samples and matching diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct FieldDump {
    /// `(x1, x2, re_u)` over the cavity and a stretch of waveguide.
    pub samples: Vec<(f64, f64, f64)>,
    /// Relative L2 mismatch of cavity- and waveguide-side traces on the
    /// opening.
    pub trace_mismatch: f64,
    /// `max_j |b_j|` over the evanescent channels, for scale.
    pub b_max: f64,
    /// Field amplitude ratio between `x1 = 3h` and `x1 = 0` in the guide.
    pub guide_decay: f64,
}

/// Samples the BIC mode: `sum_m d_m psi_m` in the cavity, the outgoing
/// expansion in the guide, and the trace-continuity diagnostics.
pub fn reconstruct_mode(
    sol: &BicSolution,
    modes: &dyn ModeEval,
    v: &ValidatedSpec,
    grid_per_unit: usize,
) -> FieldDump {
    let h = v.h();
    let wg = WaveguideBasis::new(h, v.spec.truncation.j_wg);
    let mu = sol.mu_star;
    let n_modes = modes.count().min(sol.d.len());

    let cavity_u = |x1: f64, x2: f64| -> f64 {
        (0..n_modes).map(|m| sol.d[m] * modes.value(m, x1, x2)).sum()
    };
    let guide_u = |x1: f64, x2: f64| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..=wg.j_wg {
            let a = alpha(Complex64::new(mu, 0.0), j, h);
            acc += sol.b[j] * (Complex64::i() * a * x1).exp() * wg.phi(j, x2);
        }
        acc
    };

    let rect = v.cavity;
    let nx = ((rect.width() * grid_per_unit as f64).round() as usize).max(2);
    let ny = ((rect.height() * grid_per_unit as f64).round() as usize).max(2);
    let mut samples = Vec::new();
    for iy in 0..=ny {
        let y = rect.y_lo + rect.height() * iy as f64 / ny as f64;
        for ix in 0..=nx {
            let x = rect.x_lo + rect.width() * ix as f64 / nx as f64;
            samples.push((x, y, cavity_u(x, y)));
        }
    }
    // waveguide stretch out to 3h
    let gx = ((3.0 * h * grid_per_unit as f64).round() as usize).max(2);
    let gy = ((h * grid_per_unit as f64).round() as usize).max(2);
    for iy in 0..=gy {
        let y = -h / 2.0 + h * iy as f64 / gy as f64;
        for ix in 1..=gx {
            let x = 3.0 * h * ix as f64 / gx as f64;
            samples.push((x, y, guide_u(x, y).re));
        }
    }

    // trace continuity on the opening
    let nq = 800;
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..nq {
        let y = -h / 2.0 + h * (k as f64 + 0.5) / nq as f64;
        let cav = cavity_u(0.0, y);
        let gui = guide_u(0.0, y).re;
        num += (cav - gui) * (cav - gui);
        den += cav * cav;
    }
    let trace_mismatch = (num / den.max(1e-300)).sqrt();

    let b_max = sol.b.iter().skip(1).fold(0.0f64, |m, &b| m.max(b.abs()));
    let probe = |x1: f64| -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..64 {
            let y = -h / 2.0 + h * (k as f64 + 0.5) / 64.0;
            worst = worst.max(guide_u(x1, y).norm());
        }
        worst
    };
    let at0 = probe(0.0);
    let guide_decay = if at0 > 0.0 { probe(3.0 * h) / at0 } else { 0.0 };

    FieldDump {
        samples,
        trace_mismatch,
        b_max,
        guide_decay,
    }
}

/// Result of the symmetry-protected search on the odd subsystem.
#[derive(Debug, Clone, Serialize)]
pub struct SymmetryBic {
    pub mu: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub sigma_min_rel: f64,
    pub b0_rel: f64,
    /// Coefficients over the full basis (even modes identically zero).
    pub d: Vec<f64>,
}

/// Solves `lambda - mu + a(mu, h) = 0` for a simple odd branch of a
/// symmetric cavity with centered opening. The scan parameter plays no
/// role: the decoupling is forced by parity.
pub fn symmetry_bic(ctx: &BicContext, delta: f64, odd_branch: usize) -> Result<SymmetryBic> {
    let v = ctx.v;
    let (basis, table) = ctx.table_at(delta)?;
    let h = v.h();
    let wg_cutoff = (std::f64::consts::PI / h).powi(2);
    let scale = ctx.provider.coupling_scale(delta);

    // Parity classification from the traces. The defect evaluates even/odd
    // energy ratios through closed-form integrals whose rounding floor is
    // sqrt(machine epsilon); the tolerance sits well above that floor and
    // far below the O(1) defect of a genuinely even trace.
    let parity_tol = 1e-6;
    let defect = basis.traces[odd_branch].odd_defect(h);
    if defect > parity_tol {
        return Err(Error::ParityViolation {
            index: odd_branch,
            defect,
        });
    }
    let odd: Vec<usize> = (0..basis.len())
        .filter(|&i| basis.traces[i].odd_defect(h) <= parity_tol)
        .collect();
    let k_star = odd
        .iter()
        .position(|&i| i == odd_branch)
        .expect("odd branch is in the odd set");
    let lambda = basis.lambdas[odd_branch];

    // coupling matrix of the odd subsystem
    let p = odd.len();
    let c_of_mu = |mu: f64| -> DMatrix<f64> {
        let mut c = DMatrix::zeros(p, p);
        for j in 1..=v.spec.truncation.j_wg {
            let cj = (j as f64 * std::f64::consts::PI / h).powi(2);
            if cj <= mu {
                continue;
            }
            let w = scale * i_alpha_evanescent(mu, j, h);
            for (a, &ma) in odd.iter().enumerate() {
                let va = table.entries[j][ma];
                for (b, &mb) in odd.iter().enumerate() {
                    c[(a, b)] += w * va * table.entries[j][mb];
                }
            }
        }
        c
    };
    let a_of_mu = |mu: f64| -> f64 {
        let c = c_of_mu(mu);
        if p == 1 {
            return -c[(0, 0)];
        }
        let rest: Vec<usize> = (0..p).filter(|&i| i != k_star).collect();
        let mut block = DMatrix::zeros(p - 1, p - 1);
        let mut col = DVector::zeros(p - 1);
        for (i, &ri) in rest.iter().enumerate() {
            for (k, &rk) in rest.iter().enumerate() {
                block[(i, k)] = if ri == rk {
                    basis.lambdas[odd[ri]] - mu - c[(ri, rk)]
                } else {
                    -c[(ri, rk)]
                };
            }
            col[i] = c[(ri, k_star)];
        }
        let sol = block.lu().solve(&col).expect("odd rest block invertible");
        let mut acc = -c[(k_star, k_star)];
        for (i, &ri) in rest.iter().enumerate() {
            acc -= c[(k_star, ri)] * sol[i];
        }
        acc
    };

    // local bracket between the neighboring odd eigenvalues
    let mut lo = 0.0f64;
    let mut hi = wg_cutoff * (1.0 - 1e-9);
    for &i in &odd {
        let l = basis.lambdas[i];
        if l < lambda {
            lo = lo.max(0.5 * (l + lambda));
        }
        if l > lambda {
            hi = hi.min(0.5 * (l + lambda));
        }
    }

    let tol = v.spec.tolerances.fixed_point_tol;
    let mut mu = lambda.clamp(lo, hi);
    let mut iterations = 0;
    let mut converged = false;
    for it in 0..30 {
        let next = (lambda + a_of_mu(mu)).clamp(lo, hi);
        iterations = it + 1;
        let step = (next - mu).abs();
        mu = next;
        if step < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        let g = |mu: f64| lambda - mu + a_of_mu(mu);
        let (mut a, mut b) = (lo, hi);
        let mut ga = g(a);
        if ga * g(b) > 0.0 {
            return Err(Error::NoRootInBand {
                delta,
                mu_l: lo,
                mu_r: hi,
                g_l: ga,
                g_r: g(b),
            });
        }
        while (b - a).abs() > tol {
            let mid = 0.5 * (a + b);
            let gm = g(mid);
            iterations += 1;
            if ga * gm <= 0.0 {
                b = mid;
            } else {
                a = mid;
                ga = gm;
            }
        }
        mu = 0.5 * (a + b);
    }

    // assemble the full coefficient vector: odd block nullspace, even zero
    let c = c_of_mu(mu);
    let mut odd_sys = DMatrix::zeros(p, p);
    for a in 0..p {
        for b in 0..p {
            odd_sys[(a, b)] = if a == b {
                basis.lambdas[odd[a]] - mu - c[(a, b)]
            } else {
                -c[(a, b)]
            };
        }
    }
    let svd = odd_sys.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let mut d = vec![0.0; basis.len()];
    for (i, &mi) in odd.iter().enumerate() {
        d[mi] = vt[(p - 1, i)];
    }
    let norm: f64 = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    d.iter_mut().for_each(|x| *x /= norm);
    if d[odd_branch] < 0.0 {
        d.iter_mut().for_each(|x| *x = -*x);
    }

    let t = full_matrix(Complex64::new(mu, 0.0), &table, &basis.lambdas, scale);
    let smin = sigma_min(&t);
    let tnorm = spectral_norm(&t);
    let b0: f64 = (0..basis.len()).map(|mm| d[mm] * table.entries[0][mm]).sum();
    let b_norm: f64 = (0..table.j_count())
        .map(|j| {
            let bj: f64 = (0..basis.len()).map(|mm| d[mm] * table.entries[j][mm]).sum();
            bj * bj
        })
        .sum::<f64>()
        .sqrt();

    Ok(SymmetryBic {
        mu,
        lambda,
        iterations,
        sigma_min_rel: smin / tnorm,
        b0_rel: b0.abs() / b_norm.max(1e-300),
        d,
    })
}
