//! Command-line front end: eigenvalue scans, BIC searches, resonance
//! trajectories, the symmetry-protected solver and the bundled
//! validation/convergence suites. Outputs are CSV files plus one JSON run
//! manifest per invocation.

mod manifest;
mod provider;
mod suites;

use anyhow::{anyhow, bail, Context, Result};
use bicmm::bic::{find_bic, reconstruct_mode, symmetry_bic, BicContext, ModeEval};
use bicmm::fem::PointLocator;
use bicmm::resonance::{imag_minima, ResonanceContext};
use bicmm::sweep::BasisProvider;
use bicmm::{validate_spec, ProblemSpec, ValidatedSpec};
use clap::{Args, Parser, Subcommand};
use manifest::{write_csv, ErrorRecord, ManifestWriter};
use provider::{make_provider, prepare_band, scan_grid, AnyProvider};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "bicmm",
    about = "Mode-matching solver for Friedrich-Wintgen BICs in cavity-waveguide structures",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Problem description (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV files and the run manifest.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Override the scan start.
    #[arg(long)]
    delta_from: Option<f64>,
    /// Override the scan end.
    #[arg(long)]
    delta_to: Option<f64>,
    /// Scan grid size.
    #[arg(long, default_value_t = 41)]
    delta_steps: usize,
    /// Mesh resolution (grid lines per unit length).
    #[arg(long, default_value_t = 32)]
    resolution: usize,
    /// Override the cavity-mode truncation.
    #[arg(long)]
    mcav: Option<usize>,
    /// Override the waveguide-mode truncation.
    #[arg(long)]
    jwg: Option<usize>,
    /// Cap on worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Seed for the randomized invariant checks.
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Tracked eigenvalue branches of the closed cavity over the scan.
    EigenScan {
        #[command(flatten)]
        common: Common,
        /// Add a ratio-2 coarser mesh and Richardson-extrapolate.
        #[arg(long)]
        richardson: bool,
    },
    /// Locate the Friedrich-Wintgen BIC on the scan interval.
    BicFind {
        #[command(flatten)]
        common: Common,
        /// Grid density (per unit length) of the reconstructed field dump.
        #[arg(long, default_value_t = 12)]
        field_grid: usize,
    },
    /// Trace the complex resonances of the tracked pair over the scan.
    ResonanceScan {
        #[command(flatten)]
        common: Common,
    },
    /// Symmetry-protected BIC on the odd subsystem.
    SymBic {
        #[command(flatten)]
        common: Common,
        /// Branch index of the odd mode (lowest odd-coupled if omitted).
        #[arg(long)]
        branch: Option<usize>,
    },
    /// Run the cross-module invariant suite.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Doubling studies over mesh, truncations and opening width.
    Converge {
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::EigenScan { common, .. }
            | Command::BicFind { common, .. }
            | Command::ResonanceScan { common }
            | Command::SymBic { common, .. }
            | Command::Validate { common }
            | Command::Converge { common } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::EigenScan { .. } => "eigen-scan",
            Command::BicFind { .. } => "bic-find",
            Command::ResonanceScan { .. } => "resonance-scan",
            Command::SymBic { .. } => "sym-bic",
            Command::Validate { .. } => "validate",
            Command::Converge { .. } => "converge",
        }
    }
}

fn load_spec(common: &Common) -> Result<ProblemSpec> {
    let text = std::fs::read_to_string(&common.config)
        .with_context(|| format!("cannot read config {:?}", common.config))?;
    let mut spec = ProblemSpec::from_json(&text)?;
    if let Some(a) = common.delta_from {
        spec.delta_range[0] = a;
    }
    if let Some(b) = common.delta_to {
        spec.delta_range[1] = b;
    }
    if let Some(mcav) = common.mcav {
        spec.truncation.m_cav = mcav;
    }
    if let Some(jwg) = common.jwg {
        spec.truncation.j_wg = jwg;
    }
    Ok(spec)
}

fn exit_code_for(err: &anyhow::Error) -> i32 {
    if let Some(e) = err.downcast_ref::<bicmm::Error>() {
        if e.is_validation() {
            2
        } else {
            3
        }
    } else if err.downcast_ref::<serde_json::Error>().is_some()
        || err.downcast_ref::<std::io::Error>().is_some()
    {
        4
    } else {
        // provider/config shape errors raised through anyhow directly
        4
    }
}

fn error_record(err: &anyhow::Error) -> ErrorRecord {
    let code = err
        .downcast_ref::<bicmm::Error>()
        .map(|e| e.code().to_string())
        .unwrap_or_else(|| "Config".to_string());
    ErrorRecord {
        code,
        message: format!("{err:#}"),
    }
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn main() {
    let cli = Cli::parse();
    let common = cli.command.common().clone();
    if common.threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(common.threads)
            .build_global();
    }
    let spec = match load_spec(&common) {
        Ok(s) => s,
        Err(e) => {
            let mw = ManifestWriter::new(&common.out_dir, cli.command.name(), None);
            let _ = mw.finish(Some(error_record(&e)));
            eprintln!("error: {e:#}");
            std::process::exit(4);
        }
    };
    let mut mw = ManifestWriter::new(&common.out_dir, cli.command.name(), Some(&spec));
    match run(&cli.command, &common, &spec, &mut mw) {
        Ok(()) => {
            if let Err(e) = mw.finish(None) {
                eprintln!("error writing manifest: {e}");
                std::process::exit(4);
            }
        }
        Err(e) => {
            let code = exit_code_for(&e);
            let _ = mw.finish(Some(error_record(&e)));
            eprintln!("error: {e:#}");
            std::process::exit(code);
        }
    }
}

fn run(cmd: &Command, common: &Common, spec: &ProblemSpec, mw: &mut ManifestWriter) -> Result<()> {
    let mut v = validate_spec(spec)?;
    for w in &v.warnings {
        eprintln!("warning: {w}");
    }
    match cmd {
        Command::EigenScan { richardson, .. } => cmd_eigen_scan(common, &mut v, *richardson, mw),
        Command::BicFind { field_grid, .. } => cmd_bic_find(common, &mut v, *field_grid, mw),
        Command::ResonanceScan { .. } => cmd_resonance_scan(common, &mut v, mw),
        Command::SymBic { branch, .. } => cmd_sym_bic(common, &mut v, *branch, mw),
        Command::Validate { .. } => cmd_validate(common, &mut v, mw),
        Command::Converge { .. } => cmd_converge(common, &mut v, mw),
    }
}

fn cmd_eigen_scan(
    common: &Common,
    v: &mut ValidatedSpec,
    richardson: bool,
    mw: &mut ManifestWriter,
) -> Result<()> {
    let provider = make_provider(v, common.resolution, richardson, common.seed)?;
    let grid = scan_grid(v, common.delta_steps);
    let data = bicmm::sweep::sweep_grid(&provider, &grid)?;
    let m = v.spec.truncation.m;
    let mut rows = Vec::new();
    for basis in &data.bases {
        for b in 0..=(m + 1).min(basis.len() - 1) {
            rows.push(vec![
                fmt(basis.delta),
                b.to_string(),
                fmt(basis.lambdas[b]),
                fmt(basis.origin_values[b]),
            ]);
        }
    }
    write_csv(&mw.output("eigen_scan.csv"), "delta,branch,lambda,psi_at_o", &rows)?;

    match bicmm::sweep::detect_crossing(&provider, &data, m, v.spec.tolerances.root_tol.max(1e-10))
    {
        Ok(c) => {
            println!(
                "crossing of branches {} and {} at delta = {:.6}, lambda = {:.6}",
                m - 2,
                m - 1,
                c.delta,
                c.lambda
            );
            let summary = serde_json::json!({
                "crossing_delta": c.delta,
                "crossing_lambda": c.lambda,
                "branches": [m - 2, m - 1],
            });
            std::fs::write(
                mw.output("crossing.json"),
                serde_json::to_string_pretty(&summary)?,
            )?;
        }
        Err(e) => println!("no crossing found: {e}"),
    }
    Ok(())
}

fn cmd_bic_find(
    common: &Common,
    v: &mut ValidatedSpec,
    field_grid: usize,
    mw: &mut ManifestWriter,
) -> Result<()> {
    let provider = make_provider(v, common.resolution, false, common.seed)?;
    let grid = scan_grid(v, common.delta_steps);
    let (band, crossing, _) = prepare_band(v, &provider, &grid)?;
    if let Some(c) = &crossing {
        println!(
            "crossing at delta = {:.6}, lambda = {:.6}; band = [{:.4}, {:.4}]",
            c.delta, c.lambda, band[0], band[1]
        );
    }
    let ctx = BicContext::new(&provider, v, band);
    let sol = match find_bic(&ctx, v.spec.delta_range, common.delta_steps) {
        Ok(sol) => sol,
        Err(err @ bicmm::Error::NoSignChange { .. }) => {
            // contract: dump the sampled gap curve before failing
            dump_gap_curve(&ctx, v, common.delta_steps, mw)?;
            return Err(err.into());
        }
        Err(e) => return Err(e.into()),
    };

    let mut rows = Vec::new();
    let mut order: Vec<usize> = (0..sol.curves.deltas.len()).collect();
    order.sort_by(|&a, &b| {
        sol.curves.deltas[a]
            .partial_cmp(&sol.curves.deltas[b])
            .unwrap()
    });
    for i in order {
        rows.push(vec![
            fmt(sol.curves.deltas[i]),
            fmt(sol.curves.mu0[i]),
            fmt(sol.curves.mu1[i]),
        ]);
    }
    write_csv(&mw.output("curves.csv"), "delta,mu0,mu1", &rows)?;

    let field = reconstruct_mode(&sol, &provider_modes(&provider, v, sol.delta_star)?, v, field_grid);
    let rows: Vec<Vec<String>> = field
        .samples
        .iter()
        .map(|&(x1, x2, re_u)| vec![fmt(x1), fmt(x2), fmt(re_u)])
        .collect();
    write_csv(&mw.output("field.csv"), "x1,x2,re_u", &rows)?;

    println!(
        "BIC at delta* = {:.6}, mu* = {:.6} (sigma_min/||T|| = {:.3e}, |b0|/||b|| = {:.3e})",
        sol.delta_star, sol.mu_star, sol.sigma_min_rel, sol.b0_rel
    );
    let summary = serde_json::json!({
        "delta_star": sol.delta_star,
        "mu_star": sol.mu_star,
        "sigma_min_rel": sol.sigma_min_rel,
        "b0_rel": sol.b0_rel,
        "residuals": sol.residuals,
        "fixed_point_iterations": sol.fixed_point_iterations,
        "trace_mismatch": field.trace_mismatch,
        "guide_decay": field.guide_decay,
        "band": band,
        "crossing_delta": crossing.as_ref().map(|c| c.delta),
    });
    std::fs::write(
        mw.output("bic_summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(())
}

fn dump_gap_curve(
    ctx: &BicContext,
    v: &ValidatedSpec,
    steps: usize,
    mw: &mut ManifestWriter,
) -> Result<()> {
    let grid = scan_grid(v, steps);
    let mut rows = Vec::new();
    for &d in &grid {
        let mu0 = bicmm::bic::solve_branch(ctx, d, 0);
        let mu1 = bicmm::bic::solve_branch(ctx, d, 1);
        if let (Ok(a), Ok(b)) = (mu0, mu1) {
            rows.push(vec![fmt(d), fmt(a.mu), fmt(b.mu)]);
        }
    }
    write_csv(&mw.output("curves.csv"), "delta,mu0,mu1", &rows)?;
    Ok(())
}

/// Mode evaluator for field reconstruction, from either engine.
enum Modes<'a> {
    Analytic(Vec<bicmm::cavity_analytic::RectMode>),
    Fem {
        vectors: Vec<Vec<f64>>,
        locator: PointLocator<'a>,
    },
}

impl ModeEval for Modes<'_> {
    fn value(&self, mode: usize, x1: f64, x2: f64) -> f64 {
        match self {
            Modes::Analytic(modes) => modes[mode].eval(x1, x2),
            Modes::Fem { vectors, locator } => {
                locator.interpolate(&vectors[mode], x1, x2).unwrap_or(0.0)
            }
        }
    }

    fn count(&self) -> usize {
        match self {
            Modes::Analytic(m) => m.len(),
            Modes::Fem { vectors, .. } => vectors.len(),
        }
    }
}

fn provider_modes<'a>(
    provider: &'a AnyProvider,
    _v: &ValidatedSpec,
    delta: f64,
) -> Result<Modes<'a>> {
    match provider {
        AnyProvider::Analytic(p) => Ok(Modes::Analytic(p.modes_at(delta))),
        AnyProvider::Fem(p) => {
            let basis = p.eigenbasis_at(delta)?;
            Ok(Modes::Fem {
                vectors: basis.vectors,
                locator: PointLocator::new(&p.mesh),
            })
        }
    }
}

fn cmd_resonance_scan(common: &Common, v: &mut ValidatedSpec, mw: &mut ManifestWriter) -> Result<()> {
    let provider = make_provider(v, common.resolution, false, common.seed)?;
    let grid = scan_grid(v, common.delta_steps);
    let (band, _, _) = prepare_band(v, &provider, &grid)?;
    let m = v.spec.truncation.m;
    let ctx = ResonanceContext { provider: &provider, v };
    let points = ctx.scan_resonances(&grid, &[m - 2, m - 1])?;
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![
                fmt(p.delta),
                p.branch.to_string(),
                fmt(p.re_mu),
                fmt(p.im_mu),
                fmt(p.sigma_min_rel),
            ]
        })
        .collect();
    write_csv(
        &mw.output("resonances.csv"),
        "delta,branch,re_mu,im_mu,sigma_min",
        &rows,
    )?;
    let minima = imag_minima(&points, 1e-8);
    for m in &minima {
        println!(
            "branch {}: min |Im mu| = {:.3e} at delta = {:.6} (Re mu = {:.6}), below certificate: {}",
            m.branch, m.min_abs_im, m.delta, m.re_mu, m.below_certificate
        );
    }
    let summary = serde_json::json!({
        "band": band,
        "minima": minima,
    });
    std::fs::write(
        mw.output("resonance_summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(())
}

fn cmd_sym_bic(
    common: &Common,
    v: &mut ValidatedSpec,
    branch: Option<usize>,
    mw: &mut ManifestWriter,
) -> Result<()> {
    let provider = make_provider(v, common.resolution, false, common.seed)?;
    // symmetry check: the cavity must be centered on the opening axis
    let mid = 0.5 * (v.cavity.y_lo + v.cavity.y_hi);
    if mid.abs() > 1e-9 * v.cavity.height() {
        bail!("sym-bic needs a cavity symmetric about the opening axis x2 = 0");
    }
    let delta0 = 0.5 * (v.spec.delta_range[0] + v.spec.delta_range[1]);
    let basis = provider.basis_at(delta0)?;
    let h = v.h();
    let branch = match branch {
        Some(b) => b,
        None => (0..basis.len())
            .find(|&i| basis.traces[i].odd_defect(h) < 1e-6)
            .ok_or_else(|| anyhow!("no odd-coupled branch among the first M_cav modes"))?,
    };
    let band = v.spec.mu_band.unwrap_or([0.0, v.cutoff()]);
    let ctx = BicContext::new(&provider, v, band);
    let sol = symmetry_bic(&ctx, delta0, branch)?;
    println!(
        "symmetry-protected BIC on branch {branch}: mu = {:.8} (lambda = {:.8}), sigma_min/||T|| = {:.3e}, |b0|/||b|| = {:.3e}",
        sol.mu, sol.lambda, sol.sigma_min_rel, sol.b0_rel
    );
    // independent certificate: the resonance at this mu is real
    let rctx = ResonanceContext { provider: &provider, v };
    let res = rctx.find_resonance(delta0, num_complex::Complex64::new(sol.mu, 0.0), branch)?;
    println!(
        "resonance check: mu = {:.8} {:+.3e} i (sigma_min/||T|| = {:.3e})",
        res.re_mu, res.im_mu, res.sigma_min_rel
    );
    let summary = serde_json::json!({
        "branch": branch,
        "delta": delta0,
        "mu": sol.mu,
        "lambda": sol.lambda,
        "sigma_min_rel": sol.sigma_min_rel,
        "b0_rel": sol.b0_rel,
        "iterations": sol.iterations,
        "resonance_im": res.im_mu,
    });
    std::fs::write(
        mw.output("sym_bic_summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(())
}

fn cmd_validate(common: &Common, v: &mut ValidatedSpec, mw: &mut ManifestWriter) -> Result<()> {
    let provider = make_provider(v, common.resolution.min(16), false, common.seed)?;
    let grid = scan_grid(v, common.delta_steps.min(13));
    let (band, crossing, _) = prepare_band(v, &provider, &grid)?;
    let checks = suites::run_validate(v, &provider, band, crossing.map(|c| c.delta), common.seed)?;
    let mut rows = Vec::new();
    let mut all_pass = true;
    for c in &checks {
        println!(
            "[{}] {} {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
        all_pass &= c.pass;
        rows.push(vec![
            c.name.to_string(),
            if c.pass { "pass" } else { "fail" }.to_string(),
            c.detail.clone(),
        ]);
    }
    write_csv(&mw.output("validate_report.csv"), "check,result,detail", &rows)?;
    if !all_pass {
        bail!(bicmm::Error::Config("invariant suite reported failures".into()));
    }
    Ok(())
}

fn cmd_converge(common: &Common, v: &mut ValidatedSpec, mw: &mut ManifestWriter) -> Result<()> {
    let provider = make_provider(v, common.resolution, false, common.seed)?;
    let grid = scan_grid(v, common.delta_steps.min(13));
    let (band, crossing, _) = prepare_band(v, &provider, &grid)?;
    let rows = suites::run_converge(v, &provider, band, crossing.map(|c| c.delta), common.resolution)?;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.study.to_string(),
                r.parameter.clone(),
                fmt(r.value),
                r.metric.clone(),
            ]
        })
        .collect();
    write_csv(&mw.output("converge.csv"), "study,parameter,value,metric", &csv_rows)?;
    for r in &rows {
        println!("{}: {} = {} ({})", r.study, r.parameter, r.value, r.metric);
    }
    Ok(())
}
