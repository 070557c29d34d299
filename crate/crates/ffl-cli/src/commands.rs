//! Subcommand implementations. Every report embeds the tool version and the
//! resolved request, and is written with a fixed field order so identical
//! inputs give identical bytes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use ffl_core::analysis::{bochner_terms, trace_identity_residual, GridContext};
use ffl_core::bundle::{sample_norm, FieldNorm, TorusGrid};
use ffl_core::config::RunConfig;
use ffl_core::evolution::store::{csv_header, load_trajectory, TrajectoryWriter};
use ffl_core::evolution::{run as run_flow, Mode, RunSpec};
use ffl_core::geometry::{
    chern_connection, flag_curvature, orthonormal_completion, ricci_data, spray_coefficients, RicciData,
};
use ffl_core::harnack::{
    differential_harnack_check, integrated_harnack_check, random_pairs, HarnackReport, IntegratedRow,
};
use ffl_core::measure::{bh_density, s_curvature, weighted_ricci_infinity, MeasureDensity};
use ffl_core::norm::{fundamental_tensor, norm_eval, FinslerNorm, NormRegistry, NormSpec, Point};
use ffl_core::presets::initial_data;
use ffl_core::tensor::*;
use ffl_core::{Error, Result, VERSION};

use crate::{BochnerArgs, RunArgs, TensorsArgs, Verdict, VerifyArgs};

fn build_norm(spec: &str) -> Result<(NormSpec, Arc<dyn FinslerNorm>)> {
    let spec = NormSpec::parse(spec)?;
    let norm = NormRegistry::with_catalog().build(&spec)?;
    Ok((spec, norm))
}

fn emit(json: &impl Serialize, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(json)? + "\n";
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, text)?;
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

#[derive(Serialize)]
struct TensorsRequest {
    norm: String,
    x: Point,
    theta: f64,
}

#[derive(Serialize)]
struct FlagSample {
    w: Vector,
    k: f64,
}

#[derive(Serialize)]
struct TensorsReport {
    version: &'static str,
    request: TensorsRequest,
    y: Vector,
    f: f64,
    g: Mat,
    g_inverse: Mat,
    /// `C_ijk = 1/4 d^3 F^2 / dy^i dy^j dy^k`.
    cartan: T3,
    spray: Vector,
    nonlinear_connection: Mat,
    chern: T3,
    flag: FlagSample,
    ricci: RicciData,
    s_curvature: f64,
    sigma: f64,
    ric_inf: f64,
}

pub fn tensors(a: &TensorsArgs) -> Result<Verdict> {
    let (spec, norm) = build_norm(&a.norm)?;
    let x = a.x;
    let y = [a.theta.cos(), a.theta.sin()];
    let n = norm.as_ref();
    let g = fundamental_tensor(n, &x, &y)?;
    let jet = n.jet(&x, &y)?;
    let cartan: T3 = std::array::from_fn(|i| std::array::from_fn(|j| std::array::from_fn(|k| 0.25 * jet.y3[i][j][k])));
    let spray = spray_coefficients(n, &x, &y)?;
    let w = orthonormal_completion(&g.entries, &y)[0];
    let report = TensorsReport {
        version: VERSION,
        request: TensorsRequest {
            norm: spec.to_string(),
            x,
            theta: a.theta,
        },
        y,
        f: norm_eval(n, &x, &y)?,
        g: g.entries,
        g_inverse: g.inverse(),
        cartan,
        spray: spray.g,
        nonlinear_connection: spray.n,
        chern: chern_connection(n, &x, &y)?.gamma,
        flag: FlagSample {
            w,
            k: flag_curvature(n, &x, &y, &w)?,
        },
        ricci: ricci_data(n, &x, &y)?,
        s_curvature: s_curvature(n, &x, &y)?,
        sigma: bh_density(n, &x)?,
        ric_inf: weighted_ricci_infinity(n, &x, &y)?,
    };
    emit(&report, a.out.as_deref())?;
    Ok(Verdict::Pass)
}

pub fn run(a: &RunArgs, mode: Mode) -> Result<Verdict> {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(out) = &a.out {
        cfg.output_dir = out.clone();
    }
    let spec = RunSpec::from_config(&cfg, mode)?;
    let mut writer = TrajectoryWriter::create(&cfg.output_dir, &cfg, mode)?;
    let outcome = run_flow(spec, &mut |s| {
        log::info!("snapshot {} at t = {}", s.index, s.t);
        writer.record(s)
    });
    writer.finish(&outcome)?;
    let traj = outcome?;
    let last = traj.snapshots.last().expect("at least one snapshot");
    println!(
        "{} snapshots written to {} (t = {}, min u = {:e}, K1 = {:e}, K2 = {:e})",
        traj.snapshots.len(),
        cfg.output_dir.display(),
        last.t,
        last.min_u(),
        last.bounds.k1,
        last.bounds.k2
    );
    Ok(Verdict::Pass)
}

pub const HARNACK_REPORT: &str = "harnack_report.json";
pub const HARNACK_MARGINS: &str = "harnack_margins.csv";
pub const HARNACK_PAIRS: &str = "harnack_pairs.csv";

#[derive(Serialize)]
struct VerifyRequest {
    trajectory: PathBuf,
    thetas: Vec<f64>,
    epsilons: Vec<f64>,
    slack_factor: f64,
    pairs: Vec<[usize; 6]>,
    random_pairs: Option<usize>,
    seed: u64,
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    version: &'static str,
    config: &'a RunConfig,
    request: VerifyRequest,
    differential: HarnackReport,
    integrated: Vec<IntegratedRow>,
    pass: bool,
}

pub fn verify_harnack(a: &VerifyArgs) -> Result<Verdict> {
    let (manifest, traj) = load_trajectory(&a.traj)?;
    let slack = a.slack.unwrap_or(manifest.config.tolerances.harnack_slack);
    if !(slack >= 0.0 && slack.is_finite()) {
        return Err(Error::Config(format!("slack must be finite and >= 0, got {slack}")));
    }
    let seed = a.seed.unwrap_or(manifest.config.seed);
    let grid = traj.grid;
    let mut pairs: Vec<(usize, usize, usize, usize)> = Vec::new();
    for p in &a.pairs {
        if p[0] >= grid.nx || p[1] >= grid.nx || p[3] >= grid.nx || p[4] >= grid.nx {
            return Err(Error::Config(format!(
                "pair {p:?} lies outside the {0} x {0} lattice",
                grid.nx
            )));
        }
        pairs.push((grid.site(p[0], p[1]), p[2], grid.site(p[3], p[4]), p[5]));
    }
    if let Some(k) = a.random_pairs {
        pairs.extend(random_pairs(&traj, k, seed));
    }
    if !pairs.is_empty() && a.epsilons.is_empty() {
        return Err(Error::Config("point pairs need at least one --eps".into()));
    }
    let differential = differential_harnack_check(&traj, &a.thetas, slack)?;
    let mut integrated = Vec::new();
    for &(x, k1, y, k2) in &pairs {
        for &eps in &a.epsilons {
            integrated.push(integrated_harnack_check(&traj, x, k1, y, k2, eps, slack)?);
        }
    }
    let pass = differential.pass && integrated.iter().all(|r| r.pass);

    let out = a.out.clone().unwrap_or_else(|| a.traj.clone());
    fs::create_dir_all(&out)?;
    let request = VerifyRequest {
        trajectory: a.traj.clone(),
        thetas: a.thetas.clone(),
        epsilons: a.epsilons.clone(),
        slack_factor: slack,
        pairs: a.pairs.clone(),
        random_pairs: a.random_pairs,
        seed,
    };
    let header = format!(
        "{}# request {}\n",
        csv_header(&manifest.config),
        serde_json::to_string(&request)?
    );
    let mut margins = header.clone() + "t,theta,max_lhs,bound,margin,slack,pass\n";
    for r in &differential.rows {
        margins += &format!(
            "{},{},{},{},{},{},{}\n",
            r.t, r.theta, r.max_lhs, r.bound, r.margin, r.slack, r.pass
        );
    }
    fs::write(out.join(HARNACK_MARGINS), margins)?;
    if !integrated.is_empty() {
        let mut csv = header + "x1,x2,t1,y1,y2,t2,epsilon,lhs,rhs,slack,pass\n";
        for r in &integrated {
            csv += &format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                r.x[0], r.x[1], r.t1, r.y[0], r.y[1], r.t2, r.epsilon, r.lhs, r.rhs, r.slack, r.pass
            );
        }
        fs::write(out.join(HARNACK_PAIRS), csv)?;
    }
    let worst = differential
        .rows
        .iter()
        .map(|r| r.margin - r.slack)
        .fold(f64::NEG_INFINITY, f64::max);
    let n_int = integrated.len();
    let failed_int = integrated.iter().filter(|r| !r.pass).count();
    emit(
        &VerifyReport {
            version: VERSION,
            config: &manifest.config,
            request,
            differential,
            integrated,
            pass,
        },
        Some(&out.join(HARNACK_REPORT)),
    )?;
    println!(
        "{}: differential max (margin - slack) = {worst:e}; integrated {}/{n_int} pass; report in {}",
        if pass { "PASS" } else { "FAIL" },
        n_int - failed_int,
        out.display()
    );
    Ok(if pass { Verdict::Pass } else { Verdict::Fail })
}

#[derive(Serialize)]
struct BochnerRequest {
    norm: String,
    u: String,
    amplitude: f64,
    grid: TorusGrid,
    delta_grad: f64,
    sampled: bool,
    tol: Option<f64>,
}

#[derive(Serialize)]
struct BochnerReport {
    version: &'static str,
    request: BochnerRequest,
    sites: usize,
    mask_sites: usize,
    core_sites: usize,
    /// `max |LHS - RHS|` over the mask and over its core.
    residual_mask: f64,
    residual_core: f64,
    residual_rms_mask: f64,
    /// `min (|Hess u|^2 - (tr Hess u)^2 / n)` on the mask (must be >= 0).
    trace_inequality_min: f64,
    /// `max |Delta u - (tr Hess u - S)|` on the mask and core.
    trace_identity_mask: f64,
    trace_identity_core: f64,
    pass: bool,
}

pub fn bochner_check(a: &BochnerArgs) -> Result<Verdict> {
    let (spec, analytic) = build_norm(&a.norm)?;
    let grid = TorusGrid::new(a.nx, a.ntheta)?;
    if !(a.delta_grad > 0.0 && a.delta_grad < 1.0) {
        return Err(Error::Config(format!(
            "delta_grad must lie in (0, 1), got {}",
            a.delta_grad
        )));
    }
    let field;
    let norm: &dyn FinslerNorm = if a.sampled {
        field = FieldNorm::new(Arc::new(sample_norm(analytic.as_ref(), grid)?));
        &field
    } else {
        analytic.as_ref()
    };
    let measure = MeasureDensity::compute(norm, &grid)?;
    let ctx = GridContext {
        grid,
        norm,
        measure: &measure,
        delta_grad: a.delta_grad,
    };
    let u = initial_data(&a.u, a.amplitude, &grid)?;
    let terms = bochner_terms(&ctx, &u)?;
    let res = terms.residual();
    let core = terms.grad.core_mask();
    let mask_sites = res.count();
    let rms = if mask_sites == 0 {
        0.0
    } else {
        (res.values
            .iter()
            .zip(&res.mask)
            .filter(|(_, m)| **m)
            .map(|(v, _)| v * v)
            .sum::<f64>()
            / mask_sites as f64)
            .sqrt()
    };
    let trace = trace_identity_residual(&ctx, &u)?;
    let residual_core = res.max_abs_on(&core);
    let pass = a.tol.is_none_or(|t| residual_core <= t);
    let report = BochnerReport {
        version: VERSION,
        request: BochnerRequest {
            norm: spec.to_string(),
            u: a.u.clone(),
            amplitude: a.amplitude,
            grid,
            delta_grad: a.delta_grad,
            sampled: a.sampled,
            tol: a.tol,
        },
        sites: grid.n_sites(),
        mask_sites,
        core_sites: core.iter().filter(|c| **c).count(),
        residual_mask: res.max_abs(),
        residual_core,
        residual_rms_mask: rms,
        trace_inequality_min: terms.trace_inequality().min(),
        trace_identity_mask: trace.max_abs(),
        trace_identity_core: trace.max_abs_on(&core),
        pass,
    };
    emit(&report, a.out.as_deref())?;
    Ok(if pass { Verdict::Pass } else { Verdict::Fail })
}
