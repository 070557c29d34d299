//! Quick invariant checks on the catalog norms and small flows. Each check
//! prints one line; the command fails if any check fails.

use std::f64::consts::PI;
use std::sync::Arc;

use ffl_core::analysis::{bochner_terms, GridContext};
use ffl_core::bundle::TorusGrid;
use ffl_core::config::TimeSpec;
use ffl_core::evolution::{Mode, RunSpec};
use ffl_core::geometry::ricci_scalar;
use ffl_core::harnack::harnack_bound;
use ffl_core::measure::MeasureDensity;
use ffl_core::norm::{fundamental_tensor, legendre, legendre_inverse, norm_eval, FinslerNorm, NormRegistry, NormSpec};
use ffl_core::presets::initial_data;
use ffl_core::tensor::*;
use ffl_core::{bundle::sample_norm, Result};

use crate::Verdict;

const CATALOG: [&str; 4] = [
    "euclidean",
    "riemannian_diag:4,1",
    "riemannian_conformal:0.2",
    "quartic:0.1",
];

fn norm(spec: &str) -> Result<Arc<dyn FinslerNorm>> {
    NormRegistry::with_catalog().build(&NormSpec::parse(spec)?)
}

/// Deterministic sample points and directions.
fn samples() -> Vec<(Vector, Vector)> {
    (0..12)
        .map(|k| {
            let s = k as f64;
            let x = [(1.3 * s + 0.2) % (2.0 * PI), (2.1 * s + 0.7) % (2.0 * PI)];
            let th = 0.37 + 0.53 * s;
            (x, [(0.5 + 0.1 * s) * th.cos(), (0.5 + 0.1 * s) * th.sin()])
        })
        .collect()
}

fn homogeneity() -> Result<f64> {
    let mut worst: f64 = 0.0;
    for spec in CATALOG {
        let n = norm(spec)?;
        for (x, y) in samples() {
            let f = norm_eval(n.as_ref(), &x, &y)?;
            for l in [0.3, 2.5] {
                let fl = norm_eval(n.as_ref(), &x, &[l * y[0], l * y[1]])?;
                worst = worst.max((fl - l * f).abs() / (l * f));
            }
            let g = fundamental_tensor(n.as_ref(), &x, &y)?;
            worst = worst.max((g.apply(&y, &y) - f * f).abs() / (f * f));
        }
    }
    Ok(worst)
}

fn legendre_round_trip() -> Result<f64> {
    let mut worst: f64 = 0.0;
    for spec in CATALOG {
        let n = norm(spec)?;
        for (x, y) in samples() {
            let back = legendre(n.as_ref(), &x, &legendre_inverse(n.as_ref(), &x, &y)?)?;
            worst = worst.max(max_abs(&[back[0] - y[0], back[1] - y[1]]) / euclid(&y));
        }
    }
    Ok(worst)
}

/// Flat Riemannian metrics have `Ric = 0`.
fn flat_ricci() -> Result<f64> {
    let mut worst: f64 = 0.0;
    for spec in ["euclidean", "riemannian_diag:4,1", "quartic:0.1"] {
        let n = norm(spec)?;
        for (x, y) in samples() {
            worst = worst.max(ricci_scalar(n.as_ref(), &x, &y)?.abs());
        }
    }
    Ok(worst)
}

fn flat_stationarity() -> Result<f64> {
    let mut worst: f64 = 0.0;
    let grid = TorusGrid::new(16, 16)?;
    for spec in ["euclidean", "quartic:0.1"] {
        let field = sample_norm(norm(spec)?.as_ref(), grid)?;
        let h0 = field.h.clone();
        let traj = ffl_core::evolution::run(
            RunSpec {
                field,
                u0: initial_data("sincos", 0.5, &grid)?,
                time: TimeSpec {
                    t_final: 0.05,
                    dt: 0.005,
                    snap_every: 10,
                },
                mode: Mode::Coupled,
                delta_grad: 1e-7,
                s_gate: 1e-4,
                allow_nonzero_s: false,
                angular_modes: None,
            },
            &mut |_| Ok(()),
        )?;
        let last = traj.snapshots.last().expect("snapshots");
        for (a, b) in last.field.h.iter().zip(&h0) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

fn flat_bochner() -> Result<f64> {
    let grid = TorusGrid::new(32, 16)?;
    let n = norm("euclidean")?;
    let measure = MeasureDensity::compute(n.as_ref(), &grid)?;
    let ctx = GridContext {
        grid,
        norm: n.as_ref(),
        measure: &measure,
        delta_grad: 1e-7,
    };
    let terms = bochner_terms(&ctx, &initial_data("sincos", 0.1, &grid)?)?;
    Ok(terms.residual().max_abs_on(&terms.grad.core_mask()))
}

/// With `K1 = K2 = 0` the bound reduces to `n theta^2 / t`.
fn bound_reduction() -> Result<f64> {
    Ok((harnack_bound(2, 2.0, 0.5, 0.0, 0.0)? - 16.0).abs())
}

pub fn run() -> Result<Verdict> {
    type Check = (&'static str, fn() -> Result<f64>, f64);
    let checks: [Check; 6] = [
        ("homogeneity and g_y(y, y) = F^2", homogeneity, 1e-10),
        ("Legendre round trip", legendre_round_trip, 1e-10),
        ("flat norms have zero Ricci curvature", flat_ricci, 1e-10),
        ("flat norms are stationary under the flow", flat_stationarity, 1e-8),
        ("flat Bochner identity", flat_bochner, 1e-4),
        ("bound with zero curvature", bound_reduction, 1e-12),
    ];
    let mut all = true;
    for (name, check, tol) in checks {
        let (pass, detail) = match check() {
            Ok(v) => (v <= tol, format!("{v:.3e} (tol {tol:e})")),
            Err(e) => (false, e.to_string()),
        };
        all &= pass;
        println!("[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
    Ok(if all { Verdict::Pass } else { Verdict::Fail })
}
