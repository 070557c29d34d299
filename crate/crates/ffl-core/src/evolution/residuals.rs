//! Residual checks of the flow and heat trajectories: the distributional heat
//! equation, the tensorial flow equation, and the evolution of the Legendre
//! transform and of `F^2(grad f)`.
//!
//! Time derivatives are centered differences between snapshots, so every
//! residual here is `O(dt_snap^2)` plus the error of the stepper against the
//! same spatial discretization. Ricci tensors come from the batched nodal
//! curvature of each snapshot, the same operator that drives the flow.

use serde::Serialize;

use crate::analysis::{differential, gradient, GridContext, VectorFieldOnMu};
use crate::bundle::FieldNorm;
use crate::error::{Error, Result};
use crate::norm::{fundamental_tensor, legendre_from, Covector};
use crate::presets::{sample, Profile};
use crate::tensor::*;

use super::{FlowTrajectory, Snapshot};

fn require(traj: &FlowTrajectory, n: usize) -> Result<()> {
    if traj.snapshots.len() < n {
        return Err(Error::Domain(format!(
            "residual needs at least {n} snapshots, trajectory has {}",
            traj.snapshots.len()
        )));
    }
    Ok(())
}

fn context<'a>(s: &'a Snapshot, norm: &'a FieldNorm, delta_grad: f64) -> GridContext<'a> {
    GridContext {
        grid: s.field.grid,
        norm,
        measure: &s.measure,
        delta_grad,
    }
}

/// Gradient of `u` at every snapshot, warm-started along the trajectory.
pub fn snapshot_gradients(traj: &FlowTrajectory, values: &[Vec<f64>]) -> Result<Vec<VectorFieldOnMu>> {
    let mut out: Vec<VectorFieldOnMu> = Vec::with_capacity(values.len());
    for (s, u) in traj.snapshots.iter().zip(values) {
        let norm = s.norm();
        let ctx = context(s, &norm, traj.delta_grad);
        let guess = out.last().map(|g| g.v.as_slice());
        out.push(gradient(&ctx, u, guess)?);
    }
    Ok(out)
}

/// Maximum weak-form residual per test function.
#[derive(Clone, Debug, Serialize)]
pub struct WeakFormReport {
    pub per_function: Vec<(String, f64)>,
    pub max: f64,
}

/// `max_k |\int phi (u_{k+1} - u_k)/dt_snap dm + \int D phi(grad u) dm|`, with
/// both integrals taken at the interval midpoint (the measure averaged, the
/// flux term by the trapezoid rule).
pub fn weak_form_residual(traj: &FlowTrajectory, phis: &[std::sync::Arc<dyn Profile>]) -> Result<WeakFormReport> {
    require(traj, 2)?;
    let grid = traj.grid;
    let tau = traj.snap_dt();
    let cell = grid.dx() * grid.dx();
    let us: Vec<Vec<f64>> = traj.snapshots.iter().map(|s| s.u.clone()).collect();
    let grads = snapshot_gradients(traj, &us)?;
    let mut per_function = Vec::new();
    let mut max = 0.0_f64;
    for phi in phis {
        let p = sample(phi.as_ref(), &grid);
        let dp = differential(&grid, &p);
        let flux: Vec<f64> = traj
            .snapshots
            .iter()
            .zip(&grads)
            .map(|(s, g)| {
                (0..grid.n_sites())
                    .map(|i| dot(&dp[i], &g.v[i]) * s.measure.sigma[i])
                    .sum::<f64>()
                    * cell
            })
            .collect();
        let mut worst = 0.0_f64;
        for k in 0..traj.snapshots.len() - 1 {
            let (a, b) = (&traj.snapshots[k], &traj.snapshots[k + 1]);
            let lhs: f64 = (0..grid.n_sites())
                .map(|i| p[i] * (b.u[i] - a.u[i]) * 0.5 * (a.measure.sigma[i] + b.measure.sigma[i]))
                .sum::<f64>()
                * cell
                / tau;
            worst = worst.max((lhs + 0.5 * (flux[k] + flux[k + 1])).abs());
        }
        max = max.max(worst);
        per_function.push((phi.name().to_string(), worst));
    }
    Ok(WeakFormReport { per_function, max })
}

/// Lattice node `(site, theta index)`.
pub type NodeSample = (usize, usize);

/// Residuals of `dg_ij/dt = -2 Ric_ij` and `dg^ij/dt = 2 Ric^ij`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MetricEvolutionReport {
    pub metric: f64,
    pub inverse: f64,
    /// Largest `|Ric_ij|` seen, for scale.
    pub scale: f64,
}

/// Centered time differences of `g` and `g^{-1}` at fixed nodes against the
/// nodal Ricci tensor of the middle snapshot.
pub fn metric_evolution_residual(traj: &FlowTrajectory, samples: &[NodeSample]) -> Result<MetricEvolutionReport> {
    require(traj, 3)?;
    let tau = traj.snap_dt();
    let norms: Vec<FieldNorm> = traj.snapshots.iter().map(|s| s.norm()).collect();
    let mut rep = MetricEvolutionReport {
        metric: 0.0,
        inverse: 0.0,
        scale: 0.0,
    };
    for k in 1..traj.snapshots.len() - 1 {
        for &(site, node) in samples {
            let gp = norms[k + 1].node_metric(site, node);
            let gm = norms[k - 1].node_metric(site, node);
            let g = norms[k].node_metric(site, node);
            let ric = traj.snapshots[k].ricci.node_tensor(site, node);
            let gi = inverse(&g).expect("positive definite");
            let dg: Mat = std::array::from_fn(|i| std::array::from_fn(|j| (gp[i][j] - gm[i][j]) / (2.0 * tau)));
            let (ip, im) = (inverse(&gp).unwrap(), inverse(&gm).unwrap());
            let dgi: Mat = std::array::from_fn(|i| std::array::from_fn(|j| (ip[i][j] - im[i][j]) / (2.0 * tau)));
            let up = mat_mul(&mat_mul(&gi, &ric), &gi);
            for i in 0..DIM {
                for j in 0..DIM {
                    rep.metric = rep.metric.max((dg[i][j] + 2.0 * ric[i][j]).abs());
                    rep.inverse = rep.inverse.max((dgi[i][j] - 2.0 * up[i][j]).abs());
                    rep.scale = rep.scale.max(ric[i][j].abs());
                }
            }
        }
    }
    Ok(rep)
}

/// Residual of `dy^i/dt = 2 Ric^i_r y^r` for `y(t) = L*_t(omega)` at fixed
/// sites.
pub fn legendre_evolution_residual(traj: &FlowTrajectory, omega: &Covector, sites: &[usize]) -> Result<f64> {
    require(traj, 3)?;
    let tau = traj.snap_dt();
    let grid = traj.grid;
    let norms: Vec<FieldNorm> = traj.snapshots.iter().map(|s| s.norm()).collect();
    let mut worst = 0.0_f64;
    for &site in sites {
        let x = grid.point(site);
        let mut ys: Vec<Vector> = Vec::with_capacity(norms.len());
        for n in &norms {
            let y = legendre_from(n, &x, omega, ys.last())?;
            ys.push(y);
        }
        for k in 1..norms.len() - 1 {
            let y = ys[k];
            let g = fundamental_tensor(&norms[k], &x, &y)?;
            let ric = traj.snapshots[k].ricci.tensor(site, &y);
            let rhs = mat_vec(&g.inverse(), &mat_vec(&ric, &y));
            for i in 0..DIM {
                let lhs = (ys[k + 1][i] - ys[k - 1][i]) / (2.0 * tau);
                worst = worst.max((lhs - 2.0 * rhs[i]).abs());
            }
        }
    }
    Ok(worst)
}

/// Residuals of the two forms of `d/dt F^2(grad f)`, `f = log u`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GradNormReport {
    /// `2 g^{ij} (d_t f)_i f_j + [d_t g^{ij}](Df) f_i f_j`.
    pub intermediate: f64,
    /// `2 D(d_t f)(grad f) + 2 Ric^{ij} f_i f_j`.
    pub ricci_form: f64,
    /// `[d_t g^{ij}](Df) f_i f_j - 2 Ric^{ij} f_i f_j`, the part carried by
    /// the flow; free of the heat-equation time error.
    pub flow_term: f64,
    /// Largest `|d/dt F^2(grad f)|`, for scale.
    pub scale: f64,
}

pub fn gradnorm_evolution_residual(traj: &FlowTrajectory, sites: &[usize]) -> Result<GradNormReport> {
    require(traj, 3)?;
    let grid = traj.grid;
    let tau = traj.snap_dt();
    let fs: Vec<Vec<f64>> = traj
        .snapshots
        .iter()
        .map(|s| s.u.iter().map(|v| v.ln()).collect())
        .collect();
    let grads = snapshot_gradients(traj, &fs)?;
    let norms: Vec<FieldNorm> = traj.snapshots.iter().map(|s| s.norm()).collect();
    let mut rep = GradNormReport {
        intermediate: 0.0,
        ricci_form: 0.0,
        flow_term: 0.0,
        scale: 0.0,
    };
    for k in 1..traj.snapshots.len() - 1 {
        let ft: Vec<f64> = (0..grid.n_sites())
            .map(|i| (fs[k + 1][i] - fs[k - 1][i]) / (2.0 * tau))
            .collect();
        let dft = differential(&grid, &ft);
        for &site in sites {
            if !(grads[k - 1].mask[site] && grads[k].mask[site] && grads[k + 1].mask[site]) {
                return Err(Error::Masked { site });
            }
            let x = grid.point(site);
            let w = |j: usize| dot(&grads[j].du[site], &grads[j].v[site]);
            let lhs = (w(k + 1) - w(k - 1)) / (2.0 * tau);
            let xi = grads[k].du[site];
            let v = grads[k].v[site];
            // d_t g^{ij} at the fixed covector xi
            let inv_at = |j: usize| -> Result<Mat> {
                let y = legendre_from(&norms[j], &x, &Covector(xi), Some(&v))?;
                Ok(fundamental_tensor(&norms[j], &x, &y)?.inverse())
            };
            let (ip, im) = (inv_at(k + 1)?, inv_at(k - 1)?);
            let dgi: Mat = std::array::from_fn(|i| std::array::from_fn(|j| (ip[i][j] - im[i][j]) / (2.0 * tau)));
            let inter = 2.0 * dot(&dft[site], &v) + bilinear(&dgi, &xi, &xi);
            let ric = traj.snapshots[k].ricci.tensor(site, &v);
            let ricci_form = 2.0 * dot(&dft[site], &v) + 2.0 * bilinear(&ric, &v, &v);
            rep.intermediate = rep.intermediate.max((lhs - inter).abs());
            rep.ricci_form = rep.ricci_form.max((lhs - ricci_form).abs());
            rep.flow_term = rep
                .flow_term
                .max((bilinear(&dgi, &xi, &xi) - 2.0 * bilinear(&ric, &v, &v)).abs());
            rep.scale = rep.scale.max(lhs.abs());
        }
    }
    Ok(rep)
}
