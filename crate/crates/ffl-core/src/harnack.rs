//! Differential and integrated Harnack estimates for positive heat solutions
//! under the flow, together with the parabolic identity for
//! `sigma = t d_t f` and the inequality for `alpha = t (F^2(grad f) - theta d_t f)`.
//!
//! Time derivatives at snapshot `k` use centered differences over `k +- 1`;
//! the first and last snapshots are never assessed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{differential, hessian_field, linearized_laplacian, trace_and_hs, GridContext, VectorFieldOnMu};
use crate::bundle::spectral::AngularOps;
use crate::error::{Error, Result};
use crate::evolution::residuals::snapshot_gradients;
use crate::evolution::FlowTrajectory;
use crate::geometry::RicciBounds;
use crate::tensor::*;

/// `(C1, C2) = (K1, max(K1^2, K2^2))`.
pub fn constants(b: &RicciBounds) -> (f64, f64) {
    (b.k1, (b.k1 * b.k1).max(b.k2 * b.k2))
}

/// `n theta^2 / t + n theta^3 C1 / (theta - 1) + n^{3/2} theta^2 sqrt(C2)`.
pub fn harnack_bound(n: usize, theta: f64, t: f64, k1: f64, k2: f64) -> Result<f64> {
    if !(theta > 1.0) {
        return Err(Error::Domain(format!("theta must exceed 1, got {theta}")));
    }
    if !(t > 0.0) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    if k1 < 0.0 || k2 < 0.0 {
        return Err(Error::Domain("curvature bounds must be nonnegative".into()));
    }
    let n = n as f64;
    let c1 = k1;
    let c2 = (k1 * k1).max(k2 * k2);
    Ok(n * theta * theta / t + n * theta.powi(3) * c1 / (theta - 1.0) + n.powf(1.5) * theta * theta * c2.sqrt())
}

/// `C(n, eps) = 4 n eps^2 / (2 eps - 1) + 2 n^{3/2} eps`.
pub fn corollary_constant(n: usize, eps: f64) -> Result<f64> {
    if !(eps > 0.5) {
        return Err(Error::Domain(format!("epsilon must exceed 1/2, got {eps}")));
    }
    let n = n as f64;
    Ok(4.0 * n * eps * eps / (2.0 * eps - 1.0) + 2.0 * n.powf(1.5) * eps)
}

/// Right-hand side of the integrated estimate,
/// `u(y,t2) (t2/t1)^{2 n eps} exp(eps I / (2 (t2 - t1)) + C (t2 - t1)(C1 + sqrt C2))`
/// with `I = \int_0^1 F^2(gamma') ds`.
pub fn corollary_rhs(
    u_y_t2: f64,
    t1: f64,
    t2: f64,
    n: usize,
    eps: f64,
    path_energy: f64,
    c1: f64,
    c2: f64,
) -> Result<f64> {
    if !(t1 > 0.0 && t1 < t2) {
        return Err(Error::Domain(format!("need 0 < t1 < t2, got t1 = {t1}, t2 = {t2}")));
    }
    let c = corollary_constant(n, eps)?;
    let expo = eps * path_energy / (2.0 * (t2 - t1)) + c * (t2 - t1) * (c1 + c2.sqrt());
    Ok(u_y_t2 * (t2 / t1).powf(2.0 * n as f64 * eps) * expo.exp())
}

/// Discretization slack `factor (dt + dx^2)(1 + max|f| + max F^2(grad f))`.
pub fn discretization_slack(factor: f64, dt: f64, dx: f64, max_f: f64, max_f2: f64) -> f64 {
    factor * (dt + dx * dx) * (1.0 + max_f + max_f2)
}

/// Per-snapshot fields shared by all checks.
struct Calculus {
    f: Vec<Vec<f64>>,
    grads: Vec<VectorFieldOnMu>,
    f2: Vec<Vec<f64>>,
}

fn calculus(traj: &FlowTrajectory) -> Result<Calculus> {
    if traj.snapshots.len() < 3 {
        return Err(Error::Domain("Harnack checks need at least 3 snapshots".into()));
    }
    for s in &traj.snapshots {
        if let Some((site, v)) = s.u.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::Positivity {
                time: s.t,
                site,
                value: *v,
            });
        }
    }
    let f: Vec<Vec<f64>> = traj
        .snapshots
        .iter()
        .map(|s| s.u.iter().map(|v| v.ln()).collect())
        .collect();
    let grads = snapshot_gradients(traj, &f)?;
    let f2 = grads.iter().map(|g| g.norm_sq()).collect();
    Ok(Calculus { f, grads, f2 })
}

/// Pointwise quantities at an interior snapshot.
struct Quantities {
    t: f64,
    ft: Vec<f64>,
    ftt: Vec<f64>,
    f2_t: Vec<f64>,
    hess: Vec<Mat>,
    ric: Vec<Mat>,
    ric_scalar: Vec<f64>,
}

fn quantities(traj: &FlowTrajectory, c: &Calculus, k: usize) -> Result<Quantities> {
    let tau = traj.snap_dt();
    let s = &traj.snapshots[k];
    let n = traj.grid.n_sites();
    let (fm, f0, fp) = (&c.f[k - 1], &c.f[k], &c.f[k + 1]);
    let ft = (0..n).map(|i| (fp[i] - fm[i]) / (2.0 * tau)).collect();
    let ftt = (0..n).map(|i| (fp[i] - 2.0 * f0[i] + fm[i]) / (tau * tau)).collect();
    let f2_t = (0..n)
        .map(|i| (c.f2[k + 1][i] - c.f2[k - 1][i]) / (2.0 * tau))
        .collect();
    let norm = s.norm();
    let ctx = GridContext {
        grid: traj.grid,
        norm: &norm,
        measure: &s.measure,
        delta_grad: traj.delta_grad,
    };
    let grad = &c.grads[k];
    let hess = hessian_field(&ctx, f0, grad)?;
    let ric = (0..n).map(|i| s.ricci.tensor(i, &grad.v[i])).collect();
    let ric_scalar = (0..n).map(|i| s.ricci.scalar(i, &grad.v[i])).collect();
    Ok(Quantities {
        t: s.t,
        ft,
        ftt,
        f2_t,
        hess,
        ric,
        ric_scalar,
    })
}

fn contract_up(ginv: &Mat, a: &Mat, b: &Mat) -> f64 {
    // a^{kl} b_kl with a raised by ginv on both indices
    let up = mat_mul(&mat_mul(ginv, a), ginv);
    (0..DIM)
        .map(|i| (0..DIM).map(|j| up[i][j] * b[i][j]).sum::<f64>())
        .sum()
}

/// One row of the differential check.
#[derive(Clone, Debug, Serialize)]
pub struct HarnackRow {
    pub t: f64,
    pub theta: f64,
    pub max_lhs: f64,
    pub bound: f64,
    pub margin: f64,
    pub slack: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct HarnackReport {
    pub k1: f64,
    pub k2: f64,
    pub c1: f64,
    pub c2: f64,
    pub rows: Vec<HarnackRow>,
    pub pass: bool,
}

/// `max_mask (F^2(grad f) - theta d_t f) - bound(t)` at every interior
/// snapshot and every `theta`, with `K1, K2` the envelope over the run.
pub fn differential_harnack_check(traj: &FlowTrajectory, thetas: &[f64], slack_factor: f64) -> Result<HarnackReport> {
    let c = calculus(traj)?;
    let b = traj.bounds();
    let (c1, c2) = constants(&b);
    let tau = traj.snap_dt();
    let dx = traj.grid.dx();
    let mut rows = Vec::new();
    for k in 1..traj.snapshots.len() - 1 {
        let t = traj.snapshots[k].t;
        let mask = &c.grads[k].mask;
        let max_f = c.f[k].iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let max_f2 = c.f2[k]
            .iter()
            .zip(mask)
            .filter(|(_, m)| **m)
            .fold(0.0_f64, |a, (v, _)| a.max(*v));
        let slack = discretization_slack(slack_factor, traj.time.dt, dx, max_f, max_f2);
        for &theta in thetas {
            let bound = harnack_bound(DIM, theta, t, b.k1, b.k2)?;
            let mut max_lhs = f64::NEG_INFINITY;
            for i in 0..traj.grid.n_sites() {
                if mask[i] {
                    let ft = (c.f[k + 1][i] - c.f[k - 1][i]) / (2.0 * tau);
                    max_lhs = max_lhs.max(c.f2[k][i] - theta * ft);
                }
            }
            let margin = max_lhs - bound;
            rows.push(HarnackRow {
                t,
                theta,
                max_lhs,
                bound,
                margin,
                slack,
                pass: margin <= slack,
            });
        }
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(HarnackReport {
        k1: b.k1,
        k2: b.k2,
        c1,
        c2,
        rows,
        pass,
    })
}

/// Maximum of a pointwise residual at each interior snapshot, over the mask
/// and over the core of the mask (stencils clear of critical points).
#[derive(Clone, Debug, Serialize)]
pub struct IdentityReport {
    pub times: Vec<f64>,
    pub mask_max: Vec<f64>,
    pub core_max: Vec<f64>,
}

impl IdentityReport {
    pub fn max(&self) -> f64 {
        self.mask_max.iter().cloned().fold(0.0, f64::max)
    }

    pub fn core(&self) -> f64 {
        self.core_max.iter().cloned().fold(0.0, f64::max)
    }
}

fn masked_max(values: &[f64], mask: &[bool]) -> f64 {
    values
        .iter()
        .zip(mask)
        .filter(|(_, m)| **m)
        .fold(0.0_f64, |a, (v, _)| a.max(v.abs()))
}

/// `Delta sigma - d_t sigma + sigma/t + 2 D sigma(grad f) + 2t Ric^{ij} f_i f_j + 2t Ric^{kl} f_kl`
/// with `Delta` linearized at `grad u`.
pub fn sigma_identity_residual(traj: &FlowTrajectory) -> Result<IdentityReport> {
    let c = calculus(traj)?;
    let grid = traj.grid;
    let n = grid.n_sites();
    let mut rep = IdentityReport {
        times: vec![],
        mask_max: vec![],
        core_max: vec![],
    };
    for k in 1..traj.snapshots.len() - 1 {
        let q = quantities(traj, &c, k)?;
        let s = &traj.snapshots[k];
        let norm = s.norm();
        let ctx = GridContext {
            grid,
            norm: &norm,
            measure: &s.measure,
            delta_grad: traj.delta_grad,
        };
        let grad = &c.grads[k];
        let sigma: Vec<f64> = q.ft.iter().map(|v| q.t * v).collect();
        let sigma_t: Vec<f64> = (0..n).map(|i| q.ft[i] + q.t * q.ftt[i]).collect();
        let lap = linearized_laplacian(&ctx, grad, &sigma);
        let dsig = differential(&grid, &sigma);
        let res: Vec<f64> = (0..n)
            .map(|i| {
                let v = grad.v[i];
                let lhs = lap[i] - sigma_t[i] + sigma[i] / q.t + 2.0 * dot(&dsig[i], &v);
                let rhs = q.t
                    * (-2.0 * bilinear(&q.ric[i], &v, &v) - 2.0 * contract_up(&grad.ginv[i], &q.ric[i], &q.hess[i]));
                lhs - rhs
            })
            .collect();
        rep.times.push(q.t);
        rep.mask_max.push(masked_max(&res, &grad.mask));
        rep.core_max.push(masked_max(&res, &grad.core_mask()));
    }
    Ok(rep)
}

/// Outcome of the `alpha` inequality and its algebraic ingredients.
#[derive(Clone, Debug, Serialize)]
pub struct AlphaReport {
    pub theta: f64,
    pub c1: f64,
    pub c2: f64,
    pub times: Vec<f64>,
    /// `min_mask (LHS - RHS)` per snapshot (must be `>= -slack`).
    pub min_margin: Vec<f64>,
    pub slack: Vec<f64>,
    /// `min (|Hess f|^2 - (tr Hess f)^2/n)`, nonnegative by Cauchy-Schwarz.
    pub trace_inequality: f64,
    /// `max (2 theta t |Ric^{kl} f_kl| - t theta^2 |Ric|^2 - t |Hess f|^2)`,
    /// nonpositive by Young's inequality.
    pub young_excess: f64,
    /// `max |Delta^V alpha + 2 D alpha(grad f) - d_t alpha + alpha/t - B|`.
    pub identity_residual: Vec<f64>,
    pub pass: bool,
}

/// Evaluates
/// `Delta^V alpha + 2 D alpha(grad f) - d_t alpha >= -alpha/t + (t/n)(F^2 - d_t f)^2 - 2 t theta C1 F^2 - t theta^2 n^2 C2`
/// on the mask at every interior snapshot.
pub fn alpha_inequality_residual(traj: &FlowTrajectory, theta: f64, slack_factor: f64) -> Result<AlphaReport> {
    if !(theta > 1.0) {
        return Err(Error::Domain(format!("theta must exceed 1, got {theta}")));
    }
    let c = calculus(traj)?;
    let grid = traj.grid;
    let n = grid.n_sites();
    let nd = DIM as f64;
    let (c1, c2) = constants(&traj.bounds());
    let mut rep = AlphaReport {
        theta,
        c1,
        c2,
        times: vec![],
        min_margin: vec![],
        slack: vec![],
        trace_inequality: f64::INFINITY,
        young_excess: f64::NEG_INFINITY,
        identity_residual: vec![],
        pass: true,
    };
    for k in 1..traj.snapshots.len() - 1 {
        let q = quantities(traj, &c, k)?;
        let s = &traj.snapshots[k];
        let norm = s.norm();
        let ctx = GridContext {
            grid,
            norm: &norm,
            measure: &s.measure,
            delta_grad: traj.delta_grad,
        };
        let grad = &c.grads[k];
        let f2 = &c.f2[k];
        let t = q.t;
        let alpha: Vec<f64> = (0..n).map(|i| t * (f2[i] - theta * q.ft[i])).collect();
        let alpha_t: Vec<f64> = (0..n)
            .map(|i| f2[i] - theta * q.ft[i] + t * (q.f2_t[i] - theta * q.ftt[i]))
            .collect();
        let lap = linearized_laplacian(&ctx, grad, &alpha);
        let dal = differential(&grid, &alpha);
        let max_f = c.f[k].iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let max_f2 = masked_max(f2, &grad.mask);
        let slack = discretization_slack(slack_factor, traj.time.dt, grid.dx(), max_f, max_f2);
        let mut min_margin = f64::INFINITY;
        let mut ident = 0.0_f64;
        for i in (0..n).filter(|i| grad.mask[*i]) {
            let v = grad.v[i];
            let lhs = lap[i] + 2.0 * dot(&dal[i], &v) - alpha_t[i];
            let rhs = -alpha[i] / t + t / nd * (f2[i] - q.ft[i]).powi(2)
                - 2.0 * t * theta * c1 * f2[i]
                - t * theta * theta * nd * nd * c2;
            min_margin = min_margin.min(lhs - rhs);

            let ric_ff = bilinear(&q.ric[i], &v, &v);
            let ric_h = contract_up(&grad.ginv[i], &q.ric[i], &q.hess[i]);
            let (tr, hs) = trace_and_hs(&grad.ginv[i], &q.hess[i]);
            let b = theta * (2.0 * t * ric_ff + 2.0 * t * ric_h) + 2.0 * t * q.ric_scalar[i] + 2.0 * t * hs
                - 2.0 * t * ric_ff;
            ident = ident.max((lhs + alpha[i] / t - b).abs());
            rep.trace_inequality = rep.trace_inequality.min(hs - tr * tr / nd);
            // orthonormal frame of g_{grad f}
            let g = inverse(&grad.ginv[i]).expect("positive definite");
            let r_on = orthonormal_congruence(&q.ric[i], &g).expect("positive definite");
            let h_on = orthonormal_congruence(&q.hess[i], &g).expect("positive definite");
            let rh: f64 = (0..DIM)
                .map(|a| (0..DIM).map(|b| r_on[a][b] * h_on[a][b]).sum::<f64>())
                .sum();
            let rr: f64 = r_on.iter().flatten().map(|v| v * v).sum();
            let hh: f64 = h_on.iter().flatten().map(|v| v * v).sum();
            rep.young_excess = rep
                .young_excess
                .max(2.0 * theta * t * rh.abs() - t * theta * theta * rr - t * hh);
        }
        rep.pass &= min_margin >= -slack;
        rep.times.push(t);
        rep.min_margin.push(min_margin);
        rep.slack.push(slack);
        rep.identity_residual.push(ident);
    }
    Ok(rep)
}

/// One evaluation of the integrated estimate.
#[derive(Clone, Debug, Serialize)]
pub struct IntegratedRow {
    pub x: [f64; 2],
    pub t1: f64,
    pub y: [f64; 2],
    pub t2: f64,
    pub epsilon: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
}

/// Number of Simpson panels along the path.
pub const PATH_PANELS: usize = 64;

/// Periodic cubic Lagrange weights at fractional offset `r` in `[0, 1)` for
/// the nodes `-1, 0, 1, 2`.
fn cubic_weights(r: f64) -> [f64; 4] {
    [
        -r * (r - 1.0) * (r - 2.0) / 6.0,
        (r + 1.0) * (r - 1.0) * (r - 2.0) / 2.0,
        -(r + 1.0) * r * (r - 2.0) / 2.0,
        (r + 1.0) * r * (r - 1.0) / 6.0,
    ]
}

/// `F^2(x, y)` of snapshot `k` at an arbitrary base point: spectral in the
/// angle, 4 x 4 Lagrange in the base.
fn field_norm_sq(traj: &FlowTrajectory, ops: &AngularOps, k: usize, x: &Vector, y: &Vector) -> f64 {
    let grid = traj.grid;
    let dx = grid.dx();
    let nx = grid.nx as i64;
    let theta = y[1].atan2(y[0]);
    let w = ops.weights(theta);
    let field = &traj.snapshots[k].field;
    let (fi, fj) = (x[0] / dx, x[1] / dx);
    let (i0, j0) = (fi.floor(), fj.floor());
    let (wi, wj) = (cubic_weights(fi - i0), cubic_weights(fj - j0));
    let mut h = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            let i = (i0 as i64 + a as i64 - 1).rem_euclid(nx) as usize;
            let j = (j0 as i64 + b as i64 - 1).rem_euclid(nx) as usize;
            h += wi[a] * wj[b] * w.apply(field.row(grid.site(i, j)));
        }
    }
    dot(y, y) * h
}

/// `\int_0^1 F^2(gamma'(s))|_{tau(s)} ds` along the shortest straight chart
/// line `gamma` from `y` to `x`, `tau(s) = (1 - s) t2 + s t1`, by Simpson's
/// rule with linear interpolation between snapshots.
pub fn path_energy(traj: &FlowTrajectory, x: &Vector, k1: usize, y: &Vector, k2: usize) -> f64 {
    use std::f64::consts::PI;
    let ops = AngularOps::new(traj.grid.ntheta);
    let vel: Vector = std::array::from_fn(|a| {
        let d = x[a] - y[a];
        d - 2.0 * PI * (d / (2.0 * PI)).round()
    });
    if vel == [0.0; DIM] {
        return 0.0;
    }
    let (t1, t2) = (traj.snapshots[k1].t, traj.snapshots[k2].t);
    let tau = traj.snap_dt();
    let t0 = traj.snapshots[0].t;
    let eval = |s: f64| {
        let p: Vector = std::array::from_fn(|a| (y[a] + s * vel[a]).rem_euclid(2.0 * PI));
        let t = (1.0 - s) * t2 + s * t1;
        let fk = ((t - t0) / tau).max(0.0);
        let lo = (fk.floor() as usize).min(traj.snapshots.len() - 1);
        let hi = (lo + 1).min(traj.snapshots.len() - 1);
        let r = fk - lo as f64;
        let a = field_norm_sq(traj, &ops, lo, &p, &vel);
        if hi == lo || r == 0.0 {
            a
        } else {
            (1.0 - r) * a + r * field_norm_sq(traj, &ops, hi, &p, &vel)
        }
    };
    let m = PATH_PANELS;
    let h = 1.0 / m as f64;
    let mut acc = eval(0.0) + eval(1.0);
    for i in 1..m {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * eval(i as f64 * h);
    }
    acc * h / 3.0
}

/// `u(x, t1) <= RHS (1 + slack)` for sites `x, y` and snapshots `k1 < k2`.
pub fn integrated_harnack_check(
    traj: &FlowTrajectory,
    x_site: usize,
    k1: usize,
    y_site: usize,
    k2: usize,
    eps: f64,
    slack_factor: f64,
) -> Result<IntegratedRow> {
    let ns = traj.snapshots.len();
    if !(k1 < k2 && k2 < ns) {
        return Err(Error::Domain(format!(
            "need snapshot indices k1 < k2 < {ns}, got {k1}, {k2}"
        )));
    }
    let (s1, s2) = (&traj.snapshots[k1], &traj.snapshots[k2]);
    let (c1, c2) = constants(&traj.bounds());
    let x = traj.grid.point(x_site);
    let y = traj.grid.point(y_site);
    let energy = path_energy(traj, &x, k1, &y, k2);
    let rhs = corollary_rhs(s2.u[y_site], s1.t, s2.t, DIM, eps, energy, c1, c2)?;
    let dx = traj.grid.dx();
    let slack = slack_factor * (traj.time.dt + dx * dx);
    let lhs = s1.u[x_site];
    Ok(IntegratedRow {
        x,
        t1: s1.t,
        y,
        t2: s2.t,
        epsilon: eps,
        lhs,
        rhs,
        slack,
        pass: lhs <= rhs * (1.0 + slack),
    })
}

/// `count` seeded random `(x, k1, y, k2)` with `0 < t1 < t2`.
pub fn random_pairs(traj: &FlowTrajectory, count: usize, seed: u64) -> Vec<(usize, usize, usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ns = traj.snapshots.len();
    let n = traj.grid.n_sites();
    (0..count)
        .map(|_| {
            let k1 = rng.gen_range(1..ns - 1);
            let k2 = rng.gen_range(k1 + 1..ns);
            (rng.gen_range(0..n), k1, rng.gen_range(0..n), k2)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_examples() {
        assert_eq!(harnack_bound(2, 2.0, 1.0, 0.0, 0.0).unwrap(), 8.0);
        let b = harnack_bound(2, 2.0, 1.0, 1.0, 0.0).unwrap();
        assert!((b - (24.0 + 8.0 * 2f64.sqrt())).abs() < 1e-12);
        let tail = 2.0 * 8.0 * 1.0 / 1.0 + 2f64.powf(1.5) * 4.0;
        assert!((harnack_bound(2, 2.0, 1e12, 1.0, 0.0).unwrap() - tail).abs() < 1e-9);
        assert!(harnack_bound(2, 1.0, 1.0, 0.0, 0.0).is_err());
        assert!(harnack_bound(2, 2.0, 0.0, 0.0, 0.0).is_err());
        assert!(harnack_bound(2, 1.0 + 1e-12, 1.0, 0.5, 0.0).unwrap() > 1e11);
    }

    #[test]
    fn corollary_constant_and_flat_exact_case() {
        assert_eq!(corollary_constant(2, 1.0).unwrap(), 8.0 + 2.0 * 2f64.powf(1.5));
        assert!(corollary_constant(2, 0.5).is_err());
        // u = 2 + e^{-t} cos x1 at x = y, eps = 1
        let u = |x: f64, t: f64| 2.0 + (-t).exp() * x.cos();
        for &(x, t1, t2) in &[(0.0, 0.1, 0.5), (1.0, 0.2, 0.9), (3.0, 0.05, 1.0)] {
            let rhs = corollary_rhs(u(x, t2), t1, t2, 2, 1.0, 0.0, 0.0, 0.0).unwrap();
            assert!((rhs - u(x, t2) * (t2 / t1).powi(4)).abs() < 1e-12 * rhs);
            assert!(u(x, t1) <= rhs);
        }
        let near = corollary_rhs(3.0, 0.5, 0.5 + 1e-9, 2, 1.0, 0.0, 0.0, 0.0).unwrap();
        assert!((near - 3.0).abs() < 1e-7);
        assert!(corollary_rhs(1.0, 0.5, 0.5, 2, 1.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn cubic_weights_reproduce_cubics() {
        for r in [0.0, 0.3, 0.77] {
            let w = cubic_weights(r);
            for p in 0..4 {
                let s: f64 = (0..4).map(|a| w[a] * (a as f64 - 1.0).powi(p)).sum();
                assert!((s - r.powi(p)).abs() < 1e-14);
            }
        }
    }
}
