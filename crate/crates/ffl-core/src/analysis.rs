//! Finsler gradient, Hessian, the (nonlinear) Laplacian of the measure
//! `m = sigma_F dx`, its linearization at a reference field, and the
//! pointwise Bochner identity.
//!
//! All base derivatives use the fourth-order periodic stencils of
//! [`crate::bundle::stencil`], and divergences are written in conservative
//! form `(1/sigma) D_i (sigma V^i)` so that discrete summation by parts holds
//! exactly against the same stencil.

use rayon::prelude::*;

use crate::bundle::stencil::{d1, d12, d2};
use crate::bundle::TorusGrid;
use crate::error::{Error, Result};
use crate::geometry::{chern_connection, RicciGrid};
use crate::measure::{s_curvature_with, weighted_ricci_infinity, MeasureDensity};
use crate::norm::{fundamental_tensor, legendre_from, Covector, FinslerNorm};
use crate::tensor::*;

/// Reference direction whose metric defines the Laplacian at masked sites.
pub const FALLBACK_DIRECTION: Vector = [1.0, 0.0];

/// Physical radius of the core-mask window.
pub const CORE_RADIUS: f64 = std::f64::consts::FRAC_PI_4;
/// Core-mask threshold relative to `max F*(Du)`.
pub const CORE_FRACTION: f64 = 0.1;

/// A scalar field on the lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub nx: usize,
    pub values: Vec<f64>,
    pub time: f64,
}

/// Values defined on a subset of the lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskedField {
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl MaskedField {
    /// `max |v|` over the mask (0 for an empty mask).
    pub fn max_abs(&self) -> f64 {
        self.max_abs_on(&self.mask)
    }

    /// `max |v|` over the intersection with `select`.
    pub fn max_abs_on(&self, select: &[bool]) -> f64 {
        self.values
            .iter()
            .zip(&self.mask)
            .zip(select)
            .filter(|((_, m), s)| **m && **s)
            .fold(0.0_f64, |a, ((v, _), _)| a.max(v.abs()))
    }

    /// `min v` over the mask (`+inf` for an empty mask).
    pub fn min(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.mask)
            .filter(|(_, m)| **m)
            .fold(f64::INFINITY, |a, (v, _)| a.min(*v))
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}

/// Norm, lattice and measure shared by every grid operator.
#[derive(Clone, Copy, Debug)]
pub struct GridContext<'a> {
    pub grid: TorusGrid,
    pub norm: &'a dyn FinslerNorm,
    pub measure: &'a MeasureDensity,
    /// Mask threshold relative to `max |Du|`.
    pub delta_grad: f64,
}

/// Gradient `L*(Du)` on `M_u`, with the metric used for the divergence at
/// every site.
///
/// On the mask `v = grad u` and `ginv = g_v^{-1}`; off the mask `ginv` is the
/// inverse metric in [`FALLBACK_DIRECTION`] and `v = ginv Du`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorFieldOnMu {
    pub nx: usize,
    pub du: Vec<Vector>,
    pub v: Vec<Vector>,
    pub ginv: Vec<Mat>,
    pub mask: Vec<bool>,
}

impl VectorFieldOnMu {
    /// `F^2(grad u) = Du(grad u)` (the fallback quadratic form off the mask).
    pub fn norm_sq(&self) -> Vec<f64> {
        self.du.iter().zip(&self.v).map(|(a, b)| dot(a, b)).collect()
    }

    /// Sites whose `(2 halo + 1)^2` neighborhood lies in
    /// `{F*(Du) >= frac * max F*(Du)}`, i.e. stencils that stay away from
    /// critical points of `u`.
    /// Core mask with a window of fixed physical radius [`CORE_RADIUS`] and
    /// threshold [`CORE_FRACTION`], so the excluded neighborhoods of critical
    /// points do not shrink under refinement.
    pub fn core_mask(&self) -> Vec<bool> {
        let dx = 2.0 * std::f64::consts::PI / self.nx as f64;
        self.core((CORE_RADIUS / dx).round() as usize, CORE_FRACTION)
    }

    pub fn core(&self, halo: usize, frac: f64) -> Vec<bool> {
        let f: Vec<f64> = self.norm_sq().iter().map(|v| v.max(0.0).sqrt()).collect();
        let thr = frac * f.iter().cloned().fold(0.0, f64::max);
        let nx = self.nx as isize;
        let h = halo as isize;
        (0..f.len())
            .map(|s| {
                let (i, j) = ((s / self.nx) as isize, (s % self.nx) as isize);
                (-h..=h).all(|a| {
                    (-h..=h).all(|b| {
                        let n = ((i + a).rem_euclid(nx) * nx + (j + b).rem_euclid(nx)) as usize;
                        self.mask[n] && f[n] >= thr
                    })
                })
            })
            .collect()
    }
}

/// `Du` by fourth-order differences.
pub fn differential(grid: &TorusGrid, u: &[f64]) -> Vec<Vector> {
    let dx = grid.dx();
    let a = d1(u, grid.nx, 1, 0, dx);
    let b = d1(u, grid.nx, 1, 1, dx);
    a.into_iter().zip(b).map(|(p, q)| [p, q]).collect()
}

/// Lattice Hessian `d_i d_j u` (five-point second differences, composed
/// first differences for the mixed term).
pub fn coordinate_hessian(grid: &TorusGrid, u: &[f64]) -> Vec<Mat> {
    let dx = grid.dx();
    let a = d2(u, grid.nx, 1, 0, dx);
    let b = d2(u, grid.nx, 1, 1, dx);
    let c = d12(u, grid.nx, 1, dx);
    (0..u.len()).map(|s| [[a[s], c[s]], [c[s], b[s]]]).collect()
}

/// `grad u = L*(Du)` with warm starts from `guess` (a previous gradient).
pub fn gradient(ctx: &GridContext, u: &[f64], guess: Option<&[Vector]>) -> Result<VectorFieldOnMu> {
    let grid = ctx.grid;
    let du = differential(&grid, u);
    let max_du = du.iter().fold(0.0_f64, |m, w| m.max(max_abs(w)));
    let thr = ctx.delta_grad * max_du;
    let rows: Vec<Result<(Vector, Mat, bool)>> = (0..grid.n_sites())
        .into_par_iter()
        .map(|s| {
            let x = grid.point(s);
            let w = du[s];
            if max_abs(&w) > 0.0 {
                let y = legendre_from(ctx.norm, &x, &Covector(w), guess.map(|g| &g[s]))?;
                let fstar = dot(&w, &y).max(0.0).sqrt();
                if fstar >= thr && fstar > 0.0 {
                    let g = fundamental_tensor(ctx.norm, &x, &y)?;
                    return Ok((y, g.inverse(), true));
                }
            }
            let g = fundamental_tensor(ctx.norm, &x, &FALLBACK_DIRECTION)?;
            let ginv = g.inverse();
            Ok((mat_vec(&ginv, &w), ginv, false))
        })
        .collect();
    let mut v = Vec::with_capacity(rows.len());
    let mut ginv = Vec::with_capacity(rows.len());
    let mut mask = Vec::with_capacity(rows.len());
    for r in rows {
        let (a, b, c) = r?;
        v.push(a);
        ginv.push(b);
        mask.push(c);
    }
    Ok(VectorFieldOnMu {
        nx: grid.nx,
        du,
        v,
        ginv,
        mask,
    })
}

/// `div_m V = (1/sigma) D_i(sigma V^i)`.
pub fn divergence(ctx: &GridContext, flux: &[Vector]) -> Vec<f64> {
    let grid = ctx.grid;
    let sigma = &ctx.measure.sigma;
    let a: Vec<f64> = flux.iter().zip(sigma).map(|(f, s)| s * f[0]).collect();
    let b: Vec<f64> = flux.iter().zip(sigma).map(|(f, s)| s * f[1]).collect();
    let da = d1(&a, grid.nx, 1, 0, grid.dx());
    let db = d1(&b, grid.nx, 1, 1, grid.dx());
    (0..flux.len()).map(|s| (da[s] + db[s]) / sigma[s]).collect()
}

/// `Delta u = div_m(grad u)`, returned with the gradient it used.
pub fn laplacian(ctx: &GridContext, u: &[f64], guess: Option<&[Vector]>) -> Result<(Vec<f64>, VectorFieldOnMu)> {
    let grad = gradient(ctx, u, guess)?;
    Ok((divergence(ctx, &grad.v), grad))
}

/// `Delta^V phi = div_m(g_V^{-1} D phi)`.
pub fn linearized_laplacian(ctx: &GridContext, v: &VectorFieldOnMu, phi: &[f64]) -> Vec<f64> {
    let dphi = differential(&ctx.grid, phi);
    let flux: Vec<Vector> = dphi.iter().zip(&v.ginv).map(|(d, gi)| mat_vec(gi, d)).collect();
    divergence(ctx, &flux)
}

/// `Hess(u)_ij = d_i d_j u - Gamma^k_ij(grad u) d_k u` at one site.
pub fn hessian_at(ctx: &GridContext, u_hess: &Mat, grad: &VectorFieldOnMu, site: usize) -> Result<Mat> {
    if !grad.mask[site] {
        return Err(Error::Masked { site });
    }
    let x = ctx.grid.point(site);
    let gamma = chern_connection(ctx.norm, &x, &grad.v[site])?.gamma;
    let du = grad.du[site];
    Ok(std::array::from_fn(|i| {
        std::array::from_fn(|j| u_hess[i][j] - (0..DIM).map(|k| gamma[k][i][j] * du[k]).sum::<f64>())
    }))
}

/// Finsler Hessian of `u` at a single site.
pub fn hessian(ctx: &GridContext, u: &[f64], site: usize) -> Result<Mat> {
    let grad = gradient(ctx, u, None)?;
    let h = coordinate_hessian(&ctx.grid, u);
    hessian_at(ctx, &h[site], &grad, site)
}

/// Finsler Hessian on the mask (zero matrix off the mask).
pub fn hessian_field(ctx: &GridContext, u: &[f64], grad: &VectorFieldOnMu) -> Result<Vec<Mat>> {
    let h = coordinate_hessian(&ctx.grid, u);
    let rows: Vec<Result<Mat>> = (0..h.len())
        .into_par_iter()
        .map(|s| {
            if grad.mask[s] {
                hessian_at(ctx, &h[s], grad, s)
            } else {
                Ok(zero_mat())
            }
        })
        .collect();
    rows.into_iter().collect()
}

/// `tr_g H = g^{ij} H_ij` and `|H|^2_g = g^{ik} g^{jl} H_ij H_kl`.
pub fn trace_and_hs(ginv: &Mat, h: &Mat) -> (f64, f64) {
    let a = mat_mul(ginv, h);
    let tr = (0..DIM).map(|i| a[i][i]).sum();
    let hs = (0..DIM).map(|i| (0..DIM).map(|j| a[i][j] * a[j][i]).sum::<f64>()).sum();
    (tr, hs)
}

/// `|Delta u - (tr_{grad u} Hess u - S(grad u))|` on the mask.
pub fn trace_identity_residual(ctx: &GridContext, u: &[f64]) -> Result<MaskedField> {
    let (lap, grad) = laplacian(ctx, u, None)?;
    let hess = hessian_field(ctx, u, &grad)?;
    let vals: Vec<Result<f64>> = (0..lap.len())
        .into_par_iter()
        .map(|s| {
            if !grad.mask[s] {
                return Ok(0.0);
            }
            let x = ctx.grid.point(s);
            let sc = s_curvature_with(ctx.norm, &x, &grad.v[s], &ctx.measure.dlog[s])?;
            let (tr, _) = trace_and_hs(&grad.ginv[s], &hess[s]);
            Ok(lap[s] - (tr - sc))
        })
        .collect();
    Ok(MaskedField {
        values: vals.into_iter().collect::<Result<_>>()?,
        mask: grad.mask,
    })
}

/// Both sides of the pointwise Bochner identity
/// `Delta^{grad u}(F^2(grad u)/2) - D(Delta u)(grad u) = Ric_inf(grad u) + |Hess u|^2`.
#[derive(Clone, Debug)]
pub struct BochnerTerms {
    pub lhs: Vec<f64>,
    pub ric_inf: Vec<f64>,
    pub hs: Vec<f64>,
    /// `(tr_{grad u} Hess u)^2 / n`.
    pub trace_sq: Vec<f64>,
    pub grad: VectorFieldOnMu,
}

impl BochnerTerms {
    /// `|LHS - RHS|` on the mask.
    pub fn residual(&self) -> MaskedField {
        MaskedField {
            values: (0..self.lhs.len())
                .map(|s| self.lhs[s] - self.ric_inf[s] - self.hs[s])
                .collect(),
            mask: self.grad.mask.clone(),
        }
    }

    /// `|Hess|^2 - (tr Hess)^2/n`, which must be nonnegative.
    pub fn trace_inequality(&self) -> MaskedField {
        MaskedField {
            values: (0..self.hs.len()).map(|s| self.hs[s] - self.trace_sq[s]).collect(),
            mask: self.grad.mask.clone(),
        }
    }
}

/// Assembles the Bochner terms.
///
/// `Ric_inf` is evaluated by geodesic integration for closed-form norms; a
/// sampled field only resolves lattice basepoints, so there the nodal Ricci
/// curvature is used, which equals `Ric_inf` under the vanishing-S gate.
pub fn bochner_terms(ctx: &GridContext, u: &[f64]) -> Result<BochnerTerms> {
    let (lap, grad) = laplacian(ctx, u, None)?;
    let phi: Vec<f64> = grad.norm_sq().iter().map(|v| 0.5 * v).collect();
    let lin = linearized_laplacian(ctx, &grad, &phi);
    let dlap = differential(&ctx.grid, &lap);
    let hess = hessian_field(ctx, u, &grad)?;
    let ricci_grid = match ctx.norm.as_field() {
        Some(f) => Some(RicciGrid::compute(f)?),
        None => None,
    };
    let n = lap.len();
    let per_site: Vec<Result<(f64, f64, f64)>> = (0..n)
        .into_par_iter()
        .map(|s| {
            if !grad.mask[s] {
                return Ok((0.0, 0.0, 0.0));
            }
            let x = ctx.grid.point(s);
            let v = grad.v[s];
            let ric = match &ricci_grid {
                Some(r) => r.scalar(s, &v),
                None => weighted_ricci_infinity(ctx.norm, &x, &v)?,
            };
            let (tr, hs) = trace_and_hs(&grad.ginv[s], &hess[s]);
            Ok((ric, hs, tr * tr / DIM as f64))
        })
        .collect();
    let mut ric_inf = Vec::with_capacity(n);
    let mut hs = Vec::with_capacity(n);
    let mut trace_sq = Vec::with_capacity(n);
    for r in per_site {
        let (a, b, c) = r?;
        ric_inf.push(a);
        hs.push(b);
        trace_sq.push(c);
    }
    let lhs = (0..n).map(|s| lin[s] - dot(&dlap[s], &grad.v[s])).collect();
    Ok(BochnerTerms {
        lhs,
        ric_inf,
        hs,
        trace_sq,
        grad,
    })
}

/// `|LHS - RHS|` of the Bochner identity on the mask.
pub fn bochner_residual(ctx: &GridContext, u: &[f64]) -> Result<MaskedField> {
    Ok(bochner_terms(ctx, u)?.residual())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{sample_norm, FieldNorm};
    use crate::norm::{Analytic, Euclidean, Quartic, RiemannianConformal, RiemannianDiag};
    use std::sync::Arc;

    fn on_grid(grid: &TorusGrid, f: impl Fn(&Vector) -> f64) -> Vec<f64> {
        (0..grid.n_sites()).map(|s| f(&grid.point(s))).collect()
    }

    #[test]
    fn gradient_examples() {
        let grid = TorusGrid::new(64, 16).unwrap();
        let u = on_grid(&grid, |x| x[0].sin());
        let e = Analytic::new(Euclidean);
        let m = MeasureDensity::compute(&e, &grid).unwrap();
        let ctx = GridContext {
            grid,
            norm: &e,
            measure: &m,
            delta_grad: 1e-7,
        };
        let g = gradient(&ctx, &u, None).unwrap();
        assert!((g.v[0][0] - 1.0).abs() < 1e-5 && g.v[0][1].abs() < 1e-15);
        let d = Analytic::new(RiemannianDiag::new(4.0, 1.0).unwrap());
        let md = MeasureDensity::compute(&d, &grid).unwrap();
        let ctx = GridContext {
            grid,
            norm: &d,
            measure: &md,
            delta_grad: 1e-7,
        };
        let g = gradient(&ctx, &u, None).unwrap();
        assert!((g.v[0][0] - 0.25).abs() < 1e-5);
        let q = Analytic::new(Quartic::new(0.1).unwrap());
        let mq = MeasureDensity::compute(&q, &grid).unwrap();
        let ctx = GridContext {
            grid,
            norm: &q,
            measure: &mq,
            delta_grad: 1e-7,
        };
        let g = gradient(&ctx, &u, None).unwrap();
        for s in [0, 5, 77] {
            let gy = mat_vec(
                &fundamental_tensor(&q, &grid.point(s), &g.v[s]).unwrap().entries,
                &g.v[s],
            );
            assert!(max_abs(&[gy[0] - g.du[s][0], gy[1] - g.du[s][1]]) < 1e-10);
        }
        // sin x1 has critical lines at x1 = pi/2 and 3 pi/2
        assert!(!g.mask[grid.site(16, 3)] && g.mask[grid.site(15, 3)]);
    }

    #[test]
    fn gradient_is_nonlinear_for_quartic() {
        let grid = TorusGrid::new(32, 16).unwrap();
        let q = Analytic::new(Quartic::new(0.1).unwrap());
        let m = MeasureDensity::compute(&q, &grid).unwrap();
        let ctx = GridContext {
            grid,
            norm: &q,
            measure: &m,
            delta_grad: 1e-7,
        };
        let u = on_grid(&grid, |x| x[0].sin());
        let w = on_grid(&grid, |x| x[1].cos());
        let uw: Vec<f64> = u.iter().zip(&w).map(|(a, b)| a + b).collect();
        let (gu, gw, guw) = (
            gradient(&ctx, &u, None).unwrap(),
            gradient(&ctx, &w, None).unwrap(),
            gradient(&ctx, &uw, None).unwrap(),
        );
        let s = grid.site(3, 5);
        let dev = (0..DIM)
            .map(|i| (guw.v[s][i] - gu.v[s][i] - gw.v[s][i]).abs())
            .fold(0.0, f64::max);
        assert!(dev > 1e-6, "deviation {dev}");
    }

    #[test]
    fn laplacian_examples_and_divergence_theorem() {
        let grid = TorusGrid::new(64, 16).unwrap();
        let u = on_grid(&grid, |x| 2.0 + 0.1 * x[0].sin());
        for (norm, scale) in [
            (Box::new(Analytic::new(Euclidean)) as Box<dyn FinslerNorm>, 1.0),
            (Box::new(Analytic::new(RiemannianDiag::new(4.0, 1.0).unwrap())), 0.25),
        ] {
            let m = MeasureDensity::compute(norm.as_ref(), &grid).unwrap();
            let ctx = GridContext {
                grid,
                norm: norm.as_ref(),
                measure: &m,
                delta_grad: 1e-7,
            };
            let (lap, _) = laplacian(&ctx, &u, None).unwrap();
            for s in 0..grid.n_sites() {
                let x = grid.point(s);
                assert!((lap[s] + scale * 0.1 * x[0].sin()).abs() < 1e-6);
            }
        }
        let c = Analytic::new(RiemannianConformal::new(0.1).unwrap());
        let q = Analytic::new(Quartic::new(0.1).unwrap());
        let w = on_grid(&grid, |x| {
            2.0 + 0.3 * x[0].sin() * x[1].cos() + 0.2 * (x[0] - 2.0 * x[1]).cos()
        });
        for norm in [&c as &dyn FinslerNorm, &q] {
            let m = MeasureDensity::compute(norm, &grid).unwrap();
            let ctx = GridContext {
                grid,
                norm,
                measure: &m,
                delta_grad: 1e-7,
            };
            let (lap, _) = laplacian(&ctx, &w, None).unwrap();
            assert!(m.integrate(&lap).abs() < 1e-8);
        }
    }

    #[test]
    fn hessian_examples() {
        let grid = TorusGrid::new(64, 16).unwrap();
        let e = Analytic::new(Euclidean);
        let m = MeasureDensity::compute(&e, &grid).unwrap();
        let ctx = GridContext {
            grid,
            norm: &e,
            measure: &m,
            delta_grad: 1e-7,
        };
        let u = on_grid(&grid, |x| x[0].sin() + 0.3 * x[1].cos());
        let s = grid.site(5, 9);
        let x = grid.point(s);
        let h = hessian(&ctx, &u, s).unwrap();
        assert!((h[0][0] + x[0].sin()).abs() < 1e-5 && (h[1][1] + 0.3 * x[1].cos()).abs() < 1e-5);
        assert!(h[0][1].abs() < 1e-12);

        // conformal metric: Levi-Civita Hessian u_ij - (d_i phi u_j + d_j phi u_i - delta_ij <dphi, du>)
        let a = 0.1;
        let c = Analytic::new(RiemannianConformal::new(a).unwrap());
        let m = MeasureDensity::compute(&c, &grid).unwrap();
        let ctx = GridContext {
            grid,
            norm: &c,
            measure: &m,
            delta_grad: 1e-7,
        };
        let u = on_grid(&grid, |x| x[0].sin());
        for s in [grid.site(3, 7), grid.site(40, 21)] {
            let x = grid.point(s);
            let h = hessian(&ctx, &u, s).unwrap();
            let dphi = [-a * x[0].sin() * x[1].cos(), -a * x[0].cos() * x[1].sin()];
            let du = [x[0].cos(), 0.0];
            let exact: Mat = std::array::from_fn(|i| {
                std::array::from_fn(|j| {
                    let uij = if i == 0 && j == 0 { -x[0].sin() } else { 0.0 };
                    let delta = if i == j { dot(&dphi, &du) } else { 0.0 };
                    uij - (dphi[i] * du[j] + dphi[j] * du[i] - delta)
                })
            });
            assert!(max_abs_mat(&sub_mat(&h, &exact)) < 1e-6, "{h:?} vs {exact:?}");
        }
    }

    #[test]
    fn trace_identity_holds() {
        let grid = TorusGrid::new(64, 16).unwrap();
        let u = on_grid(&grid, |x| 2.0 + 0.1 * x[0].sin());
        let e = Analytic::new(Euclidean);
        let m = MeasureDensity::compute(&e, &grid).unwrap();
        let ctx = GridContext {
            grid,
            norm: &e,
            measure: &m,
            delta_grad: 1e-7,
        };
        assert!(trace_identity_residual(&ctx, &u).unwrap().max_abs() < 1e-6);
        let w = on_grid(&grid, |x| 2.0 + 0.1 * x[0].sin() * x[1].cos());
        let c = Analytic::new(RiemannianConformal::new(0.1).unwrap());
        let m = MeasureDensity::compute(&c, &grid).unwrap();
        let ctx = GridContext {
            grid,
            norm: &c,
            measure: &m,
            delta_grad: 1e-7,
        };
        let r = trace_identity_residual(&ctx, &w).unwrap().max_abs();
        assert!(r < 1e-5, "conformal {r}");
        let q = Analytic::new(Quartic::new(0.1).unwrap());
        let m = MeasureDensity::compute(&q, &grid).unwrap();
        let ctx = GridContext {
            grid,
            norm: &q,
            measure: &m,
            delta_grad: 1e-7,
        };
        let r64 = trace_identity_residual(&ctx, &u).unwrap().max_abs();
        assert!(r64 < 1e-5, "quartic {r64}");
    }

    #[test]
    fn linearized_laplacian_reductions() {
        let grid = TorusGrid::new(32, 16).unwrap();
        let u = on_grid(&grid, |x| 2.0 + 0.2 * x[0].sin() * x[1].cos());
        let phi = on_grid(&grid, |x| (x[0] + 2.0 * x[1]).cos());
        let c = Analytic::new(RiemannianConformal::new(0.1).unwrap());
        let m = MeasureDensity::compute(&c, &grid).unwrap();
        let ctx = GridContext {
            grid,
            norm: &c,
            measure: &m,
            delta_grad: 1e-7,
        };
        let gu = gradient(&ctx, &u, None).unwrap();
        let (lap_phi, _) = laplacian(&ctx, &phi, None).unwrap();
        let lin = linearized_laplacian(&ctx, &gu, &phi);
        let d = lin.iter().zip(&lap_phi).fold(0.0_f64, |a, (p, q)| a.max((p - q).abs()));
        assert!(d < 1e-10, "{d}");
        let q = Analytic::new(Quartic::new(0.1).unwrap());
        let m = MeasureDensity::compute(&q, &grid).unwrap();
        let ctx = GridContext {
            grid,
            norm: &q,
            measure: &m,
            delta_grad: 1e-7,
        };
        let (lap_u, gu) = laplacian(&ctx, &u, None).unwrap();
        let lin = linearized_laplacian(&ctx, &gu, &u);
        let d = lin.iter().zip(&lap_u).fold(0.0_f64, |a, (p, q)| a.max((p - q).abs()));
        assert!(d < 1e-10, "{d}");
    }

    #[test]
    fn bochner_identity_flat_and_trace_inequality() {
        let grid = TorusGrid::new(64, 16).unwrap();
        let e = Analytic::new(Euclidean);
        let m = MeasureDensity::compute(&e, &grid).unwrap();
        let ctx = GridContext {
            grid,
            norm: &e,
            measure: &m,
            delta_grad: 1e-7,
        };
        let u = on_grid(&grid, |x| 2.0 + 0.1 * x[0].sin());
        let t = bochner_terms(&ctx, &u).unwrap();
        assert!(t.residual().max_abs() < 1e-5);
        assert!(t.trace_inequality().min() >= -1e-10);
    }

    #[test]
    fn field_and_analytic_laplacians_agree() {
        let grid = TorusGrid::new(32, 16).unwrap();
        let c = Analytic::new(RiemannianConformal::new(0.1).unwrap());
        let f = FieldNorm::new(Arc::new(sample_norm(&c, grid).unwrap()));
        let u = on_grid(&grid, |x| 2.0 + 0.2 * (x[0] - x[1]).sin());
        let ma = MeasureDensity::compute(&c, &grid).unwrap();
        let mf = MeasureDensity::compute(&f, &grid).unwrap();
        let la = laplacian(
            &GridContext {
                grid,
                norm: &c,
                measure: &ma,
                delta_grad: 1e-7,
            },
            &u,
            None,
        )
        .unwrap()
        .0;
        let lf = laplacian(
            &GridContext {
                grid,
                norm: &f,
                measure: &mf,
                delta_grad: 1e-7,
            },
            &u,
            None,
        )
        .unwrap()
        .0;
        let d = la.iter().zip(&lf).fold(0.0_f64, |a, (p, q)| a.max((p - q).abs()));
        assert!(d < 1e-10, "{d}");
    }
}
