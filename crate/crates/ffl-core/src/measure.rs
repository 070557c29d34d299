//! Busemann-Hausdorff measure, S-curvature, and the weighted Ricci curvature
//! `Ric_inf`.
//!
//! In two dimensions the indicatrix area is `1/2 \oint dtheta / h(x, theta)`,
//! evaluated by the trapezoid rule, and `sigma_F = pi / area`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::bundle::{unit, FieldNorm, TorusGrid};
use crate::error::{Error, Result};
use crate::geometry::{local_geometry, local_geometry_from_jet, ricci_scalar, spray_coefficients};
use crate::norm::{fundamental_tensor, require_nonzero, FinslerNorm, Point};
use crate::tensor::*;

/// `sigma_F(x)` and `d_x sigma_F(x)`.
pub fn bh_density_dx(norm: &dyn FinslerNorm, x: &Point) -> Result<(f64, Vector)> {
    let n = norm.angular_nodes();
    let dth = 2.0 * PI / n as f64;
    let mut area = 0.0;
    let mut darea = [0.0; DIM];
    for k in 0..n {
        let theta = k as f64 * dth;
        let (h, hx) = norm.norm_sq_dx(x, &unit(theta))?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidNorm { x: *x, theta, value: h });
        }
        area += 0.5 * dth / h;
        for a in 0..DIM {
            darea[a] -= 0.5 * dth * hx[a] / (h * h);
        }
    }
    let sigma = PI / area;
    Ok((sigma, std::array::from_fn(|a| -PI * darea[a] / (area * area))))
}

/// `sigma_F(x) = vol(unit disc) / vol(indicatrix)`.
pub fn bh_density(norm: &dyn FinslerNorm, x: &Point) -> Result<f64> {
    Ok(bh_density_dx(norm, x)?.0)
}

/// Density `sigma_F` and `d ln sigma_F` at every lattice site.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureDensity {
    pub nx: usize,
    pub sigma: Vec<f64>,
    pub dlog: Vec<Vector>,
}

impl MeasureDensity {
    pub fn compute(norm: &dyn FinslerNorm, grid: &TorusGrid) -> Result<MeasureDensity> {
        let rows: Vec<Result<(f64, Vector)>> = (0..grid.n_sites())
            .into_par_iter()
            .map(|s| bh_density_dx(norm, &grid.point(s)))
            .collect();
        let mut sigma = Vec::with_capacity(rows.len());
        let mut dlog = Vec::with_capacity(rows.len());
        for r in rows {
            let (s, d) = r?;
            sigma.push(s);
            dlog.push([d[0] / s, d[1] / s]);
        }
        Ok(MeasureDensity {
            nx: grid.nx,
            sigma,
            dlog,
        })
    }

    /// Uniform density 1 (flat Lebesgue).
    pub fn lebesgue(nx: usize) -> MeasureDensity {
        MeasureDensity {
            nx,
            sigma: vec![1.0; nx * nx],
            dlog: vec![[0.0; DIM]; nx * nx],
        }
    }

    /// Cell area times density, summed: `m(M)`.
    pub fn total(&self) -> f64 {
        let dx = 2.0 * PI / self.nx as f64;
        self.sigma.iter().sum::<f64>() * dx * dx
    }

    /// `\int f dm` by the periodic trapezoid rule.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        let dx = 2.0 * PI / self.nx as f64;
        f.iter().zip(&self.sigma).map(|(a, b)| a * b).sum::<f64>() * dx * dx
    }
}

/// `S(y) = dG^i/dy^i - y^i d_i ln sigma_F`.
pub fn s_curvature(norm: &dyn FinslerNorm, x: &Point, y: &Vector) -> Result<f64> {
    require_nonzero(y)?;
    let spray = spray_coefficients(norm, x, y)?;
    let (sigma, ds) = bh_density_dx(norm, x)?;
    let trace: f64 = (0..DIM).map(|i| spray.n[i][i]).sum();
    Ok(trace - (0..DIM).map(|i| y[i] * ds[i] / sigma).sum::<f64>())
}

/// `S` at a site for a precomputed density gradient.
pub fn s_curvature_with(norm: &dyn FinslerNorm, x: &Point, y: &Vector, dlog: &Vector) -> Result<f64> {
    let spray = spray_coefficients(norm, x, y)?;
    let trace: f64 = (0..DIM).map(|i| spray.n[i][i]).sum();
    Ok(trace - dot(y, dlog))
}

/// `max |S(x, e(theta))|` over all nodes of a field.
pub fn s_curvature_field_max(norm: &FieldNorm, measure: &MeasureDensity) -> Result<f64> {
    let grid = norm.grid();
    let vals: Vec<Result<f64>> = (0..grid.n_sites())
        .into_par_iter()
        .map(|s| {
            let x = grid.point(s);
            let mut m = 0.0_f64;
            for k in 0..grid.ntheta {
                let e = unit(grid.theta(k));
                let lg = local_geometry_from_jet(&norm.node_jet_first_order(s, k), &x, &e)?;
                let trace: f64 = (0..DIM).map(|i| lg.spray.n[i][i]).sum();
                m = m.max((trace - dot(&e, &measure.dlog[s])).abs());
            }
            Ok(m)
        })
        .collect();
    let mut out = 0.0_f64;
    for v in vals {
        out = out.max(v?);
    }
    Ok(out)
}

/// Geodesic step for `Ric_inf`.
pub const GEODESIC_DELTA: f64 = 1e-3;

type State = [f64; 2 * DIM];

fn spray_rhs(norm: &dyn FinslerNorm, s: &State) -> Result<State> {
    let x = [s[0], s[1]];
    let v = [s[2], s[3]];
    let g = spray_coefficients(norm, &x, &v)?.g;
    Ok([v[0], v[1], -2.0 * g[0], -2.0 * g[1]])
}

/// One classical RK4 step of `x'' + 2 G(x, x') = 0`.
fn rk4(norm: &dyn FinslerNorm, s: &State, h: f64) -> Result<State> {
    let add = |a: &State, b: &State, c: f64| -> State { std::array::from_fn(|i| a[i] + c * b[i]) };
    let k1 = spray_rhs(norm, s)?;
    let k2 = spray_rhs(norm, &add(s, &k1, 0.5 * h))?;
    let k3 = spray_rhs(norm, &add(s, &k2, 0.5 * h))?;
    let k4 = spray_rhs(norm, &add(s, &k3, h))?;
    let out: State = std::array::from_fn(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Integration(format!("non-finite state after step {h}")));
    }
    Ok(out)
}

/// `Psi = -ln(sigma_F / sqrt(det g_v))` at a state.
fn psi(norm: &dyn FinslerNorm, s: &State) -> Result<f64> {
    let x = [s[0], s[1]];
    let v = [s[2], s[3]];
    let sigma = bh_density(norm, &x)?;
    let det = determinant(&fundamental_tensor(norm, &x, &v)?.entries);
    Ok(-(sigma / det.sqrt()).ln())
}

/// `Ric_inf(v) = Ric(v) + (Psi o gamma)''(0)` with `gamma` the geodesic of
/// initial velocity `v`; the second derivative is taken on the unit-speed
/// geodesic and rescaled by `F^2(v)`.
pub fn weighted_ricci_infinity(norm: &dyn FinslerNorm, x: &Point, v: &Vector) -> Result<f64> {
    require_nonzero(v)?;
    let ric = ricci_scalar(norm, x, v)?;
    let f2 = norm.norm_sq(x, v)?;
    let f = f2.sqrt();
    let s0: State = [x[0], x[1], v[0] / f, v[1] / f];
    let p0 = psi(norm, &s0)?;
    let second = |d: f64| -> Result<f64> {
        let fwd = psi(norm, &rk4(norm, &s0, d)?)?;
        let bwd = psi(norm, &rk4(norm, &s0, -d)?)?;
        Ok((fwd - 2.0 * p0 + bwd) / (d * d))
    };
    let coarse = second(GEODESIC_DELTA)?;
    let fine = second(0.5 * GEODESIC_DELTA)?;
    Ok(ric + f2 * (4.0 * fine - coarse) / 3.0)
}

/// Convenience: trace of the nonlinear connection.
pub fn connection_trace(norm: &dyn FinslerNorm, x: &Point, y: &Vector) -> Result<f64> {
    let lg = local_geometry(norm, x, y)?;
    Ok((0..DIM).map(|i| lg.spray.n[i][i]).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::sample_norm;
    use crate::norm::{Analytic, Euclidean, Expression, Quartic, RiemannianConformal, RiemannianDiag};
    use std::sync::Arc;

    #[test]
    fn density_examples() {
        let x = [0.3, 0.1];
        assert!((bh_density(&Analytic::new(Euclidean), &x).unwrap() - 1.0).abs() < 1e-14);
        let d = Analytic::new(RiemannianDiag::new(4.0, 1.0).unwrap());
        assert!((bh_density(&d, &x).unwrap() - 2.0).abs() < 1e-12);
        let q = Analytic::new(Quartic::new(0.1).unwrap());
        // independent oracle: composite Simpson rule with 10^6 panels
        let m = 1_000_000usize;
        let hstep = 2.0 * PI / m as f64;
        let f = |t: f64| 1.0 / (1.0 + 0.1 * (t.cos().powi(4) + t.sin().powi(4)));
        let mut acc = f(0.0) + f(2.0 * PI);
        for i in 1..m {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * hstep);
        }
        let area = 0.5 * acc * hstep / 3.0;
        assert!((bh_density(&q, &x).unwrap() - PI / area).abs() < 1e-10);
    }

    #[test]
    fn density_scales_quadratically() {
        #[derive(Debug)]
        struct Scaled(Quartic, f64);
        impl Expression for Scaled {
            fn label(&self) -> String {
                "scaled".into()
            }
            fn f2<S: crate::jet::Scalar>(&self, x: [S; 2], y: [S; 2]) -> S {
                self.0.f2(x, y) * (self.1 * self.1)
            }
        }
        let q = Quartic::new(0.1).unwrap();
        let a = bh_density(&Analytic::new(q), &[0.0, 0.0]).unwrap();
        let b = bh_density(&Analytic::new(Scaled(q, 3.0)), &[0.0, 0.0]).unwrap();
        assert!((b - 9.0 * a).abs() < 1e-10 * b);
    }

    #[test]
    fn s_curvature_vanishes_on_catalog() {
        let x = [0.9, -0.4];
        let q = Analytic::new(Quartic::new(0.1).unwrap());
        let c = Analytic::new(RiemannianConformal::new(0.1).unwrap());
        for y in [[1.0, 0.0], [0.3, 0.7]] {
            assert!(s_curvature(&Analytic::new(Euclidean), &x, &y).unwrap().abs() < 1e-15);
            assert!(s_curvature(&q, &x, &y).unwrap().abs() < 1e-8);
            assert!(s_curvature(&c, &x, &y).unwrap().abs() < 1e-6);
        }
        let grid = TorusGrid::new(32, 16).unwrap();
        let f = FieldNorm::new(Arc::new(sample_norm(&c, grid).unwrap()));
        let m = MeasureDensity::compute(&f, &grid).unwrap();
        assert!(s_curvature_field_max(&f, &m).unwrap() < 1e-10);
    }

    #[test]
    fn weighted_ricci_equals_ricci_when_s_vanishes() {
        let c = Analytic::new(RiemannianConformal::new(0.1).unwrap());
        let q = Analytic::new(Quartic::new(0.1).unwrap());
        for x in [[0.0, 0.0], [1.1, 2.3]] {
            for v in [[1.0, 0.0], [0.4, -0.8]] {
                let ri = weighted_ricci_infinity(&c, &x, &v).unwrap();
                let r = ricci_scalar(&c, &x, &v).unwrap();
                assert!((ri - r).abs() < 1e-5, "{ri} vs {r}");
                assert!(weighted_ricci_infinity(&q, &x, &v).unwrap().abs() < 1e-5);
            }
        }
        assert_eq!(
            weighted_ricci_infinity(&Analytic::new(Euclidean), &[0.0, 0.0], &[1.0, 1.0]).unwrap(),
            0.0
        );
    }
}
