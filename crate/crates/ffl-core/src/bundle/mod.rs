//! Sphere-bundle discretization of the flat torus.
//!
//! A norm is stored through its angular trace `h(x, theta) = F^2(x, e(theta))`
//! with `e(theta) = (cos theta, sin theta)`; 2-homogeneity recovers
//! `F^2(x, r e(theta)) = r^2 h(x, theta)` exactly. Angular derivatives are
//! spectral, base derivatives use fourth-order periodic stencils.

mod adapter;
pub mod io;
pub mod spectral;
pub mod stencil;

pub use adapter::{x_derivatives, y_derivatives, FiberTensor, FieldNorm};

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norm::{FinslerNorm, Point};
use crate::tensor::*;

/// Periodic lattice `N_x x N_x` on `[0, 2 pi)^2` with `N_theta` angles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusGrid {
    pub nx: usize,
    pub ntheta: usize,
}

impl TorusGrid {
    pub fn new(nx: usize, ntheta: usize) -> Result<Self> {
        let g = TorusGrid { nx, ntheta };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, n) in [("nx", self.nx), ("ntheta", self.ntheta)] {
            if n < 16 || n % 2 != 0 {
                return Err(Error::Config(format!("{name} must be even and >= 16 (got {n})")));
            }
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        2.0 * PI / self.nx as f64
    }

    pub fn dtheta(&self) -> f64 {
        2.0 * PI / self.ntheta as f64
    }

    pub fn n_sites(&self) -> usize {
        self.nx * self.nx
    }

    pub fn n_nodes(&self) -> usize {
        self.n_sites() * self.ntheta
    }

    pub fn site(&self, i: usize, j: usize) -> usize {
        i * self.nx + j
    }

    pub fn point(&self, site: usize) -> Point {
        let dx = self.dx();
        [(site / self.nx) as f64 * dx, (site % self.nx) as f64 * dx]
    }

    pub fn theta(&self, k: usize) -> f64 {
        k as f64 * self.dtheta()
    }

    pub fn node(&self, site: usize, k: usize) -> usize {
        site * self.ntheta + k
    }

    /// Lattice site at `x` (periodically wrapped), if `x` is one.
    pub fn site_of(&self, x: &Point) -> Option<usize> {
        let dx = self.dx();
        let mut idx = [0usize; 2];
        for a in 0..DIM {
            let f = x[a] / dx;
            let r = f.round();
            if (f - r).abs() > 1e-8 {
                return None;
            }
            idx[a] = (r as i64).rem_euclid(self.nx as i64) as usize;
        }
        Some(self.site(idx[0], idx[1]))
    }
}

/// Unit vector `(cos theta, sin theta)`.
pub fn unit(theta: f64) -> Vector {
    [theta.cos(), theta.sin()]
}

/// Samples `h[i, j, k] = F^2(x_ij, e(theta_k))` at flow time `time`.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereBundleField {
    pub grid: TorusGrid,
    pub h: Vec<f64>,
    pub time: f64,
}

impl SphereBundleField {
    pub fn new(grid: TorusGrid, h: Vec<f64>, time: f64) -> Result<Self> {
        grid.validate()?;
        if h.len() != grid.n_nodes() {
            return Err(Error::Format(format!(
                "field has {} samples, grid needs {}",
                h.len(),
                grid.n_nodes()
            )));
        }
        let f = SphereBundleField { grid, h, time };
        f.check_positive()?;
        Ok(f)
    }

    /// Angular row at a site.
    pub fn row(&self, site: usize) -> &[f64] {
        let n = self.grid.ntheta;
        &self.h[site * n..(site + 1) * n]
    }

    pub fn check_positive(&self) -> Result<()> {
        for (node, v) in self.h.iter().enumerate() {
            if !(*v > 0.0 && v.is_finite()) {
                let site = node / self.grid.ntheta;
                return Err(Error::InvalidNorm {
                    x: self.grid.point(site),
                    theta: self.grid.theta(node % self.grid.ntheta),
                    value: *v,
                });
            }
        }
        Ok(())
    }

    /// Strong convexity of the reconstructed `g` at every node; returns the
    /// first offending `(site, k, min eigenvalue)`.
    pub fn convexity_violation(&self) -> Option<(usize, usize, f64)> {
        let ops = spectral::AngularOps::new(self.grid.ntheta);
        let n = self.grid.ntheta;
        (0..self.grid.n_sites()).into_par_iter().find_map_first(|s| {
            let row = self.row(s);
            let d1 = ops.derivative(1, row);
            let d2 = ops.derivative(2, row);
            (0..n).find_map(|k| {
                let h = row[k];
                let det = h * (h + 0.5 * d2[k]) - 0.25 * d1[k] * d1[k];
                let tr = 2.0 * h + 0.5 * d2[k];
                if h > 0.0 && det > 0.0 && tr > 0.0 {
                    None
                } else {
                    let disc = (0.5 * d2[k]).hypot(d1[k]);
                    Some((s, k, 0.5 * (tr - disc)))
                }
            })
        })
    }
}

/// Samples an analytic norm on the grid, checking positivity and strong
/// convexity at every node.
pub fn sample_norm(norm: &dyn FinslerNorm, grid: TorusGrid) -> Result<SphereBundleField> {
    grid.validate()?;
    let n = grid.ntheta;
    let rows: Vec<Result<Vec<f64>>> = (0..grid.n_sites())
        .into_par_iter()
        .map(|s| {
            let x = grid.point(s);
            (0..n)
                .map(|k| {
                    let e = unit(grid.theta(k));
                    let v = norm.norm_sq(&x, &e)?;
                    if !(v > 0.0) {
                        return Err(Error::InvalidNorm {
                            x,
                            theta: grid.theta(k),
                            value: v,
                        });
                    }
                    crate::norm::fundamental_tensor(norm, &x, &e)?;
                    Ok(v)
                })
                .collect()
        })
        .collect();
    let mut h = Vec::with_capacity(grid.n_nodes());
    for r in rows {
        h.extend(r?);
    }
    SphereBundleField::new(grid, h, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norm::{Analytic, Euclidean, Quartic, RiemannianDiag};

    #[test]
    fn grid_validation() {
        assert!(TorusGrid::new(16, 16).is_ok());
        assert!(TorusGrid::new(15, 16).is_err());
        assert!(TorusGrid::new(16, 8).is_err());
        let g = TorusGrid::new(16, 16).unwrap();
        assert_eq!(g.site_of(&[g.dx() * 3.0, -g.dx()]), Some(g.site(3, 15)));
        assert_eq!(g.site_of(&[0.1, 0.0]), None);
    }

    #[test]
    fn sample_examples() {
        let g = TorusGrid::new(16, 16).unwrap();
        let e = sample_norm(&Analytic::new(Euclidean), g).unwrap();
        assert!(e.h.iter().all(|v| (*v - 1.0).abs() < 1e-15));
        let d = sample_norm(&Analytic::new(RiemannianDiag::new(4.0, 1.0).unwrap()), g).unwrap();
        let q = sample_norm(&Analytic::new(Quartic::new(0.1).unwrap()), g).unwrap();
        for s in [0, 17, 255] {
            for k in 0..16 {
                let t = g.theta(k);
                let (c, sn) = (t.cos(), t.sin());
                assert!((d.row(s)[k] - (4.0 * c * c + sn * sn)).abs() < 1e-14);
                assert!((q.row(s)[k] - (1.0 + 0.1 * (c.powi(4) + sn.powi(4)))).abs() < 1e-14);
            }
        }
        assert!(q.convexity_violation().is_none());
    }

    #[test]
    fn invalid_fields_rejected() {
        let g = TorusGrid::new(16, 16).unwrap();
        let mut h = vec![1.0; g.n_nodes()];
        h[5] = -1.0;
        assert!(matches!(
            SphereBundleField::new(g, h, 0.0),
            Err(Error::InvalidNorm { .. })
        ));
        // h = 1 + 0.9 cos(2 theta) with large curvature in theta breaks convexity
        let h: Vec<f64> = (0..g.n_nodes())
            .map(|n| 1.0 + 0.3 * (6.0 * g.theta(n % 16)).cos())
            .collect();
        let f = SphereBundleField::new(g, h, 0.0).unwrap();
        assert!(f.convexity_violation().is_some());
    }
}
