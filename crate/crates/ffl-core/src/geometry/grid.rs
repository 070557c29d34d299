//! Curvature of a sampled field at every sphere-bundle node at once.
//!
//! Chern coefficients are computed at all nodes, differentiated in the base
//! with the fourth-order stencil across sites and in the fiber spectrally in
//! `theta` (`Gamma` is 0-homogeneous, so `d_y Gamma = d_theta Gamma e_theta / r`).
//! The Akbarzadeh tensor follows from the polar Hessian of the nodal Ricci
//! trace `rho(theta) = Ric(x, e(theta))`:
//! `1/2 d^2_y (r^2 rho) = [[rho, rho'/2], [rho'/2, rho + rho''/2]]` in
//! the `(e_r, e_theta)` frame.

use rayon::prelude::*;

use super::{assemble_riemann, frame_eigenvalues, local_geometry_from_jet, ricci_from, CurvatureTensor, RicciBounds};
use crate::bundle::stencil::neighbor;
use crate::bundle::{unit, FieldNorm, TorusGrid};
use crate::error::Result;
use crate::tensor::*;

const D1: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];

struct NodeGeometry {
    gamma: Vec<T3>,
    nonlinear: Vec<Mat>,
    metric: Vec<Mat>,
}

fn node_geometry(norm: &FieldNorm) -> Result<NodeGeometry> {
    let grid = norm.grid();
    let n = grid.ntheta;
    let per_site: Vec<Result<Vec<(T3, Mat, Mat)>>> = (0..grid.n_sites())
        .into_par_iter()
        .map(|s| {
            let x = grid.point(s);
            (0..n)
                .map(|k| {
                    let e = unit(grid.theta(k));
                    let lg = local_geometry_from_jet(&norm.node_jet_first_order(s, k), &x, &e)?;
                    Ok((lg.chern.gamma, lg.spray.n, lg.metric))
                })
                .collect()
        })
        .collect();
    let mut out = NodeGeometry {
        gamma: Vec::with_capacity(grid.n_nodes()),
        nonlinear: Vec::with_capacity(grid.n_nodes()),
        metric: Vec::with_capacity(grid.n_nodes()),
    };
    for site in per_site {
        for (g, nl, m) in site? {
            out.gamma.push(g);
            out.nonlinear.push(nl);
            out.metric.push(m);
        }
    }
    Ok(out)
}

/// Curvature tensor at every node, with reference vector `e(theta_k)`.
pub fn curvature_nodes(norm: &FieldNorm) -> Result<Vec<CurvatureTensor>> {
    let grid = norm.grid();
    let n = grid.ntheta;
    let nx = grid.nx;
    let dx = grid.dx();
    let ops = norm.ops();
    let ng = node_geometry(norm)?;
    let out: Vec<Vec<CurvatureTensor>> = (0..grid.n_sites())
        .into_par_iter()
        .map(|s| {
            // angular derivative of every Gamma component along this site's row
            let mut dth = vec![zero_t3(); n];
            let mut row = vec![0.0; n];
            let mut drow = vec![0.0; n];
            for i in 0..DIM {
                for j in 0..DIM {
                    for k in 0..DIM {
                        for (t, r) in row.iter_mut().enumerate() {
                            *r = ng.gamma[s * n + t][i][j][k];
                        }
                        ops.derivative_into(1, &row, &mut drow);
                        for t in 0..n {
                            dth[t][i][j][k] = drow[t];
                        }
                    }
                }
            }
            let nb: [[usize; 5]; DIM] =
                std::array::from_fn(|a| std::array::from_fn(|o| neighbor(s, nx, a, o as isize - 2)));
            (0..n)
                .map(|t| {
                    let node = s * n + t;
                    let theta = grid.theta(t);
                    let eperp = [-theta.sin(), theta.cos()];
                    let mut delta = [zero_t3(); DIM];
                    for (a, da) in delta.iter_mut().enumerate() {
                        for o in 0..5 {
                            if D1[o] != 0.0 {
                                let gm = &ng.gamma[nb[a][o] * n + t];
                                for i in 0..DIM {
                                    for j in 0..DIM {
                                        for k in 0..DIM {
                                            da[i][j][k] += D1[o] / dx * gm[i][j][k];
                                        }
                                    }
                                }
                            }
                        }
                        for r in 0..DIM {
                            let c = ng.nonlinear[node][r][a] * eperp[r];
                            for i in 0..DIM {
                                for j in 0..DIM {
                                    for k in 0..DIM {
                                        da[i][j][k] -= c * dth[t][i][j][k];
                                    }
                                }
                            }
                        }
                    }
                    CurvatureTensor {
                        r: assemble_riemann(&ng.gamma[node], &delta),
                        metric: ng.metric[node],
                        v: unit(theta),
                    }
                })
                .collect()
        })
        .collect();
    Ok(out.into_iter().flatten().collect())
}

/// `rho[node] = Ric(x_site, e(theta_k))` at every node.
pub fn ricci_nodes(norm: &FieldNorm) -> Result<Vec<f64>> {
    Ok(curvature_nodes(norm)?.par_iter().map(ricci_from).collect())
}

/// Nodal Ricci data of a field with spectral angular derivatives.
#[derive(Clone, Debug)]
pub struct RicciGrid {
    pub grid: TorusGrid,
    pub rho: Vec<f64>,
    pub drho: Vec<f64>,
    pub ddrho: Vec<f64>,
    pub metric: Vec<Mat>,
    ops: crate::bundle::spectral::AngularOps,
}

impl RicciGrid {
    pub fn compute(norm: &FieldNorm) -> Result<RicciGrid> {
        let rho = ricci_nodes(norm)?;
        Ok(Self::from_rho(norm, rho))
    }

    /// Builds the grid from known nodal Ricci values.
    pub fn from_rho(norm: &FieldNorm, rho: Vec<f64>) -> RicciGrid {
        let grid = norm.grid();
        let n = grid.ntheta;
        let ops = norm.ops().clone();
        let mut drho = vec![0.0; rho.len()];
        let mut ddrho = vec![0.0; rho.len()];
        drho.par_chunks_mut(n)
            .zip(ddrho.par_chunks_mut(n))
            .enumerate()
            .for_each(|(s, (d1, d2))| {
                ops.derivative_into(1, &rho[s * n..(s + 1) * n], d1);
                ops.derivative_into(2, &rho[s * n..(s + 1) * n], d2);
            });
        let metric = (0..grid.n_nodes())
            .map(|node| norm.node_metric(node / n, node % n))
            .collect();
        RicciGrid {
            grid,
            rho,
            drho,
            ddrho,
            metric,
            ops,
        }
    }

    fn tensor_from(rho: [f64; 3], theta: f64) -> Mat {
        crate::bundle::FieldNorm::polar_metric(rho, theta)
    }

    /// `Ric_ij` at a node.
    pub fn node_tensor(&self, site: usize, k: usize) -> Mat {
        let node = self.grid.node(site, k);
        Self::tensor_from([self.rho[node], self.drho[node], self.ddrho[node]], self.grid.theta(k))
    }

    /// `Ric_ij(x_site, y)`, interpolated in `theta`.
    pub fn tensor(&self, site: usize, y: &Vector) -> Mat {
        let theta = y[1].atan2(y[0]);
        let n = self.grid.ntheta;
        let w = self.ops.weights(theta);
        let r = |a: &Vec<f64>| w.apply(&a[site * n..(site + 1) * n]);
        Self::tensor_from([r(&self.rho), r(&self.drho), r(&self.ddrho)], theta)
    }

    /// `Ric(x_site, y) = |y|^2 rho(theta)`.
    pub fn scalar(&self, site: usize, y: &Vector) -> f64 {
        let theta = y[1].atan2(y[0]);
        let n = self.grid.ntheta;
        dot(y, y) * self.ops.interpolate(&self.rho[site * n..(site + 1) * n], theta)
    }

    /// Extreme `g_v`-frame eigenvalues over all nodes.
    pub fn bounds(&self) -> RicciBounds {
        let n = self.grid.ntheta;
        let (lo, hi) = (0..self.grid.n_nodes())
            .into_par_iter()
            .map(|node| {
                let ev = frame_eigenvalues(&self.node_tensor(node / n, node % n), &self.metric[node]);
                (ev[0], ev[DIM - 1])
            })
            .reduce(
                || (f64::INFINITY, f64::NEG_INFINITY),
                |a, b| (a.0.min(b.0), a.1.max(b.1)),
            );
        RicciBounds::from_extremes(lo, hi)
    }
}
