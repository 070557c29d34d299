//! Sampled sphere-bundle fields exposed through the [`FinslerNorm`]
//! interface.
//!
//! Near `theta0` the angle of `y` is `theta0 + atan(s / c)` with `c, s` the
//! components of `y` along `e(theta0)` and its rotation by `pi/2`. Writing
//! `F^2 = |y|^2 sum_m d^m_theta h (theta - theta0)^m / m!` as a jet in `y`
//! turns every Cartesian fiber derivative into a fixed linear combination of
//! angular derivatives. Those coefficients depend only on `theta0` and are
//! cached per angular node.

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;

use super::spectral::{AngularOps, Weights};
use super::stencil;
use super::{SphereBundleField, TorusGrid};
use crate::error::{Error, Result};
use crate::jet::{Jet4y, Scalar};
use crate::norm::{require_nonzero, FinslerNorm, NormJet, Point};
use crate::tensor::*;

const NSLOT: usize = 15;

/// `slot_table()[b1][b2]`: jet slot of the monomial `y1^b1 y2^b2`.
fn slot_table() -> &'static [[usize; 5]; 5] {
    static TABLE: OnceLock<[[usize; 5]; 5]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let t = Jet4y::tables();
        std::array::from_fn(|a| std::array::from_fn(|b| t.slot([a as u8, b as u8, 0, 0]).unwrap_or(usize::MAX)))
    })
}

/// `basis[slot][m]`: fiber derivative (monomial `slot` of a two-variable
/// degree-4 jet) of `|y|^2 (theta - theta0)^m / m!` at `y = e(theta0)`.
#[derive(Clone, Debug)]
struct PolarBasis {
    b: [[f64; 5]; NSLOT],
}

impl PolarBasis {
    fn new(theta0: f64) -> PolarBasis {
        let (s0, c0) = theta0.sin_cos();
        let y1 = Jet4y::variable(c0, 0);
        let y2 = Jet4y::variable(s0, 1);
        let r2 = y1 * y1 + y2 * y2;
        let c = y1 * c0 + y2 * s0;
        let s = y2 * c0 - y1 * s0;
        let mut z = s / c;
        z.c[0] = 0.0;
        let dth = z.atan();
        let tables = Jet4y::tables();
        let mut b = [[0.0; 5]; NSLOT];
        let mut p = r2;
        let mut fact = 1.0;
        for m in 0..5 {
            if m > 0 {
                p = p * dth;
                fact *= m as f64;
            }
            for (slot, row) in b.iter_mut().enumerate() {
                row[m] = p.derivative(tables.exps[slot]) / fact;
            }
        }
        PolarBasis { b }
    }

    /// Combines angular data `a[m]` into the fiber derivative along `ys`.
    fn comb(&self, a: &[f64], ys: &[usize]) -> f64 {
        let mut e = [0usize; 2];
        for &i in ys {
            e[i] += 1;
        }
        let row = &self.b[slot_table()[e[0]][e[1]]];
        let top = a.len().min(ys.len() + 1);
        (0..top).map(|m| a[m] * row[m]).sum()
    }
}

/// Angular data at one `(site, theta)`: `a0[m] = d^m_theta h`,
/// `a1[a][m] = d_{x^a} d^m_theta h`, `a2[ab][m]` with `ab` in `(11, 12, 22)`.
#[derive(Clone, Debug)]
struct NodeData {
    a0: [f64; 5],
    a1: [[f64; 4]; DIM],
    a2: [[f64; 3]; 3],
}

fn pair_index(a: usize, b: usize) -> usize {
    match (a.min(b), a.max(b)) {
        (0, 0) => 0,
        (0, 1) => 1,
        _ => 2,
    }
}

/// Sampled norm with precomputed angular and base derivatives of `h`.
#[derive(Debug, Clone)]
pub struct FieldNorm {
    field: Arc<SphereBundleField>,
    ops: AngularOps,
    th: Vec<Vec<f64>>,
    thx: [Vec<Vec<f64>>; DIM],
    thxx: [Vec<Vec<f64>>; 3],
    bases: Vec<PolarBasis>,
}

impl FieldNorm {
    pub fn new(field: Arc<SphereBundleField>) -> FieldNorm {
        let grid = field.grid;
        let n = grid.ntheta;
        let dx = grid.dx();
        let ops = AngularOps::new(n);
        let mut th: Vec<Vec<f64>> = vec![field.h.clone()];
        for m in 1..=4 {
            let mut arr = vec![0.0; grid.n_nodes()];
            arr.par_chunks_mut(n).enumerate().for_each(|(s, out)| {
                ops.derivative_into(m, field.row(s), out);
            });
            th.push(arr);
        }
        let nx = grid.nx;
        let thx: [Vec<Vec<f64>>; DIM] =
            std::array::from_fn(|a| (0..4).map(|m| stencil::d1(&th[m], nx, n, a, dx)).collect());
        let thxx: [Vec<Vec<f64>>; 3] = [
            (0..3).map(|m| stencil::d2(&th[m], nx, n, 0, dx)).collect(),
            (0..3).map(|m| stencil::d12(&th[m], nx, n, dx)).collect(),
            (0..3).map(|m| stencil::d2(&th[m], nx, n, 1, dx)).collect(),
        ];
        let bases = (0..n).map(|k| PolarBasis::new(grid.theta(k))).collect();
        FieldNorm {
            field,
            ops,
            th,
            thx,
            thxx,
            bases,
        }
    }

    pub fn grid(&self) -> TorusGrid {
        self.field.grid
    }

    pub fn field(&self) -> &Arc<SphereBundleField> {
        &self.field
    }

    pub fn ops(&self) -> &AngularOps {
        &self.ops
    }

    /// `d^m_theta h` at all nodes, `m <= 4`.
    pub fn angular(&self, m: usize) -> &[f64] {
        &self.th[m]
    }

    /// `d_{x^a} d^m_theta h` at all nodes, `m <= 3`.
    pub fn base(&self, a: usize, m: usize) -> &[f64] {
        &self.thx[a][m]
    }

    /// `d_{x^a} d_{x^b} d^m_theta h` at all nodes, `m <= 2`.
    pub fn base2(&self, a: usize, b: usize, m: usize) -> &[f64] {
        &self.thxx[pair_index(a, b)][m]
    }

    fn locate(&self, x: &Point) -> Result<usize> {
        self.grid().site_of(x).ok_or(Error::OffGrid { x: *x })
    }

    fn node_data(&self, node: usize) -> NodeData {
        NodeData {
            a0: std::array::from_fn(|m| self.th[m][node]),
            a1: std::array::from_fn(|a| std::array::from_fn(|m| self.thx[a][m][node])),
            a2: std::array::from_fn(|p| std::array::from_fn(|m| self.thxx[p][m][node])),
        }
    }

    fn interp_data(&self, site: usize, w: &Weights) -> NodeData {
        let n = self.grid().ntheta;
        let at = |arr: &Vec<f64>| w.apply(&arr[site * n..(site + 1) * n]);
        NodeData {
            a0: std::array::from_fn(|m| at(&self.th[m])),
            a1: std::array::from_fn(|a| std::array::from_fn(|m| at(&self.thx[a][m]))),
            a2: std::array::from_fn(|p| std::array::from_fn(|m| at(&self.thxx[p][m]))),
        }
    }

    fn assemble(d: &NodeData, basis: &PolarBasis, second_base: bool) -> NormJet {
        let mut j = NormJet::zero();
        j.f2 = basis.comb(&d.a0, &[]);
        for i in 0..DIM {
            j.y1[i] = basis.comb(&d.a0, &[i]);
            for k in 0..DIM {
                j.y2[i][k] = basis.comb(&d.a0, &[i, k]);
                for l in 0..DIM {
                    j.y3[i][k][l] = basis.comb(&d.a0, &[i, k, l]);
                    for m in 0..DIM {
                        j.y4[i][k][l][m] = basis.comb(&d.a0, &[i, k, l, m]);
                    }
                }
            }
        }
        for a in 0..DIM {
            let a1 = &d.a1[a];
            j.x1[a] = basis.comb(a1, &[]);
            for i in 0..DIM {
                j.x1y1[a][i] = basis.comb(a1, &[i]);
                for k in 0..DIM {
                    j.x1y2[a][i][k] = basis.comb(a1, &[i, k]);
                    for l in 0..DIM {
                        j.x1y3[a][i][k][l] = basis.comb(a1, &[i, k, l]);
                    }
                }
            }
            if !second_base {
                continue;
            }
            for b in 0..DIM {
                let a2 = &d.a2[pair_index(a, b)];
                j.x2[a][b] = basis.comb(a2, &[]);
                for i in 0..DIM {
                    j.x2y1[a][b][i] = basis.comb(a2, &[i]);
                    for k in 0..DIM {
                        j.x2y2[a][b][i][k] = basis.comb(a2, &[i, k]);
                    }
                }
            }
        }
        j
    }

    /// Jet at the unit vector `e(theta_k)` of a lattice node.
    pub fn node_jet(&self, site: usize, k: usize) -> NormJet {
        let node = self.grid().node(site, k);
        Self::assemble(&self.node_data(node), &self.bases[k], true)
    }

    /// As [`FieldNorm::node_jet`] but leaves second base derivatives zero;
    /// spray and connection never read them.
    pub fn node_jet_first_order(&self, site: usize, k: usize) -> NormJet {
        let node = self.grid().node(site, k);
        Self::assemble(&self.node_data(node), &self.bases[k], false)
    }

    /// Jet at an arbitrary nonzero `y` over a lattice site.
    pub fn site_jet(&self, site: usize, y: &Vector) -> Result<NormJet> {
        require_nonzero(y)?;
        let r = euclid(y);
        let theta = y[1].atan2(y[0]);
        let unit = match self.ops.weights(theta) {
            Weights::Node(k) => self.node_jet(site, k),
            w @ Weights::Off(_) => Self::assemble(&self.interp_data(site, &w), &PolarBasis::new(theta), true),
        };
        Ok(if r == 1.0 { unit } else { unit.rescaled(r) })
    }

    /// `(h, h', h'')` at `(site, theta)`.
    fn angular_triple(&self, site: usize, theta: f64) -> [f64; 3] {
        let n = self.grid().ntheta;
        let w = self.ops.weights(theta);
        std::array::from_fn(|m| w.apply(&self.th[m][site * n..(site + 1) * n]))
    }

    /// `g` from the polar frame formula `[[h, h'/2], [h'/2, h + h''/2]]`.
    pub fn polar_metric(h: [f64; 3], theta: f64) -> Mat {
        let (s, c) = theta.sin_cos();
        let er = [c, s];
        let et = [-s, c];
        let p = [[h[0], 0.5 * h[1]], [0.5 * h[1], h[0] + 0.5 * h[2]]];
        let mut g = zero_mat();
        for i in 0..DIM {
            for j in 0..DIM {
                g[i][j] = p[0][0] * er[i] * er[j] + p[0][1] * (er[i] * et[j] + et[i] * er[j]) + p[1][1] * et[i] * et[j];
            }
        }
        g
    }

    /// Metric at lattice node `(site, k)`.
    pub fn node_metric(&self, site: usize, k: usize) -> Mat {
        let node = self.grid().node(site, k);
        Self::polar_metric(
            [self.th[0][node], self.th[1][node], self.th[2][node]],
            self.grid().theta(k),
        )
    }

    /// Metric over a site for any direction.
    pub fn site_metric(&self, site: usize, y: &Vector) -> Result<Mat> {
        require_nonzero(y)?;
        let theta = y[1].atan2(y[0]);
        Ok(Self::polar_metric(self.angular_triple(site, theta), theta))
    }

    /// `F^2` over a site.
    pub fn site_norm_sq(&self, site: usize, y: &Vector) -> Result<f64> {
        require_nonzero(y)?;
        let theta = y[1].atan2(y[0]);
        let n = self.grid().ntheta;
        Ok(dot(y, y) * self.ops.interpolate(&self.th[0][site * n..(site + 1) * n], theta))
    }
}

impl FinslerNorm for FieldNorm {
    fn label(&self) -> String {
        let g = self.grid();
        format!("field(nx={}, ntheta={}, t={})", g.nx, g.ntheta, self.field.time)
    }

    fn norm_sq(&self, x: &Point, y: &Vector) -> Result<f64> {
        self.site_norm_sq(self.locate(x)?, y)
    }

    fn jet(&self, x: &Point, y: &Vector) -> Result<NormJet> {
        self.site_jet(self.locate(x)?, y)
    }

    fn metric_raw(&self, x: &Point, y: &Vector) -> Result<Mat> {
        self.site_metric(self.locate(x)?, y)
    }

    fn norm_sq_dx(&self, x: &Point, y: &Vector) -> Result<(f64, Vector)> {
        require_nonzero(y)?;
        let site = self.locate(x)?;
        let n = self.grid().ntheta;
        let theta = y[1].atan2(y[0]);
        let w = self.ops.weights(theta);
        let r2 = dot(y, y);
        let row = |arr: &Vec<f64>| w.apply(&arr[site * n..(site + 1) * n]) * r2;
        Ok((row(&self.th[0]), [row(&self.thx[0][0]), row(&self.thx[1][0])]))
    }

    fn base_step(&self) -> f64 {
        self.grid().dx()
    }

    fn angular_nodes(&self) -> usize {
        self.grid().ntheta
    }

    fn as_field(&self) -> Option<&FieldNorm> {
        Some(self)
    }
}

/// Symmetric fiber-derivative tensor of `F^2`, flattened with the last index
/// fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct FiberTensor {
    pub order: usize,
    pub data: Vec<f64>,
}

/// Fiber derivatives of `F^2` of the given order (1 to 4) at `(site, y)`.
pub fn y_derivatives(norm: &FieldNorm, site: usize, y: &Vector, order: usize) -> Result<FiberTensor> {
    let j = norm.site_jet(site, y)?;
    let data: Vec<f64> = match order {
        1 => j.y1.to_vec(),
        2 => j.y2.iter().flatten().copied().collect(),
        3 => j.y3.iter().flatten().flatten().copied().collect(),
        4 => j.y4.iter().flatten().flatten().flatten().copied().collect(),
        _ => return Err(Error::Domain(format!("fiber derivative order {order} not in 1..=4"))),
    };
    Ok(FiberTensor { order, data })
}

/// Base derivatives of `h` over the angular row of a site: order 1 gives
/// `[d1 h, d2 h]`, order 2 gives `[d11 h, d12 h, d22 h]`.
pub fn x_derivatives(norm: &FieldNorm, site: usize, order: usize) -> Result<Vec<Vec<f64>>> {
    let n = norm.grid().ntheta;
    let slice = |arr: &[f64]| arr[site * n..(site + 1) * n].to_vec();
    match order {
        1 => Ok((0..DIM).map(|a| slice(norm.base(a, 0))).collect()),
        2 => Ok(vec![
            slice(norm.base2(0, 0, 0)),
            slice(norm.base2(0, 1, 0)),
            slice(norm.base2(1, 1, 0)),
        ]),
        _ => Err(Error::Domain(format!("base derivative order {order} not in 1..=2"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{sample_norm, unit};
    use crate::norm::{
        fundamental_tensor, norm_eval, Analytic, Euclidean, Quartic, RiemannianConformal, RiemannianDiag,
    };

    fn field_of(n: &dyn FinslerNorm, nx: usize, nt: usize) -> FieldNorm {
        FieldNorm::new(Arc::new(sample_norm(n, TorusGrid::new(nx, nt).unwrap()).unwrap()))
    }

    #[test]
    fn euclidean_field_metric_is_identity() {
        let f = field_of(&Analytic::new(Euclidean), 16, 16);
        for y in [[1.0, 0.0], [0.3, -2.0], [-1.0, 1e-3]] {
            let g = fundamental_tensor(&f, &[0.0, 0.0], &y).unwrap();
            assert!(max_abs_mat(&sub_mat(&g.entries, &identity())) < 1e-12);
            let d = y_derivatives(&f, 0, &y, 2).unwrap();
            assert!((d.data[0] - 2.0).abs() < 1e-12 && d.data[1].abs() < 1e-12);
        }
    }

    #[test]
    fn diag_field_order_two_exact() {
        let f = field_of(&Analytic::new(RiemannianDiag::new(4.0, 1.0).unwrap()), 16, 16);
        for y in [[1.0, 1.0], [0.2, -0.7], [3.0, 0.1]] {
            let d = y_derivatives(&f, 3, &y, 2).unwrap();
            let want = [8.0, 0.0, 0.0, 2.0];
            for (a, b) in d.data.iter().zip(want.iter()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn quartic_field_interpolates_norm() {
        let q = Analytic::new(Quartic::new(0.1).unwrap());
        let f = field_of(&q, 16, 64);
        let y = [1.0, 2.0];
        let x = [0.0, 0.0];
        assert!((norm_eval(&f, &x, &y).unwrap() - norm_eval(&q, &x, &y).unwrap()).abs() < 1e-8);
        // homogeneity is exact by construction
        let a = norm_eval(&f, &x, &[7.0, 14.0]).unwrap();
        assert!((a - 7.0 * norm_eval(&f, &x, &y).unwrap()).abs() < 1e-12 * a);
    }

    #[test]
    fn field_jet_matches_analytic_jet() {
        let c = Analytic::new(RiemannianConformal::new(0.1).unwrap());
        let f = field_of(&c, 64, 16);
        let grid = f.grid();
        let site = grid.site(5, 9);
        let x = grid.point(site);
        for y in [unit(grid.theta(3)), [0.6, -0.45], [-1.5, 0.2]] {
            let a = c.jet(&x, &y).unwrap();
            let b = f.jet(&x, &y).unwrap();
            assert!((a.f2 - b.f2).abs() < 1e-12);
            assert!(max_abs_mat(&sub_mat(&a.y2, &b.y2)) < 1e-10);
            for i in 0..DIM {
                for k in 0..DIM {
                    for l in 0..DIM {
                        for m in 0..DIM {
                            assert!((a.y4[i][k][l][m] - b.y4[i][k][l][m]).abs() < 1e-9);
                        }
                    }
                }
            }
            // base derivatives carry the fourth-order stencil error
            for l in 0..DIM {
                assert!(max_abs_mat(&sub_mat(&a.x1y2[l], &b.x1y2[l])) < 1e-4);
            }
            let g = f.metric_raw(&x, &y).unwrap();
            assert!(max_abs_mat(&sub_mat(&g, &b.metric())) < 1e-12);
        }
    }

    #[test]
    fn polar_metric_matches_jet_for_anisotropic_field() {
        let q = Analytic::new(Quartic::new(0.1).unwrap());
        let f = field_of(&q, 16, 32);
        for y in [[1.0, 0.0], [0.3, 0.8], [-0.2, -1.1]] {
            let j = f.site_jet(7, &y).unwrap();
            let g = f.site_metric(7, &y).unwrap();
            assert!(max_abs_mat(&sub_mat(&g, &j.metric())) < 1e-12);
        }
    }

    #[test]
    fn off_grid_point_rejected() {
        let f = field_of(&Analytic::new(Euclidean), 16, 16);
        assert!(matches!(
            f.norm_sq(&[0.05, 0.0], &[1.0, 0.0]),
            Err(Error::OffGrid { .. })
        ));
    }

    #[test]
    fn x_derivative_examples() {
        let e = field_of(&Analytic::new(Euclidean), 16, 16);
        assert!(x_derivatives(&e, 4, 1)
            .unwrap()
            .iter()
            .flatten()
            .all(|v| v.abs() < 1e-13));
        let c = RiemannianConformal::new(0.1).unwrap();
        let f = field_of(&Analytic::new(c), 32, 16);
        let grid = f.grid();
        let site = grid.site(3, 5);
        let x = grid.point(site);
        let d = x_derivatives(&f, site, 1).unwrap();
        let phi = c.phi(&x);
        let exact = -2.0 * 0.1 * x[0].sin() * x[1].cos() * (2.0 * phi).exp();
        let dx = grid.dx();
        assert!((d[0][0] - exact).abs() < 2.0 * dx.powi(4));
        // telescoping over a periodic row
        for k in 0..16 {
            let sum: f64 = (0..32)
                .map(|i| x_derivatives(&f, grid.site(i, 7), 1).unwrap()[0][k])
                .sum();
            assert!(sum.abs() < 1e-12);
        }
    }
}
