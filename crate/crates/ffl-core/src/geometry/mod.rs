//! Spray, nonlinear and Chern connections, curvature, flag and Ricci
//! curvature, and the Akbarzadeh Ricci tensor.
//!
//! Pointwise quantities come straight from a [`NormJet`]. Curvature needs one
//! more derivative of the Chern coefficients:
//!
//! `R^i_{jkl} = d_k Gamma^i_{lj} - d_l Gamma^i_{kj}
//!            + Gamma^i_{km} Gamma^m_{lj} - Gamma^i_{lm} Gamma^m_{kj}`
//!
//! with `d_k = d/dx^k - G^r_k d/dy^r`, evaluated by fourth-order central
//! differences (base step from the norm, fiber step `1e-3 |v|`). Sampled
//! fields have a batched variant in [`grid`].

pub mod grid;

pub use grid::{ricci_nodes, RicciGrid};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::norm::{check_metric, norm_eval, require_nonzero, FinslerNorm, NormJet, Point};
use crate::tensor::*;

/// Spray coefficients `G^i` and nonlinear connection `G^i_j = dG^i/dy^j`
/// (indexed `[i][j]`).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SprayData {
    pub g: Vector,
    pub n: Mat,
}

/// Chern connection coefficients `Gamma^i_jk`, indexed `[i][j][k]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChernCoefficients {
    pub gamma: T3,
}

/// Everything first-order at `(x, y)`.
#[derive(Clone, Debug)]
pub struct LocalGeometry {
    pub metric: Mat,
    pub inverse: Mat,
    pub spray: SprayData,
    pub chern: ChernCoefficients,
}

/// Builds spray and connection from the jet of `F^2` at `(x, y)`.
pub fn local_geometry_from_jet(jet: &NormJet, x: &Point, y: &Vector) -> Result<LocalGeometry> {
    let g = check_metric(jet.metric(), x, y)?.entries;
    let gi = inverse(&g).expect("positive definite");
    let dgx = jet.metric_dx();
    let dgy = jet.metric_dy();
    let dgxy = jet.metric_dxy();

    // T_k = (2 d_l g_jk - d_k g_jl) y^j y^l, G^i = 1/4 g^ik T_k
    let mut t = [0.0; DIM];
    let mut dt = zero_mat(); // dt[k][m] = d T_k / d y^m
    for k in 0..DIM {
        for j in 0..DIM {
            for l in 0..DIM {
                let c = 2.0 * dgx[l][j][k] - dgx[k][j][l];
                t[k] += c * y[j] * y[l];
                for m in 0..DIM {
                    let cm = 2.0 * dgxy[l][m][j][k] - dgxy[k][m][j][l];
                    dt[k][m] += cm * y[j] * y[l];
                }
            }
            for m in 0..DIM {
                dt[k][m] += (2.0 * dgx[j][m][k] - dgx[k][m][j]) * y[j];
                dt[k][m] += (2.0 * dgx[m][j][k] - dgx[k][j][m]) * y[j];
            }
        }
    }
    let mut sg = [0.0; DIM];
    let mut sn = zero_mat();
    for i in 0..DIM {
        for k in 0..DIM {
            sg[i] += 0.25 * gi[i][k] * t[k];
        }
        for m in 0..DIM {
            let mut acc = 0.0;
            for k in 0..DIM {
                // d g^ik / d y^m = -g^ia d_m g_ab g^bk
                let mut dginv = 0.0;
                for a in 0..DIM {
                    for b in 0..DIM {
                        dginv -= gi[i][a] * dgy[m][a][b] * gi[b][k];
                    }
                }
                acc += dginv * t[k] + gi[i][k] * dt[k][m];
            }
            sn[i][m] = 0.25 * acc;
        }
    }

    let mut gamma = zero_t3();
    for i in 0..DIM {
        for j in 0..DIM {
            for k in 0..DIM {
                let mut acc = 0.0;
                for l in 0..DIM {
                    let mut brace = dgx[k][l][j] - dgx[l][j][k] + dgx[j][k][l];
                    for r in 0..DIM {
                        brace += -dgy[r][l][j] * sn[r][k] + dgy[r][j][k] * sn[r][l] - dgy[r][k][l] * sn[r][j];
                    }
                    acc += gi[i][l] * brace;
                }
                gamma[i][j][k] = 0.5 * acc;
            }
        }
    }
    Ok(LocalGeometry {
        metric: g,
        inverse: gi,
        spray: SprayData { g: sg, n: sn },
        chern: ChernCoefficients { gamma },
    })
}

pub fn local_geometry(norm: &dyn FinslerNorm, x: &Point, y: &Vector) -> Result<LocalGeometry> {
    require_nonzero(y)?;
    local_geometry_from_jet(&norm.jet(x, y)?, x, y)
}

/// `G^i = 1/4 g^ik (2 d_l g_jk - d_k g_jl) y^j y^l` and its fiber Jacobian.
pub fn spray_coefficients(norm: &dyn FinslerNorm, x: &Point, y: &Vector) -> Result<SprayData> {
    Ok(local_geometry(norm, x, y)?.spray)
}

/// Chern coefficients `1/2 g^il (delta_j g_lk + delta_k g_jl - delta_l g_jk)`
/// with `delta_j = d_j - G^m_j d_{y^m}`.
pub fn chern_connection(norm: &dyn FinslerNorm, x: &Point, y: &Vector) -> Result<ChernCoefficients> {
    Ok(local_geometry(norm, x, y)?.chern)
}

/// Curvature components `R^i_{jkl}` at reference vector `v`, with
/// `R(X, Y) Z = R^i_{jkl} Z^j X^k Y^l`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureTensor {
    pub r: T4,
    pub metric: Mat,
    pub v: Vector,
}

impl CurvatureTensor {
    /// `R(X, Y) Z`.
    pub fn apply(&self, x: &Vector, y: &Vector, z: &Vector) -> Vector {
        let mut out = [0.0; DIM];
        for (i, o) in out.iter_mut().enumerate() {
            for j in 0..DIM {
                for k in 0..DIM {
                    for l in 0..DIM {
                        *o += self.r[i][j][k][l] * z[j] * x[k] * y[l];
                    }
                }
            }
        }
        out
    }
}

/// Combines `Gamma` and `delta_gamma[k] = d_k Gamma` into `R^i_{jkl}`.
pub fn assemble_riemann(gamma: &T3, delta_gamma: &[T3; DIM]) -> T4 {
    let mut r = zero_t4();
    for i in 0..DIM {
        for j in 0..DIM {
            for k in 0..DIM {
                for l in 0..DIM {
                    let mut v = delta_gamma[k][i][l][j] - delta_gamma[l][i][k][j];
                    for m in 0..DIM {
                        v += gamma[i][k][m] * gamma[m][l][j] - gamma[i][l][m] * gamma[m][k][j];
                    }
                    r[i][j][k][l] = v;
                }
            }
        }
    }
    r
}

const FD4: [(f64, f64); 4] = [
    (-2.0, 1.0 / 12.0),
    (-1.0, -8.0 / 12.0),
    (1.0, 8.0 / 12.0),
    (2.0, -1.0 / 12.0),
];

fn gamma_at(norm: &dyn FinslerNorm, x: &Point, y: &Vector) -> Result<T3> {
    Ok(local_geometry(norm, x, y)?.chern.gamma)
}

fn axpy_t3(acc: &mut T3, a: f64, t: &T3) {
    for i in 0..DIM {
        for j in 0..DIM {
            for k in 0..DIM {
                acc[i][j][k] += a * t[i][j][k];
            }
        }
    }
}

/// Fiber step used for `d/dy Gamma` relative to `|v|`.
pub const FIBER_STEP: f64 = 1e-3;

/// Curvature tensor at `(x, v)` by the Chern-connection route.
pub fn riemann(norm: &dyn FinslerNorm, x: &Point, v: &Vector) -> Result<CurvatureTensor> {
    require_nonzero(v)?;
    let centre = local_geometry(norm, x, v)?;
    let hx = norm.base_step();
    let hy = FIBER_STEP * euclid(v);
    let mut dx_gamma = [zero_t3(); DIM];
    let mut dy_gamma = [zero_t3(); DIM];
    for a in 0..DIM {
        for (off, w) in FD4 {
            let mut xp = *x;
            xp[a] += off * hx;
            axpy_t3(&mut dx_gamma[a], w / hx, &gamma_at(norm, &xp, v)?);
            let mut yp = *v;
            yp[a] += off * hy;
            axpy_t3(&mut dy_gamma[a], w / hy, &gamma_at(norm, x, &yp)?);
        }
    }
    let mut delta = dx_gamma;
    for (k, dk) in delta.iter_mut().enumerate() {
        for r in 0..DIM {
            axpy_t3(dk, -centre.spray.n[r][k], &dy_gamma[r]);
        }
    }
    Ok(CurvatureTensor {
        r: assemble_riemann(&centre.chern.gamma, &delta),
        metric: centre.metric,
        v: *v,
    })
}

/// `R^V(X, Y) Z` for coordinate fields.
pub fn curvature_tensor(
    norm: &dyn FinslerNorm,
    x: &Point,
    v: &Vector,
    xv: &Vector,
    yv: &Vector,
    zv: &Vector,
) -> Result<Vector> {
    Ok(riemann(norm, x, v)?.apply(xv, yv, zv))
}

/// Relative threshold below which a flag counts as degenerate.
pub const FLAG_DEGENERACY: f64 = 1e-14;

/// Flag curvature from a precomputed curvature tensor.
pub fn flag_from(r: &CurvatureTensor, w: &Vector) -> Result<f64> {
    let g = &r.metric;
    let v = &r.v;
    let gvv = bilinear(g, v, v);
    let gww = bilinear(g, w, w);
    let gvw = bilinear(g, v, w);
    let den = gvv * gww - gvw * gvw;
    if den <= FLAG_DEGENERACY * gvv * gww {
        return Err(Error::DegenerateFlag { denominator: den });
    }
    let rw = r.apply(v, w, w);
    Ok(bilinear(g, &rw, v) / den)
}

/// `K(v, w) = g_v(R(v, w) w, v) / (g_v(v, v) g_v(w, w) - g_v(v, w)^2)`.
pub fn flag_curvature(norm: &dyn FinslerNorm, x: &Point, v: &Vector, w: &Vector) -> Result<f64> {
    flag_from(&riemann(norm, x, v)?, w)
}

/// `g_v`-orthonormal completion of `v / F(v)`: Gram-Schmidt over the
/// coordinate basis after dropping the vector most parallel to `v`.
pub fn orthonormal_completion(g: &Mat, v: &Vector) -> Vec<Vector> {
    let f = bilinear(g, v, v).sqrt();
    let u0: Vector = std::array::from_fn(|i| v[i] / f);
    let mut drop = 0;
    let mut best = -1.0;
    for i in 0..DIM {
        let mut e = [0.0; DIM];
        e[i] = 1.0;
        let score = bilinear(g, v, &e).abs();
        if score > best {
            best = score;
            drop = i;
        }
    }
    let mut basis = vec![u0];
    for i in (0..DIM).filter(|i| *i != drop) {
        let mut w = [0.0; DIM];
        w[i] = 1.0;
        for u in basis.clone() {
            let c = bilinear(g, &w, &u);
            for a in 0..DIM {
                w[a] -= c * u[a];
            }
        }
        let n = bilinear(g, &w, &w).sqrt();
        basis.push(std::array::from_fn(|a| w[a] / n));
    }
    basis.remove(0);
    basis
}

/// `Ric(v) = F^2(v) sum_i K(v, e_i)` over an orthonormal completion.
pub fn ricci_from(r: &CurvatureTensor) -> f64 {
    orthonormal_completion(&r.metric, &r.v)
        .iter()
        .map(|e| bilinear(&r.metric, &r.apply(&r.v, e, e), &r.v))
        .sum()
}

pub fn ricci_scalar(norm: &dyn FinslerNorm, x: &Point, v: &Vector) -> Result<f64> {
    Ok(ricci_from(&riemann(norm, x, v)?))
}

/// Fiber-Hessian step for `Ric / 2`, relative to `F(y)`.
pub const AKBARZADEH_STEP: f64 = 1e-3;

fn ricci_hessian(norm: &dyn FinslerNorm, x: &Point, y: &Vector, h: f64, centre: f64) -> Result<Mat> {
    let ric = |d: [f64; DIM]| ricci_scalar(norm, x, &[y[0] + d[0], y[1] + d[1]]);
    let mut m = zero_mat();
    for i in 0..DIM {
        let mut e = [0.0; DIM];
        e[i] = h;
        let p = ric(e)?;
        let q = ric([-e[0], -e[1]])?;
        m[i][i] = (p - 2.0 * centre + q) / (h * h);
        for j in (i + 1)..DIM {
            let mut pp = [0.0; DIM];
            pp[i] = h;
            pp[j] = h;
            let mut pm = pp;
            pm[j] = -h;
            let a = ric(pp)?;
            let b = ric(pm)?;
            let c = ric([-pm[0], -pm[1]])?;
            let d = ric([-pp[0], -pp[1]])?;
            m[i][j] = (a - b - c + d) / (4.0 * h * h);
            m[j][i] = m[i][j];
        }
    }
    Ok(m)
}

/// `Ric_ij = 1/2 d^2/dy^i dy^j Ric` by central differences with one
/// Richardson level.
pub fn akbarzadeh_ricci(norm: &dyn FinslerNorm, x: &Point, y: &Vector) -> Result<Mat> {
    let f = norm_eval(norm, x, y)?;
    let h = AKBARZADEH_STEP * f;
    let centre = ricci_scalar(norm, x, y)?;
    let coarse = ricci_hessian(norm, x, y, h, centre)?;
    let fine = ricci_hessian(norm, x, y, 0.5 * h, centre)?;
    let mut out = zero_mat();
    for i in 0..DIM {
        for j in 0..DIM {
            out[i][j] = 0.5 * (4.0 * fine[i][j] - coarse[i][j]) / 3.0;
        }
    }
    Ok(symmetrize(&out))
}

/// Ricci scalar, tensor, and its eigenvalue range in a `g_v`-orthonormal
/// frame.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RicciData {
    pub ric: f64,
    pub ric_ij: Mat,
    pub min_eig: f64,
    pub max_eig: f64,
}

/// Eigenvalues of `ric_ij` after congruence by the inverse Cholesky factor
/// of `g`.
pub fn frame_eigenvalues(ric_ij: &Mat, g: &Mat) -> Vector {
    let c = orthonormal_congruence(ric_ij, g).expect("positive definite metric");
    sym_eigenvalues(&symmetrize(&c))
}

pub fn ricci_data(norm: &dyn FinslerNorm, x: &Point, v: &Vector) -> Result<RicciData> {
    let ric = ricci_scalar(norm, x, v)?;
    let ric_ij = akbarzadeh_ricci(norm, x, v)?;
    let g = crate::norm::fundamental_tensor(norm, x, v)?.entries;
    let ev = frame_eigenvalues(&ric_ij, &g);
    Ok(RicciData {
        ric,
        ric_ij,
        min_eig: ev[0],
        max_eig: ev[DIM - 1],
    })
}

/// Quadratic-form bounds `-K1 <= Ric_ij <= K2` in `g_v`-orthonormal frames.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct RicciBounds {
    pub k1: f64,
    pub k2: f64,
    pub min_eig: f64,
    pub max_eig: f64,
}

impl RicciBounds {
    pub fn from_extremes(min_eig: f64, max_eig: f64) -> RicciBounds {
        RicciBounds {
            k1: (-min_eig).max(0.0),
            k2: max_eig.max(0.0),
            min_eig,
            max_eig,
        }
    }

    /// Componentwise envelope of two bounds.
    pub fn merge(&self, other: &RicciBounds) -> RicciBounds {
        RicciBounds::from_extremes(self.min_eig.min(other.min_eig), self.max_eig.max(other.max_eig))
    }
}

/// Pointwise bounds over `(x, theta)` samples.
pub fn ricci_bounds(norm: &dyn FinslerNorm, samples: &[(Point, f64)]) -> Result<RicciBounds> {
    let ext: Vec<Result<Vector>> = samples
        .par_iter()
        .map(|(x, theta)| {
            let v = [theta.cos(), theta.sin()];
            let d = ricci_data(norm, x, &v)?;
            Ok([d.min_eig, d.max_eig])
        })
        .collect();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for e in ext {
        let e = e?;
        lo = lo.min(e[0]);
        hi = hi.max(e[1]);
    }
    Ok(RicciBounds::from_extremes(lo, hi))
}
