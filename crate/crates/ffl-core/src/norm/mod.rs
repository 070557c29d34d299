//! Finsler norms: the object-safe [`FinslerNorm`] interface, fiber jets of
//! `F^2`, and the pointwise operations built on them (fundamental tensor,
//! Cartan tensor, Legendre transform, dual norm).
//!
//! Every quantity is expressed through derivatives of `F^2`:
//!
//! * `g_y = 1/2 d^2_y F^2`
//! * `C_y(u, v, w) = 1/4 d^3_y F^2 (u, v, w)`
//! * `L*(omega)` solves `g_y y = omega`

mod catalog;

pub use catalog::{
    Analytic, Euclidean, Expression, NormFactory, NormRegistry, NormSpec, Quartic, RiemannianConformal, RiemannianDiag,
};

use crate::bundle::FieldNorm;
use crate::error::{Error, Result};
use crate::jet::Jet4;
use crate::tensor::*;

/// A point of the flat chart `[0, 2 pi)^2`.
pub type Point = Vector;

/// Cotangent components `omega_i`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Covector(pub Vector);

/// Derivatives of `F^2` at `(x, y)`: fiber order up to 4, base order up to
/// 2, mixed orders up to total 4.
///
/// Index convention: base indices come first, then fiber indices, e.g.
/// `x1y2[a][i][j] = d_{x^a} d_{y^i} d_{y^j} F^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormJet {
    pub f2: f64,
    pub y1: Vector,
    pub y2: Mat,
    pub y3: T3,
    pub y4: T4,
    pub x1: Vector,
    pub x1y1: Mat,
    pub x1y2: [Mat; DIM],
    pub x1y3: [T3; DIM],
    pub x2: Mat,
    pub x2y1: [[Vector; DIM]; DIM],
    pub x2y2: [[Mat; DIM]; DIM],
}

fn exps(xs: &[usize], ys: &[usize]) -> [u8; 4] {
    let mut e = [0u8; 4];
    for &a in xs {
        e[a] += 1;
    }
    for &i in ys {
        e[DIM + i] += 1;
    }
    e
}

impl NormJet {
    pub fn zero() -> NormJet {
        NormJet {
            f2: 0.0,
            y1: [0.0; DIM],
            y2: zero_mat(),
            y3: zero_t3(),
            y4: zero_t4(),
            x1: [0.0; DIM],
            x1y1: zero_mat(),
            x1y2: [zero_mat(); DIM],
            x1y3: [zero_t3(); DIM],
            x2: zero_mat(),
            x2y1: [[[0.0; DIM]; DIM]; DIM],
            x2y2: [[zero_mat(); DIM]; DIM],
        }
    }

    /// Reads every needed derivative from a jet in `(x1, x2, y1, y2)`.
    pub fn from_jet4(t: &Jet4) -> NormJet {
        let d = |xs: &[usize], ys: &[usize]| t.derivative(exps(xs, ys));
        let mut j = NormJet::zero();
        j.f2 = t.c[0];
        for i in 0..DIM {
            j.y1[i] = d(&[], &[i]);
            for k in 0..DIM {
                j.y2[i][k] = d(&[], &[i, k]);
                for l in 0..DIM {
                    j.y3[i][k][l] = d(&[], &[i, k, l]);
                    for m in 0..DIM {
                        j.y4[i][k][l][m] = d(&[], &[i, k, l, m]);
                    }
                }
            }
        }
        for a in 0..DIM {
            j.x1[a] = d(&[a], &[]);
            for i in 0..DIM {
                j.x1y1[a][i] = d(&[a], &[i]);
                for k in 0..DIM {
                    j.x1y2[a][i][k] = d(&[a], &[i, k]);
                    for l in 0..DIM {
                        j.x1y3[a][i][k][l] = d(&[a], &[i, k, l]);
                    }
                }
            }
            for b in 0..DIM {
                j.x2[a][b] = d(&[a, b], &[]);
                for i in 0..DIM {
                    j.x2y1[a][b][i] = d(&[a, b], &[i]);
                    for k in 0..DIM {
                        j.x2y2[a][b][i][k] = d(&[a, b], &[i, k]);
                    }
                }
            }
        }
        j
    }

    /// Jet at `r y` from the jet at `y`, using 2-homogeneity of `F^2`: a term
    /// with `k` fiber derivatives scales like `r^(2-k)`.
    pub fn rescaled(&self, r: f64) -> NormJet {
        let s = [r * r, r, 1.0, 1.0 / r, 1.0 / (r * r)];
        let mut j = self.clone();
        j.f2 *= s[0];
        j.x1.iter_mut().for_each(|v| *v *= s[0]);
        j.x2.iter_mut().flatten().for_each(|v| *v *= s[0]);
        j.y1.iter_mut().for_each(|v| *v *= s[1]);
        j.x1y1.iter_mut().flatten().for_each(|v| *v *= s[1]);
        j.x2y1.iter_mut().flatten().flatten().for_each(|v| *v *= s[1]);
        // order 2 in y is 0-homogeneous
        j.y3.iter_mut().flatten().flatten().for_each(|v| *v *= s[3]);
        j.x1y3.iter_mut().flatten().flatten().flatten().for_each(|v| *v *= s[3]);
        j.y4.iter_mut().flatten().flatten().flatten().for_each(|v| *v *= s[4]);
        j
    }

    /// Fundamental tensor `g_ij = 1/2 d_i d_j F^2`.
    pub fn metric(&self) -> Mat {
        scale_mat(&self.y2, 0.5)
    }

    /// `d_{y^r} g_jk`, indexed `[r][j][k]`.
    pub fn metric_dy(&self) -> T3 {
        scale_t3(&self.y3, 0.5)
    }

    /// `d_{x^l} g_jk`, indexed `[l][j][k]`.
    pub fn metric_dx(&self) -> [Mat; DIM] {
        let mut out = [zero_mat(); DIM];
        for l in 0..DIM {
            out[l] = scale_mat(&self.x1y2[l], 0.5);
        }
        out
    }

    /// `d_{x^l} d_{y^r} g_jk`, indexed `[l][r][j][k]`.
    pub fn metric_dxy(&self) -> [T3; DIM] {
        let mut out = [zero_t3(); DIM];
        for l in 0..DIM {
            out[l] = scale_t3(&self.x1y3[l], 0.5);
        }
        out
    }
}

fn scale_mat(m: &Mat, s: f64) -> Mat {
    let mut out = *m;
    out.iter_mut().flatten().for_each(|v| *v *= s);
    out
}

fn scale_t3(t: &T3, s: f64) -> T3 {
    let mut out = *t;
    out.iter_mut().flatten().flatten().for_each(|v| *v *= s);
    out
}

/// Object-safe interface shared by closed-form catalog norms and sampled
/// sphere-bundle fields.
pub trait FinslerNorm: Send + Sync + std::fmt::Debug {
    /// Catalog-style description, e.g. `quartic:0.1`.
    fn label(&self) -> String;

    /// `F^2(x, y)`; errors on `y = 0`.
    fn norm_sq(&self, x: &Point, y: &Vector) -> Result<f64>;

    /// All derivatives of `F^2` needed downstream.
    fn jet(&self, x: &Point, y: &Vector) -> Result<NormJet>;

    /// `1/2 d^2_y F^2` without a definiteness check.
    fn metric_raw(&self, x: &Point, y: &Vector) -> Result<Mat>;

    /// `F^2` and its base gradient at fixed `y`.
    fn norm_sq_dx(&self, x: &Point, y: &Vector) -> Result<(f64, Vector)>;

    /// Step for finite differences in the base (the lattice spacing for
    /// sampled fields).
    fn base_step(&self) -> f64;

    /// Number of angular nodes used for indicatrix quadrature.
    fn angular_nodes(&self) -> usize;

    /// Downcast hook used by grid-batched algorithms.
    fn as_field(&self) -> Option<&FieldNorm> {
        None
    }
}

/// Symmetric positive-definite `g_y` together with its basepoint.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricTensor {
    pub entries: Mat,
    pub x: Point,
    pub y: Vector,
}

impl MetricTensor {
    pub fn inverse(&self) -> Mat {
        inverse(&self.entries).expect("positive definite by construction")
    }

    pub fn eigenvalues(&self) -> Vector {
        sym_eigenvalues(&self.entries)
    }

    pub fn apply(&self, u: &Vector, v: &Vector) -> f64 {
        bilinear(&self.entries, u, v)
    }
}

pub(crate) fn require_nonzero(y: &Vector) -> Result<()> {
    if y.iter().all(|v| *v == 0.0) {
        Err(Error::ZeroVector)
    } else if y.iter().any(|v| !v.is_finite()) {
        Err(Error::Domain(format!("non-finite vector {y:?}")))
    } else {
        Ok(())
    }
}

/// `F(x, y)`.
pub fn norm_eval(norm: &dyn FinslerNorm, x: &Point, y: &Vector) -> Result<f64> {
    require_nonzero(y)?;
    Ok(norm.norm_sq(x, y)?.sqrt())
}

/// Checks positive definiteness of a raw metric.
pub fn check_metric(m: Mat, x: &Point, y: &Vector) -> Result<MetricTensor> {
    if cholesky(&m).is_none() {
        return Err(Error::StrongConvexity {
            x: *x,
            y: *y,
            min_eigenvalue: sym_eigenvalues(&m)[0],
        });
    }
    Ok(MetricTensor {
        entries: m,
        x: *x,
        y: *y,
    })
}

/// `g_y`, with a strong-convexity error if it is not positive definite.
pub fn fundamental_tensor(norm: &dyn FinslerNorm, x: &Point, y: &Vector) -> Result<MetricTensor> {
    require_nonzero(y)?;
    check_metric(norm.metric_raw(x, y)?, x, y)
}

/// `C_y(u, v, w) = 1/2 d/dt g_{y + t w}(u, v)`.
pub fn cartan_tensor(norm: &dyn FinslerNorm, x: &Point, y: &Vector, u: &Vector, v: &Vector, w: &Vector) -> Result<f64> {
    require_nonzero(y)?;
    let jet = norm.jet(x, y)?;
    let mut c = 0.0;
    for i in 0..DIM {
        for j in 0..DIM {
            for k in 0..DIM {
                c += jet.y3[i][j][k] * u[i] * v[j] * w[k];
            }
        }
    }
    Ok(0.25 * c)
}

/// `omega_i = g_ij(y) y^j`.
pub fn legendre_inverse(norm: &dyn FinslerNorm, x: &Point, y: &Vector) -> Result<Covector> {
    let g = fundamental_tensor(norm, x, y)?;
    Ok(Covector(mat_vec(&g.entries, y)))
}

/// Maximum Newton iterations for the Legendre transform.
pub const LEGENDRE_MAX_ITER: usize = 50;

/// `L*(omega)`: the unique `y` with `g_y y = omega`.
pub fn legendre(norm: &dyn FinslerNorm, x: &Point, omega: &Covector) -> Result<Vector> {
    legendre_from(norm, x, omega, None)
}

/// Legendre transform with an optional warm start (the previous solution at
/// the same site).
///
/// The map `y -> g_y y - omega` has Jacobian `g_y` (the fiber derivative of
/// `g` contracts to zero against `y`), so each Newton step is
/// `y <- g_y^{-1} omega`.
pub fn legendre_from(norm: &dyn FinslerNorm, x: &Point, omega: &Covector, guess: Option<&Vector>) -> Result<Vector> {
    let w = omega.0;
    require_nonzero(&w)?;
    let scale = max_abs(&w);
    let start = match guess {
        Some(g) if g.iter().any(|v| *v != 0.0) => *g,
        _ => w,
    };
    let g0 = fundamental_tensor(norm, x, &start)?;
    let mut y = mat_vec(&g0.inverse(), &w);
    let mut last = f64::INFINITY;
    for _ in 0..LEGENDRE_MAX_ITER {
        let g = fundamental_tensor(norm, x, &y)?;
        let gy = mat_vec(&g.entries, &y);
        let res = (0..DIM).fold(0.0_f64, |m, i| m.max((gy[i] - w[i]).abs()));
        if res <= 1e-15 * scale || (res <= 1e-12 * scale && res >= 0.5 * last) {
            return Ok(y);
        }
        last = res;
        y = mat_vec(&g.inverse(), &w);
    }
    Err(Error::NoConvergence {
        iterations: LEGENDRE_MAX_ITER,
        residual: last,
    })
}

/// `F*(omega) = F(L*(omega))`; zero for `omega = 0`.
pub fn dual_norm(norm: &dyn FinslerNorm, x: &Point, omega: &Covector) -> Result<f64> {
    if omega.0.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let y = legendre(norm, x, omega)?;
    norm_eval(norm, x, &y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quartic() -> Quartic {
        Quartic::new(0.1).unwrap()
    }

    #[test]
    fn examples_norm_eval() {
        let e = Analytic::new(Euclidean);
        assert!((norm_eval(&e, &[0.0, 0.0], &[3.0, 4.0]).unwrap() - 5.0).abs() < 1e-15);
        assert!((norm_eval(&e, &[0.0, 0.0], &[7.0, 0.0]).unwrap() - 7.0).abs() < 1e-15);
        let q = Analytic::new(quartic());
        assert!((norm_eval(&q, &[0.0, 0.0], &[1.0, 0.0]).unwrap() - 1.1_f64.sqrt()).abs() < 1e-15);
        assert!(matches!(
            norm_eval(&q, &[0.0, 0.0], &[0.0, 0.0]),
            Err(Error::ZeroVector)
        ));
    }

    fn fd_hessian(f: impl Fn(&Vector) -> f64, y: &Vector, h: f64) -> Mat {
        let mut m = zero_mat();
        for i in 0..DIM {
            for j in 0..DIM {
                let mut acc = 0.0;
                for (si, sj, w) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                    let mut p = *y;
                    p[i] += si * h;
                    p[j] += sj * h;
                    acc += w * f(&p);
                }
                m[i][j] = acc / (4.0 * h * h);
            }
        }
        m
    }

    #[test]
    fn examples_fundamental_tensor() {
        let x = [0.3, 0.2];
        let e = Analytic::new(Euclidean);
        let g = fundamental_tensor(&e, &x, &[0.3, -2.0]).unwrap();
        assert!(max_abs_mat(&sub_mat(&g.entries, &identity())) < 1e-15);
        let d = Analytic::new(RiemannianDiag::new(4.0, 1.0).unwrap());
        let g = fundamental_tensor(&d, &x, &[1.0, 5.0]).unwrap();
        assert!(max_abs_mat(&sub_mat(&g.entries, &[[4.0, 0.0], [0.0, 1.0]])) < 1e-15);
        let q = Analytic::new(quartic());
        let y = [1.0, 1.0];
        let g = fundamental_tensor(&q, &x, &y).unwrap();
        let f = |p: &Vector| 0.5 * q.norm_sq(&x, p).unwrap();
        let fd = fd_hessian(f, &y, 1e-4);
        assert!(max_abs_mat(&sub_mat(&g.entries, &fd)) < 1e-6);
    }

    #[test]
    fn examples_cartan() {
        let x = [0.0, 0.0];
        let e = Analytic::new(Euclidean);
        let u = [0.3, -1.0];
        assert_eq!(cartan_tensor(&e, &x, &[1.0, 2.0], &u, &u, &u).unwrap(), 0.0);
        let q = Analytic::new(quartic());
        let y1 = [1.0, 0.0];
        assert!(cartan_tensor(&q, &x, &y1, &y1, &y1, &y1).unwrap().abs() < 1e-14);
        // 1/2 d/dt g_{y + t w}(u, v) by central differences
        let y = [1.0, 1.0];
        let w = [1.0, 0.0];
        let h = 1e-4;
        let gp = fundamental_tensor(&q, &x, &[y[0] + h, y[1]]).unwrap();
        let gm = fundamental_tensor(&q, &x, &[y[0] - h, y[1]]).unwrap();
        let fd = 0.5 * (gp.apply(&w, &w) - gm.apply(&w, &w)) / (2.0 * h);
        let c = cartan_tensor(&q, &x, &y, &w, &w, &w).unwrap();
        assert!((c - fd).abs() < 1e-6, "{c} vs {fd}");
    }

    #[test]
    fn examples_dual_and_legendre() {
        let x = [0.0, 0.0];
        let e = Analytic::new(Euclidean);
        assert!((dual_norm(&e, &x, &Covector([3.0, 4.0])).unwrap() - 5.0).abs() < 1e-14);
        assert_eq!(dual_norm(&e, &x, &Covector([0.0, 0.0])).unwrap(), 0.0);
        assert_eq!(legendre(&e, &x, &Covector([1.0, 0.0])).unwrap(), [1.0, 0.0]);
        let d = Analytic::new(RiemannianDiag::new(4.0, 1.0).unwrap());
        assert!((dual_norm(&d, &x, &Covector([2.0, 0.0])).unwrap() - 1.0).abs() < 1e-14);
        let y = legendre(&d, &x, &Covector([2.0, 0.0])).unwrap();
        assert!((y[0] - 0.5).abs() < 1e-15 && y[1].abs() < 1e-15);
        assert_eq!(legendre_inverse(&d, &x, &[1.0, 0.0]).unwrap().0, [4.0, 0.0]);
        assert_eq!(legendre_inverse(&e, &x, &[0.6, 0.8]).unwrap().0, [0.6, 0.8]);

        let q = Analytic::new(quartic());
        let omega = Covector([1.0, 0.0]);
        let brute = (0..4096)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / 4096.0;
                let v = [t.cos(), t.sin()];
                dot(&omega.0, &v) / norm_eval(&q, &x, &v).unwrap()
            })
            .fold(f64::MIN, f64::max);
        assert!((dual_norm(&q, &x, &omega).unwrap() - brute).abs() < 1e-4);

        let w = Covector([1.0, 1.0]);
        let y = legendre(&q, &x, &w).unwrap();
        let gy = mat_vec(&fundamental_tensor(&q, &x, &y).unwrap().entries, &y);
        assert!((gy[0] - 1.0).abs() <= 1e-10 && (gy[1] - 1.0).abs() <= 1e-10);

        let y = [1.0, 2.0];
        let back = legendre(&q, &x, &legendre_inverse(&q, &x, &y).unwrap()).unwrap();
        assert!(euclid(&[back[0] - y[0], back[1] - y[1]]) <= 1e-10 * euclid(&y));
    }

    #[test]
    fn legendre_contract() {
        let q = Analytic::new(quartic());
        let x = [0.0, 0.0];
        let w = Covector([0.4, -1.3]);
        let y = legendre(&q, &x, &w).unwrap();
        let fstar = dual_norm(&q, &x, &w).unwrap();
        assert!((dot(&w.0, &y) - fstar * fstar).abs() <= 1e-10 * fstar * fstar);
        assert!((norm_eval(&q, &x, &y).unwrap() - fstar).abs() <= 1e-10 * fstar);
    }

    #[test]
    fn rescaled_jet_matches_direct_evaluation() {
        let c = Analytic::new(RiemannianConformal::new(0.1).unwrap());
        let q = Analytic::new(quartic());
        let x = [0.4, 1.1];
        let y = [0.6, -0.3];
        for n in [&c as &dyn FinslerNorm, &q] {
            let a = n.jet(&x, &y).unwrap().rescaled(3.0);
            let b = n.jet(&x, &[3.0 * y[0], 3.0 * y[1]]).unwrap();
            assert!((a.f2 - b.f2).abs() < 1e-12);
            assert!(max_abs_mat(&sub_mat(&a.y2, &b.y2)) < 1e-12);
            for i in 0..DIM {
                for j in 0..DIM {
                    for k in 0..DIM {
                        assert!((a.y3[i][j][k] - b.y3[i][j][k]).abs() < 1e-12);
                        assert!((a.x1y3[0][i][j][k] - b.x1y3[0][i][j][k]).abs() < 1e-12);
                        for l in 0..DIM {
                            assert!((a.y4[i][j][k][l] - b.y4[i][j][k][l]).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }
}
