//! Fixed-size tensors over the base dimension and the few dense linear
//! algebra kernels the geometry needs.
//!
//! Formulas elsewhere loop over `0..DIM`; only the discretization assumes
//! `DIM == 2`.

use nalgebra::{SMatrix, SymmetricEigen};

/// Base-manifold dimension.
pub const DIM: usize = 2;

pub type Vector = [f64; DIM];
pub type Mat = [[f64; DIM]; DIM];
pub type T3 = [[[f64; DIM]; DIM]; DIM];
pub type T4 = [[[[f64; DIM]; DIM]; DIM]; DIM];

type NMat = SMatrix<f64, DIM, DIM>;

pub fn zero_mat() -> Mat {
    [[0.0; DIM]; DIM]
}

pub fn identity() -> Mat {
    let mut m = zero_mat();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn zero_t3() -> T3 {
    [[[0.0; DIM]; DIM]; DIM]
}

pub fn zero_t4() -> T4 {
    [[[[0.0; DIM]; DIM]; DIM]; DIM]
}

pub fn dot(a: &Vector, b: &Vector) -> f64 {
    (0..DIM).map(|i| a[i] * b[i]).sum()
}

pub fn euclid(a: &Vector) -> f64 {
    dot(a, a).sqrt()
}

pub fn max_abs(a: &Vector) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub fn mat_vec(m: &Mat, v: &Vector) -> Vector {
    let mut out = [0.0; DIM];
    for i in 0..DIM {
        for j in 0..DIM {
            out[i] += m[i][j] * v[j];
        }
    }
    out
}

/// Bilinear form `u^T m v`.
pub fn bilinear(m: &Mat, u: &Vector, v: &Vector) -> f64 {
    dot(u, &mat_vec(m, v))
}

pub fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let mut out = zero_mat();
    for i in 0..DIM {
        for j in 0..DIM {
            for k in 0..DIM {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn transpose(a: &Mat) -> Mat {
    let mut out = zero_mat();
    for i in 0..DIM {
        for j in 0..DIM {
            out[i][j] = a[j][i];
        }
    }
    out
}

pub fn max_abs_mat(m: &Mat) -> f64 {
    m.iter().flatten().fold(0.0_f64, |a, v| a.max(v.abs()))
}

pub fn sub_mat(a: &Mat, b: &Mat) -> Mat {
    let mut out = zero_mat();
    for i in 0..DIM {
        for j in 0..DIM {
            out[i][j] = a[i][j] - b[i][j];
        }
    }
    out
}

fn to_n(m: &Mat) -> NMat {
    NMat::from_fn(|i, j| m[i][j])
}

fn from_n(m: &NMat) -> Mat {
    let mut out = zero_mat();
    for i in 0..DIM {
        for j in 0..DIM {
            out[i][j] = m[(i, j)];
        }
    }
    out
}

pub fn inverse(m: &Mat) -> Option<Mat> {
    to_n(m).try_inverse().map(|inv| from_n(&inv))
}

pub fn determinant(m: &Mat) -> f64 {
    to_n(m).determinant()
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(m: &Mat) -> Vector {
    let eig = SymmetricEigen::new(to_n(m));
    let mut vals = [0.0; DIM];
    for (i, v) in eig.eigenvalues.iter().enumerate() {
        vals[i] = *v;
    }
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

/// Lower Cholesky factor `L` with `m = L L^T`, or `None` if `m` is not
/// positive definite.
pub fn cholesky(m: &Mat) -> Option<Mat> {
    to_n(m).cholesky().map(|c| from_n(&c.l()))
}

/// Congruence `L^{-1} a L^{-T}` where `g = L L^T`; eigenvalues of the result
/// are the eigenvalues of `a` in a `g`-orthonormal frame.
pub fn orthonormal_congruence(a: &Mat, g: &Mat) -> Option<Mat> {
    let l = to_n(&cholesky(g)?);
    let linv = l.try_inverse()?;
    Some(from_n(&(linv * to_n(a) * linv.transpose())))
}

pub fn symmetrize(m: &Mat) -> Mat {
    let mut out = zero_mat();
    for i in 0..DIM {
        for j in 0..DIM {
            out[i][j] = 0.5 * (m[i][j] + m[j][i]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_and_cholesky_agree() {
        let m = [[4.0, 1.0], [1.0, 3.0]];
        let inv = inverse(&m).unwrap();
        let p = mat_mul(&m, &inv);
        assert!(max_abs_mat(&sub_mat(&p, &identity())) < 1e-15);
        let l = cholesky(&m).unwrap();
        let back = mat_mul(&l, &transpose(&l));
        assert!(max_abs_mat(&sub_mat(&back, &m)) < 1e-14);
        assert!(cholesky(&[[1.0, 2.0], [2.0, 1.0]]).is_none());
    }

    #[test]
    fn congruence_recovers_generalized_eigenvalues() {
        let g = [[2.0, 0.0], [0.0, 0.5]];
        let a = [[4.0, 0.0], [0.0, 1.0]];
        let c = orthonormal_congruence(&a, &g).unwrap();
        let ev = sym_eigenvalues(&c);
        assert!((ev[0] - 2.0).abs() < 1e-14 && (ev[1] - 2.0).abs() < 1e-14);
    }
}
