//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Taylor`] stores every coefficient of a polynomial in `V` variables up to
//! total degree `D`, so one evaluation of an expression yields all mixed
//! partial derivatives up to that order at once. This is forward-mode
//! differentiation nested `D` times, carried out coefficient-wise; no finite
//! differences are involved.
//!
//! Supported shapes are fixed by [`tables`]:
//!
//! | alias | variables | degree | coefficients |
//! |-------|-----------|--------|--------------|
//! | [`Jet1x`] | 2 | 1 | 3 |
//! | [`Jet2y`] | 2 | 2 | 6 |
//! | [`Jet4y`] | 2 | 4 | 15 |
//! | [`Jet4`]  | 4 | 4 | 70 |
//!
//! Transcendental functions are applied by composing their univariate Taylor
//! series with the non-constant part of the argument.

use std::collections::HashMap;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::OnceLock;

/// Arithmetic needed by the catalog expressions; implemented for `f64` and
/// every supported [`Taylor`] shape.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    fn cst(v: f64) -> Self;
    fn val(&self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn recip(self) -> Self;
    fn atan(self) -> Self;
    fn square(self) -> Self {
        self * self
    }
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn val(&self) -> f64 {
        *self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn recip(self) -> Self {
        f64::recip(self)
    }
    fn atan(self) -> Self {
        f64::atan(self)
    }
}

/// Monomial bookkeeping for one (variables, degree) shape.
#[derive(Debug)]
pub struct Tables {
    /// Exponent vector of each coefficient slot (unused variables are 0).
    pub exps: Vec<[u8; 4]>,
    /// Total degree of each slot.
    pub degree: Vec<u8>,
    /// `(i, j, k)`: slot `i` times slot `j` lands in slot `k`.
    pub pairs: Vec<(u16, u16, u16)>,
    /// Slot holding the linear monomial of each variable.
    pub var_slot: [usize; 4],
    index: HashMap<[u8; 4], usize>,
}

impl Tables {
    fn build(nvars: usize, degree: usize) -> Tables {
        let mut exps: Vec<[u8; 4]> = Vec::new();
        for total in 0..=degree {
            let mut stack = vec![([0u8; 4], 0usize, total)];
            // enumerate compositions of `total` into `nvars` parts, lexicographically descending
            while let Some((e, var, left)) = stack.pop() {
                if var == nvars - 1 {
                    let mut e = e;
                    e[var] = left as u8;
                    exps.push(e);
                    continue;
                }
                for take in 0..=left {
                    let mut e2 = e;
                    e2[var] = take as u8;
                    stack.push((e2, var + 1, left - take));
                }
            }
        }
        let index: HashMap<[u8; 4], usize> = exps.iter().enumerate().map(|(i, e)| (*e, i)).collect();
        let deg: Vec<u8> = exps.iter().map(|e| e.iter().sum()).collect();
        let mut pairs = Vec::new();
        for i in 0..exps.len() {
            for j in 0..exps.len() {
                if (deg[i] + deg[j]) as usize <= degree {
                    let mut e = [0u8; 4];
                    for v in 0..4 {
                        e[v] = exps[i][v] + exps[j][v];
                    }
                    pairs.push((i as u16, j as u16, index[&e] as u16));
                }
            }
        }
        let mut var_slot = [usize::MAX; 4];
        if degree >= 1 {
            for (v, slot) in var_slot.iter_mut().enumerate().take(nvars) {
                let mut e = [0u8; 4];
                e[v] = 1;
                *slot = index[&e];
            }
        }
        Tables {
            exps,
            degree: deg,
            pairs,
            var_slot,
            index,
        }
    }

    /// Slot of an exponent vector, if it is within the truncation degree.
    pub fn slot(&self, exps: [u8; 4]) -> Option<usize> {
        self.index.get(&exps).copied()
    }
}

/// Shared monomial tables for a supported shape.
///
/// # Panics
/// Panics for shapes not listed in the module documentation.
pub fn tables(nvars: usize, degree: usize) -> &'static Tables {
    static T21: OnceLock<Tables> = OnceLock::new();
    static T22: OnceLock<Tables> = OnceLock::new();
    static T24: OnceLock<Tables> = OnceLock::new();
    static T44: OnceLock<Tables> = OnceLock::new();
    let cell = match (nvars, degree) {
        (2, 1) => &T21,
        (2, 2) => &T22,
        (2, 4) => &T24,
        (4, 4) => &T44,
        _ => panic!("unsupported jet shape ({nvars}, {degree})"),
    };
    cell.get_or_init(|| Tables::build(nvars, degree))
}

/// Truncated Taylor polynomial in `V` variables to total degree `D` with `L`
/// coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Taylor<const V: usize, const D: usize, const L: usize> {
    pub c: [f64; L],
}

/// Two variables, degree 1: value and gradient.
pub type Jet1x = Taylor<2, 1, 3>;
/// Two variables, degree 2: value, gradient, Hessian.
pub type Jet2y = Taylor<2, 2, 6>;
/// Two variables, degree 4.
pub type Jet4y = Taylor<2, 4, 15>;
/// Four variables `(x1, x2, y1, y2)`, degree 4.
pub type Jet4 = Taylor<4, 4, 70>;

impl<const V: usize, const D: usize, const L: usize> Taylor<V, D, L> {
    pub fn tables() -> &'static Tables {
        let t = tables(V, D);
        debug_assert_eq!(t.exps.len(), L);
        t
    }

    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; L];
        c[0] = v;
        Taylor { c }
    }

    /// The coordinate function `value + (variable var)`.
    pub fn variable(value: f64, var: usize) -> Self {
        let mut t = Self::constant(value);
        t.c[Self::tables().var_slot[var]] = 1.0;
        t
    }

    /// Coefficient of the monomial with the given exponents (0 if truncated).
    pub fn coeff(&self, exps: [u8; 4]) -> f64 {
        Self::tables().slot(exps).map_or(0.0, |s| self.c[s])
    }

    /// Mixed partial derivative with the given exponents.
    pub fn derivative(&self, exps: [u8; 4]) -> f64 {
        let fact: f64 = exps.iter().map(|&k| (1..=k as u32).product::<u32>() as f64).product();
        self.coeff(exps) * fact
    }

    /// Evaluates `sum_k coeffs[k] * (self - self(0))^k`.
    fn compose(self, coeffs: &[f64]) -> Self {
        let mut delta = self;
        delta.c[0] = 0.0;
        let mut acc = Self::constant(coeffs[D]);
        for k in (0..D).rev() {
            acc = acc * delta;
            acc.c[0] += coeffs[k];
        }
        acc
    }
}

impl<const V: usize, const D: usize, const L: usize> Add for Taylor<V, D, L> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for (a, b) in self.c.iter_mut().zip(rhs.c.iter()) {
            *a += b;
        }
        self
    }
}

impl<const V: usize, const D: usize, const L: usize> Sub for Taylor<V, D, L> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for (a, b) in self.c.iter_mut().zip(rhs.c.iter()) {
            *a -= b;
        }
        self
    }
}

impl<const V: usize, const D: usize, const L: usize> Neg for Taylor<V, D, L> {
    type Output = Self;
    fn neg(mut self) -> Self {
        for a in self.c.iter_mut() {
            *a = -*a;
        }
        self
    }
}

impl<const V: usize, const D: usize, const L: usize> Mul for Taylor<V, D, L> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = [0.0; L];
        for &(i, j, k) in &Self::tables().pairs {
            out[k as usize] += self.c[i as usize] * rhs.c[j as usize];
        }
        Taylor { c: out }
    }
}

impl<const V: usize, const D: usize, const L: usize> Div for Taylor<V, D, L> {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Self) -> Self {
        self * Scalar::recip(rhs)
    }
}

impl<const V: usize, const D: usize, const L: usize> Add<f64> for Taylor<V, D, L> {
    type Output = Self;
    fn add(mut self, rhs: f64) -> Self {
        self.c[0] += rhs;
        self
    }
}

impl<const V: usize, const D: usize, const L: usize> Sub<f64> for Taylor<V, D, L> {
    type Output = Self;
    fn sub(mut self, rhs: f64) -> Self {
        self.c[0] -= rhs;
        self
    }
}

impl<const V: usize, const D: usize, const L: usize> Mul<f64> for Taylor<V, D, L> {
    type Output = Self;
    fn mul(mut self, rhs: f64) -> Self {
        for a in self.c.iter_mut() {
            *a *= rhs;
        }
        self
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

impl<const V: usize, const D: usize, const L: usize> Scalar for Taylor<V, D, L> {
    fn cst(v: f64) -> Self {
        Self::constant(v)
    }

    fn val(&self) -> f64 {
        self.c[0]
    }

    fn exp(self) -> Self {
        let e = self.c[0].exp();
        let k: Vec<f64> = (0..=D).map(|k| e / factorial(k)).collect();
        self.compose(&k)
    }

    fn ln(self) -> Self {
        let a = self.c[0];
        let mut k = vec![a.ln()];
        for n in 1..=D {
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            k.push(sign / (n as f64 * a.powi(n as i32)));
        }
        self.compose(&k)
    }

    fn sqrt(self) -> Self {
        let a = self.c[0];
        let mut k = Vec::with_capacity(D + 1);
        let mut binom = 1.0;
        for n in 0..=D {
            k.push(binom * a.powf(0.5 - n as f64));
            binom *= (0.5 - n as f64) / (n as f64 + 1.0);
        }
        self.compose(&k)
    }

    fn sin(self) -> Self {
        let (s, c) = self.c[0].sin_cos();
        let cycle = [s, c, -s, -c];
        let k: Vec<f64> = (0..=D).map(|n| cycle[n % 4] / factorial(n)).collect();
        self.compose(&k)
    }

    fn cos(self) -> Self {
        let (s, c) = self.c[0].sin_cos();
        let cycle = [c, -s, -c, s];
        let k: Vec<f64> = (0..=D).map(|n| cycle[n % 4] / factorial(n)).collect();
        self.compose(&k)
    }

    fn recip(self) -> Self {
        let a = self.c[0];
        let k: Vec<f64> = (0..=D)
            .map(|n| {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                sign / a.powi(n as i32 + 1)
            })
            .collect();
        self.compose(&k)
    }

    fn atan(self) -> Self {
        // derivatives of atan at a: d/da atan = 1/(1+a^2); higher ones via
        // the series of 1/(1+(a+t)^2) computed in one variable
        let a = self.c[0];
        let q: Taylor<2, 4, 15> = Taylor::variable(a, 0);
        let inv = Scalar::recip(q * q + 1.0);
        let mut k = vec![a.atan()];
        for n in 1..=D {
            // coefficient of t^(n-1) in 1/(1+(a+t)^2), integrated once
            k.push(inv.coeff([(n - 1) as u8, 0, 0, 0]) / n as f64);
        }
        self.compose(&k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_counts() {
        assert_eq!(tables(4, 4).exps.len(), 70);
        assert_eq!(tables(4, 4).pairs.len(), 495);
        assert_eq!(tables(2, 4).exps.len(), 15);
        assert_eq!(tables(2, 2).exps.len(), 6);
        assert_eq!(tables(2, 1).exps.len(), 3);
    }

    #[test]
    fn derivatives_of_polynomial_are_exact() {
        // p = x^3 y + 2 y^2 at (1.5, -0.5)
        let x = Jet4y::variable(1.5, 0);
        let y = Jet4y::variable(-0.5, 1);
        let p = x * x * x * y + y * y * 2.0;
        assert!((p.derivative([3, 1, 0, 0]) - 6.0).abs() < 1e-14);
        assert!((p.derivative([2, 1, 0, 0]) - 9.0).abs() < 1e-14);
        assert!((p.derivative([0, 2, 0, 0]) - 4.0).abs() < 1e-14);
        assert!((p.derivative([2, 0, 0, 0]) - 6.0 * 1.5 * -0.5).abs() < 1e-14);
    }

    #[test]
    fn transcendental_series_match_closed_forms() {
        let a = 0.7;
        let t = Jet4y::variable(a, 0);
        let checks: [(Jet4y, [f64; 5]); 6] = [
            (t.exp(), [a.exp(); 5]),
            (
                t.ln(),
                [a.ln(), 1.0 / a, -1.0 / (a * a), 2.0 / a.powi(3), -6.0 / a.powi(4)],
            ),
            (t.sin(), [a.sin(), a.cos(), -a.sin(), -a.cos(), a.sin()]),
            (t.cos(), [a.cos(), -a.sin(), -a.cos(), a.sin(), a.cos()]),
            (
                t.sqrt(),
                [
                    a.sqrt(),
                    0.5 * a.powf(-0.5),
                    -0.25 * a.powf(-1.5),
                    0.375 * a.powf(-2.5),
                    -0.9375 * a.powf(-3.5),
                ],
            ),
            (
                t.recip(),
                [
                    1.0 / a,
                    -1.0 / a.powi(2),
                    2.0 / a.powi(3),
                    -6.0 / a.powi(4),
                    24.0 / a.powi(5),
                ],
            ),
        ];
        for (jet, want) in checks.iter() {
            for (n, w) in want.iter().enumerate() {
                let got = jet.derivative([n as u8, 0, 0, 0]);
                assert!((got - w).abs() < 1e-12 * w.abs().max(1.0), "order {n}: {got} vs {w}");
            }
        }
    }

    #[test]
    fn atan_derivatives() {
        let a = 0.3;
        let t = Jet4y::variable(a, 0);
        let j = t.atan();
        let d1 = 1.0 / (1.0 + a * a);
        let d2 = -2.0 * a / (1.0 + a * a).powi(2);
        let d3 = (6.0 * a * a - 2.0) / (1.0 + a * a).powi(3);
        let d4 = 24.0 * a * (1.0 - a * a) / (1.0 + a * a).powi(4);
        for (n, w) in [a.atan(), d1, d2, d3, d4].iter().enumerate() {
            assert!((j.derivative([n as u8, 0, 0, 0]) - w).abs() < 1e-13);
        }
    }

    #[test]
    fn division_inverts_multiplication() {
        let x = Jet4::variable(0.4, 0);
        let y = Jet4::variable(1.3, 2);
        let p = (x * y + 2.0) * x.exp();
        let q = (p / (x.cos() + 3.0)) * (x.cos() + 3.0);
        for (a, b) in p.c.iter().zip(q.c.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
