//! Closed-form norms and the name-keyed registry that builds them from
//! configuration strings such as `quartic:0.1` or `riemannian_diag:4,1`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{require_nonzero, FinslerNorm, NormJet, Point};
use crate::error::{Error, Result};
use crate::jet::{Jet1x, Jet2y, Jet4, Scalar};
use crate::tensor::*;

/// A closed-form expression for `F^2(x, y)`, generic over the scalar type so
/// the same source is evaluated with `f64` and with jets.
pub trait Expression: Send + Sync + fmt::Debug + 'static {
    fn label(&self) -> String;
    fn f2<S: Scalar>(&self, x: [S; DIM], y: [S; DIM]) -> S;
}

/// Catalog expression wrapped as a [`FinslerNorm`].
#[derive(Debug, Clone)]
pub struct Analytic<E: Expression> {
    pub expr: E,
    /// Base finite-difference step used by curvature.
    pub step: f64,
    /// Angular quadrature nodes for the indicatrix area.
    pub quadrature: usize,
}

impl<E: Expression> Analytic<E> {
    pub fn new(expr: E) -> Self {
        Analytic {
            expr,
            step: 2e-3,
            quadrature: 128,
        }
    }
}

impl<E: Expression> FinslerNorm for Analytic<E> {
    fn label(&self) -> String {
        self.expr.label()
    }

    fn norm_sq(&self, x: &Point, y: &Vector) -> Result<f64> {
        require_nonzero(y)?;
        Ok(self.expr.f2(*x, *y))
    }

    fn jet(&self, x: &Point, y: &Vector) -> Result<NormJet> {
        require_nonzero(y)?;
        let xs = [Jet4::variable(x[0], 0), Jet4::variable(x[1], 1)];
        let ys = [Jet4::variable(y[0], 2), Jet4::variable(y[1], 3)];
        Ok(NormJet::from_jet4(&self.expr.f2(xs, ys)))
    }

    fn metric_raw(&self, x: &Point, y: &Vector) -> Result<Mat> {
        require_nonzero(y)?;
        let xs = [Jet2y::constant(x[0]), Jet2y::constant(x[1])];
        let ys = [Jet2y::variable(y[0], 0), Jet2y::variable(y[1], 1)];
        let t = self.expr.f2(xs, ys);
        let mut g = zero_mat();
        for i in 0..DIM {
            for j in 0..DIM {
                let mut e = [0u8; 4];
                e[i] += 1;
                e[j] += 1;
                g[i][j] = 0.5 * t.derivative(e);
            }
        }
        Ok(g)
    }

    fn norm_sq_dx(&self, x: &Point, y: &Vector) -> Result<(f64, Vector)> {
        require_nonzero(y)?;
        let xs = [Jet1x::variable(x[0], 0), Jet1x::variable(x[1], 1)];
        let ys = [Jet1x::constant(y[0]), Jet1x::constant(y[1])];
        let t = self.expr.f2(xs, ys);
        Ok((t.c[0], [t.derivative([1, 0, 0, 0]), t.derivative([0, 1, 0, 0])]))
    }

    fn base_step(&self) -> f64 {
        self.step
    }

    fn angular_nodes(&self) -> usize {
        self.quadrature
    }
}

fn r2<S: Scalar>(y: &[S; DIM]) -> S {
    y[0] * y[0] + y[1] * y[1]
}

/// `F^2 = |y|^2`.
#[derive(Debug, Clone, Copy)]
pub struct Euclidean;

impl Expression for Euclidean {
    fn label(&self) -> String {
        "euclidean".into()
    }
    fn f2<S: Scalar>(&self, _x: [S; DIM], y: [S; DIM]) -> S {
        r2(&y)
    }
}

/// `F^2 = a y1^2 + b y2^2`.
#[derive(Debug, Clone, Copy)]
pub struct RiemannianDiag {
    pub a: f64,
    pub b: f64,
}

impl RiemannianDiag {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::Config(format!("riemannian_diag needs a, b > 0 (got {a}, {b})")));
        }
        Ok(RiemannianDiag { a, b })
    }
}

impl Expression for RiemannianDiag {
    fn label(&self) -> String {
        format!("riemannian_diag:{},{}", self.a, self.b)
    }
    fn f2<S: Scalar>(&self, _x: [S; DIM], y: [S; DIM]) -> S {
        y[0] * y[0] * self.a + y[1] * y[1] * self.b
    }
}

/// `F^2 = exp(2 a cos x1 cos x2) |y|^2`.
#[derive(Debug, Clone, Copy)]
pub struct RiemannianConformal {
    pub a: f64,
}

impl RiemannianConformal {
    pub fn new(a: f64) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::Config(format!("riemannian_conformal needs finite a (got {a})")));
        }
        Ok(RiemannianConformal { a })
    }

    /// Conformal factor exponent `phi = a cos x1 cos x2`.
    pub fn phi(&self, x: &Point) -> f64 {
        self.a * x[0].cos() * x[1].cos()
    }
}

impl Expression for RiemannianConformal {
    fn label(&self) -> String {
        format!("riemannian_conformal:{}", self.a)
    }
    fn f2<S: Scalar>(&self, x: [S; DIM], y: [S; DIM]) -> S {
        (x[0].cos() * x[1].cos() * (2.0 * self.a)).exp() * r2(&y)
    }
}

/// `F^2 = |y|^2 + eps (y1^4 + y2^4) / |y|^2`, a locally Minkowski norm.
#[derive(Debug, Clone, Copy)]
pub struct Quartic {
    pub eps: f64,
}

impl Quartic {
    /// Rejects `eps` for which the indicatrix loses strong convexity.
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps.is_finite() && eps > -0.5) {
            return Err(Error::Config(format!("quartic needs eps > -1/2 (got {eps})")));
        }
        let q = Quartic { eps };
        let n = Analytic::new(q);
        for k in 0..720 {
            let t = std::f64::consts::PI * k as f64 / 360.0;
            let g = n.metric_raw(&[0.0, 0.0], &[t.cos(), t.sin()])?;
            if cholesky(&g).is_none() {
                return Err(Error::Config(format!("quartic:{eps} is not strongly convex")));
            }
        }
        Ok(q)
    }
}

impl Expression for Quartic {
    fn label(&self) -> String {
        format!("quartic:{}", self.eps)
    }
    fn f2<S: Scalar>(&self, _x: [S; DIM], y: [S; DIM]) -> S {
        let q = r2(&y);
        let y1 = y[0] * y[0];
        let y2 = y[1] * y[1];
        q + (y1 * y1 + y2 * y2) / q * self.eps
    }
}

/// Builds a norm from its parameter list.
pub type NormFactory = fn(&[f64]) -> Result<Arc<dyn FinslerNorm>>;

struct Entry {
    factory: NormFactory,
    arity: usize,
    usage: &'static str,
}

/// Name-keyed catalog of norm constructors.
pub struct NormRegistry {
    entries: BTreeMap<&'static str, Entry>,
}

impl Default for NormRegistry {
    fn default() -> Self {
        Self::with_catalog()
    }
}

fn arity_check(name: &str, params: &[f64], n: usize) -> Result<()> {
    if params.len() != n {
        return Err(Error::Config(format!(
            "{name} takes {n} parameter(s), got {}",
            params.len()
        )));
    }
    Ok(())
}

impl NormRegistry {
    pub fn new() -> Self {
        NormRegistry {
            entries: BTreeMap::new(),
        }
    }

    /// The built-in catalog.
    pub fn with_catalog() -> Self {
        let mut r = Self::new();
        r.register("euclidean", 0, "euclidean", |_| Ok(Arc::new(Analytic::new(Euclidean))));
        r.register("riemannian_diag", 2, "riemannian_diag:a,b", |p| {
            Ok(Arc::new(Analytic::new(RiemannianDiag::new(p[0], p[1])?)))
        });
        r.register("riemannian_conformal", 1, "riemannian_conformal:a", |p| {
            Ok(Arc::new(Analytic::new(RiemannianConformal::new(p[0])?)))
        });
        r.register("quartic", 1, "quartic:eps", |p| {
            Ok(Arc::new(Analytic::new(Quartic::new(p[0])?)))
        });
        r
    }

    pub fn register(&mut self, name: &'static str, arity: usize, usage: &'static str, factory: NormFactory) {
        self.entries.insert(name, Entry { factory, arity, usage });
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn usage(&self) -> Vec<&'static str> {
        self.entries.values().map(|e| e.usage).collect()
    }

    pub fn build(&self, spec: &NormSpec) -> Result<Arc<dyn FinslerNorm>> {
        let entry = self.entries.get(spec.name.as_str()).ok_or_else(|| {
            Error::Config(format!(
                "unknown norm '{}' (known: {})",
                spec.name,
                self.names().join(", ")
            ))
        })?;
        arity_check(&spec.name, &spec.params, entry.arity)?;
        (entry.factory)(&spec.params)
    }
}

/// Norm selection by catalog name and parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormSpec {
    pub name: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

impl NormSpec {
    /// Parses `name` or `name:p1,p2,...`.
    pub fn parse(s: &str) -> Result<NormSpec> {
        let (name, rest) = match s.split_once(':') {
            Some((n, r)) => (n, Some(r)),
            None => (s, None),
        };
        let params = match rest {
            None => Vec::new(),
            Some(r) => r
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad norm parameter '{p}' in '{s}'")))
                })
                .collect::<Result<Vec<_>>>()?,
        };
        Ok(NormSpec {
            name: name.trim().to_string(),
            params,
        })
    }
}

impl fmt::Display for NormSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        if !self.params.is_empty() {
            let p: Vec<String> = self.params.iter().map(|v| v.to_string()).collect();
            write!(f, ":{}", p.join(","))?;
        }
        Ok(())
    }
}
