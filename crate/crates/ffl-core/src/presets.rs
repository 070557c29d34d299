//! Named scalar profiles on the torus: initial data `u0 = 2 + A f(x)` for the
//! heat equation and the test-function catalog for weak-form residuals.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::bundle::TorusGrid;
use crate::error::{Error, Result};
use crate::norm::Point;

/// A smooth periodic function on the chart square.
pub trait Profile: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &str;
    fn eval(&self, x: &Point) -> f64;
    /// Upper bound on `|f|`, used to validate positivity of `2 + A f`.
    fn sup(&self) -> f64;
}

/// Profile defined by a plain function pointer.
#[derive(Clone, Copy, Debug)]
pub struct FnProfile {
    pub name: &'static str,
    pub f: fn(&Point) -> f64,
    pub sup: f64,
}

impl Profile for FnProfile {
    fn name(&self) -> &str {
        self.name
    }
    fn eval(&self, x: &Point) -> f64 {
        (self.f)(x)
    }
    fn sup(&self) -> f64 {
        self.sup
    }
}

/// Sharp periodic bump centered at `(pi, pi)`.
fn bump(x: &Point) -> f64 {
    (8.0 * ((x[0] - PI).cos() + (x[1] - PI).cos() - 2.0)).exp()
}

/// Name-keyed profile catalog.
#[derive(Clone, Debug, Default)]
pub struct ProfileRegistry {
    entries: BTreeMap<String, Arc<dyn Profile>>,
}

impl ProfileRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, p: Arc<dyn Profile>) {
        self.entries.insert(p.name().to_string(), p);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Profile>> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| Error::Config(format!("unknown profile `{name}` (known: {})", self.names().join(", "))))
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }

    pub fn all(&self) -> Vec<Arc<dyn Profile>> {
        self.entries.values().cloned().collect()
    }

    /// Shapes `f` for initial data `2 + A f`.
    pub fn initial_data() -> Self {
        let mut r = Self::new();
        let items: [(&'static str, fn(&Point) -> f64); 5] = [
            ("cos", |x| x[0].cos()),
            ("sin", |x| x[0].sin()),
            ("sincos", |x| x[0].sin() * x[1].cos()),
            ("coscos", |x| x[0].cos() * x[1].cos()),
            ("mixed", |x| {
                (x[0].sin() + 0.5 * x[1].cos() + 0.25 * (x[0] + x[1]).sin()) / 1.75
            }),
        ];
        for (name, f) in items {
            r.register(Arc::new(FnProfile { name, f, sup: 1.0 }));
        }
        r
    }

    /// Test functions `phi` for the distributional heat equation.
    pub fn test_functions() -> Self {
        let mut r = Self::new();
        let items: [(&'static str, fn(&Point) -> f64); 5] = [
            ("one", |_| 1.0),
            ("cos1", |x| x[0].cos()),
            ("sin2", |x| x[1].sin()),
            ("coscos", |x| x[0].cos() * x[1].cos()),
            ("bump", bump),
        ];
        for (name, f) in items {
            r.register(Arc::new(FnProfile { name, f, sup: 1.0 }));
        }
        r
    }
}

/// Samples a profile on the lattice.
pub fn sample(p: &dyn Profile, grid: &TorusGrid) -> Vec<f64> {
    (0..grid.n_sites()).map(|s| p.eval(&grid.point(s))).collect()
}

/// `u0 = 2 + A f` on the lattice; rejects amplitudes that lose positivity.
pub fn initial_data(name: &str, amplitude: f64, grid: &TorusGrid) -> Result<Vec<f64>> {
    let p = ProfileRegistry::initial_data().get(name)?;
    if !(amplitude.is_finite() && amplitude.abs() * p.sup() < 2.0) {
        return Err(Error::Config(format!(
            "amplitude {amplitude} makes 2 + A*{name} non-positive"
        )));
    }
    Ok(sample(p.as_ref(), grid)
        .into_iter()
        .map(|f| 2.0 + amplitude * f)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalogs_are_complete() {
        assert_eq!(
            ProfileRegistry::test_functions().names(),
            ["bump", "cos1", "coscos", "one", "sin2"]
        );
        assert!(ProfileRegistry::initial_data().get("nope").is_err());
        let g = TorusGrid::new(16, 16).unwrap();
        assert!(initial_data("cos", 2.5, &g).is_err());
        let u = initial_data("cos", 1.0, &g).unwrap();
        assert_eq!(u[0], 3.0);
        assert!(u.iter().all(|v| *v >= 1.0 - 1e-15));
    }

    #[test]
    fn bump_peaks_at_center() {
        assert!((bump(&[PI, PI]) - 1.0).abs() < 1e-15);
        assert!(bump(&[0.0, 0.0]) < 1e-13);
    }
}
