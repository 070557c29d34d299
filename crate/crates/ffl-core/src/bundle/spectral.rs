//! Fourier differentiation and trigonometric barycentric interpolation on the
//! uniform angular grid.
//!
//! For even `N` the interpolation space is spanned by `1, cos(k theta),
//! sin(k theta)` for `k < N/2` plus `cos(N theta / 2)`. Odd derivatives of
//! the Nyquist mode vanish at the nodes and are dropped; even ones are kept.

use std::f64::consts::PI;

/// Where an angle falls relative to the grid.
#[derive(Clone, Debug)]
pub enum Weights {
    /// Exactly on node `k`.
    Node(usize),
    /// Normalized barycentric weights, one per node.
    Off(Vec<f64>),
}

impl Weights {
    /// Interpolates one periodic sample row.
    pub fn apply(&self, row: &[f64]) -> f64 {
        match self {
            Weights::Node(k) => row[*k],
            Weights::Off(w) => w.iter().zip(row).map(|(a, b)| a * b).sum(),
        }
    }
}

/// Dense circulant differentiation operators of orders 1 to 4.
#[derive(Clone, Debug)]
pub struct AngularOps {
    n: usize,
    /// `kernel[m-1][d]`: entry of `D^m` at offset `d = (row - col) mod n`.
    kernel: [Vec<f64>; 4],
}

impl AngularOps {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2 && n.is_multiple_of(2), "angular grid must be even");
        let dth = 2.0 * PI / n as f64;
        let half = n / 2;
        let mut kernel: [Vec<f64>; 4] = Default::default();
        for (mi, col) in kernel.iter_mut().enumerate() {
            let m = mi + 1;
            *col = (0..n)
                .map(|d| {
                    let s = d as f64 * dth;
                    let mut acc = 0.0;
                    for w in 1..half {
                        let wf = w as f64;
                        // 2 Re((i w)^m e^{i w s}) summed over +w and -w
                        let term = match m % 4 {
                            1 => -wf * (wf * s).sin(),
                            2 => -wf.powi(2) * (wf * s).cos(),
                            3 => wf.powi(3) * (wf * s).sin(),
                            _ => wf.powi(4) * (wf * s).cos(),
                        };
                        acc += 2.0 * term;
                    }
                    if m % 2 == 0 {
                        let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
                        let hf = half as f64;
                        let nyq = if m == 2 { -hf * hf } else { hf.powi(4) };
                        acc += nyq * sign;
                    }
                    acc / n as f64
                })
                .collect();
        }
        AngularOps { n, kernel }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `out = D^m row` for `m` in `1..=4`; `m = 0` copies.
    pub fn derivative_into(&self, m: usize, row: &[f64], out: &mut [f64]) {
        let n = self.n;
        if m == 0 {
            out.copy_from_slice(row);
            return;
        }
        let k = &self.kernel[m - 1];
        for (j, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (c, v) in row.iter().enumerate() {
                acc += k[(j + n - c) % n] * v;
            }
            *o = acc;
        }
    }

    pub fn derivative(&self, m: usize, row: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.derivative_into(m, row, &mut out);
        out
    }

    /// Barycentric weights for evaluating the interpolant at `theta`.
    pub fn weights(&self, theta: f64) -> Weights {
        let n = self.n;
        let dth = 2.0 * PI / n as f64;
        let t = theta.rem_euclid(2.0 * PI);
        let nearest = (t / dth).round() as usize % n;
        let diff = t - nearest as f64 * dth;
        let diff = if diff > PI { diff - 2.0 * PI } else { diff };
        if diff.abs() < 1e-13 {
            return Weights::Node(nearest);
        }
        let mut w: Vec<f64> = (0..n)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign / ((t - k as f64 * dth) / 2.0).tan()
            })
            .collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        Weights::Off(w)
    }

    pub fn interpolate(&self, row: &[f64], theta: f64) -> f64 {
        self.weights(theta).apply(row)
    }
}

/// Orthogonal projection of a periodic row onto the angular modes
/// `|w| <= max_mode`, applied as a circulant kernel.
#[derive(Clone, Debug)]
pub struct AngularFilter {
    pub max_mode: usize,
    kernel: Vec<f64>,
}

impl AngularFilter {
    /// Requires `max_mode < n / 2`, so the Nyquist mode is always removed.
    pub fn new(n: usize, max_mode: usize) -> Option<Self> {
        if !n.is_multiple_of(2) || max_mode >= n / 2 {
            return None;
        }
        let dth = 2.0 * PI / n as f64;
        let kernel = (0..n)
            .map(|d| {
                let s = d as f64 * dth;
                (1.0 + 2.0 * (1..=max_mode).map(|w| (w as f64 * s).cos()).sum::<f64>()) / n as f64
            })
            .collect();
        Some(AngularFilter { max_mode, kernel })
    }

    pub fn apply_into(&self, row: &[f64], out: &mut [f64]) {
        let n = self.kernel.len();
        for (j, o) in out.iter_mut().enumerate() {
            *o = row
                .iter()
                .enumerate()
                .map(|(c, v)| self.kernel[(j + n - c) % n] * v)
                .sum();
        }
    }
}
