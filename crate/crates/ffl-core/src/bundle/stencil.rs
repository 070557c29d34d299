//! Fourth-order centered periodic finite differences along the base axes.
//!
//! Arrays are laid out site-major: entry `s * width + c` holds component `c`
//! at site `s = i * nx + j`, where `x1 = i dx` and `x2 = j dx`.

use rayon::prelude::*;

const D1: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
const D2: [f64; 5] = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];

/// Site index of the neighbor `offset` steps along `axis`.
#[inline]
pub fn neighbor(site: usize, nx: usize, axis: usize, offset: isize) -> usize {
    let (i, j) = (site / nx, site % nx);
    let n = nx as isize;
    if axis == 0 {
        (((i as isize + offset).rem_euclid(n)) as usize) * nx + j
    } else {
        i * nx + ((j as isize + offset).rem_euclid(n)) as usize
    }
}

fn apply(weights: &[f64; 5], data: &[f64], nx: usize, width: usize, axis: usize, scale: f64) -> Vec<f64> {
    let nsites = nx * nx;
    assert_eq!(data.len(), nsites * width);
    let mut out = vec![0.0; data.len()];
    out.par_chunks_mut(width).enumerate().for_each(|(s, chunk)| {
        let nb: [usize; 5] = std::array::from_fn(|o| neighbor(s, nx, axis, o as isize - 2));
        for (c, o_val) in chunk.iter_mut().enumerate() {
            let mut acc = 0.0;
            for o in 0..5 {
                if weights[o] != 0.0 {
                    acc += weights[o] * data[nb[o] * width + c];
                }
            }
            *o_val = acc * scale;
        }
    });
    out
}

/// First derivative along `axis`.
pub fn d1(data: &[f64], nx: usize, width: usize, axis: usize, dx: f64) -> Vec<f64> {
    apply(&D1, data, nx, width, axis, 1.0 / dx)
}

/// Second derivative along `axis` (five-point stencil).
pub fn d2(data: &[f64], nx: usize, width: usize, axis: usize, dx: f64) -> Vec<f64> {
    apply(&D2, data, nx, width, axis, 1.0 / (dx * dx))
}

/// Mixed derivative `d_{x1} d_{x2}` as the composition of first differences.
pub fn d12(data: &[f64], nx: usize, width: usize, dx: f64) -> Vec<f64> {
    d1(&d1(data, nx, width, 1, dx), nx, width, 0, dx)
}

/// First derivative of a scalar field at one site.
pub fn d1_at(data: &[f64], nx: usize, site: usize, axis: usize, dx: f64) -> f64 {
    let mut acc = 0.0;
    for o in 0..5 {
        if D1[o] != 0.0 {
            acc += D1[o] * data[neighbor(site, nx, axis, o as isize - 2)];
        }
    }
    acc / dx
}
