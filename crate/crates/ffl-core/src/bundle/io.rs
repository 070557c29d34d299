//! Flat little-endian snapshot formats and CSV exporters.
//!
//! Field layout: `N_x: u64`, `N_theta: u64`, `time: f64`, then
//! `h[i, j, k]` as `f64` in row-major `(i, j, k)` order.
//!
//! Scalar layout: `N_x: u64`, `time: f64`, then `u[i, j]` and
//! `sigma[i, j]`, each as `N_x^2` `f64` values in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{SphereBundleField, TorusGrid};
use crate::error::{Error, Result};

pub fn write_field<W: Write>(mut w: W, field: &SphereBundleField) -> Result<()> {
    w.write_all(&(field.grid.nx as u64).to_le_bytes())?;
    w.write_all(&(field.grid.ntheta as u64).to_le_bytes())?;
    w.write_all(&field.time.to_le_bytes())?;
    for v in &field.h {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; n * 8];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

pub fn read_field<R: Read>(mut r: R) -> Result<SphereBundleField> {
    let nx = read_u64(&mut r)? as usize;
    let nt = read_u64(&mut r)? as usize;
    let time = read_f64(&mut r)?;
    let grid = TorusGrid::new(nx, nt).map_err(|e| Error::Format(format!("bad field header: {e}")))?;
    let h = read_f64s(&mut r, grid.n_nodes())?;
    SphereBundleField::new(grid, h, time)
}

pub fn save_field(path: &Path, field: &SphereBundleField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_field(&mut w, field)?;
    w.flush()?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<SphereBundleField> {
    read_field(BufReader::new(File::open(path)?))
}

/// Heat solution and measure density at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarSnapshot {
    pub nx: usize,
    pub time: f64,
    pub u: Vec<f64>,
    pub sigma: Vec<f64>,
}

pub fn write_scalars<W: Write>(mut w: W, s: &ScalarSnapshot) -> Result<()> {
    w.write_all(&(s.nx as u64).to_le_bytes())?;
    w.write_all(&s.time.to_le_bytes())?;
    for v in s.u.iter().chain(s.sigma.iter()) {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_scalars<R: Read>(mut r: R) -> Result<ScalarSnapshot> {
    let nx = read_u64(&mut r)? as usize;
    if nx == 0 || nx > 1 << 16 {
        return Err(Error::Format(format!("bad scalar header nx = {nx}")));
    }
    let time = read_f64(&mut r)?;
    let u = read_f64s(&mut r, nx * nx)?;
    let sigma = read_f64s(&mut r, nx * nx)?;
    Ok(ScalarSnapshot { nx, time, u, sigma })
}

pub fn save_scalars(path: &Path, s: &ScalarSnapshot) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_scalars(&mut w, s)?;
    w.flush()?;
    Ok(())
}

pub fn load_scalars(path: &Path) -> Result<ScalarSnapshot> {
    read_scalars(BufReader::new(File::open(path)?))
}

/// CSV with columns `x1,x2,theta,h`.
pub fn write_field_csv<W: Write>(mut w: W, field: &SphereBundleField) -> Result<()> {
    let g = field.grid;
    writeln!(w, "x1,x2,theta,h")?;
    for s in 0..g.n_sites() {
        let x = g.point(s);
        for k in 0..g.ntheta {
            writeln!(w, "{},{},{},{}", x[0], x[1], g.theta(k), field.h[g.node(s, k)])?;
        }
    }
    Ok(())
}

/// CSV with columns `x1,x2,sigma`.
pub fn write_sigma_csv<W: Write>(mut w: W, grid: &TorusGrid, sigma: &[f64]) -> Result<()> {
    writeln!(w, "x1,x2,sigma")?;
    for (s, v) in sigma.iter().enumerate() {
        let x = grid.point(s);
        writeln!(w, "{},{},{}", x[0], x[1], v)?;
    }
    Ok(())
}
