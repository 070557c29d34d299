//! Finsler-Ricci flow `dF^2/dt = -2 Ric` on sampled fields and the heat
//! equation `du/dt = Delta u` for the Busemann-Hausdorff measure of the current
//! norm.
//!
//! A coupled step advances the field by explicit midpoint RK2, recomputes the
//! measure, then takes an explicit Euler heat step. Steps larger than the
//! stability limit [`dt_max`] are split into equal substeps.

pub mod residuals;
pub mod store;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{laplacian, GridContext, VectorFieldOnMu};
use crate::bundle::spectral::{AngularFilter, AngularOps};
use crate::bundle::{sample_norm, FieldNorm, SphereBundleField, TorusGrid};
use crate::config::{RunConfig, TimeSpec};
use crate::error::{Error, Result};
use crate::geometry::{ricci_nodes, RicciBounds, RicciGrid};
use crate::measure::{s_curvature_field_max, MeasureDensity};
use crate::norm::{FinslerNorm, NormRegistry};
use crate::presets;
use crate::tensor::Vector;

/// Static runs keep the initial field; coupled runs evolve it by the flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Static,
    Coupled,
}

/// Courant factor in [`dt_max`].
pub const CFL: f64 = 0.2;

/// Extreme eigenvalues `(min lambda_min, min lambda_min / lambda_max)` of the
/// reconstructed metric over all nodes.
pub fn metric_range(field: &SphereBundleField) -> (f64, f64) {
    let n = field.grid.ntheta;
    let ops = AngularOps::new(n);
    (0..field.grid.n_sites())
        .into_par_iter()
        .map(|s| {
            let row = field.row(s);
            let d1 = ops.derivative(1, row);
            let d2 = ops.derivative(2, row);
            (0..n).fold((f64::INFINITY, f64::INFINITY), |(lo, ratio), k| {
                let tr = 2.0 * row[k] + 0.5 * d2[k];
                // (g_rr - g_tt)^2 + 4 g_rt^2 without cancellation
                let disc = (0.5 * d2[k]).hypot(d1[k]);
                let (a, b) = (0.5 * (tr - disc), 0.5 * (tr + disc));
                (lo.min(a), ratio.min(a / b))
            })
        })
        .reduce(|| (f64::INFINITY, f64::INFINITY), |a, b| (a.0.min(b.0), a.1.min(b.1)))
}

/// `dt_max = 0.2 dx^2 min(1, lambda_min / lambda_max, lambda_min)`.
pub fn dt_max(field: &SphereBundleField) -> f64 {
    let dx = field.grid.dx();
    let (lo, ratio) = metric_range(field);
    CFL * dx * dx * lo.min(ratio).min(1.0)
}

fn degeneration(field: &SphereBundleField, time: f64) -> Result<()> {
    let n = field.grid.ntheta;
    if let Some((node, v)) = field.h.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::FlowDegeneration {
            time,
            site: node / n,
            theta_index: node % n,
            detail: format!("F^2 = {v:e}"),
        });
    }
    if let Some((site, k, ev)) = field.convexity_violation() {
        return Err(Error::FlowDegeneration {
            time,
            site,
            theta_index: k,
            detail: format!("g lost positive definiteness (min eigenvalue {ev:e})"),
        });
    }
    Ok(())
}

fn advance(
    field: &SphereBundleField,
    rho: &[f64],
    dt: f64,
    time: f64,
    filter: Option<&AngularFilter>,
) -> SphereBundleField {
    let n = field.grid.ntheta;
    let mut h = field.h.clone();
    h.par_chunks_mut(n)
        .zip(rho.par_chunks(n))
        .for_each(|(hs, rs)| match filter {
            Some(f) => {
                let mut low = vec![0.0; n];
                f.apply_into(rs, &mut low);
                hs.iter_mut().zip(&low).for_each(|(h, r)| *h -= 2.0 * dt * r);
            }
            None => hs.iter_mut().zip(rs).for_each(|(h, r)| *h -= 2.0 * dt * r),
        });
    SphereBundleField {
        grid: field.grid,
        h,
        time,
    }
}

/// One midpoint step `h <- h - 2 dt Ric(h - dt Ric(h))` at every node,
/// followed by the positivity and strong-convexity checks.
///
/// The scalar flow is backward-parabolic in the fiber for non-quadratic
/// perturbations, so roundoff in high angular modes grows at a rate that
/// scales with the grid. `filter`, when given, restricts every Ricci
/// increment to the retained angular modes; `max_mode = 2` keeps exactly the
/// quadratic (Riemannian) subspace.
pub fn frf_step(field: &SphereBundleField, dt: f64, filter: Option<&AngularFilter>) -> Result<SphereBundleField> {
    let t0 = field.time;
    let rho0 = ricci_nodes(&FieldNorm::new(Arc::new(field.clone())))?;
    let mid = advance(field, &rho0, 0.5 * dt, t0 + 0.5 * dt, filter);
    degeneration(&mid, mid.time)?;
    let rho_mid = ricci_nodes(&FieldNorm::new(Arc::new(mid)))?;
    let next = advance(field, &rho_mid, dt, t0 + dt, filter);
    degeneration(&next, next.time)?;
    Ok(next)
}

/// One explicit Euler step `u <- u + dt Delta u`; returns the new values and
/// the gradient used (a warm start for the next step).
pub fn heat_step(
    ctx: &GridContext,
    u: &[f64],
    dt: f64,
    time: f64,
    guess: Option<&[Vector]>,
) -> Result<(Vec<f64>, VectorFieldOnMu)> {
    let (lap, grad) = laplacian(ctx, u, guess)?;
    let next: Vec<f64> = u.iter().zip(&lap).map(|(a, b)| a + dt * b).collect();
    if let Some((site, v)) = next.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::Positivity {
            time: time + dt,
            site,
            value: *v,
        });
    }
    Ok((next, grad))
}

/// Evolving state of a run.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub field: Arc<SphereBundleField>,
    pub measure: Arc<MeasureDensity>,
    pub u: Vec<f64>,
    pub t: f64,
    guess: Option<Vec<Vector>>,
}

impl FlowState {
    pub fn new(field: SphereBundleField, u: Vec<f64>) -> Result<FlowState> {
        let grid = field.grid;
        if u.len() != grid.n_sites() {
            return Err(Error::Format(format!(
                "u has {} values, grid needs {}",
                u.len(),
                grid.n_sites()
            )));
        }
        let t = field.time;
        let fnorm = FieldNorm::new(Arc::new(field));
        let measure = Arc::new(MeasureDensity::compute(&fnorm, &grid)?);
        Ok(FlowState {
            field: fnorm.field().clone(),
            measure,
            u,
            t,
            guess: None,
        })
    }

    /// Heat step on the current field and measure.
    fn heat(&mut self, delta_grad: f64, dt: f64) -> Result<()> {
        let fnorm = FieldNorm::new(self.field.clone());
        let ctx = GridContext {
            grid: self.field.grid,
            norm: &fnorm,
            measure: &self.measure,
            delta_grad,
        };
        let (u, grad) = heat_step(&ctx, &self.u, dt, self.t, self.guess.as_deref())?;
        self.u = u;
        self.guess = Some(grad.v);
        Ok(())
    }

    /// Flow, then measure, then heat.
    fn coupled(&mut self, delta_grad: f64, dt: f64, filter: Option<&AngularFilter>) -> Result<()> {
        let next = frf_step(&self.field, dt, filter)?;
        let grid = next.grid;
        let fnorm = FieldNorm::new(Arc::new(next));
        self.measure = Arc::new(MeasureDensity::compute(&fnorm, &grid)?);
        self.field = fnorm.field().clone();
        self.heat(delta_grad, dt)?;
        self.t += dt;
        Ok(())
    }
}

/// State recorded at a snapshot time.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub index: usize,
    pub t: f64,
    pub field: Arc<SphereBundleField>,
    pub measure: Arc<MeasureDensity>,
    pub u: Vec<f64>,
    pub ricci: Arc<RicciGrid>,
    pub bounds: RicciBounds,
}

impl Snapshot {
    pub fn min_u(&self) -> f64 {
        self.u.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_u(&self) -> f64 {
        self.u.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `\int u dm`.
    pub fn mass(&self) -> f64 {
        self.measure.integrate(&self.u)
    }

    pub fn norm(&self) -> FieldNorm {
        FieldNorm::new(self.field.clone())
    }
}

/// Everything needed to start a run.
#[derive(Clone, Debug)]
pub struct RunSpec {
    pub field: SphereBundleField,
    pub u0: Vec<f64>,
    pub time: TimeSpec,
    pub mode: Mode,
    pub delta_grad: f64,
    pub s_gate: f64,
    pub allow_nonzero_s: bool,
    /// Highest angular mode kept in the flow increments, if filtered.
    pub angular_modes: Option<usize>,
}

impl RunSpec {
    /// Samples the configured norm and initial data.
    pub fn from_config(cfg: &RunConfig, mode: Mode) -> Result<RunSpec> {
        cfg.validate()?;
        let norm: Arc<dyn FinslerNorm> = NormRegistry::with_catalog().build(&cfg.norm)?;
        let field = sample_norm(norm.as_ref(), cfg.grid)?;
        let u0 = presets::initial_data(&cfg.heat.u0, cfg.heat.amplitude, &cfg.grid)?;
        Ok(RunSpec {
            field,
            u0,
            time: cfg.time.clone(),
            mode,
            delta_grad: cfg.tolerances.delta_grad,
            s_gate: cfg.tolerances.s_gate,
            allow_nonzero_s: cfg.tolerances.allow_nonzero_s,
            angular_modes: cfg.flow.as_ref().map(|f| f.angular_modes),
        })
    }
}

/// Ordered snapshots of one run.
#[derive(Clone, Debug)]
pub struct FlowTrajectory {
    pub grid: TorusGrid,
    pub mode: Mode,
    pub time: TimeSpec,
    /// Substeps per configured step at each step (coupled runs adapt).
    pub max_substeps: usize,
    pub delta_grad: f64,
    /// `max |S|` of the initial field.
    pub s_max: f64,
    pub snapshots: Vec<Snapshot>,
}

impl FlowTrajectory {
    /// Spacing `snap_every * dt` between snapshots.
    pub fn snap_dt(&self) -> f64 {
        self.time.dt * self.time.snap_every as f64
    }

    /// Envelope of the per-snapshot Ricci bounds.
    pub fn bounds(&self) -> RicciBounds {
        self.snapshots[1..]
            .iter()
            .fold(self.snapshots[0].bounds, |b, s| b.merge(&s.bounds))
    }
}

/// Builds a snapshot from the state, reusing the previous Ricci data on
/// static runs.
fn snapshot(index: usize, state: &FlowState, reuse: Option<&Snapshot>) -> Result<Snapshot> {
    let ricci = match reuse {
        Some(prev) => prev.ricci.clone(),
        None => Arc::new(RicciGrid::compute(&FieldNorm::new(state.field.clone()))?),
    };
    Ok(Snapshot {
        index,
        t: state.t,
        field: state.field.clone(),
        measure: state.measure.clone(),
        u: state.u.clone(),
        bounds: ricci.bounds(),
        ricci,
    })
}

/// Runs the heat equation (and, for coupled runs, the flow) to `T`, handing
/// every snapshot to `sink` as soon as it exists so that a failing run still
/// leaves its prefix behind.
pub fn run(spec: RunSpec, sink: &mut dyn FnMut(&Snapshot) -> Result<()>) -> Result<FlowTrajectory> {
    spec.time.validate()?;
    let steps = spec.time.steps()?;
    let grid = spec.field.grid;
    let filter = match spec.angular_modes {
        Some(m) => Some(AngularFilter::new(grid.ntheta, m).ok_or_else(|| {
            Error::Config(format!(
                "angular_modes = {m} must be below ntheta / 2 = {}",
                grid.ntheta / 2
            ))
        })?),
        None => None,
    };
    let mut state = FlowState::new(spec.field, spec.u0)?;
    let fnorm = FieldNorm::new(state.field.clone());
    let s_max = s_curvature_field_max(&fnorm, &state.measure)?;
    if s_max > spec.s_gate {
        if spec.allow_nonzero_s {
            log::warn!(
                "max |S| = {s_max:e} exceeds the gate {:e}; continuing as configured",
                spec.s_gate
            );
        } else {
            return Err(Error::SCurvatureGate {
                max_s: s_max,
                tolerance: spec.s_gate,
            });
        }
    }
    let dt = spec.time.dt;
    let mut snaps: Vec<Snapshot> = Vec::new();
    let first = snapshot(0, &state, None)?;
    sink(&first)?;
    snaps.push(first);
    let mut max_sub = 1;
    let static_sub = (dt / dt_max(&state.field)).ceil().max(1.0) as usize;
    for step in 1..=steps {
        let sub = match spec.mode {
            Mode::Static => static_sub,
            Mode::Coupled => (dt / dt_max(&state.field)).ceil().max(1.0) as usize,
        };
        max_sub = max_sub.max(sub);
        let h = dt / sub as f64;
        for _ in 0..sub {
            match spec.mode {
                Mode::Static => {
                    state.heat(spec.delta_grad, h)?;
                    state.t += h;
                }
                Mode::Coupled => state.coupled(spec.delta_grad, h, filter.as_ref())?,
            }
        }
        // pin snapshot times to the lattice k * dt
        state.t = step as f64 * dt;
        if step % spec.time.snap_every == 0 {
            let reuse = match spec.mode {
                Mode::Static => snaps.last(),
                Mode::Coupled => None,
            };
            let s = snapshot(snaps.len(), &state, reuse)?;
            sink(&s)?;
            snaps.push(s);
        }
        log::debug!("step {step}/{steps} t = {:.6} substeps {sub}", state.t);
    }
    Ok(FlowTrajectory {
        grid,
        mode: spec.mode,
        time: spec.time,
        max_substeps: max_sub,
        delta_grad: spec.delta_grad,
        s_max,
        snapshots: snaps,
    })
}
