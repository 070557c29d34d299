//! On-disk trajectories: a directory with `manifest.json`, one binary field
//! per distinct field state, one binary scalar file per snapshot, and
//! `summary.csv`. Every file carries the tool version and the resolved
//! configuration. The manifest is rewritten after each snapshot, so an
//! interrupted run leaves a readable prefix marked `partial`.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{FlowTrajectory, Mode, Snapshot};
use crate::bundle::io::{load_field, load_scalars, save_field, save_scalars, ScalarSnapshot};
use crate::bundle::FieldNorm;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::geometry::{RicciBounds, RicciGrid};
use crate::measure::MeasureDensity;

pub const MANIFEST: &str = "manifest.json";
pub const SUMMARY: &str = "summary.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Running,
    Complete,
    Partial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub index: usize,
    pub t: f64,
    pub field: String,
    pub scalars: String,
    pub bounds: RicciBounds,
    pub min_u: f64,
    pub max_u: f64,
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub mode: Mode,
    pub status: Status,
    pub error: Option<String>,
    pub s_max: Option<f64>,
    pub max_substeps: Option<usize>,
    pub config: RunConfig,
    pub snapshots: Vec<SnapshotEntry>,
}

/// `# version` and `# config` comment lines shared by CSV outputs.
pub fn csv_header(config: &RunConfig) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    format!("# ffl {}\n# config {json}\n", crate::VERSION)
}

/// Incremental writer used as a run sink.
#[derive(Debug)]
pub struct TrajectoryWriter {
    dir: PathBuf,
    manifest: Manifest,
}

impl TrajectoryWriter {
    pub fn create(dir: &Path, config: &RunConfig, mode: Mode) -> Result<TrajectoryWriter> {
        fs::create_dir_all(dir)?;
        let mut summary = File::create(dir.join(SUMMARY))?;
        summary.write_all(csv_header(config).as_bytes())?;
        summary.write_all(b"t,min_u,max_u,mass,K1,K2\n")?;
        let w = TrajectoryWriter {
            dir: dir.to_path_buf(),
            manifest: Manifest {
                version: crate::VERSION.to_string(),
                mode,
                status: Status::Running,
                error: None,
                s_max: None,
                max_substeps: None,
                config: config.clone(),
                snapshots: vec![],
            },
        };
        w.write_manifest()?;
        Ok(w)
    }

    fn write_manifest(&self) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.manifest)?;
        fs::write(self.dir.join(MANIFEST), text + "\n")?;
        Ok(())
    }

    pub fn record(&mut self, s: &Snapshot) -> Result<()> {
        let field = match (self.manifest.mode, self.manifest.snapshots.first()) {
            (Mode::Static, Some(first)) => first.field.clone(),
            _ => {
                let name = format!("field_{:04}.bin", s.index);
                save_field(&self.dir.join(&name), &s.field)?;
                name
            }
        };
        let scalars = format!("scalars_{:04}.bin", s.index);
        save_scalars(
            &self.dir.join(&scalars),
            &ScalarSnapshot {
                nx: s.field.grid.nx,
                time: s.t,
                u: s.u.clone(),
                sigma: s.measure.sigma.clone(),
            },
        )?;
        let entry = SnapshotEntry {
            index: s.index,
            t: s.t,
            field,
            scalars,
            bounds: s.bounds,
            min_u: s.min_u(),
            max_u: s.max_u(),
            mass: s.mass(),
        };
        let mut csv = OpenOptions::new().append(true).open(self.dir.join(SUMMARY))?;
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            entry.t, entry.min_u, entry.max_u, entry.mass, entry.bounds.k1, entry.bounds.k2
        )?;
        self.manifest.snapshots.push(entry);
        self.write_manifest()
    }

    /// Marks the run complete, or partial with the error message.
    pub fn finish(&mut self, outcome: &Result<FlowTrajectory>) -> Result<()> {
        match outcome {
            Ok(t) => {
                self.manifest.status = Status::Complete;
                self.manifest.s_max = Some(t.s_max);
                self.manifest.max_substeps = Some(t.max_substeps);
            }
            Err(e) => {
                self.manifest.status = Status::Partial;
                self.manifest.error = Some(e.to_string());
            }
        }
        self.write_manifest()
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(dir.join(MANIFEST))
        .map_err(|e| Error::Format(format!("cannot read {}: {e}", dir.join(MANIFEST).display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// Reloads a trajectory; measures and Ricci data are recomputed from the
/// stored fields.
pub fn load_trajectory(dir: &Path) -> Result<(Manifest, FlowTrajectory)> {
    let m = load_manifest(dir)?;
    if m.snapshots.is_empty() {
        return Err(Error::Format(format!("{} holds no snapshots", dir.display())));
    }
    let mut cache: BTreeMap<
        String,
        (
            Arc<crate::bundle::SphereBundleField>,
            Arc<MeasureDensity>,
            Arc<RicciGrid>,
        ),
    > = BTreeMap::new();
    let mut snapshots = Vec::with_capacity(m.snapshots.len());
    for e in &m.snapshots {
        if !cache.contains_key(&e.field) {
            let field = Arc::new(load_field(&dir.join(&e.field))?);
            let norm = FieldNorm::new(field.clone());
            let measure = Arc::new(MeasureDensity::compute(&norm, &field.grid)?);
            let ricci = Arc::new(RicciGrid::compute(&norm)?);
            cache.insert(e.field.clone(), (field, measure, ricci));
        }
        let (field, measure, ricci) = cache[&e.field].clone();
        let sc = load_scalars(&dir.join(&e.scalars))?;
        if sc.nx != field.grid.nx {
            return Err(Error::Format(format!("{} does not match the field lattice", e.scalars)));
        }
        snapshots.push(Snapshot {
            index: e.index,
            t: e.t,
            field,
            measure,
            u: sc.u,
            bounds: e.bounds,
            ricci,
        });
    }
    let traj = FlowTrajectory {
        grid: snapshots[0].field.grid,
        mode: m.mode,
        time: m.config.time.clone(),
        max_substeps: m.max_substeps.unwrap_or(1),
        delta_grad: m.config.tolerances.delta_grad,
        s_max: m.s_max.unwrap_or(f64::NAN),
        snapshots,
    };
    Ok((m, traj))
}
