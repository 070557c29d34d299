//! Run configuration read from TOML. Every physical parameter lives in the
//! file; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bundle::TorusGrid;
use crate::error::{Error, Result};
use crate::norm::NormSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    #[serde(rename = "T")]
    pub t_final: f64,
    pub dt: f64,
    /// Steps between consecutive snapshots.
    pub snap_every: usize,
}

impl TimeSpec {
    /// Number of steps `T / dt`, which must be an integer.
    pub fn steps(&self) -> Result<usize> {
        let n = self.t_final / self.dt;
        let r = n.round();
        if (n - r).abs() > 1e-9 * n.max(1.0) || r < 1.0 {
            return Err(Error::Config(format!(
                "T = {} is not a positive integer multiple of dt = {}",
                self.t_final, self.dt
            )));
        }
        Ok(r as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!("T must be positive, got {}", self.t_final)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.snap_every == 0 {
            return Err(Error::Config("snap_every must be at least 1".into()));
        }
        let n = self.steps()?;
        if n % self.snap_every != 0 {
            return Err(Error::Config(format!(
                "snap_every = {} does not divide the {n} steps",
                self.snap_every
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatSpec {
    pub u0: String,
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Gradient mask threshold relative to `max |Du|`.
    pub delta_grad: f64,
    /// Largest admissible `|S|` on the initial field.
    pub s_gate: f64,
    /// Factor in the discretization slack of the Harnack checks.
    pub harnack_slack: f64,
    /// Run anyway (with a warning) when the S-curvature gate fails.
    #[serde(default)]
    pub allow_nonzero_s: bool,
}

/// Optional regularization of the flow stepper.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    /// Highest angular mode kept in each Ricci increment (`2` keeps the
    /// Riemannian subspace).
    pub angular_modes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub seed: u64,
    pub norm: NormSpec,
    pub grid: TorusGrid,
    pub time: TimeSpec,
    pub heat: HeatSpec,
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowSpec>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let c: RunConfig = toml::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.time.validate()?;
        let t = &self.tolerances;
        if !(t.delta_grad > 0.0 && t.delta_grad < 1.0) {
            return Err(Error::Config(format!(
                "delta_grad must lie in (0, 1), got {}",
                t.delta_grad
            )));
        }
        if !(t.s_gate > 0.0) {
            return Err(Error::Config(format!("s_gate must be positive, got {}", t.s_gate)));
        }
        if let Some(f) = &self.flow {
            if f.angular_modes >= self.grid.ntheta / 2 {
                return Err(Error::Config(format!(
                    "angular_modes = {} must be below ntheta / 2 = {}",
                    f.angular_modes,
                    self.grid.ntheta / 2
                )));
            }
        }
        if !(t.harnack_slack >= 0.0 && t.harnack_slack.is_finite()) {
            return Err(Error::Config(format!(
                "harnack_slack must be finite and >= 0, got {}",
                t.harnack_slack
            )));
        }
        Ok(())
    }
}
