use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::phase_space::{make_grid, PhysicalParams, SpatialGrid, WaveFunction};
use crate::semiclassical::{EpsPolicy, MAX_HIERARCHY_MEASUREMENTS, MAX_HIERARCHY_ORDER};
use crate::symbols::Region;
use crate::zeno::ProjectorPolicy;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("bad override `{0}`: expected key.path=value")]
    Override(String),
    #[error("override path `{0}` does not exist")]
    UnknownPath(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConfig {
    pub hbar: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Half-width `L` of the periodic box `[-L, L)`.
    pub half_width: f64,
    pub points: usize,
    /// Momentum samples for phase-space dumps.
    pub xi_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateConfig {
    Gaussian { center: f64, width: f64, momentum: f64 },
    DirichletMode { k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl TimeGrid {
    /// `start + k step` up to `stop` inclusive (with a half-step tolerance).
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 0.5).floor() as usize;
        (0..=count).map(|k| self.start + k as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub times: Vec<f64>,
    pub n_list: Vec<usize>,
    pub xi_list: Vec<f64>,
    pub order: usize,
    /// Time grid of the escape sweep.
    pub sweep_times: TimeGrid,
    /// Cutoff widths scanned by `sweep`.
    pub sweep_eps: Vec<f64>,
    /// Phase-space snapshots show `V_N(t) psi` for this `N`, or `U(t) psi` when absent.
    #[serde(default)]
    pub wigner_n: Option<usize>,
}

/// `"auto"` or a positive width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsSetting {
    Value(f64),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoTag {
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProjectorConfig {
    Sharp,
    Mollified { eps: EpsSetting },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
    /// Wall-clock columns and timestamps; off keeps outputs byte-identical across runs.
    #[serde(default)]
    pub record_timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub physical: PhysicalConfig,
    pub region: [f64; 2],
    pub grid: GridConfig,
    pub state: StateConfig,
    pub schedule: ScheduleConfig,
    pub projector: ProjectorConfig,
    pub output: OutputConfig,
    pub seed: u64,
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// Sets `path` (dot separated) in `root` to `raw`, parsed as JSON when possible.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), ConfigError> {
    let (path, raw) = assignment.split_once('=').ok_or_else(|| ConfigError::Override(assignment.into()))?;
    if path.is_empty() {
        return Err(ConfigError::Override(assignment.into()));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    let mut node = root;
    for (depth, key) in keys.iter().enumerate() {
        let last = depth + 1 == keys.len();
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(key.to_string(), value);
                    return Ok(());
                }
                map.get_mut(*key).ok_or_else(|| ConfigError::UnknownPath(path.into()))?
            }
            Value::Array(items) => {
                let i: usize = key.parse().map_err(|_| ConfigError::UnknownPath(path.into()))?;
                let slot = items.get_mut(i).ok_or_else(|| ConfigError::UnknownPath(path.into()))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(ConfigError::UnknownPath(path.into())),
        };
    }
    unreachable!("split always yields at least one key")
}

impl ExperimentConfig {
    pub fn from_json(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut value: Value = serde_json::from_str(text)?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: ExperimentConfig = serde_json::from_value(value)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_json(&text, overrides)
    }

    /// Canonical JSON of the resolved config.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params()?;
        self.region()?;
        let grid = self.grid()?;
        if self.grid.xi_points == 0 || !self.grid.xi_points.is_power_of_two() {
            return Err(invalid(format!("grid.xi_points must be a power of two, got {}", self.grid.xi_points)));
        }
        let s = &self.schedule;
        if s.times.is_empty() || s.times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(invalid("schedule.times must be non-empty, finite and non-negative"));
        }
        if s.n_list.is_empty() || s.n_list[0] == 0 || s.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("schedule.n_list must be strictly increasing positive integers"));
        }
        if s.xi_list.is_empty() || s.xi_list.iter().any(|x| !x.is_finite()) {
            return Err(invalid("schedule.xi_list must be non-empty and finite"));
        }
        if s.order > MAX_HIERARCHY_ORDER {
            return Err(invalid(format!("schedule.order must be at most {MAX_HIERARCHY_ORDER}")));
        }
        let tg = &s.sweep_times;
        if !(tg.step > 0.0 && tg.stop >= tg.start && tg.start >= 0.0 && tg.stop.is_finite()) {
            return Err(invalid("schedule.sweep_times needs 0 <= start <= stop and step > 0"));
        }
        if s.sweep_eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(invalid("schedule.sweep_eps entries must be positive"));
        }
        if s.wigner_n == Some(0) {
            return Err(invalid("schedule.wigner_n must be positive"));
        }
        if let ProjectorConfig::Mollified { eps: EpsSetting::Value(e) } = self.projector {
            if !(e > 0.0 && e.is_finite()) {
                return Err(invalid(format!("projector.eps must be positive or \"auto\", got {e}")));
            }
        }
        if self.output.formats.is_empty() {
            return Err(invalid("output.formats must list at least one format"));
        }
        match self.state {
            StateConfig::Gaussian { width, center, momentum } => {
                if !(width > 0.0 && center.is_finite() && momentum.is_finite()) {
                    return Err(invalid("state width must be positive, center and momentum finite"));
                }
                if center.abs() >= grid.half_width() {
                    return Err(invalid("state center lies outside the grid"));
                }
            }
            StateConfig::DirichletMode { k } => {
                if k == 0 {
                    return Err(invalid("dirichlet_mode k starts at 1"));
                }
            }
        }
        Ok(())
    }

    pub fn params(&self) -> Result<PhysicalParams, ConfigError> {
        PhysicalParams::new(self.physical.hbar, self.physical.mass).map_err(|e| invalid(e.to_string()))
    }

    pub fn region(&self) -> Result<Region, ConfigError> {
        Region::new(self.region[0], self.region[1]).map_err(|e| invalid(e.to_string()))
    }

    pub fn grid(&self) -> Result<SpatialGrid, ConfigError> {
        make_grid(self.grid.half_width, self.grid.points).map_err(|e| invalid(e.to_string()))
    }

    pub fn projector_policy(&self) -> ProjectorPolicy {
        match self.projector {
            ProjectorConfig::Sharp => ProjectorPolicy::Sharp,
            ProjectorConfig::Mollified { eps: EpsSetting::Auto(_) } => ProjectorPolicy::Mollified { eps: None },
            ProjectorConfig::Mollified { eps: EpsSetting::Value(e) } => ProjectorPolicy::Mollified { eps: Some(e) },
        }
    }

    /// Cutoff width for the hierarchy; a sharp projector falls back to the default width.
    pub fn eps_policy(&self) -> EpsPolicy {
        match self.projector {
            ProjectorConfig::Mollified { eps: EpsSetting::Value(e) } => EpsPolicy::Fixed(e),
            _ => EpsPolicy::Auto,
        }
    }

    /// `N` values usable by the hierarchy.
    pub fn hierarchy_n_list(&self) -> Vec<usize> {
        self.schedule.n_list.iter().copied().filter(|&n| n <= MAX_HIERARCHY_MEASUREMENTS).collect()
    }

    pub fn initial_state(&self) -> crate::Result<WaveFunction> {
        let grid = self.grid().map_err(|e| crate::Error::InvalidParameter(e.to_string()))?;
        let params = self.params().map_err(|e| crate::Error::InvalidParameter(e.to_string()))?;
        match self.state {
            StateConfig::Gaussian { center, width, momentum } => WaveFunction::gaussian(grid, center, width, momentum, &params),
            StateConfig::DirichletMode { k } => {
                let region = self.region().map_err(|e| crate::Error::InvalidParameter(e.to_string()))?;
                let delta = region.diameter();
                let psi = WaveFunction::from_fn(grid, |x| {
                    let v = if region.contains(x) { (k as f64 * std::f64::consts::PI * (x - region.a()) / delta).sin() } else { 0.0 };
                    num_complex::Complex64::new(v, 0.0)
                })?;
                Ok(psi.normalized())
            }
        }
    }
}

/// The reference experiment.
pub fn default_config() -> ExperimentConfig {
    ExperimentConfig {
        physical: PhysicalConfig { hbar: 0.05, mass: 1.0 },
        region: [0.0, 1.0],
        grid: GridConfig { half_width: 8.0, points: 2048, xi_points: 256 },
        state: StateConfig::Gaussian { center: 0.5, width: 0.08, momentum: 0.0 },
        schedule: ScheduleConfig {
            times: vec![0.3],
            n_list: vec![8, 32, 128, 512],
            xi_list: vec![1.0],
            order: 2,
            sweep_times: TimeGrid { start: 1.0, stop: 1.4, step: 0.02 },
            sweep_eps: vec![0.2, 0.1, 0.05],
            wigner_n: None,
        },
        projector: ProjectorConfig::Sharp,
        output: OutputConfig { directory: PathBuf::from("out"), formats: vec![Format::Csv, Format::Binary], record_timing: false },
        seed: 7,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn text() -> String {
        serde_json::to_string_pretty(&default_config()).unwrap()
    }

    #[test]
    fn round_trip_and_hash() {
        let cfg = ExperimentConfig::from_json(&text(), &[]).unwrap();
        assert_eq!(cfg, default_config());
        assert_eq!(cfg.sha256().len(), 64);
        assert_eq!(cfg.sha256(), default_config().sha256());
    }

    #[test]
    fn overrides() {
        let cfg = ExperimentConfig::from_json(
            &text(),
            &["physical.hbar=0.1".into(), "schedule.n_list=[4,8]".into(), "projector={\"kind\":\"mollified\",\"eps\":\"auto\"}".into()],
        )
        .unwrap();
        assert_eq!(cfg.physical.hbar, 0.1);
        assert_eq!(cfg.schedule.n_list, vec![4, 8]);
        assert_eq!(cfg.projector_policy(), ProjectorPolicy::Mollified { eps: None });
        let cfg = ExperimentConfig::from_json(&text(), &["projector={\"kind\":\"mollified\",\"eps\":0.1}".into()]).unwrap();
        assert_eq!(cfg.eps_policy(), EpsPolicy::Fixed(0.1));
        let cfg = ExperimentConfig::from_json(&text(), &["region.1=2.0".into()]).unwrap();
        assert_eq!(cfg.region, [0.0, 2.0]);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(matches!(ExperimentConfig::from_json(&text(), &["physical.planck=1".into()]), Err(ConfigError::Parse(_))));
        assert!(matches!(ExperimentConfig::from_json(&text(), &["nope.x=1".into()]), Err(ConfigError::UnknownPath(_))));
        assert!(matches!(ExperimentConfig::from_json(&text(), &["novalue".into()]), Err(ConfigError::Override(_))));
        assert!(matches!(ExperimentConfig::from_json(&text(), &["grid.points=1000".into()]), Err(ConfigError::Invalid(_))));
        assert!(matches!(ExperimentConfig::from_json(&text(), &["schedule.n_list=[8,8]".into()]), Err(ConfigError::Invalid(_))));
        assert!(matches!(ExperimentConfig::from_json(&text(), &["physical.hbar=-1".into()]), Err(ConfigError::Invalid(_))));
        assert!(matches!(ExperimentConfig::from_json(&text(), &["projector={\"kind\":\"mollified\",\"eps\":\"sometimes\"}".into()]), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn time_grid_is_inclusive() {
        let g = TimeGrid { start: 1.0, stop: 1.4, step: 0.02 };
        let v = g.values();
        assert_eq!(v.len(), 21);
        assert!((v[20] - 1.4).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_mode_state() {
        let mut cfg = default_config();
        cfg.state = StateConfig::DirichletMode { k: 2 };
        let psi = cfg.initial_state().unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-12);
    }
}
