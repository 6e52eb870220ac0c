//! Experiment configuration files.
//!
//! A config is one TOML document with a required `[model]` table and
//! optional `[grid]`, `[run]`, `[output]` and `[compare]` tables. Every
//! table rejects unknown keys.

use std::path::{Path, PathBuf};

use cvst::estimators::{t_grid, Denominator, Stat, J_FLOOR};
use cvst::grid::GridSpec;
use cvst::models::{ModelSpec, P1Mode, RunSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A config that failed to parse or validate.
#[derive(Debug, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub h: f64,
    pub margin: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { x_min: 0.0, x_max: 10.0, y_min: 0.0, y_max: 20.0, h: 0.05, margin: 1.0 }
    }
}

impl GridConfig {
    pub fn spec(&self) -> cvst::Result<GridSpec> {
        GridSpec::new(self.x_min, self.x_max, self.y_min, self.y_max, self.h, self.margin)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub replicates: u32,
    pub seed: u64,
    pub t_max: f64,
    pub t_steps: usize,
    pub denominator: Denominator,
    /// Model default when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p1: Option<P1Mode>,
    pub p1_scale: f64,
    /// Two-sided envelope level `q`: quantiles `q/2` and `1 − q/2`.
    pub envelope_level: f64,
    pub j_floor: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            replicates: 100,
            seed: 1,
            t_max: 2.0,
            t_steps: 40,
            denominator: Denominator::default(),
            p1: None,
            p1_scale: 1.0,
            envelope_level: 0.05,
            j_floor: J_FLOOR,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    pub emit_oracle: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: None, emit_oracle: true }
    }
}

/// Thresholds checked by `compare`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    /// Least fraction of t points whose envelope must contain the oracle.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_inside_fraction: Option<f64>,
    /// Largest admissible `|mean − oracle| / |oracle|` over all t.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_relative_deviation: Option<f64>,
    /// Largest admissible `|mean − oracle| / se` over all t.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_z: Option<f64>,
    /// Standard errors are floored at this fraction of `|oracle|`, which
    /// absorbs lattice bias of near-deterministic estimates.
    pub se_floor: f64,
    /// Statistics the thresholds apply to; others are only reported.
    pub statistics: Vec<String>,
    /// Smallest checked t; four pixel sides when absent, since balls of a
    /// few pixels carry a large lattice bias.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            min_inside_fraction: Some(0.9),
            max_relative_deviation: None,
            max_z: Some(4.0),
            se_floor: 0.01,
            statistics: ["L2", "L12", "K12", "J12"].map(String::from).to_vec(),
            t_min: None,
        }
    }
}

impl CompareConfig {
    /// Is `stat` subject to the thresholds?
    pub fn checks(&self, stat: Stat) -> bool {
        self.statistics.iter().any(|s| s == stat.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub compare: CompareConfig,
}

/// Command-line values that take precedence over the config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub t_max: Option<f64>,
    pub t_steps: Option<usize>,
    pub replicates: Option<u32>,
    pub h: Option<f64>,
}

impl ExperimentConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError { path: origin.into(), message: e.to_string() })?;
        cfg.validate().map_err(|message| ConfigError { path: origin.into(), message })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError { path: origin.clone(), message: e.to_string() })?;
        Self::parse(&text, &origin)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), ConfigError> {
        if let Some(s) = o.seed {
            self.run.seed = s;
        }
        if let Some(t) = o.t_max {
            self.run.t_max = t;
        }
        if let Some(n) = o.t_steps {
            self.run.t_steps = n;
        }
        if let Some(n) = o.replicates {
            self.run.replicates = n;
        }
        if let Some(h) = o.h {
            self.grid.h = h;
        }
        self.validate().map_err(|message| ConfigError { path: "command line".into(), message })
    }

    /// Checks every table, naming the offending key.
    pub fn validate(&self) -> Result<(), String> {
        let grid = self.grid.spec().map_err(|e| format!("grid: {e}"))?;
        self.model.validate(&grid).map_err(|e| format!("model: {e}"))?;
        let r = &self.run;
        if r.replicates == 0 {
            return Err("run.replicates must be at least 1".into());
        }
        let t = t_grid(r.t_max, r.t_steps).map_err(|e| format!("run.t_max / run.t_steps: {e}"))?;
        let reach = cvst::estimators::max_erosion_t(&grid);
        if t.last().is_some_and(|&t| t > reach) {
            return Err(format!("run.t_max = {} exceeds the largest erosion radius {reach} of the window", r.t_max));
        }
        if !(r.p1_scale > 0.0 && r.p1_scale.is_finite()) {
            return Err(format!("run.p1_scale = {} must be positive", r.p1_scale));
        }
        if !(r.envelope_level > 0.0 && r.envelope_level < 1.0) {
            return Err(format!("run.envelope_level = {} must lie in (0, 1)", r.envelope_level));
        }
        if !(r.j_floor >= 0.0 && r.j_floor.is_finite()) {
            return Err(format!("run.j_floor = {} must be finite and >= 0", r.j_floor));
        }
        if let Some(f) = self.compare.min_inside_fraction {
            if !(0.0..=1.0).contains(&f) {
                return Err(format!("compare.min_inside_fraction = {f} must lie in [0, 1]"));
            }
        }
        if let Some(d) = self.compare.max_relative_deviation {
            if d.is_nan() || d < 0.0 {
                return Err(format!("compare.max_relative_deviation = {d} must be >= 0"));
            }
        }
        if let Some(z) = self.compare.max_z {
            if z.is_nan() || z <= 0.0 {
                return Err(format!("compare.max_z = {z} must be positive"));
            }
        }
        if let Some(bad) = self.compare.statistics.iter().find(|s| Stat::parse(s).is_none()) {
            return Err(format!("compare.statistics: unknown statistic {bad:?}"));
        }
        if let Some(t) = self.compare.t_min {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(format!("compare.t_min = {t} must be finite and >= 0"));
            }
        }
        if !(self.compare.se_floor >= 0.0 && self.compare.se_floor.is_finite()) {
            return Err(format!("compare.se_floor = {} must be finite and >= 0", self.compare.se_floor));
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> GridSpec {
        self.grid.spec().expect("validated grid")
    }

    pub fn t_values(&self) -> Vec<f64> {
        t_grid(self.run.t_max, self.run.t_steps).expect("validated t grid")
    }

    pub fn run_spec(&self) -> RunSpec {
        RunSpec {
            denominator: self.run.denominator,
            p1_mode: self.run.p1,
            p1_scale: self.run.p1_scale,
            j_floor: self.run.j_floor,
            ..RunSpec::new(self.run.replicates, self.run.seed, self.t_values())
        }
    }

    pub fn compare_t_min(&self) -> f64 {
        self.compare.t_min.unwrap_or(4.0 * self.grid.h)
    }

    pub fn p1_mode(&self) -> P1Mode {
        self.run.p1.unwrap_or_else(|| self.model.default_p1_mode())
    }

    /// Canonical TOML rendering; the config hash is taken over this text.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        format!("{:x}", Sha256::digest(self.to_toml().as_bytes()))
    }
}
