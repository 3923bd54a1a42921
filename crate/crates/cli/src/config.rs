//! Run configuration: TOML on disk, optional dotted-key overrides, then
//! validation against the simulator preconditions.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};

use qlg_core::experiments::{EstimatorSign, NuVariant, SteepnessUnits};
use qlg_core::kernel::CollisionParams;
use qlg_core::lattice::{CollisionPath, InitSplit, LatticeOptions, Streaming, VelocitySet2D};

/// A configuration problem, always tied to the key that caused it.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_run_id")]
    pub run_id: String,
    /// Number of steps `T`.
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Steps between snapshots.
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub collision: CollisionSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub init: InitSection,
    #[serde(default)]
    pub velocity_set: VelocitySetSection,
    #[serde(default)]
    pub analytic: AnalyticSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub compare: CompareSection,
}

fn default_run_id() -> String {
    "run".into()
}

fn default_steps() -> usize {
    200
}

fn default_stride() -> usize {
    10
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            run_id: default_run_id(),
            steps: default_steps(),
            stride: default_stride(),
            collision: Default::default(),
            grid: Default::default(),
            init: Default::default(),
            velocity_set: Default::default(),
            analytic: Default::default(),
            sweep: Default::default(),
            compare: Default::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PathChoice {
    #[default]
    ClosedForm,
    Quantum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StreamingChoice {
    #[default]
    Forward,
    Reversed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollisionSection {
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default)]
    pub zeta: f64,
    #[serde(default)]
    pub xi: f64,
    #[serde(default)]
    pub path: PathChoice,
    #[serde(default)]
    pub streaming: StreamingChoice,
}

fn default_theta() -> f64 {
    std::f64::consts::FRAC_PI_3
}

impl Default for CollisionSection {
    fn default() -> Self {
        Self {
            theta: default_theta(),
            zeta: 0.0,
            xi: 0.0,
            path: PathChoice::default(),
            streaming: StreamingChoice::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_n")]
    pub nx: usize,
    /// Only used by 2D commands.
    #[serde(default = "default_n")]
    pub ny: usize,
    /// Extent along x; `ds = length / nx` in 2D.
    #[serde(default = "default_length")]
    pub length: f64,
}

fn default_n() -> usize {
    64
}

fn default_length() -> f64 {
    2.0
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            nx: default_n(),
            ny: default_n(),
            length: default_length(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SplitChoice {
    #[default]
    Equilibrium,
    Symmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    #[serde(default = "default_rho_b")]
    pub rho_b: f64,
    #[serde(default = "default_rho_a")]
    pub rho_a: f64,
    #[serde(default)]
    pub split: SplitChoice,
}

fn default_rho_b() -> f64 {
    1.0
}

fn default_rho_a() -> f64 {
    0.4
}

impl Default for InitSection {
    fn default() -> Self {
        Self {
            rho_b: default_rho_b(),
            rho_a: default_rho_a(),
            split: SplitChoice::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum VelocityPreset {
    #[default]
    Axis,
    Diagonal,
    Orthogonal,
    Triangular,
    Custom,
}

impl VelocityPreset {
    pub fn name(self) -> &'static str {
        match self {
            VelocityPreset::Axis => "axis",
            VelocityPreset::Diagonal => "diagonal",
            VelocityPreset::Orthogonal => "orthogonal",
            VelocityPreset::Triangular => "triangular",
            VelocityPreset::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct VelocitySetSection {
    #[serde(default)]
    pub preset: VelocityPreset,
    /// Defaults to the identity for `custom`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<[[f64; 2]; 2]>,
    /// Required for `custom`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shifts: Option<[[i64; 2]; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NuChoice {
    #[default]
    Corrected,
    Yepez,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticSection {
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    /// Viscosity used by the `analytic` command.
    #[serde(default)]
    pub nu: NuChoice,
}

fn default_truncation() -> usize {
    qlg_core::analytic::DEFAULT_TRUNCATION
}

impl Default for AnalyticSection {
    fn default() -> Self {
        Self {
            truncation: default_truncation(),
            nu: NuChoice::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorChoice {
    #[default]
    PdeConsistent,
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum UnitsChoice {
    #[default]
    Lattice,
    Physical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Explicit angle list; overrides the range below when non-empty.
    #[serde(default)]
    pub thetas: Vec<f64>,
    #[serde(default = "default_theta_min")]
    pub theta_min: f64,
    #[serde(default = "default_theta_max")]
    pub theta_max: f64,
    #[serde(default = "default_theta_count")]
    pub theta_count: usize,
    /// Horizons for the steepness sweep; empty means `[steps]`.
    #[serde(default)]
    pub horizons: Vec<usize>,
    /// Grid sizes for the steepness sweep; empty means `[grid.nx]`.
    #[serde(default)]
    pub grids: Vec<usize>,
    #[serde(default)]
    pub estimator: EstimatorChoice,
    #[serde(default)]
    pub units: UnitsChoice,
}

fn default_theta_min() -> f64 {
    0.05
}

fn default_theta_max() -> f64 {
    FRAC_PI_2
}

fn default_theta_count() -> usize {
    30
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            thetas: Vec::new(),
            theta_min: default_theta_min(),
            theta_max: default_theta_max(),
            theta_count: default_theta_count(),
            horizons: Vec::new(),
            grids: Vec::new(),
            estimator: EstimatorChoice::default(),
            units: UnitsChoice::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    /// Velocity sets compared by `compare-2d`; empty means `velocity_set`.
    #[serde(default)]
    pub sets: Vec<VelocityPreset>,
}

/// Reads a TOML config, or the `config` field of a JSON manifest.
pub fn load_value(path: &Path) -> Result<toml::Value, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new("--config", format!("cannot read {}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        let json: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| ConfigError::new("--config", format!("{}: {e}", path.display())))?;
        let cfg = json
            .get("config")
            .ok_or_else(|| ConfigError::new("config", "manifest has no resolved config"))?;
        return toml::Value::try_from(cfg).map_err(|e| ConfigError::new("config", e.to_string()));
    }
    text.parse::<toml::Table>()
        .map(toml::Value::Table)
        .map_err(|e| ConfigError::new("--config", format!("{}: {e}", path.display())))
}

/// Applies `key.path=value`; the value is read as a TOML literal, or as a
/// bare string if it does not parse.
pub fn apply_override(root: &mut toml::Value, spec: &str) -> Result<(), ConfigError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::new(spec, "override must look like key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::new(key, "empty key segment"));
    }
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| ConfigError::new(key, format!("{part} is not inside a table")))?;
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| ConfigError::new(key, "parent is not a table"))?;
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Deserializes and validates. Unknown keys are rejected.
pub fn resolve(value: toml::Value) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = value.try_into().map_err(|e: toml::de::Error| {
        let msg = e.message().to_string();
        let key = unknown_key(&msg).unwrap_or_else(|| "config".to_string());
        ConfigError::new(key, msg)
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn unknown_key(msg: &str) -> Option<String> {
    let start = msg.find("unknown field `")? + "unknown field `".len();
    let end = msg[start..].find('`')? + start;
    Some(msg[start..end].to_string())
}

/// Loads `path`, applies overrides in order, resolves.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut value = match path {
        Some(p) => load_value(p)?,
        None => toml::Value::Table(toml::Table::new()),
    };
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    resolve(value)
}

fn check_finite(key: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(key, format!("{v} is not finite")))
    }
}

fn check_theta(key: &str, theta: f64) -> Result<(), ConfigError> {
    if theta > 0.0 && theta <= FRAC_PI_2 {
        Ok(())
    } else {
        Err(ConfigError::new(
            key,
            format!("{theta} outside (0, pi/2]; theta = 0 makes alpha = cot(theta) cos(zeta - xi) diverge"),
        ))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.run_id.is_empty() || self.run_id.contains(['/', '\\']) {
            return Err(ConfigError::new("run_id", "must be a non-empty file-name fragment"));
        }
        if self.stride == 0 {
            return Err(ConfigError::new("stride", "must be at least 1"));
        }
        let c = &self.collision;
        check_theta("collision.theta", c.theta)?;
        check_finite("collision.zeta", c.zeta)?;
        check_finite("collision.xi", c.xi)?;
        let g = &self.grid;
        if g.nx < 3 {
            return Err(ConfigError::new("grid.nx", format!("{} sites: need at least 3", g.nx)));
        }
        if g.ny < 3 {
            return Err(ConfigError::new("grid.ny", format!("{} sites: need at least 3", g.ny)));
        }
        if !(g.length > 0.0 && g.length.is_finite()) {
            return Err(ConfigError::new(
                "grid.length",
                format!("{} must be positive", g.length),
            ));
        }
        let i = &self.init;
        check_finite("init.rho_b", i.rho_b)?;
        check_finite("init.rho_a", i.rho_a)?;
        if !(0.0..=2.0).contains(&i.rho_b) {
            return Err(ConfigError::new("init.rho_b", format!("{} outside [0, 2]", i.rho_b)));
        }
        if i.rho_b - i.rho_a.abs() < 0.0 || i.rho_b + i.rho_a.abs() > 2.0 {
            return Err(ConfigError::new(
                "init.rho_a",
                format!(
                    "rho_b +- rho_a = [{}, {}] leaves [0, 2]",
                    i.rho_b - i.rho_a.abs(),
                    i.rho_b + i.rho_a.abs()
                ),
            ));
        }
        self.velocity_set()?;
        if self.analytic.truncation < 1 {
            return Err(ConfigError::new("analytic.truncation", "must be at least 1"));
        }
        let s = &self.sweep;
        for (k, t) in s.thetas.iter().enumerate() {
            check_theta(&format!("sweep.thetas[{k}]"), *t)?;
        }
        if s.thetas.is_empty() {
            check_theta("sweep.theta_min", s.theta_min)?;
            check_theta("sweep.theta_max", s.theta_max)?;
            if s.theta_min > s.theta_max {
                return Err(ConfigError::new("sweep.theta_min", "greater than sweep.theta_max"));
            }
            if s.theta_count == 0 {
                return Err(ConfigError::new("sweep.theta_count", "must be at least 1"));
            }
        }
        if let Some(n) = s.grids.iter().find(|&&n| n < 3) {
            return Err(ConfigError::new("sweep.grids", format!("{n} sites: need at least 3")));
        }
        if s.horizons.iter().any(|&h| h > self.steps) {
            return Err(ConfigError::new("sweep.horizons", "every horizon must be <= steps"));
        }
        for (k, p) in self.compare.sets.iter().enumerate() {
            if *p == VelocityPreset::Custom && self.velocity_set.preset != VelocityPreset::Custom {
                return Err(ConfigError::new(
                    format!("compare.sets[{k}]"),
                    "custom requires velocity_set.preset = \"custom\"",
                ));
            }
        }
        Ok(())
    }

    pub fn params(&self) -> CollisionParams {
        let c = &self.collision;
        CollisionParams::new(c.theta, c.zeta, c.xi).expect("validated")
    }

    pub fn options(&self) -> LatticeOptions {
        LatticeOptions {
            streaming: match self.collision.streaming {
                StreamingChoice::Forward => Streaming::Forward,
                StreamingChoice::Reversed => Streaming::Reversed,
            },
            collision: match self.collision.path {
                PathChoice::ClosedForm => CollisionPath::ClosedForm,
                PathChoice::Quantum => CollisionPath::Quantum,
            },
        }
    }

    pub fn split(&self) -> InitSplit {
        match self.init.split {
            SplitChoice::Equilibrium => InitSplit::Equilibrium,
            SplitChoice::Symmetric => InitSplit::Symmetric,
        }
    }

    pub fn preset_set(&self, preset: VelocityPreset) -> Result<VelocitySet2D, ConfigError> {
        Ok(match preset {
            VelocityPreset::Axis => VelocitySet2D::axis(),
            VelocityPreset::Diagonal => VelocitySet2D::diagonal(),
            VelocityPreset::Orthogonal => VelocitySet2D::orthogonal(),
            VelocityPreset::Triangular => VelocitySet2D::triangular(),
            VelocityPreset::Custom => {
                let v = &self.velocity_set;
                let shifts = v
                    .shifts
                    .ok_or_else(|| ConfigError::new("velocity_set.shifts", "required for preset = \"custom\""))?;
                let basis = v.basis.unwrap_or([[1.0, 0.0], [0.0, 1.0]]);
                VelocitySet2D::new(basis, shifts).map_err(|e| ConfigError::new("velocity_set.basis", e.to_string()))?
            }
        })
    }

    pub fn velocity_set(&self) -> Result<VelocitySet2D, ConfigError> {
        let v = &self.velocity_set;
        if v.preset != VelocityPreset::Custom && (v.basis.is_some() || v.shifts.is_some()) {
            return Err(ConfigError::new(
                "velocity_set.preset",
                "basis/shifts are only read with preset = \"custom\"",
            ));
        }
        self.preset_set(v.preset)
    }

    pub fn thetas(&self) -> Vec<f64> {
        let s = &self.sweep;
        if s.thetas.is_empty() {
            qlg_core::experiments::linspace(s.theta_min, s.theta_max, s.theta_count)
        } else {
            s.thetas.clone()
        }
    }

    pub fn estimator(&self) -> EstimatorSign {
        match self.sweep.estimator {
            EstimatorChoice::PdeConsistent => EstimatorSign::PdeConsistent,
            EstimatorChoice::AsPrinted => EstimatorSign::AsPrinted,
        }
    }

    pub fn units(&self) -> SteepnessUnits {
        match self.sweep.units {
            UnitsChoice::Lattice => SteepnessUnits::Lattice,
            UnitsChoice::Physical => SteepnessUnits::Physical,
        }
    }

    pub fn nu_variant(&self) -> NuVariant {
        match self.analytic.nu {
            NuChoice::Corrected => NuVariant::Corrected,
            NuChoice::Yepez => NuVariant::Yepez,
        }
    }
}
