//! Declarative experiment configs: TOML with environment-variable
//! overrides, strict about unknown keys so runs stay reproducible.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use uqtrack::levelset::EvolveOptions;
use uqtrack::megpc::MegpcConfig;
use uqtrack::tracker::TrackerConfig;

/// Prefix of environment variables that override config keys, e.g.
/// `UQTRACK_SURROGATE__ORDER=4` sets `[surrogate] order`.
pub const ENV_PREFIX: &str = "UQTRACK_";

#[derive(Debug)]
pub enum CliError {
    /// Bad config or arguments; maps to exit code 2.
    Config(String),
    /// Failure during execution; maps to exit code 3.
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<uqtrack::Error> for CliError {
    fn from(e: uqtrack::Error) -> Self {
        match e {
            uqtrack::Error::InvalidArgument(_) | uqtrack::Error::UnsupportedConfiguration(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Megpc,
    Sop,
    Fgpc,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Megpc => "ME-gPC",
            Method::Sop => "SOP",
            Method::Fgpc => "F-gPC",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regression {
    Ols,
    Lad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    /// Sign of the tracked level-set field.
    Levelset,
    /// Sign of the model's exact discontinuity indicator (oracle).
    Exact,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub name: String,
    /// Options forwarded verbatim to the model registry.
    pub options: Option<toml::Value>,
}

impl ModelSection {
    pub fn options_json(&self) -> Result<serde_json::Value, CliError> {
        match &self.options {
            None => Ok(serde_json::json!({})),
            Some(v) => serde_json::to_value(v.clone())
                .map_err(|e| CliError::Config(format!("bad model options: {e}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerSection {
    pub levels: usize,
    pub m0: usize,
    pub band_tol: f64,
    pub gamma: f64,
    pub seed_center: Option<Vec<f64>>,
    pub seed_radius: f64,
    pub cfl: f64,
    pub lock_window: usize,
    pub max_steps: usize,
    pub use_curvature: bool,
}

impl Default for TrackerSection {
    fn default() -> Self {
        let t = TrackerConfig::defaults_for(1);
        Self {
            levels: t.levels,
            m0: t.m0,
            band_tol: t.band_tol,
            gamma: t.gamma,
            seed_center: None,
            seed_radius: t.seed_radius,
            cfl: t.evolve.cfl,
            lock_window: t.evolve.lock_window,
            max_steps: t.evolve.max_steps,
            use_curvature: t.evolve.use_curvature,
        }
    }
}

impl TrackerSection {
    pub fn to_tracker_config(&self, dim: usize) -> TrackerConfig {
        TrackerConfig {
            levels: self.levels,
            m0: self.m0,
            band_tol: self.band_tol,
            gamma: self.gamma,
            seed_center: self.seed_center.clone().unwrap_or_else(|| vec![0.0; dim]),
            seed_radius: self.seed_radius,
            evolve: EvolveOptions {
                cfl: self.cfl,
                lock_window: self.lock_window,
                max_steps: self.max_steps,
                use_curvature: self.use_curvature,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateSection {
    pub order: usize,
    pub regression: Regression,
    /// Re-solve once after flipping points whose residual exceeds the
    /// estimated jump (F-gPC only).
    pub repair: bool,
    pub classifier: ClassifierKind,
}

impl Default for SurrogateSection {
    fn default() -> Self {
        Self {
            order: 2,
            regression: Regression::Lad,
            repair: false,
            classifier: ClassifierKind::Levelset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct MegpcSection {
    pub theta1: f64,
    pub theta2: f64,
    pub alpha: f64,
    pub max_elements: usize,
}

impl Default for MegpcSection {
    fn default() -> Self {
        let m = MegpcConfig::default();
        Self { theta1: m.theta1, theta2: m.theta2, alpha: m.alpha, max_elements: m.max_elements }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct TessellationSection {
    pub coarse_n: usize,
    /// Minimum distance between inserted vertices; defaults to half the
    /// finest tracker-grid spacing.
    pub min_sep: Option<f64>,
}

impl Default for TessellationSection {
    fn default() -> Self {
        Self { coarse_n: 4, min_sep: None }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsSection {
    /// Error-grid points per dimension; defaults to the finest tracker grid.
    pub grid_m: Option<usize>,
    /// Monte Carlo reference sample count; 0 skips moment errors.
    pub mc_samples: usize,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self { grid_m: None, mc_samples: 200_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub id: String,
    pub method: Method,
    #[serde(default)]
    pub seed: u64,
    pub model: ModelSection,
    #[serde(default)]
    pub tracker: TrackerSection,
    #[serde(default)]
    pub surrogate: SurrogateSection,
    #[serde(default)]
    pub megpc: MegpcSection,
    #[serde(default)]
    pub tessellation: TessellationSection,
    #[serde(default)]
    pub metrics: MetricsSection,
}

fn default_schema_version() -> u32 {
    1
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != 1 {
            return Err(CliError::Config(format!(
                "unsupported schema_version {}",
                self.schema_version
            )));
        }
        if self.id.is_empty() || self.id.contains(['/', '\\']) || self.id.starts_with('.') {
            return Err(CliError::Config(format!(
                "id {:?} must be a nonempty plain directory name",
                self.id
            )));
        }
        Ok(())
    }
}

/// Parse a config string after applying `UQTRACK_`-prefixed overrides.
/// Override names address nested keys with `__`, e.g.
/// `UQTRACK_TRACKER__LEVELS=3`; values are parsed as TOML scalars and fall
/// back to strings.
pub fn parse_config(
    text: &str,
    env: &[(String, String)],
) -> Result<ExperimentConfig, CliError> {
    let mut table: toml::Table =
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    for (key, raw) in env {
        let Some(path) = key.strip_prefix(ENV_PREFIX) else { continue };
        let parts: Vec<String> = path.split("__").map(|p| p.to_lowercase()).collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(CliError::Config(format!("malformed override variable {key}")));
        }
        apply_override(&mut table, &parts, parse_scalar(raw))?;
    }
    let cfg: ExperimentConfig =
        toml::Value::Table(table).try_into().map_err(|e| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path, env: &[(String, String)]) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text, env)
}

fn parse_scalar(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn apply_override(
    table: &mut toml::Table,
    path: &[String],
    value: toml::Value,
) -> Result<(), CliError> {
    let (head, rest) = path.split_first().expect("non-empty override path");
    if rest.is_empty() {
        table.insert(head.clone(), value);
        return Ok(());
    }
    let entry = table
        .entry(head.clone())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match entry {
        toml::Value::Table(inner) => apply_override(inner, rest, value),
        _ => Err(CliError::Config(format!("override path segment '{head}' is not a table"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
        id = "demo"
        method = "fgpc"
        seed = 7

        [model]
        name = "burgers"

        [surrogate]
        order = 4
        regression = "ols"
    "#;

    #[test]
    fn parses_and_fills_defaults() {
        let cfg = parse_config(BASE, &[]).unwrap();
        assert_eq!(cfg.id, "demo");
        assert_eq!(cfg.method, Method::Fgpc);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.surrogate.order, 4);
        assert_eq!(cfg.surrogate.regression, Regression::Ols);
        assert_eq!(cfg.tracker.levels, 2);
        assert_eq!(cfg.metrics.mc_samples, 200_000);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = format!("{BASE}\n[tracker]\nlevls = 3\n");
        let err = parse_config(&text, &[]).unwrap_err();
        assert!(matches!(err, CliError::Config(_)), "{err}");
    }

    #[test]
    fn env_overrides_nested_keys() {
        let env = vec![
            ("UQTRACK_TRACKER__LEVELS".to_string(), "3".to_string()),
            ("UQTRACK_SURROGATE__REGRESSION".to_string(), "\"lad\"".to_string()),
            ("UQTRACK_SEED".to_string(), "99".to_string()),
            ("OTHER_VAR".to_string(), "ignored".to_string()),
        ];
        let cfg = parse_config(BASE, &env).unwrap();
        assert_eq!(cfg.tracker.levels, 3);
        assert_eq!(cfg.surrogate.regression, Regression::Lad);
        assert_eq!(cfg.seed, 99);
    }

    #[test]
    fn env_override_bare_string_value() {
        let env = vec![("UQTRACK_SURROGATE__REGRESSION".to_string(), "lad".to_string())];
        let cfg = parse_config(BASE, &env).unwrap();
        assert_eq!(cfg.surrogate.regression, Regression::Lad);
    }

    #[test]
    fn roundtrips_through_toml() {
        let cfg = parse_config(BASE, &[]).unwrap();
        let text = toml::to_string(&cfg).unwrap();
        let back = parse_config(&text, &[]).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn rejects_bad_id_and_schema() {
        let text = BASE.replace("id = \"demo\"", "id = \"../demo\"");
        assert!(matches!(parse_config(&text, &[]), Err(CliError::Config(_))));
        let text = format!("schema_version = 2\n{BASE}");
        assert!(matches!(parse_config(&text, &[]), Err(CliError::Config(_))));
    }
}
