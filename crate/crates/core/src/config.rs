//! Run configuration file: one TOML document with sections `part`,
//! `bounds`, `model.cold`, `model.hot`, `solver`, `thermal`, `sensor`, and
//! `scenario`. Every section and field has a default, so a minimal config
//! can be empty; unknown keys are rejected to catch typos.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controller::{default_beta, SolverConfig};
use crate::error::{Error, Result};
use crate::harness::{FeedbackMode, ModelPair, PlanningModel, ScenarioSpec};
use crate::model::ModelCoefficients;
use crate::planner::PartSpec;
use crate::plant::{SensorConfig, ThermalConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartSection {
    pub tube_diameter: f64,
    pub bend_radius: f64,
    /// Total bend angle in degrees (more convenient in a config file than
    /// radians).
    pub final_angle_deg: f64,
    pub base_height: f64,
    /// Optional per-layer tilt override, radians.
    pub theta_override: Option<f64>,
}

impl Default for PartSection {
    fn default() -> Self {
        PartSection {
            tube_diameter: 50.0,
            bend_radius: 224.0,
            final_angle_deg: 45.0,
            base_height: 5.0,
            theta_override: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsSection {
    pub v_t_min: f64,
    pub v_t_max: f64,
}

impl Default for BoundsSection {
    fn default() -> Self {
        BoundsSection {
            v_t_min: 3.0,
            v_t_max: 17.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoefficientSection {
    pub a: f64,
    pub b: f64,
}

impl Default for CoefficientSection {
    fn default() -> Self {
        CoefficientSection {
            a: -0.4619,
            b: 1.647,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub cold: CoefficientSection,
    pub hot: CoefficientSection,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            cold: CoefficientSection {
                a: -0.4619,
                b: 1.647,
            },
            hot: CoefficientSection {
                a: -0.3700,
                b: 1.215,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub dv_t_max: f64,
    /// Smoothing weight; omitted means `1 / dv_t_max²`.
    pub beta: Option<f64>,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            dv_t_max: 2.0,
            beta: None,
            tolerance: 1e-8,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThermalSection {
    pub tau_layers: f64,
    pub lambda_init: f64,
    pub interlayer_cooling: f64,
}

impl Default for ThermalSection {
    fn default() -> Self {
        let d = ThermalConfig::default();
        ThermalSection {
            tau_layers: d.tau_layers,
            lambda_init: d.lambda_init,
            interlayer_cooling: d.interlayer_cooling,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorSection {
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SensorSection {
    fn default() -> Self {
        let d = SensorConfig::default();
        SensorSection {
            noise_sigma: d.noise_sigma,
            seed: d.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub feedback: FeedbackMode,
    pub planning_model: PlanningModel,
    pub segments: usize,
    pub standoff_limit: f64,
    pub label: Option<String>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            feedback: FeedbackMode::ClosedLoop,
            planning_model: PlanningModel::Cold,
            segments: 50,
            standoff_limit: 10.0,
            label: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub part: PartSection,
    pub bounds: BoundsSection,
    pub model: ModelSection,
    pub solver: SolverSection,
    pub thermal: ThermalSection,
    pub sensor: SensorSection,
    pub scenario: ScenarioSection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Loads a config and applies `section.key=value` overrides on the raw
    /// TOML before deserializing, so overridden values face the same
    /// validation as file contents.
    pub fn load_with_overrides(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut table: toml::Table = text
            .parse()
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        for entry in overrides {
            apply_override(&mut table, entry)?;
        }
        let text = toml::to_string(&table)
            .map_err(|e| Error::Config(format!("cannot re-serialize config: {e}")))?;
        Self::from_toml_str(&text)
    }

    pub fn part_spec(&self) -> PartSpec {
        PartSpec {
            tube_diameter: self.part.tube_diameter,
            bend_radius: self.part.bend_radius,
            final_angle: self.part.final_angle_deg.to_radians(),
            base_height: self.part.base_height,
        }
    }

    pub fn model_pair(&self) -> Result<ModelPair> {
        Ok(ModelPair {
            cold: ModelCoefficients::new(self.model.cold.a, self.model.cold.b, "cold")
                .validated()?,
            hot: ModelCoefficients::new(self.model.hot.a, self.model.hot.b, "hot").validated()?,
        })
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let beta = match self.solver.beta {
            Some(beta) => beta,
            None => default_beta(self.solver.dv_t_max)?,
        };
        let cfg = SolverConfig {
            beta,
            dv_t_max: self.solver.dv_t_max,
            tolerance: self.solver.tolerance,
            max_iterations: self.solver.max_iterations,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn thermal_config(&self) -> Result<ThermalConfig> {
        let cfg = ThermalConfig {
            tau_layers: self.thermal.tau_layers,
            lambda_init: self.thermal.lambda_init,
            interlayer_cooling: self.thermal.interlayer_cooling,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn sensor_config(&self, seed_override: Option<u64>) -> Result<SensorConfig> {
        let cfg = SensorConfig {
            noise_sigma: self.sensor.noise_sigma,
            seed: seed_override.unwrap_or(self.sensor.seed),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Assembles the scenario this config describes.
    pub fn scenario_spec(&self, seed_override: Option<u64>) -> Result<ScenarioSpec> {
        let label = self.scenario.label.clone().unwrap_or_else(|| {
            match (self.scenario.feedback, self.scenario.planning_model) {
                (FeedbackMode::OpenLoop, PlanningModel::Cold) => "OC",
                (FeedbackMode::OpenLoop, PlanningModel::Hot) => "OH",
                (FeedbackMode::ClosedLoop, PlanningModel::Cold) => "CC",
                (FeedbackMode::ClosedLoop, PlanningModel::Hot) => "CH",
            }
            .to_string()
        });
        let spec = ScenarioSpec {
            label,
            feedback: self.scenario.feedback,
            planning_model: self.scenario.planning_model,
            n_segments: self.scenario.segments,
            part: self.part_spec(),
            v_t_min: self.bounds.v_t_min,
            v_t_max: self.bounds.v_t_max,
            models: self.model_pair()?,
            solver: self.solver_config()?,
            thermal: self.thermal_config()?,
            sensor: self.sensor_config(seed_override)?,
            standoff_limit: self.scenario.standoff_limit,
            theta_override: self.part.theta_override,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Applies one `section.key=value` override to a parsed TOML table.
fn apply_override(table: &mut toml::Table, entry: &str) -> Result<()> {
    let (path, raw_value) = entry.split_once('=').ok_or_else(|| {
        Error::Config(format!("override '{entry}' is not of the form section.key=value"))
    })?;
    let path = path.trim();
    let raw_value = raw_value.trim();
    if path.is_empty() {
        return Err(Error::Config(format!("override '{entry}' has an empty key")));
    }
    // Parse the value as a TOML literal; fall back to a string.
    let value: toml::Value = format!("v = {raw_value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw_value.to_string()));

    let mut keys = path.split('.').peekable();
    let mut current = table;
    while let Some(key) = keys.next() {
        if keys.peek().is_none() {
            current.insert(key.to_string(), value);
            break;
        }
        current = current
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| {
                Error::Config(format!("override '{entry}': '{key}' is not a table"))
            })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        assert_eq!(cfg.scenario.segments, 50);
        assert_eq!(cfg.bounds.v_t_min, 3.0);
        assert_eq!(cfg.model.hot.b, 1.215);
        let spec = cfg.scenario_spec(None).unwrap();
        assert_eq!(spec.label, "CC");
        assert_eq!(spec.solver.beta, 0.25);
        assert!((spec.part.final_angle - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn full_config_parses() {
        let text = r#"
            [part]
            tube_diameter = 50.0
            bend_radius = 224.0
            final_angle_deg = 90.0
            base_height = 5.0

            [bounds]
            v_t_min = 6.0
            v_t_max = 10.0

            [model.cold]
            a = -0.4619
            b = 1.647

            [model.hot]
            a = -0.37
            b = 1.215

            [solver]
            dv_t_max = 2.0
            tolerance = 1e-8
            max_iterations = 200

            [thermal]
            tau_layers = 10.0
            lambda_init = 0.0
            interlayer_cooling = 0.0

            [sensor]
            noise_sigma = 0.1
            seed = 7

            [scenario]
            feedback = "closed-loop"
            planning_model = "hot"
            segments = 40
        "#;
        let cfg = RunConfig::from_toml_str(text).unwrap();
        let spec = cfg.scenario_spec(None).unwrap();
        assert_eq!(spec.label, "CH");
        assert_eq!(spec.n_segments, 40);
        assert_eq!(spec.sensor.seed, 7);
        assert_eq!(spec.v_t_max, 10.0);
        assert!((spec.part.final_angle - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            RunConfig::from_toml_str("[solver]\nbetaa = 0.3\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            RunConfig::from_toml_str("[mystery]\nx = 1\n"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn beta_defaults_to_reciprocal_square() {
        let cfg = RunConfig::from_toml_str("[solver]\ndv_t_max = 0.5\n").unwrap();
        assert_eq!(cfg.solver_config().unwrap().beta, 4.0);
        let cfg = RunConfig::from_toml_str("[solver]\nbeta = 0.0\n").unwrap();
        assert_eq!(cfg.solver_config().unwrap().beta, 0.0);
    }

    #[test]
    fn seed_override_wins() {
        let cfg = RunConfig::from_toml_str("[sensor]\nseed = 5\n").unwrap();
        assert_eq!(cfg.sensor_config(None).unwrap().seed, 5);
        assert_eq!(cfg.sensor_config(Some(99)).unwrap().seed, 99);
    }

    #[test]
    fn overrides_apply_to_nested_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        std::fs::write(&path, "[sensor]\nseed = 1\n").unwrap();
        let cfg = RunConfig::load_with_overrides(
            &path,
            &[
                "sensor.seed=12".to_string(),
                "model.hot.b=1.3".to_string(),
                "scenario.feedback=\"open-loop\"".to_string(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.sensor.seed, 12);
        assert_eq!(cfg.model.hot.b, 1.3);
        assert_eq!(cfg.scenario.feedback, FeedbackMode::OpenLoop);

        // Bad override shape.
        assert!(RunConfig::load_with_overrides(&path, &["nonsense".to_string()]).is_err());
        // Overrides face the same unknown-key validation.
        assert!(RunConfig::load_with_overrides(&path, &["solver.junk=1".to_string()]).is_err());
    }

    #[test]
    fn invalid_models_are_rejected() {
        let cfg = RunConfig::from_toml_str("[model.cold]\na = 0.2\nb = 1.0\n").unwrap();
        assert!(cfg.model_pair().is_err());
    }
}
