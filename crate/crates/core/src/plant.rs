//! Simulated deposition cell: a thermally drifting plant plus a noisy
//! height sensor.
//!
//! The true process interpolates between the calibrated cold and hot
//! models as the part heats up. Temperature is tracked as a normalized
//! state λ ∈ [0, 1] (0 = fully cooled, 1 = thermal steady state) advanced
//! once per layer by a first-order lag, with optional inter-layer cooling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::controller::VelocityProfile;
use crate::error::{Error, Result};
use crate::model::{ModelCoefficients, ProcessBounds};

/// Thermal drift parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalConfig {
    /// First-order time constant in units of layers.
    pub tau_layers: f64,
    /// Normalized temperature before the first layer.
    pub lambda_init: f64,
    /// Fractional decay of λ applied before each layer's heating step;
    /// 0 disables inter-layer cooling.
    pub interlayer_cooling: f64,
}

impl Default for ThermalConfig {
    fn default() -> Self {
        ThermalConfig {
            tau_layers: 10.0,
            lambda_init: 0.0,
            interlayer_cooling: 0.0,
        }
    }
}

impl ThermalConfig {
    /// Plant pinned at a fixed temperature (infinite time constant).
    pub fn pinned(lambda: f64) -> Self {
        ThermalConfig {
            tau_layers: f64::INFINITY,
            lambda_init: lambda,
            interlayer_cooling: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_layers > 0.0) {
            return Err(Error::Config(format!(
                "tau_layers must be positive, got {}",
                self.tau_layers
            )));
        }
        if !(0.0..=1.0).contains(&self.lambda_init) {
            return Err(Error::Config(format!(
                "lambda_init must be in [0, 1], got {}",
                self.lambda_init
            )));
        }
        if !(0.0..1.0).contains(&self.interlayer_cooling) {
            return Err(Error::Config(format!(
                "interlayer_cooling must be in [0, 1), got {}",
                self.interlayer_cooling
            )));
        }
        Ok(())
    }
}

/// Height sensor parameters (stands in for the IR measurement chain).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    /// Standard deviation of additive per-segment noise, mm.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            noise_sigma: 0.1,
            seed: 42,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::Config(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

/// Mutable state of the simulated build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    /// Normalized temperature in [0, 1].
    pub lambda: f64,
    /// As-built cumulative height per segment, mm.
    pub h_true: Vec<f64>,
    /// Layers deposited so far.
    pub layer_count: usize,
}

impl PlantState {
    pub fn new(n_segments: usize, thermal: &ThermalConfig) -> Self {
        PlantState {
            lambda: thermal.lambda_init,
            h_true: vec![0.0; n_segments],
            layer_count: 0,
        }
    }
}

/// Model in effect at temperature λ: linear interpolation of the cold and
/// hot coefficient sets.
pub fn effective_coefficients(
    lambda: f64,
    cold: &ModelCoefficients,
    hot: &ModelCoefficients,
) -> Result<ModelCoefficients> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!(
            "lambda must be in [0, 1], got {lambda}"
        )));
    }
    Ok(ModelCoefficients::new(
        (1.0 - lambda) * cold.a + lambda * hot.a,
        (1.0 - lambda) * cold.b + lambda * hot.b,
        format!("interp({lambda:.4})"),
    ))
}

/// Advances λ by one layer: inter-layer cooling first, then first-order
/// heating toward the hot steady state.
pub fn thermal_step(lambda: f64, cfg: &ThermalConfig) -> f64 {
    let cooled = lambda * (1.0 - cfg.interlayer_cooling);
    let heated = cooled + (1.0 - cooled) * (1.0 - (-1.0 / cfg.tau_layers).exp());
    heated.clamp(0.0, 1.0)
}

/// Welds one layer: deposits at the layer-start temperature, then advances
/// the thermal state. Returns the true per-segment deposit.
pub fn deposit_layer(
    state: &mut PlantState,
    v: &VelocityProfile,
    cold: &ModelCoefficients,
    hot: &ModelCoefficients,
    thermal: &ThermalConfig,
    bounds: &ProcessBounds,
) -> Result<Vec<f64>> {
    if v.v_t.len() != state.h_true.len() {
        return Err(Error::Shape(format!(
            "profile has {} segments, plant has {}",
            v.v_t.len(),
            state.h_true.len()
        )));
    }
    let slack = 1e-9 * (bounds.v_t_max - bounds.v_t_min);
    for (k, &vk) in v.v_t.iter().enumerate() {
        if vk < bounds.v_t_min - slack || vk > bounds.v_t_max + slack {
            return Err(Error::Domain(format!(
                "segment {k}: torch speed {vk} mm/s rejected by process limits \
                 [{}, {}]",
                bounds.v_t_min, bounds.v_t_max
            )));
        }
    }
    let active = effective_coefficients(state.lambda, cold, hot)?;
    let dh: Vec<f64> = v
        .v_t
        .iter()
        .map(|&vk| active.predict(vk))
        .collect::<Result<_>>()?;
    for (h, d) in state.h_true.iter_mut().zip(&dh) {
        *h += d;
    }
    state.lambda = thermal_step(state.lambda, thermal);
    state.layer_count += 1;
    Ok(dh)
}

/// Per-segment height sensor with seeded Gaussian noise.
///
/// Measurements are deterministic for a fixed seed and call sequence; a
/// zero sigma returns the true heights bit-exactly.
pub struct HeightSensor {
    sigma: f64,
    rng: ChaCha8Rng,
}

impl HeightSensor {
    pub fn new(cfg: &SensorConfig) -> Self {
        HeightSensor {
            sigma: cfg.noise_sigma,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        }
    }

    pub fn measure(&mut self, state: &PlantState) -> Vec<f64> {
        if self.sigma == 0.0 {
            return state.h_true.clone();
        }
        state
            .h_true
            .iter()
            .map(|&h| {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                h + self.sigma * z
            })
            .collect()
    }
}
