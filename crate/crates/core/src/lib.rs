//! Variable-height layer planning and closed-loop height control for
//! wire-arc additive manufacturing.
//!
//! The crate covers the full loop for building overhanging parts from
//! angled (non-uniform height) layers:
//!
//! - [`model`]: the power-law bead-height model `Δh = c v_T^a`, its
//!   inverse, and log-space least-squares calibration from measured
//!   (speed, height) pairs.
//! - [`planner`]: slicing a bent tube into angled layers within the
//!   process envelope and deriving the nominal open-loop speed plan.
//! - [`controller`]: the layer-to-layer correction update and the
//!   box-constrained smoothed least-squares solver for the next speed
//!   profile.
//! - [`plant`]: a simulated deposition cell whose behavior drifts from the
//!   cold to the hot model as the part heats, plus a noisy height sensor.
//! - [`harness`]: end-to-end open/closed-loop scenario runs, per-layer
//!   RMSE scoring, comparisons, and artifact export.
//! - [`config`]: the TOML run-configuration format shared by the CLI.
//!
//! All numerical state is in mm and mm/s. Operations are pure functions
//! over immutable inputs except the plant state and sensor stream, which
//! are advanced explicitly; runs are reproducible from their seed.
//!
//! # Example
//!
//! Run the four canonical cases — open/closed loop, each planned with the
//! cold or hot model — against the drifting plant on one shared plan:
//!
//! ```
//! use waam_control::config::RunConfig;
//! use waam_control::harness::{compare_scenarios, run_comparison};
//!
//! # fn main() -> waam_control::Result<()> {
//! let cfg = RunConfig::from_toml_str(
//!     r#"
//!     [scenario]
//!     segments = 12
//!     "#,
//! )?;
//! let traces = run_comparison(&cfg.scenario_spec(None)?)?;
//! let report = compare_scenarios(&traces)?;
//!
//! // Feedback keeps the error bounded; open loop accumulates.
//! let by_label = |l: &str| report.rows.iter().find(|r| r.label == l).unwrap();
//! assert!(by_label("OC").final_rmse > by_label("CC").final_rmse);
//! # Ok(())
//! # }
//! ```

// Guards are written as `!(x > 0.0)` so NaN fails validation too; the
// un-negated forms clippy prefers would wave NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod controller;
pub mod error;
pub mod harness;
pub mod model;
pub mod planner;
pub mod plant;
mod plot;

pub use error::{Error, Result};
