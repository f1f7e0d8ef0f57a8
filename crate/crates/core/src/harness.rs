//! End-to-end experiment harness: runs open/closed-loop scenarios against
//! the simulated plant, scores them, and persists the artifacts.
//!
//! The four canonical cases pair the feedback mode with the model driving
//! planning and solving: OC (open-loop cold), OH (open-loop hot), CC
//! (closed-loop cold), CH (closed-loop hot). A comparison runs all four on
//! one nominal plan built inside the height envelope of *both* models, with
//! a shared sensor seed, so the differences reflect the controller rather
//! than the plan or the noise draws.

use std::fs::{self, File};
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controller::{
    corrected_target, layer_error, solve_velocity_profile, SolverConfig, VelocityProfile,
};
use crate::error::{Error, Result};
use crate::model::{ModelCoefficients, ProcessBounds};
use crate::planner::{
    compute_slice_geometry, generate_layer_plans, nominal_velocity_plan, plan_shape, LayerPlan,
    PartSpec, PlanShape,
};
use crate::plant::{deposit_layer, HeightSensor, PlantState, SensorConfig, ThermalConfig};
use crate::plot::line_plot_svg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeedbackMode {
    OpenLoop,
    ClosedLoop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanningModel {
    Cold,
    Hot,
}

/// The two calibrated model regimes available to a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPair {
    pub cold: ModelCoefficients,
    pub hot: ModelCoefficients,
}

impl ModelPair {
    pub fn select(&self, which: PlanningModel) -> &ModelCoefficients {
        match which {
            PlanningModel::Cold => &self.cold,
            PlanningModel::Hot => &self.hot,
        }
    }
}

/// Everything needed to run one scenario end to end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub label: String,
    pub feedback: FeedbackMode,
    pub planning_model: PlanningModel,
    pub n_segments: usize,
    pub part: PartSpec,
    /// Torch speed envelope, mm/s; height bounds derive from the models.
    pub v_t_min: f64,
    pub v_t_max: f64,
    pub models: ModelPair,
    pub solver: SolverConfig,
    pub thermal: ThermalConfig,
    pub sensor: SensorConfig,
    /// True-error magnitude (mm) beyond which the torch standoff is
    /// considered lost; reported as a flag, not simulated physics.
    pub standoff_limit: f64,
    /// Optional tilt increment override, radians.
    pub theta_override: Option<f64>,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        self.part.validate()?;
        self.solver.validate()?;
        self.thermal.validate()?;
        self.sensor.validate()?;
        if self.n_segments < 2 {
            return Err(Error::Config(format!(
                "need at least 2 segments, got {}",
                self.n_segments
            )));
        }
        if !(self.standoff_limit > 0.0) {
            return Err(Error::Config(format!(
                "standoff_limit must be positive, got {}",
                self.standoff_limit
            )));
        }
        Ok(())
    }

    /// Process envelope under this scenario's planning model.
    pub fn planning_bounds(&self) -> Result<ProcessBounds> {
        ProcessBounds::from_model(
            self.models.select(self.planning_model),
            self.v_t_min,
            self.v_t_max,
        )
    }

    /// Envelope admissible under both models; used for comparison plans.
    pub fn shared_bounds(&self) -> Result<ProcessBounds> {
        let c = ProcessBounds::from_model(&self.models.cold, self.v_t_min, self.v_t_max)?;
        let h = ProcessBounds::from_model(&self.models.hot, self.v_t_min, self.v_t_max)?;
        c.intersect(&h)
    }

    fn with_case(&self, feedback: FeedbackMode, planning_model: PlanningModel) -> ScenarioSpec {
        let label = match (feedback, planning_model) {
            (FeedbackMode::OpenLoop, PlanningModel::Cold) => "OC",
            (FeedbackMode::OpenLoop, PlanningModel::Hot) => "OH",
            (FeedbackMode::ClosedLoop, PlanningModel::Cold) => "CC",
            (FeedbackMode::ClosedLoop, PlanningModel::Hot) => "CH",
        };
        ScenarioSpec {
            label: label.to_string(),
            feedback,
            planning_model,
            ..self.clone()
        }
    }
}

/// Solver outcome kept per closed-loop layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub active_lower: usize,
    pub active_upper: usize,
}

/// One layer of a run trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    /// 1-based layer number.
    pub layer: usize,
    /// Deposition target handed to the velocity generator, mm.
    pub dh_target: Vec<f64>,
    /// Torch speeds actually applied, mm/s.
    pub v_applied: Vec<f64>,
    pub h_measured: Vec<f64>,
    pub h_true: Vec<f64>,
    /// Measured height error, mm.
    pub e: Vec<f64>,
    /// `||e|| / sqrt(N)` of the measured error.
    pub rmse: f64,
    /// Plant temperature when the layer was welded.
    pub lambda: f64,
    pub solve: Option<SolveSummary>,
}

/// Run abort record: the failure and how far the build got.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortInfo {
    pub layer: usize,
    pub reason: String,
}

/// Complete record of one scenario run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub label: String,
    pub feedback: FeedbackMode,
    pub planning_model: PlanningModel,
    pub seed: u64,
    pub n_segments: usize,
    pub layers: Vec<LayerRecord>,
    /// First layer at which the true error exceeded the standoff limit.
    pub standoff_exceeded_at: Option<usize>,
    /// Present when the run stopped early (solver failure); retained
    /// layers stay valid.
    pub aborted: Option<AbortInfo>,
}

impl RunTrace {
    pub fn final_rmse(&self) -> Option<f64> {
        self.layers.last().map(|l| l.rmse)
    }

    pub fn max_rmse(&self) -> Option<f64> {
        self.layers
            .iter()
            .map(|l| l.rmse)
            .fold(None, |acc, x| Some(acc.map_or(x, |m: f64| m.max(x))))
    }
}

/// Layer quality metric: `||e||₂ / sqrt(N)`.
pub fn layer_rmse(e: &[f64]) -> Result<f64> {
    if e.is_empty() {
        return Err(Error::Shape("empty error vector".into()));
    }
    let sum_sq: f64 = e.iter().map(|x| x * x).sum();
    Ok((sum_sq / e.len() as f64).sqrt())
}

/// Runs one scenario on a plan it builds itself (planning-model envelope).
pub fn run_scenario(spec: &ScenarioSpec) -> Result<RunTrace> {
    spec.validate()?;
    let bounds = spec.planning_bounds()?;
    let (plans, nominal) = build_plan(spec, &bounds)?;
    run_on_plan(spec, &bounds, &plans, &nominal)
}

fn build_plan(
    spec: &ScenarioSpec,
    bounds: &ProcessBounds,
) -> Result<(Vec<LayerPlan>, Vec<VelocityProfile>)> {
    let mut geom = compute_slice_geometry(&spec.part, spec.n_segments)?;
    if let Some(theta) = spec.theta_override {
        geom.theta_step = theta;
    }
    let plans = generate_layer_plans(&spec.part, &geom, bounds)?;
    let nominal =
        nominal_velocity_plan(&plans, spec.models.select(spec.planning_model), bounds)?;
    Ok((plans, nominal))
}

/// Runs one scenario against a prebuilt plan and its open-loop profiles.
///
/// Closed-loop layers re-solve the bounded tracking problem from the
/// previous layer's measurement; open-loop layers apply the nominal
/// profile verbatim.
pub fn run_on_plan(
    spec: &ScenarioSpec,
    bounds: &ProcessBounds,
    plans: &[LayerPlan],
    nominal: &[VelocityProfile],
) -> Result<RunTrace> {
    spec.validate()?;
    if plans.len() != nominal.len() {
        return Err(Error::Shape(format!(
            "{} plan layers but {} nominal profiles",
            plans.len(),
            nominal.len()
        )));
    }
    let planning = spec.models.select(spec.planning_model);
    let mut state = PlantState::new(spec.n_segments, &spec.thermal);
    let mut sensor = HeightSensor::new(&spec.sensor);
    let mut trace = RunTrace {
        label: spec.label.clone(),
        feedback: spec.feedback,
        planning_model: spec.planning_model,
        seed: spec.sensor.seed,
        n_segments: spec.n_segments,
        layers: Vec::with_capacity(plans.len()),
        standoff_exceeded_at: None,
        aborted: None,
    };
    let mut prev_error: Option<crate::controller::LayerError> = None;

    for (plan, open_profile) in plans.iter().zip(nominal) {
        let lambda_at_weld = state.lambda;
        let (profile, target, solve) = match spec.feedback {
            FeedbackMode::OpenLoop => (open_profile.clone(), plan.dh_nom.clone(), None),
            FeedbackMode::ClosedLoop => {
                let target = match &prev_error {
                    Some(e) => corrected_target(&plan.dh_nom, e)?,
                    None => plan.dh_nom.clone(),
                };
                match solve_velocity_profile(&target, planning, bounds, &spec.solver, None) {
                    Ok((mut profile, diag)) => {
                        profile.layer_index = plan.layer_index;
                        let summary = SolveSummary {
                            objective: diag.objective,
                            iterations: diag.iterations,
                            converged: diag.converged,
                            active_lower: diag
                                .bound_mask
                                .iter()
                                .filter(|s| **s == crate::controller::BoundStatus::Lower)
                                .count(),
                            active_upper: diag
                                .bound_mask
                                .iter()
                                .filter(|s| **s == crate::controller::BoundStatus::Upper)
                                .count(),
                        };
                        (profile, target, Some(summary))
                    }
                    Err(e) => {
                        trace.aborted = Some(AbortInfo {
                            layer: plan.layer_index,
                            reason: e.to_string(),
                        });
                        return Ok(trace);
                    }
                }
            }
        };

        deposit_layer(
            &mut state,
            &profile,
            &spec.models.cold,
            &spec.models.hot,
            &spec.thermal,
            bounds,
        )?;
        let measured = sensor.measure(&state);
        let err = layer_error(&measured, &plan.h_d, plan.layer_index)?;
        let rmse = layer_rmse(&err.e)?;

        if trace.standoff_exceeded_at.is_none() {
            let worst_true = state
                .h_true
                .iter()
                .zip(&plan.h_d)
                .map(|(t, d)| (t - d).abs())
                .fold(0.0f64, f64::max);
            if worst_true > spec.standoff_limit {
                trace.standoff_exceeded_at = Some(plan.layer_index);
            }
        }

        trace.layers.push(LayerRecord {
            layer: plan.layer_index,
            dh_target: target,
            v_applied: profile.v_t.clone(),
            h_measured: measured,
            h_true: state.h_true.clone(),
            e: err.e.clone(),
            rmse,
            lambda: lambda_at_weld,
            solve,
        });
        prev_error = Some(err);
    }
    Ok(trace)
}

/// Runs the four canonical cases on one shared nominal plan and seed.
pub fn run_comparison(template: &ScenarioSpec) -> Result<Vec<RunTrace>> {
    template.validate()?;
    let bounds = template.shared_bounds()?;
    let (plans, _) = build_plan(template, &bounds)?;

    let cases = [
        template.with_case(FeedbackMode::OpenLoop, PlanningModel::Cold),
        template.with_case(FeedbackMode::OpenLoop, PlanningModel::Hot),
        template.with_case(FeedbackMode::ClosedLoop, PlanningModel::Cold),
        template.with_case(FeedbackMode::ClosedLoop, PlanningModel::Hot),
    ];

    // All four share the geometric plan; each case inverts it through its
    // own model. Scenarios are independent, so run them concurrently.
    let mut results: Vec<Option<Result<RunTrace>>> = (0..cases.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        for (slot, case) in results.iter_mut().zip(&cases) {
            let plans = &plans;
            let bounds = &bounds;
            scope.spawn(move || {
                let run =
                    nominal_velocity_plan(plans, case.models.select(case.planning_model), bounds)
                        .and_then(|nominal| run_on_plan(case, bounds, plans, &nominal));
                *slot = Some(run);
            });
        }
    });
    results
        .into_iter()
        .map(|r| r.expect("scenario thread completed"))
        .collect()
}

/// Summary row of a comparison report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub max_rmse: f64,
    pub final_rmse: f64,
    pub standoff_exceeded_at: Option<usize>,
}

/// Cross-scenario comparison: summary rows plus the per-layer RMSE matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ReportRow>,
    /// `per_layer_rmse[s][i]` is scenario `s` at layer `i+1`.
    pub per_layer_rmse: Vec<Vec<f64>>,
    pub n_layers: usize,
    pub n_segments: usize,
    pub seed: u64,
}

/// Builds a comparison from traces sharing one plan and seed.
pub fn compare_scenarios(traces: &[RunTrace]) -> Result<ComparisonReport> {
    let first = traces
        .first()
        .ok_or_else(|| Error::Comparison("no traces given".into()))?;
    for t in traces {
        if t.layers.len() != first.layers.len() {
            return Err(Error::Comparison(format!(
                "'{}' has {} layers but '{}' has {}",
                t.label,
                t.layers.len(),
                first.label,
                first.layers.len()
            )));
        }
        if t.seed != first.seed {
            return Err(Error::Comparison(format!(
                "'{}' ran with seed {} but '{}' with {}",
                t.label, t.seed, first.label, first.seed
            )));
        }
    }
    if first.layers.is_empty() {
        return Err(Error::Comparison("traces contain no layers".into()));
    }
    let rows = traces
        .iter()
        .map(|t| ReportRow {
            label: t.label.clone(),
            max_rmse: t.max_rmse().unwrap_or(0.0),
            final_rmse: t.final_rmse().unwrap_or(0.0),
            standoff_exceeded_at: t.standoff_exceeded_at,
        })
        .collect();
    Ok(ComparisonReport {
        rows,
        per_layer_rmse: traces
            .iter()
            .map(|t| t.layers.iter().map(|l| l.rmse).collect())
            .collect(),
        n_layers: first.layers.len(),
        n_segments: first.n_segments,
        seed: first.seed,
    })
}

/// Artifact index for a run directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub n_segments: usize,
    pub artifacts: Vec<String>,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// Formats a float for CSV with shortest-roundtrip precision, so a
/// re-imported column matches the exported one bit for bit.
fn csv_f64(x: f64) -> String {
    format!("{x}")
}

/// Writes one trace: the full JSON document plus the per-layer CSV
/// (`layer,rmse,max_abs_e,lambda`). Returns the file names written.
pub fn export_trace(trace: &RunTrace, dir: &Path) -> Result<Vec<String>> {
    if trace.layers.is_empty() {
        return Err(Error::Shape(format!(
            "trace '{}' has no layers; nothing to export",
            trace.label
        )));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json_name = format!("trace_{}.json", trace.label);
    let csv_name = format!("layers_{}.csv", trace.label);

    let json = serde_json::to_string_pretty(trace)
        .map_err(|e| Error::Config(format!("cannot serialize trace: {e}")))?;
    write_file(&dir.join(&json_name), &json)?;

    let mut csv = String::from("layer,rmse,max_abs_e,lambda\n");
    for l in &trace.layers {
        let max_abs_e = l.e.iter().map(|x| x.abs()).fold(0.0f64, f64::max);
        csv.push_str(&format!(
            "{},{},{},{}\n",
            l.layer,
            csv_f64(l.rmse),
            csv_f64(max_abs_e),
            csv_f64(l.lambda)
        ));
    }
    write_file(&dir.join(&csv_name), &csv)?;
    Ok(vec![json_name, csv_name])
}

/// Writes one trace's artifacts plus a manifest naming them.
pub fn export_single(trace: &RunTrace, dir: &Path) -> Result<Manifest> {
    let mut artifacts = export_trace(trace, dir)?;
    artifacts.push("manifest.toml".into());
    let manifest = Manifest {
        seed: trace.seed,
        n_segments: trace.n_segments,
        artifacts,
    };
    let text = toml::to_string_pretty(&manifest)
        .map_err(|e| Error::Config(format!("cannot serialize manifest: {e}")))?;
    write_file(&dir.join("manifest.toml"), &text)?;
    Ok(manifest)
}

/// Writes all comparison artifacts and the manifest naming them.
pub fn export_comparison(
    report: &ComparisonReport,
    traces: &[RunTrace],
    dir: &Path,
) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut artifacts = Vec::new();

    for trace in traces {
        artifacts.extend(export_trace(trace, dir)?);
    }

    let mut summary = String::from("scenario,max_rmse,final_rmse\n");
    for row in &report.rows {
        summary.push_str(&format!(
            "{},{},{}\n",
            row.label,
            csv_f64(row.max_rmse),
            csv_f64(row.final_rmse)
        ));
    }
    write_file(&dir.join("summary.csv"), &summary)?;
    artifacts.push("summary.csv".into());

    let labels: Vec<&str> = report.rows.iter().map(|r| r.label.as_str()).collect();
    let mut matrix = format!("layer,{}\n", labels.join(","));
    for i in 0..report.n_layers {
        let cells: Vec<String> = report
            .per_layer_rmse
            .iter()
            .map(|s| csv_f64(s[i]))
            .collect();
        matrix.push_str(&format!("{},{}\n", i + 1, cells.join(",")));
    }
    write_file(&dir.join("per_layer_rmse.csv"), &matrix)?;
    artifacts.push("per_layer_rmse.csv".into());

    let series: Vec<(String, Vec<f64>)> = report
        .rows
        .iter()
        .zip(&report.per_layer_rmse)
        .map(|(r, v)| (r.label.clone(), v.clone()))
        .collect();
    let svg = line_plot_svg(&series, "Layer RMSE by scenario", "RMSE (mm)");
    write_file(&dir.join("rmse_plot.svg"), &svg)?;
    artifacts.push("rmse_plot.svg".into());

    let manifest = Manifest {
        seed: report.seed,
        n_segments: report.n_segments,
        artifacts: {
            let mut a = artifacts;
            a.push("manifest.toml".into());
            a
        },
    };
    let text = toml::to_string_pretty(&manifest)
        .map_err(|e| Error::Config(format!("cannot serialize manifest: {e}")))?;
    write_file(&dir.join("manifest.toml"), &text)?;
    Ok(manifest)
}

/// Planning summary for feasibility reporting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanSummary {
    pub shape: PlanShape,
    pub n_layers: usize,
    pub dh_min: f64,
    pub dh_max: f64,
    /// Smallest planned deposit margin above dh_min, mm.
    pub lower_margin: f64,
    /// Smallest planned deposit margin below dh_max, mm.
    pub upper_margin: f64,
}

/// Builds the plan for a scenario and summarizes its feasibility margins.
pub fn plan_summary(spec: &ScenarioSpec) -> Result<(Vec<LayerPlan>, PlanSummary)> {
    spec.validate()?;
    let bounds = spec.planning_bounds()?;
    let mut geom = compute_slice_geometry(&spec.part, spec.n_segments)?;
    if let Some(theta) = spec.theta_override {
        geom.theta_step = theta;
    }
    let shape = plan_shape(&spec.part, &geom, &bounds)?;
    let plans = generate_layer_plans(&spec.part, &geom, &bounds)?;
    let mut lower_margin = f64::INFINITY;
    let mut upper_margin = f64::INFINITY;
    for p in &plans {
        for &d in &p.dh_nom {
            lower_margin = lower_margin.min(d - bounds.dh_min);
            upper_margin = upper_margin.min(bounds.dh_max - d);
        }
    }
    let summary = PlanSummary {
        shape,
        n_layers: plans.len(),
        dh_min: bounds.dh_min,
        dh_max: bounds.dh_max,
        lower_margin,
        upper_margin,
    };
    Ok((plans, summary))
}
