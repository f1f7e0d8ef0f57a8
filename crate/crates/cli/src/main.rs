//! `waamctl`: plan angled layers, calibrate the deposition model, and run
//! simulated open/closed-loop builds from a TOML run configuration.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use waam_control::config::RunConfig;
use waam_control::error::Error;
use waam_control::harness::{
    compare_scenarios, export_comparison, export_single, plan_summary, run_comparison,
    run_scenario, RunTrace, ScenarioSpec,
};
use waam_control::model::{calibrate, parse_samples, read_samples, write_coefficients};
use waam_control::planner::{write_plan_document, PlanDocument};

#[derive(Parser)]
#[command(
    name = "waamctl",
    version,
    about = "Variable-height layer planning and closed-loop height control for WAAM"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Print per-layer detail to stderr while running.
    #[arg(long, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Fit deposition-model coefficients from measured (v_t, dh) samples.
    Calibrate {
        /// Two-column CSV with header `v_t,dh`; pass `-` to read stdin.
        #[arg(long)]
        samples: String,
        /// Tag stored with the fitted coefficients.
        #[arg(long, default_value = "calibrated")]
        label: String,
        /// Output directory.
        #[arg(long, default_value = "waam-out")]
        out: PathBuf,
    },
    /// Slice the configured part and write the nominal layer plan.
    Plan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "waam-out")]
        out: PathBuf,
        /// Override a config value, e.g. --set part.final_angle_deg=30.
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        set: Vec<String>,
    },
    /// Report whether the configured part fits the process envelope.
    CheckFeasibility {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run the configured scenario against the simulated plant.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "waam-out")]
        out: PathBuf,
        /// Override the sensor seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run all four open/closed-loop cases on one shared nominal plan.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "waam-out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        set: Vec<String>,
    },
}

/// Exit codes: 2 config/validation, 3 infeasible geometry, 4 solver
/// failure, 5 I/O.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Domain(_)
        | Error::Shape(_)
        | Error::RankDeficient(_)
        | Error::NonInvertible
        | Error::Config(_)
        | Error::Parse { .. }
        | Error::Comparison(_) => 2,
        Error::GeometryInfeasible(_) | Error::PlanInfeasible(_) => 3,
        Error::Solver(_) => 4,
        Error::Io { .. } => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Calibrate {
            samples,
            label,
            out,
        } => cmd_calibrate(&samples, &label, &out),
        Command::Plan { config, out, set } => {
            let cfg = RunConfig::load_with_overrides(&config, &set)?;
            cmd_plan(&cfg, &out)
        }
        Command::CheckFeasibility { config, set } => {
            let cfg = RunConfig::load_with_overrides(&config, &set)?;
            cmd_check_feasibility(&cfg)
        }
        Command::Simulate {
            config,
            out,
            seed,
            set,
        } => {
            let cfg = RunConfig::load_with_overrides(&config, &set)?;
            cmd_simulate(&cfg, seed, &out, cli.verbose)
        }
        Command::Compare {
            config,
            out,
            seed,
            set,
        } => {
            let cfg = RunConfig::load_with_overrides(&config, &set)?;
            cmd_compare(&cfg, seed, &out, cli.verbose)
        }
    }
}

fn cmd_calibrate(samples_arg: &str, label: &str, out: &Path) -> Result<ExitCode, Error> {
    let samples = if samples_arg == "-" {
        let mut text = String::new();
        std::io::stdin()
            .read_to_string(&mut text)
            .map_err(|e| Error::io("<stdin>", e))?;
        parse_samples(text.as_bytes(), "<stdin>")?
    } else {
        read_samples(Path::new(samples_arg))?
    };
    let fit = calibrate(&samples, label)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let path = out.join("coefficients.toml");
    write_coefficients(&fit, &path)?;
    println!(
        "fit '{}' from {} samples: a = {:.6}, b = {:.6} (R^2 = {:.6}, residual norm = {:.3e})",
        fit.coefficients.label,
        fit.n_samples,
        fit.coefficients.a,
        fit.coefficients.b,
        fit.r_squared,
        fit.residual_norm
    );
    if fit.coefficients.a >= 0.0 {
        eprintln!(
            "warning: fitted exponent is non-negative; this model cannot drive planning"
        );
    }
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn print_plan_summary(spec: &ScenarioSpec, summary: &waam_control::harness::PlanSummary) {
    println!(
        "part: {:.0} mm tube, bend radius {:.0} mm, {:.1} degree bend",
        spec.part.tube_diameter,
        spec.part.bend_radius,
        spec.part.final_angle.to_degrees()
    );
    println!(
        "planning model '{}': deposit envelope [{:.4}, {:.4}] mm over [{}, {}] mm/s",
        spec.models.select(spec.planning_model).label,
        summary.dh_min,
        summary.dh_max,
        spec.v_t_min,
        spec.v_t_max
    );
    println!(
        "tilt increment: {:.6} rad/layer; {} layers ({} base + {} tilted)",
        summary.shape.theta_eff,
        summary.n_layers,
        summary.shape.n_base_layers,
        summary.shape.n_tilted_layers
    );
    println!(
        "deposit margins: {:.4} mm above floor, {:.4} mm below ceiling",
        summary.lower_margin, summary.upper_margin
    );
}

fn cmd_plan(cfg: &RunConfig, out: &Path) -> Result<ExitCode, Error> {
    let spec = cfg.scenario_spec(None)?;
    let (plans, summary) = plan_summary(&spec)?;
    print_plan_summary(&spec, &summary);
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let doc = PlanDocument::new(&summary.shape, &plans);
    let path = out.join("plan.json");
    write_plan_document(&doc, &path)?;
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_check_feasibility(cfg: &RunConfig) -> Result<ExitCode, Error> {
    let spec = cfg.scenario_spec(None)?;
    let (_, summary) = plan_summary(&spec)?;
    println!("feasible");
    print_plan_summary(&spec, &summary);
    Ok(ExitCode::SUCCESS)
}

fn report_layers(trace: &RunTrace, verbose: bool) {
    if !verbose {
        return;
    }
    for l in &trace.layers {
        let solver = l
            .solve
            .as_ref()
            .map(|s| {
                format!(
                    " (solver: {} iters, {} low / {} high active)",
                    s.iterations, s.active_lower, s.active_upper
                )
            })
            .unwrap_or_default();
        eprintln!(
            "{} layer {:>4}: rmse {:.4} mm, lambda {:.3}{}",
            trace.label, l.layer, l.rmse, l.lambda, solver
        );
    }
}

fn warn_standoff(trace: &RunTrace) {
    if let Some(layer) = trace.standoff_exceeded_at {
        eprintln!(
            "warning: {} exceeded the standoff limit at layer {layer}; a physical \
             build would have lost the arc around there",
            trace.label
        );
    }
}

fn cmd_simulate(
    cfg: &RunConfig,
    seed: Option<u64>,
    out: &Path,
    verbose: bool,
) -> Result<ExitCode, Error> {
    let spec = cfg.scenario_spec(seed)?;
    let trace = run_scenario(&spec)?;
    report_layers(&trace, verbose);
    warn_standoff(&trace);
    let manifest = export_single(&trace, out)?;
    println!(
        "{}: {} layers, max RMSE {:.4} mm, final RMSE {:.4} mm (seed {})",
        trace.label,
        trace.layers.len(),
        trace.max_rmse().unwrap_or(0.0),
        trace.final_rmse().unwrap_or(0.0),
        manifest.seed
    );
    for name in &manifest.artifacts {
        println!("wrote {}", out.join(name).display());
    }
    if let Some(abort) = &trace.aborted {
        eprintln!(
            "error: run aborted at layer {}: {} (partial trace exported)",
            abort.layer, abort.reason
        );
        return Ok(ExitCode::from(4));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_compare(
    cfg: &RunConfig,
    seed: Option<u64>,
    out: &Path,
    verbose: bool,
) -> Result<ExitCode, Error> {
    let spec = cfg.scenario_spec(seed)?;
    let traces = run_comparison(&spec)?;
    for trace in &traces {
        report_layers(trace, verbose);
        warn_standoff(trace);
    }
    if let Some(trace) = traces.iter().find(|t| t.aborted.is_some()) {
        for t in &traces {
            if !t.layers.is_empty() {
                export_single(t, out)?;
            }
        }
        let abort = trace.aborted.as_ref().unwrap();
        eprintln!(
            "error: {} aborted at layer {}: {} (partial traces exported)",
            trace.label, abort.layer, abort.reason
        );
        return Ok(ExitCode::from(4));
    }
    let report = compare_scenarios(&traces)?;
    let manifest = export_comparison(&report, &traces, out)?;
    println!("{:<10} {:>14} {:>16}", "scenario", "max RMSE (mm)", "final RMSE (mm)");
    for row in &report.rows {
        println!(
            "{:<10} {:>14.4} {:>16.4}",
            row.label, row.max_rmse, row.final_rmse
        );
    }
    println!(
        "{} layers x {} segments, seed {}",
        report.n_layers, report.n_segments, manifest.seed
    );
    for name in &manifest.artifacts {
        println!("wrote {}", out.join(name).display());
    }
    Ok(ExitCode::SUCCESS)
}
