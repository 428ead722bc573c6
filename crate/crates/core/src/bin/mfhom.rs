use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use mfhom::effective::{write_effective_table, EffectiveModel};
use mfhom::rate::{
    control_cost_bound, evaluate_jdg, RateOptions, TestDictionary, DEFAULT_COST_ABS_TOL,
    DEFAULT_COST_SLACK,
};
use mfhom::scenario::{
    build_effective_model, gamma_rows, list_scenarios, load_config, run_experiment,
    table_points, write_gamma_csv, ExperimentPlan, Route, Scenario,
};
use mfhom::sim::{read_trajectory_csv, run, Dynamics, FeedbackControl, Mode, TrajectoryRecord};
use mfhom::torus::write_cell_csv;
use mfhom::{Error, Result};

#[derive(Parser)]
#[command(name = "mfhom", version, about = "Averaged coefficients, particle runs and rate functionals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment plan (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the simulation seed of the plan.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the plan.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Corrector, invariant density and averaged diffusion at one slow point.
    SolveCell,
    /// Table of averaged drift and diffusion.
    Effective,
    /// Closed-form diffusion factors of a rough-potential scenario.
    Gamma,
    /// One particle run.
    Simulate,
    /// Rate functional of a simulated or stored path.
    Rate,
    /// Full ladder experiment with report and manifest.
    Ladder,
    /// Shipped scenarios.
    List,
}

fn plan(cli: &Cli) -> Result<ExperimentPlan> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config {
        path: "--config".into(),
        message: "this subcommand needs a config file".into(),
    })?;
    let mut plan = load_config(path)?;
    if let Some(seed) = cli.seed {
        plan.simulation.seed = seed;
    }
    if let Some(out) = &cli.out {
        plan.out = out.clone();
    }
    plan.validate()?;
    Ok(plan)
}

/// `println!` that tolerates a closed stdout.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Error::from(e).context(format!("creating {}", path.display())))
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    say!("wrote {}", dir.join(name).display());
    Ok(())
}

fn simulate(plan: &ExperimentPlan, scenario: &Scenario, model: &EffectiveModel) -> Result<TrajectoryRecord> {
    let cfg = plan.simulation_config();
    let s = &plan.simulation;
    let init = scenario.initial.sample(s.n, s.seed)?;
    let ctrl = s.control.clone().map(FeedbackControl::constant);
    let fast = scenario.fast();
    let dynamics = match s.mode {
        Mode::Multiscale => Dynamics::Multiscale(fast.as_ref()),
        Mode::Averaged => Dynamics::Averaged(model),
        Mode::PreAveraged => Dynamics::PreAveraged(model),
    };
    run(&cfg, dynamics, &init, ctrl.as_ref())
}

fn execute(cli: &Cli) -> Result<()> {
    match cli.command {
        Command::List => {
            for line in list_scenarios() {
                say!("{line}");
            }
        }
        Command::SolveCell => {
            let plan = plan(cli)?;
            let scenario = plan.scenario()?;
            let model = build_effective_model(&scenario, Route::CellProblem, plan.grid_override())?;
            let x = plan.x.clone().unwrap_or_else(|| vec![0.0; scenario.dim]);
            let mu = scenario.initial.reference_measure(1000)?;
            let avg = model.averages(&x, &mu)?;
            let mut w = create(&plan.out, "cell.csv")?;
            write_cell_csv(&avg.cell, &mut w)?;
            w.flush()?;
            say!("wrote {}", plan.out.join("cell.csv").display());
            write_json(
                &plan.out,
                "cell.json",
                &json!({
                    "scenario": scenario.name,
                    "x": x,
                    "provenance": model.provenance(),
                    "residual": avg.cell.residual(),
                    "centering": avg.cell.centering(),
                    "d_bar": avg.d_bar,
                    "d_tilde_bar": avg.d_tilde_bar,
                    "diffusion_gap": avg.diffusion_gap(),
                    "clamped": avg.clamped,
                }),
            )?;
        }
        Command::Effective => {
            let plan = plan(cli)?;
            let scenario = plan.scenario()?;
            let model = build_effective_model(&scenario, plan.route, plan.grid_override())?;
            let mu = scenario.initial.reference_measure(1000)?;
            let mut w = create(&plan.out, "effective.csv")?;
            write_effective_table(&model, &table_points(scenario.dim), &mu, &mut w)?;
            w.flush()?;
            say!("wrote {}", plan.out.join("effective.csv").display());
            write_json(
                &plan.out,
                "effective.json",
                &json!({
                    "scenario": scenario.name,
                    "provenance": model.provenance(),
                    "clamp_diagnostics": model.clamp_diagnostics(),
                }),
            )?;
        }
        Command::Gamma => {
            let plan = plan(cli)?;
            let scenario = plan.scenario()?;
            let rows = gamma_rows(&scenario)?;
            if rows.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "scenario {} has no closed-form diffusion factor",
                    scenario.name
                )));
            }
            let mut shown = Vec::new();
            write_gamma_csv(&rows, &mut shown)?;
            let _ = std::io::stdout().lock().write_all(&shown);
            let mut w = create(&plan.out, "gamma.csv")?;
            write_gamma_csv(&rows, &mut w)?;
            w.flush()?;
        }
        Command::Simulate => {
            let plan = plan(cli)?;
            let scenario = plan.scenario()?;
            let model = build_effective_model(&scenario, plan.route, plan.grid_override())?;
            let rec = simulate(&plan, &scenario, &model)?;
            let mut w = create(&plan.out, "trajectory.csv")?;
            rec.write_csv(&mut w)?;
            w.flush()?;
            let mut w = create(&plan.out, "summary.json")?;
            rec.write_summary_json(&mut w)?;
            writeln!(w)?;
            w.flush()?;
            say!("wrote {}", plan.out.join("trajectory.csv").display());
        }
        Command::Rate => {
            let plan = plan(cli)?;
            let scenario = plan.scenario()?;
            let model = build_effective_model(&scenario, plan.route, plan.grid_override())?;
            let (path, cost) = match &plan.path {
                Some(p) => {
                    let f = File::open(p).map_err(|e| Error::from(e).context(format!("opening {}", p.display())))?;
                    (read_trajectory_csv(BufReader::new(f))?, None)
                }
                None => {
                    let rec = simulate(&plan, &scenario, &model)?;
                    (rec.to_path()?, rec.summary.cost)
                }
            };
            let path = match plan.rate.bandwidth {
                Some(h) => path.with_bandwidth(h)?,
                None => path,
            };
            let dict = TestDictionary::fitted(&path, plan.rate.per_axis)?;
            let nu0 = scenario.initial.reference_measure(path.measures()[0].len())?;
            let opts = RateOptions {
                cutoff: plan.rate.cutoff,
                smoothing: plan.rate.smoothing,
                initial: Some((nu0, plan.rate.initial_tolerance)),
                ..RateOptions::default()
            };
            let report = evaluate_jdg(&path, &model, &dict, &opts)?;
            let bound = match cost {
                Some(c) => Some(control_cost_bound(
                    &path,
                    c,
                    &model,
                    &dict,
                    &opts,
                    DEFAULT_COST_SLACK,
                    DEFAULT_COST_ABS_TOL,
                )?),
                None => None,
            };
            say!("J = {} (lower bound, {} test functions)", report.total, report.basis);
            write_json(
                &plan.out,
                "rate.json",
                &json!({
                    "scenario": scenario.name,
                    "report": report,
                    "labels": dict.labels(),
                    "cost_bound": bound,
                }),
            )?;
        }
        Command::Ladder => {
            let plan = plan(cli)?;
            let report = run_experiment(&plan)?;
            for r in &report.rungs {
                say!(
                    "rung {:>2} N={:<5} eps={:<5} seed={} W2={} J={}",
                    r.index,
                    r.rung.n,
                    r.rung.epsilon,
                    r.rung.seed,
                    r.w2_terminal.map_or("-".into(), |v| format!("{v:.4}")),
                    r.rate.map_or("-".into(), |v| format!("{v:.4}")),
                );
            }
            say!("inversions: {}", report.total_inversions);
            say!("wrote {}", plan.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
