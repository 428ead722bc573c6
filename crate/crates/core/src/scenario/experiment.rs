use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::info;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentPlan, Metric, Rung};
use super::registry::{build_effective_model, Scenario, GAMMA_QUAD_POINTS};
use crate::effective::{gamma_separable, write_effective_table, EffectiveModel};
use crate::error::{Error, Result};
use crate::measure::{wasserstein2, EmpiricalMeasure};
use crate::rate::{evaluate_jdg, RateOptions, TestDictionary};
use crate::sim::{run, version_string, Dynamics, TrajectoryRecord};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaRow {
    pub axis: usize,
    pub z: f64,
    pub z_hat: f64,
    pub gamma: f64,
    pub reference: Option<f64>,
    pub abs_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RungResult {
    pub index: usize,
    pub rung: Rung,
    pub trajectory: String,
    pub summary: String,
    /// `W₂` between terminal multiscale and reference measures.
    pub w2_terminal: Option<f64>,
    /// Rate of the rung's path under the averaged generator.
    pub rate: Option<f64>,
    pub max_second_moment: f64,
}

/// `W₂` ladder of one seed, in ladder order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedTrend {
    pub seed: u64,
    pub w2: Vec<f64>,
    /// Consecutive increases along the ladder.
    pub inversions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub version: String,
    pub scenario: String,
    pub rungs: Vec<RungResult>,
    pub reference_trajectory: Option<String>,
    pub reference_rate: Option<f64>,
    pub gamma: Vec<GammaRow>,
    pub trend: Vec<SeedTrend>,
    pub total_inversions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub version: String,
    pub scenario: String,
    pub seeds: Vec<u64>,
    pub reference_seed: u64,
    pub plan: ExperimentPlan,
    pub files: Vec<String>,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Error::from(e).context(format!("creating {}", path.display())))
}

pub fn gamma_rows(scenario: &Scenario) -> Result<Vec<GammaRow>> {
    let Some(system) = scenario.rough_potential() else {
        return Ok(Vec::new());
    };
    let table = gamma_separable(&system.fast, GAMMA_QUAD_POINTS)?;
    Ok((0..table.gamma.len())
        .map(|k| {
            let reference = scenario
                .references
                .iter()
                .find(|r| r.name == format!("gamma_{}", k + 1))
                .map(|r| r.value);
            GammaRow {
                axis: k + 1,
                z: table.z[k],
                z_hat: table.z_hat[k],
                gamma: table.gamma[k],
                reference,
                abs_error: reference.map(|r| (table.gamma[k] - r).abs()),
            }
        })
        .collect())
}

pub fn write_gamma_csv(rows: &[GammaRow], mut w: impl Write) -> Result<()> {
    writeln!(w, "axis,z,z_hat,gamma,reference,abs_error")?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.17e}"));
    for r in rows {
        writeln!(
            w,
            "{},{:.17e},{:.17e},{:.17e},{},{}",
            r.axis,
            r.z,
            r.z_hat,
            r.gamma,
            opt(r.reference),
            opt(r.abs_error)
        )?;
    }
    Ok(())
}

/// Evaluation points for the effective-coefficient table.
pub fn table_points(dim: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = match dim {
        1 => (0..=40).map(|i| -2.0 + 0.1 * i as f64).collect(),
        _ => (0..=8).map(|i| -2.0 + 0.5 * i as f64).collect(),
    };
    match dim {
        1 => axis.iter().map(|&x| vec![x]).collect(),
        _ => axis
            .iter()
            .flat_map(|&a| axis.iter().map(move |&b| vec![a, b]))
            .collect(),
    }
}

fn rate_of(
    plan: &ExperimentPlan,
    scenario: &Scenario,
    record: &TrajectoryRecord,
    model: &EffectiveModel,
) -> Result<f64> {
    let mut path = record.to_path()?;
    if let Some(h) = plan.rate.bandwidth {
        path = path.with_bandwidth(h)?;
    }
    let dict = TestDictionary::fitted(&path, plan.rate.per_axis)?;
    let nu0 = scenario.initial.reference_measure(record.snapshots[0].ids.len())?;
    let opts = RateOptions {
        cutoff: plan.rate.cutoff,
        smoothing: plan.rate.smoothing,
        initial: Some((nu0, plan.rate.initial_tolerance)),
        ..RateOptions::default()
    };
    Ok(evaluate_jdg(&path, model, &dict, &opts)?.total)
}

fn trends(rungs: &[RungResult]) -> Vec<SeedTrend> {
    let mut seeds: Vec<u64> = rungs.iter().map(|r| r.rung.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    seeds
        .into_iter()
        .map(|seed| {
            let w2: Vec<f64> = rungs
                .iter()
                .filter(|r| r.rung.seed == seed)
                .filter_map(|r| r.w2_terminal)
                .collect();
            let inversions = w2.windows(2).filter(|w| w[1] > w[0]).count();
            SeedTrend {
                seed,
                w2,
                inversions,
            }
        })
        .collect()
}

fn run_rung(
    plan: &ExperimentPlan,
    scenario: &Scenario,
    model: &EffectiveModel,
    reference: Option<&EmpiricalMeasure>,
    index: usize,
    rung: &Rung,
) -> Result<RungResult> {
    let cfg = plan.rung_config(rung);
    let fast = scenario.fast();
    let init = scenario.initial.sample(rung.n, rung.seed)?;
    let record = run(&cfg, Dynamics::Multiscale(fast.as_ref()), &init, None)?;
    let stem = format!("rung{index:02}_n{}_eps{}_seed{}", rung.n, rung.epsilon, rung.seed);
    let dir = &plan.out;
    let trajectory = format!("{stem}.csv");
    let summary = format!("{stem}.json");
    let mut w = create(dir, &trajectory)?;
    record.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create(dir, &summary)?;
    record.write_summary_json(&mut w)?;
    w.flush()?;
    let w2_terminal = match reference {
        Some(r) => Some(wasserstein2(&record.terminal_measure()?, r)?),
        None => None,
    };
    let rate = if plan.metrics.contains(&Metric::Rate) {
        Some(rate_of(plan, scenario, &record, model)?)
    } else {
        None
    };
    info!("rung {index} (N={}, eps={}, seed={}) done", rung.n, rung.epsilon, rung.seed);
    Ok(RungResult {
        index,
        rung: *rung,
        trajectory,
        summary,
        w2_terminal,
        rate,
        max_second_moment: record.summary.max_second_moment,
    })
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Run every rung of the plan and write trajectories, summaries, tables,
/// the combined report and a manifest into `plan.out`.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    plan.validate()?;
    let scenario = plan.scenario()?;
    let dir = plan.out.as_path();
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::from(e).context(format!("creating {}", dir.display())))?;
    let mut files = Vec::new();
    let mut report = ExperimentReport {
        version: version_string(),
        scenario: scenario.name.to_string(),
        rungs: Vec::new(),
        reference_trajectory: None,
        reference_rate: None,
        gamma: Vec::new(),
        trend: Vec::new(),
        total_inversions: 0,
    };
    if !plan.ladder.is_empty() {
        let model = build_effective_model(&scenario, plan.route, plan.grid_override())?;
        if plan.metrics.contains(&Metric::GammaTable) {
            report.gamma = gamma_rows(&scenario)?;
            if !report.gamma.is_empty() {
                let mut w = create(dir, "gamma.csv")?;
                write_gamma_csv(&report.gamma, &mut w)?;
                w.flush()?;
                files.push("gamma.csv".to_string());
            }
        }
        if plan.metrics.contains(&Metric::EffectiveTable) {
            let mu = scenario.initial.reference_measure(1000)?;
            let mut w = create(dir, "effective.csv")?;
            write_effective_table(&model, &table_points(scenario.dim), &mu, &mut w)?;
            w.flush()?;
            files.push("effective.csv".to_string());
        }
        let wants_reference =
            plan.metrics.contains(&Metric::W2Ladder) || plan.metrics.contains(&Metric::Rate);
        let reference = if wants_reference {
            let cfg = plan.reference_config();
            let init = scenario.initial.sample(plan.reference.n, plan.reference.seed)?;
            let rec = run(&cfg, Dynamics::Averaged(&model), &init, None)
                .map_err(|e| e.context("reference run"))?;
            let mut w = create(dir, "reference.csv")?;
            rec.write_csv(&mut w)?;
            w.flush()?;
            files.push("reference.csv".to_string());
            report.reference_trajectory = Some("reference.csv".to_string());
            if plan.metrics.contains(&Metric::Rate) {
                report.reference_rate = Some(rate_of(plan, &scenario, &rec, &model)?);
            }
            Some(rec.terminal_measure()?)
        } else {
            None
        };
        let w2_reference = if plan.metrics.contains(&Metric::W2Ladder) {
            reference.as_ref()
        } else {
            None
        };
        report.rungs = plan
            .ladder
            .par_iter()
            .enumerate()
            .map(|(k, rung)| {
                run_rung(plan, &scenario, &model, w2_reference, k, rung).map_err(|e| {
                    e.context(format!(
                        "rung {k} (N={}, eps={}, seed={})",
                        rung.n, rung.epsilon, rung.seed
                    ))
                })
            })
            .collect::<Result<_>>()?;
        for r in &report.rungs {
            files.push(r.trajectory.clone());
            files.push(r.summary.clone());
        }
        report.trend = trends(&report.rungs);
        report.total_inversions = report.trend.iter().map(|t| t.inversions).sum();
        let mut w = create(dir, "report.csv")?;
        writeln!(w, "rung,n,epsilon,dt,seed,w2_terminal,rate,max_second_moment,trajectory")?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        for r in &report.rungs {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.index,
                r.rung.n,
                r.rung.epsilon,
                r.rung.dt(),
                r.rung.seed,
                opt(r.w2_terminal),
                opt(r.rate),
                r.max_second_moment,
                r.trajectory
            )?;
        }
        w.flush()?;
        write_json(dir, "report.json", &report)?;
        files.push("report.csv".to_string());
        files.push("report.json".to_string());
    }
    let mut seeds: Vec<u64> = plan.ladder.iter().map(|r| r.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let manifest = Manifest {
        version: version_string(),
        scenario: scenario.name.to_string(),
        seeds,
        reference_seed: plan.reference.seed,
        plan: plan.clone(),
        files,
    };
    write_json(dir, MANIFEST_FILE, &manifest)?;
    Ok(report)
}
