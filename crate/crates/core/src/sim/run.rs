use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use super::config::{Mode, SimConfig};
use super::control::FeedbackControl;
use super::ensemble::ParticleEnsemble;
use super::step::{step_averaged, step_multiscale};
use crate::effective::EffectiveModel;
use crate::error::{Error, Result};
use crate::measure::{EmpiricalMeasure, MeasurePath};
use crate::torus::FastCoefficients;

/// Version string written into every summary.
pub fn version_string() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}

/// What to integrate.
#[derive(Clone, Copy)]
pub enum Dynamics<'a> {
    Multiscale(&'a dyn FastCoefficients),
    Averaged(&'a EffectiveModel),
    PreAveraged(&'a EffectiveModel),
}

impl Dynamics<'_> {
    pub fn mode(&self) -> Mode {
        match self {
            Self::Multiscale(_) => Mode::Multiscale,
            Self::Averaged(_) => Mode::Averaged,
            Self::PreAveraged(_) => Mode::PreAveraged,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub step: u64,
    pub ids: Vec<u64>,
    pub positions: Vec<f64>,
}

pub const SUMMARY_QUANTILES: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotSummary {
    pub t: f64,
    pub mean: Vec<f64>,
    /// Row-major covariance.
    pub covariance: Vec<f64>,
    /// `quantiles[axis][k]` at [`SUMMARY_QUANTILES`]`[k]`.
    pub quantiles: Vec<Vec<f64>>,
    pub second_moment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub version: String,
    pub mode: Mode,
    pub config: SimConfig,
    pub dt_used: f64,
    pub steps: usize,
    pub snapshots: Vec<SnapshotSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
    pub max_second_moment: f64,
    pub max_fourth_moment: f64,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub diagnostics: BTreeMap<String, f64>,
}

/// Snapshots and summary statistics of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub dim: usize,
    pub snapshots: Vec<Snapshot>,
    pub summary: RunSummary,
}

impl TrajectoryRecord {
    pub fn measure_at(&self, k: usize) -> Result<EmpiricalMeasure> {
        EmpiricalMeasure::uniform(self.dim, self.snapshots[k].positions.clone())
    }

    pub fn terminal_measure(&self) -> Result<EmpiricalMeasure> {
        match self.snapshots.len() {
            0 => Err(Error::EmptyMeasure),
            n => self.measure_at(n - 1),
        }
    }

    /// Snapshots as a measure path; requires distinct snapshot times.
    pub fn to_path(&self) -> Result<MeasurePath> {
        let times = self.snapshots.iter().map(|s| s.t).collect();
        let measures = (0..self.snapshots.len())
            .map(|k| self.measure_at(k))
            .collect::<Result<_>>()?;
        MeasurePath::new(times, measures)
    }

    /// `t,particle_id,x1..xd`, one row per particle per snapshot.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        let mut header = vec!["t".to_string(), "particle_id".to_string()];
        header.extend((1..=self.dim).map(|k| format!("x{k}")));
        writeln!(w, "{}", header.join(","))?;
        for s in &self.snapshots {
            for (i, id) in s.ids.iter().enumerate() {
                write!(w, "{},{}", s.t, id)?;
                for v in &s.positions[i * self.dim..(i + 1) * self.dim] {
                    write!(w, ",{v}")?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }

    pub fn write_summary_json(&self, w: impl Write) -> Result<()> {
        serde_json::to_writer_pretty(w, &self.summary)?;
        Ok(())
    }
}

/// Read snapshots back from the CSV layout of [`TrajectoryRecord::write_csv`].
pub fn read_trajectory_csv(r: impl std::io::BufRead) -> Result<MeasurePath> {
    let mut lines = r.lines();
    let header = lines.next().ok_or(Error::EmptyMeasure)??;
    let d = header.split(',').count().saturating_sub(2);
    if d == 0 {
        return Err(Error::InvalidArgument(format!("bad trajectory header {header:?}")));
    }
    let mut times: Vec<f64> = Vec::new();
    let mut atoms: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidArgument(format!("line {}: {e}", ln + 2)))?;
        if vals.len() != d + 2 {
            return Err(Error::InvalidArgument(format!("line {}: expected {} fields", ln + 2, d + 2)));
        }
        if times.last() != Some(&vals[0]) {
            times.push(vals[0]);
            atoms.push(Vec::new());
        }
        atoms.last_mut().expect("pushed above").extend_from_slice(&vals[2..]);
    }
    let measures = atoms
        .into_iter()
        .map(|a| EmpiricalMeasure::uniform(d, a))
        .collect::<Result<_>>()?;
    MeasurePath::new(times, measures)
}

fn summarize(ens: &ParticleEnsemble) -> Result<SnapshotSummary> {
    let m = ens.measure()?;
    Ok(SnapshotSummary {
        t: ens.time(),
        mean: m.mean().to_vec(),
        covariance: m.covariance(),
        quantiles: (0..ens.dim())
            .map(|a| SUMMARY_QUANTILES.iter().map(|&q| m.quantile(a, q)).collect())
            .collect(),
        second_moment: ens.moment(2),
    })
}

/// Integrate from `initial` (row-major `N × d`) to `t_end`, recording the
/// step nearest each snapshot time.
pub fn run(
    cfg: &SimConfig,
    dynamics: Dynamics<'_>,
    initial: &[f64],
    ctrl: Option<&FeedbackControl>,
) -> Result<TrajectoryRecord> {
    let mode = dynamics.mode();
    cfg.validate(mode)?;
    let d = match dynamics {
        Dynamics::Multiscale(c) => c.dim(),
        Dynamics::Averaged(m) | Dynamics::PreAveraged(m) => m.dim(),
    };
    if initial.len() != cfg.n_particles * d {
        return Err(Error::DimensionMismatch {
            expected: cfg.n_particles * d,
            got: initial.len(),
        });
    }
    let mut ens = ParticleEnsemble::new(d, initial.to_vec(), cfg.seed)?;
    run_ensemble(cfg, dynamics, &mut ens, ctrl)
}

/// As [`run`], starting from a prepared ensemble.
pub fn run_ensemble(
    cfg: &SimConfig,
    dynamics: Dynamics<'_>,
    ens: &mut ParticleEnsemble,
    ctrl: Option<&FeedbackControl>,
) -> Result<TrajectoryRecord> {
    let mode = dynamics.mode();
    cfg.validate(mode)?;
    let (steps, dt) = cfg.time_grid();
    let targets: Vec<u64> = cfg
        .snapshot_times
        .iter()
        .map(|&t| (t / dt).round() as u64)
        .collect();
    let mut snapshots = Vec::with_capacity(targets.len());
    let mut summaries = Vec::with_capacity(targets.len());
    let (mut max2, mut max4) = (ens.moment(2), ens.moment(4));
    let mut next = 0;
    let mut record = |ens: &ParticleEnsemble, next: &mut usize| -> Result<()> {
        while *next < targets.len() && targets[*next] == ens.step_count() {
            snapshots.push(Snapshot {
                t: ens.time(),
                step: ens.step_count(),
                ids: ens.ids().to_vec(),
                positions: ens.positions().to_vec(),
            });
            summaries.push(summarize(ens)?);
            *next += 1;
        }
        Ok(())
    };
    record(ens, &mut next)?;
    for _ in 0..steps {
        match dynamics {
            Dynamics::Multiscale(c) => step_multiscale(ens, cfg, c, ctrl),
            Dynamics::Averaged(m) | Dynamics::PreAveraged(m) => step_averaged(ens, cfg, m, ctrl),
        }
        .map_err(|e| e.context(format!("{} run, seed {}", mode.name(), cfg.seed)))?;
        max2 = max2.max(ens.moment(2));
        max4 = max4.max(ens.moment(4));
        record(ens, &mut next)?;
    }
    Ok(TrajectoryRecord {
        dim: ens.dim(),
        snapshots,
        summary: RunSummary {
            version: version_string(),
            mode,
            config: cfg.clone(),
            dt_used: dt,
            steps,
            snapshots: summaries,
            cost: ctrl.map(|_| ens.mean_cost()),
            max_second_moment: max2,
            max_fourth_moment: max4,
            diagnostics: BTreeMap::new(),
        },
    })
}
