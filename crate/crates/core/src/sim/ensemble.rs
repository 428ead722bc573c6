use rand_chacha::ChaCha8Rng;

use super::rng::particle_rng;
use crate::error::{Error, Result};
use crate::measure::EmpiricalMeasure;

/// Particle positions with their noise streams, clock and control costs.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    pub(crate) dim: usize,
    pub(crate) positions: Vec<f64>,
    pub(crate) ids: Vec<u64>,
    pub(crate) rngs: Vec<ChaCha8Rng>,
    pub(crate) costs: Vec<f64>,
    pub(crate) time: f64,
    pub(crate) step_count: u64,
    pub(crate) control_log: Option<Vec<Vec<f64>>>,
}

impl ParticleEnsemble {
    /// Particle `i` gets stream id `i`.
    pub fn new(dim: usize, positions: Vec<f64>, seed: u64) -> Result<Self> {
        if dim == 0 || positions.is_empty() || !positions.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(format!(
                "{} coordinates do not form points of dimension {dim}",
                positions.len()
            )));
        }
        if let Some(v) = positions.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("initial position {v}")));
        }
        let n = positions.len() / dim;
        Ok(Self {
            dim,
            positions,
            ids: (0..n as u64).collect(),
            rngs: (0..n as u64).map(|i| particle_rng(seed, i)).collect(),
            costs: vec![0.0; n],
            time: 0.0,
            step_count: 0,
            control_log: None,
        })
    }

    /// Reorder particles; `perm[k]` is the old index placed at `k`. Each
    /// particle keeps its stream.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let d = self.dim;
        let mut out = self.clone();
        for (k, &i) in perm.iter().enumerate() {
            out.positions[k * d..(k + 1) * d].copy_from_slice(&self.positions[i * d..(i + 1) * d]);
            out.ids[k] = self.ids[i];
            out.rngs[k] = self.rngs[i].clone();
            out.costs[k] = self.costs[i];
        }
        out
    }

    /// Keep `½|u_i|²` of every step for later audit.
    pub fn enable_control_log(&mut self) {
        self.control_log = Some(Vec::new());
    }

    pub fn control_log(&self) -> Option<&[Vec<f64>]> {
        self.control_log.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Per-particle `½∫|u|²dt` so far.
    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    /// `(1/N) Σ_i ½∫|u_i|²dt`, summed in sorted order.
    pub fn mean_cost(&self) -> f64 {
        let mut c = self.costs.clone();
        c.sort_by(f64::total_cmp);
        c.iter().sum::<f64>() / c.len() as f64
    }

    /// Empirical measure with atoms in lexicographic order, so every
    /// reduction over it is independent of particle labelling.
    pub fn measure(&self) -> Result<EmpiricalMeasure> {
        let d = self.dim;
        let mut idx: Vec<usize> = (0..self.len()).collect();
        let p = &self.positions;
        idx.sort_by(|&a, &b| {
            p[a * d..(a + 1) * d]
                .iter()
                .zip(&p[b * d..(b + 1) * d])
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut atoms = Vec::with_capacity(p.len());
        for i in idx {
            atoms.extend_from_slice(&p[i * d..(i + 1) * d]);
        }
        EmpiricalMeasure::uniform(d, atoms)
    }

    /// `(1/N) Σ |X_i|^p`, order independent.
    pub fn moment(&self, p: i32) -> f64 {
        let d = self.dim;
        let mut v: Vec<f64> = self
            .positions
            .chunks(d)
            .map(|x| x.iter().map(|c| c * c).sum::<f64>().sqrt().powi(p))
            .collect();
        v.sort_by(f64::total_cmp);
        v.iter().sum::<f64>() / v.len() as f64
    }
}
