//! Quadratic Wasserstein distance between empirical measures.
//!
//! In one dimension the optimal coupling is the monotone (quantile) coupling
//! and the distance is computed exactly. For `d >= 2` we fall back to the
//! sliced distance: the root mean square of exact 1-D distances over seeded
//! random orthonormal frames, so the projection count is rounded up to a
//! multiple of `d`. The sliced value never exceeds the true distance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::EmpiricalMeasure;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlicedConfig {
    pub projections: usize,
    pub seed: u64,
}

impl Default for SlicedConfig {
    fn default() -> Self {
        Self {
            projections: 64,
            seed: 0x5_11ce,
        }
    }
}

pub fn wasserstein2(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<f64> {
    wasserstein2_with(a, b, &SlicedConfig::default())
}

pub fn wasserstein2_with(
    a: &EmpiricalMeasure,
    b: &EmpiricalMeasure,
    cfg: &SlicedConfig,
) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let d = a.dim();
    if d == 1 {
        let xa: Vec<(f64, f64)> = a.iter().map(|(p, w)| (p[0], w)).collect();
        let xb: Vec<(f64, f64)> = b.iter().map(|(p, w)| (p[0], w)).collect();
        return Ok(w2_squared_1d(xa, xb).sqrt());
    }
    if cfg.projections == 0 {
        return Err(Error::InvalidArgument("sliced distance needs >= 1 projection".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let frames = cfg.projections.div_ceil(d);
    let mut acc = 0.0;
    for _ in 0..frames {
        for dir in random_frame(d, &mut rng) {
            let project = |m: &EmpiricalMeasure| -> Vec<(f64, f64)> {
                m.iter()
                    .map(|(p, w)| (p.iter().zip(&dir).map(|(x, u)| x * u).sum(), w))
                    .collect()
            };
            acc += w2_squared_1d(project(a), project(b));
        }
    }
    Ok((acc / (frames * d) as f64).sqrt())
}

/// Orthonormal basis from Gram–Schmidt on Gaussian vectors.
fn random_frame(d: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(d);
    while frame.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut *rng)).collect();
        for u in &frame {
            let c: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
        }
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|c| *c /= norm);
            frame.push(v);
        }
    }
    frame
}

/// ∫_0^1 |F_a^{-1}(u) − F_b^{-1}(u)|² du for weighted 1-D samples.
fn w2_squared_1d(mut a: Vec<(f64, f64)>, mut b: Vec<(f64, f64)>) -> f64 {
    a.sort_by(|p, q| p.0.total_cmp(&q.0));
    b.sort_by(|p, q| p.0.total_cmp(&q.0));
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[0].1, b[0].1);
    let mut total = 0.0;
    while i < a.len() && j < b.len() {
        let mass = ra.min(rb);
        let diff = a[i].0 - b[j].0;
        total += mass * diff * diff;
        ra -= mass;
        rb -= mass;
        if ra <= 1e-15 {
            i += 1;
            if i < a.len() {
                ra += a[i].1;
            }
        }
        if rb <= 1e-15 {
            j += 1;
            if j < b.len() {
                rb += b[j].1;
            }
        }
    }
    total
}
