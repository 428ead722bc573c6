use std::hash::{DefaultHasher, Hash, Hasher};

use crate::error::{Error, Result};

/// Weighted point cloud in R^d. Uniform weights are stored implicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    atoms: Vec<f64>,
    weights: Option<Vec<f64>>,
    mean: Vec<f64>,
}

impl EmpiricalMeasure {
    /// Uniform measure over `atoms`, laid out row-major as `len × dim`.
    pub fn uniform(dim: usize, atoms: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("measure dimension must be >= 1".into()));
        }
        if atoms.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        if !atoms.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(format!(
                "atom buffer of length {} is not a multiple of dim {dim}",
                atoms.len()
            )));
        }
        if let Some(bad) = atoms.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("atom coordinate {bad}")));
        }
        let mean = uniform_mean(dim, &atoms);
        Ok(Self {
            dim,
            atoms,
            weights: None,
            mean,
        })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map(|p| p.len()).ok_or(Error::EmptyMeasure)?;
        let mut atoms = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            atoms.extend_from_slice(p);
        }
        Self::uniform(dim, atoms)
    }

    /// Weighted measure; weights must be nonnegative and sum to one within 1e-12.
    pub fn weighted(dim: usize, atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let mut m = Self::uniform(dim, atoms)?;
        if weights.len() != m.len() {
            return Err(Error::DimensionMismatch {
                expected: m.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument("weights must be finite and >= 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        let mut mean = vec![0.0; dim];
        for (p, w) in m.atoms.chunks_exact(dim).zip(&weights) {
            for (acc, v) in mean.iter_mut().zip(p) {
                *acc += w * v;
            }
        }
        m.mean = mean;
        m.weights = Some(weights);
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        let n = self.len();
        self.atoms
            .chunks_exact(self.dim)
            .enumerate()
            .map(move |(i, p)| (p, self.weight(i, n)))
    }

    #[inline]
    fn weight(&self, i: usize, n: usize) -> f64 {
        match &self.weights {
            Some(w) => w[i],
            None => 1.0 / n as f64,
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        let n = self.len();
        (0..n).map(|i| self.weight(i, n)).collect()
    }

    pub fn is_uniform(&self) -> bool {
        self.weights.is_none()
    }

    /// First moment. For uniform weights it is computed from per-axis sorted
    /// values, so it does not depend on the order of the atoms.
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> Vec<f64> {
        let d = self.dim;
        let mut cov = vec![0.0; d * d];
        for (p, w) in self.iter() {
            for a in 0..d {
                for b in 0..d {
                    cov[a * d + b] += w * (p[a] - self.mean[a]) * (p[b] - self.mean[b]);
                }
            }
        }
        cov
    }

    /// Per-axis quantile by linear interpolation of the sorted coordinates.
    pub fn quantile(&self, axis: usize, q: f64) -> f64 {
        let mut v: Vec<f64> = self.atoms.chunks_exact(self.dim).map(|p| p[axis]).collect();
        v.sort_by(f64::total_cmp);
        let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        v[lo] * (1.0 - frac) + v[hi] * frac
    }

    /// `(1/N) Σ |x_i|^p` (Euclidean norm).
    pub fn absolute_moment(&self, p: i32) -> f64 {
        self.iter()
            .map(|(x, w)| w * x.iter().map(|v| v * v).sum::<f64>().sqrt().powi(p))
            .sum()
    }

    /// Cache key: first two moments plus a hash of the atom bit patterns.
    pub fn fingerprint(&self) -> MeasureFingerprint {
        let mut h = DefaultHasher::new();
        self.dim.hash(&mut h);
        for v in &self.atoms {
            v.to_bits().hash(&mut h);
        }
        if let Some(w) = &self.weights {
            for v in w {
                v.to_bits().hash(&mut h);
            }
        }
        let cov = self.covariance();
        MeasureFingerprint {
            mean_bits: self.mean.iter().map(|v| v.to_bits()).collect(),
            second_bits: cov.iter().map(|v| v.to_bits()).collect(),
            atom_hash: h.finish(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MeasureFingerprint {
    mean_bits: Vec<u64>,
    second_bits: Vec<u64>,
    atom_hash: u64,
}

fn uniform_mean(dim: usize, atoms: &[f64]) -> Vec<f64> {
    let n = atoms.len() / dim;
    let mut column = Vec::with_capacity(n);
    (0..dim)
        .map(|a| {
            column.clear();
            column.extend(atoms.chunks_exact(dim).map(|p| p[a]));
            column.sort_by(f64::total_cmp);
            column.iter().sum::<f64>() / n as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            EmpiricalMeasure::uniform(1, vec![]),
            Err(Error::EmptyMeasure)
        ));
        assert!(EmpiricalMeasure::uniform(2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(EmpiricalMeasure::uniform(1, vec![f64::NAN]).is_err());
        assert!(EmpiricalMeasure::weighted(1, vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn mean_is_permutation_invariant() {
        let a: Vec<f64> = (0..257).map(|i| ((i * 7919) % 263) as f64 * 0.1 + 1e-9 * i as f64).collect();
        let mut b = a.clone();
        b.reverse();
        b.swap(3, 100);
        let ma = EmpiricalMeasure::uniform(1, a).unwrap();
        let mb = EmpiricalMeasure::uniform(1, b).unwrap();
        assert_eq!(ma.mean()[0].to_bits(), mb.mean()[0].to_bits());
    }

    #[test]
    fn moments_of_two_atoms() {
        let m = EmpiricalMeasure::uniform(1, vec![-2.0, 2.0]).unwrap();
        assert_eq!(m.mean(), &[0.0]);
        assert_eq!(m.covariance(), vec![4.0]);
        assert_eq!(m.absolute_moment(4), 16.0);
        assert_eq!(m.quantile(0, 0.5), 0.0);
    }
}
