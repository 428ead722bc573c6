use crate::error::{Error, Result};

/// Uniform tensor grid on the unit torus `[0,1)^d`. Node `(i_1, …, i_d)`
/// sits at `y_a = i_a / n` and has flat index `Σ i_a n^{a-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
}

pub const MAX_DIM: usize = 3;

impl TorusGrid {
    pub fn new(dim: usize, points_per_axis: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "torus dimension must be in 1..={MAX_DIM}, got {dim}"
            )));
        }
        if points_per_axis < 8 {
            return Err(Error::InvalidArgument(format!(
                "need at least 8 points per axis, got {points_per_axis}"
            )));
        }
        Ok(Self {
            dim,
            n: points_per_axis,
        })
    }

    /// 256 nodes per axis in 1-D, 64 in 2-D, 32 in 3-D.
    pub fn default_for(dim: usize) -> Result<Self> {
        let n = match dim {
            1 => 256,
            2 => 64,
            3 => 32,
            _ => 0,
        };
        Self::new(dim, n)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of every node (`h^d`).
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn multi_index(&self, flat: usize, out: &mut [usize]) {
        let mut rem = flat;
        for o in out.iter_mut().take(self.dim) {
            *o = rem % self.n;
            rem /= self.n;
        }
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .take(self.dim)
            .rev()
            .fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn coords(&self, flat: usize, out: &mut [f64]) {
        let h = self.spacing();
        let mut rem = flat;
        for o in out.iter_mut().take(self.dim) {
            *o = (rem % self.n) as f64 * h;
            rem /= self.n;
        }
    }

    /// Flat index of the node displaced by `offset` along `axis`, wrapping mod n.
    #[inline]
    pub fn shift(&self, flat: usize, axis: usize, offset: isize) -> usize {
        let stride = self.n.pow(axis as u32);
        let i = (flat / stride) % self.n;
        let j = (i as isize + offset).rem_euclid(self.n as isize) as usize;
        flat - i * stride + j * stride
    }
}
