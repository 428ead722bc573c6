use crate::error::{Error, Result};
use crate::measure::MeasurePath;

/// Smooth test function with analytic first and second derivatives.
pub trait TestFunction: Send + Sync {
    fn dim(&self) -> usize;

    /// Value, gradient (length `d`) and row-major Hessian (`d × d`).
    fn eval(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64;
}

/// `u ↦ He_k(u) e^{−u²/2} / √k!` with its first two derivatives.
fn hermite_function(k: usize, u: f64) -> (f64, f64, f64) {
    // He_{k−2}, He_{k−1}, He_k by the three-term recurrence
    let (mut hm1, mut h) = (0.0, 1.0);
    let mut hm2 = 0.0;
    let mut fact = 1.0f64;
    for j in 0..k {
        let next = u * h - j as f64 * hm1;
        hm2 = hm1;
        hm1 = h;
        h = next;
        fact *= (j + 1) as f64;
    }
    let kf = k as f64;
    let dh = kf * hm1;
    let d2h = kf * (kf - 1.0) * hm2;
    let g = (-0.5 * u * u).exp() / fact.sqrt();
    (
        h * g,
        (dh - u * h) * g,
        (d2h - 2.0 * u * dh + (u * u - 1.0) * h) * g,
    )
}

/// One tensor Hermite function `Π_k ψ_{α_k}((x_k − c_k)/s_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteTensor {
    pub degrees: Vec<usize>,
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

impl TestFunction for HermiteTensor {
    fn dim(&self) -> usize {
        self.degrees.len()
    }

    fn eval(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
        let d = self.dim();
        let mut v = [0.0; 3];
        let mut dv = [0.0; 3];
        let mut d2v = [0.0; 3];
        for k in 0..d {
            let s = self.scale[k];
            let (a, b, c) = hermite_function(self.degrees[k], (x[k] - self.center[k]) / s);
            v[k] = a;
            dv[k] = b / s;
            d2v[k] = c / (s * s);
        }
        let prod_except = |skip: &[usize]| -> f64 {
            (0..d).filter(|k| !skip.contains(k)).map(|k| v[k]).product()
        };
        for i in 0..d {
            grad[i] = dv[i] * prod_except(&[i]);
            for j in 0..d {
                hess[i * d + j] = if i == j {
                    d2v[i] * prod_except(&[i])
                } else {
                    dv[i] * dv[j] * prod_except(&[i, j])
                };
            }
        }
        prod_except(&[])
    }
}

/// Test function given by closures, for affine and other envelope-free checks.
pub struct AnalyticFunction<F, G, H> {
    pub dim: usize,
    pub value: F,
    pub grad: G,
    pub hess: H,
}

impl<F, G, H> TestFunction for AnalyticFunction<F, G, H>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64], &mut [f64]) + Send + Sync,
    H: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
        (self.grad)(x, grad);
        (self.hess)(x, hess);
        (self.value)(x)
    }
}

pub const DEFAULT_PER_AXIS: usize = 6;

/// Tensor Hermite functions of degree `< per_axis` on every axis.
#[derive(Debug, Clone, PartialEq)]
pub struct TestDictionary {
    per_axis: usize,
    basis: Vec<HermiteTensor>,
}

impl TestDictionary {
    pub fn hermite(per_axis: usize, center: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        let d = center.len();
        if d == 0 || d > 3 || scale.len() != d {
            return Err(Error::InvalidArgument(format!(
                "dictionary needs matching center/scale of dimension 1..=3, got {} and {}",
                d,
                scale.len()
            )));
        }
        if per_axis < 2 {
            return Err(Error::InvalidArgument(format!(
                "dictionary needs at least 2 functions per axis, got {per_axis}"
            )));
        }
        if let Some(s) = scale.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument(format!("dictionary scale must be positive, got {s}")));
        }
        let total = per_axis.pow(d as u32);
        let basis = (0..total)
            .map(|mut flat| {
                let degrees = (0..d)
                    .map(|_| {
                        let k = flat % per_axis;
                        flat /= per_axis;
                        k
                    })
                    .collect();
                HermiteTensor {
                    degrees,
                    center: center.clone(),
                    scale: scale.clone(),
                }
            })
            .collect();
        Ok(Self { per_axis, basis })
    }

    /// Centered at the pooled mean of the path, with envelope width twice the
    /// pooled standard deviation on each axis.
    pub fn fitted(path: &MeasurePath, per_axis: usize) -> Result<Self> {
        let d = path.dim();
        let mut sum = vec![0.0; d];
        let mut sq = vec![0.0; d];
        let mut w_total = 0.0;
        for m in path.measures() {
            for (x, w) in m.iter() {
                for k in 0..d {
                    sum[k] += w * x[k];
                    sq[k] += w * x[k] * x[k];
                }
                w_total += w;
            }
        }
        let center: Vec<f64> = sum.iter().map(|s| s / w_total).collect();
        let scale: Vec<f64> = (0..d)
            .map(|k| {
                let var = (sq[k] / w_total - center[k] * center[k]).max(0.0);
                2.0 * var.sqrt().max(1e-3)
            })
            .collect();
        Self::hermite(per_axis, center, scale)
    }

    /// Sub-dictionary with degrees `< per_axis`; its span is nested in ours.
    pub fn truncated(&self, per_axis: usize) -> Result<Self> {
        let first = &self.basis[0];
        Self::hermite(per_axis.min(self.per_axis), first.center.clone(), first.scale.clone())
    }

    pub fn per_axis(&self) -> usize {
        self.per_axis
    }

    pub fn dim(&self) -> usize {
        self.basis[0].dim()
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn basis(&self) -> &[HermiteTensor] {
        &self.basis
    }

    pub fn labels(&self) -> Vec<String> {
        self.basis
            .iter()
            .map(|b| {
                let idx: Vec<String> = b.degrees.iter().map(|k| k.to_string()).collect();
                format!("psi[{}]", idx.join(","))
            })
            .collect()
    }
}
