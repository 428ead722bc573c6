use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use super::dictionary::{TestDictionary, TestFunction};
use crate::effective::EffectiveModel;
use crate::error::{Error, Result};
use crate::measure::{gauss_hermite, wasserstein2, EmpiricalMeasure, MeasurePath};

/// `x ↦ β̄(x, μ)·∇φ(x) + ½ D̄(x, μ):∇∇φ(x)`.
pub fn apply_generator<'a>(
    model: &'a EffectiveModel,
    mu: &'a EmpiricalMeasure,
    phi: &'a dyn TestFunction,
) -> impl Fn(&[f64]) -> Result<f64> + 'a {
    let d = model.dim();
    move |x: &[f64]| {
        if phi.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: phi.dim(),
            });
        }
        let (mut g, mut h) = (vec![0.0; d], vec![0.0; d * d]);
        phi.eval(x, &mut g, &mut h);
        let b = model.drift(x, mu)?;
        let dm = model.diffusion(x, mu)?;
        Ok(generator_value(&b, &dm, &g, &h))
    }
}

fn generator_value(b: &[f64], dm: &[f64], g: &[f64], h: &[f64]) -> f64 {
    let first: f64 = b.iter().zip(g).map(|(a, c)| a * c).sum();
    let second: f64 = dm.iter().zip(h).map(|(a, c)| a * c).sum();
    first + 0.5 * second
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateOptions {
    /// Modes with `λ < cutoff · λ_max` are dropped from `M⁺`.
    pub cutoff: f64,
    /// Window-3 moving average on each `⟨θ, φ_j⟩` series before differencing.
    pub smoothing: bool,
    /// Required initial law and the `W₂` tolerance on `θ(0)`.
    pub initial: Option<(EmpiricalMeasure, f64)>,
    /// Gauss–Hermite nodes per axis when the path carries a bandwidth.
    pub kde_nodes: usize,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self {
            cutoff: 1e-9,
            smoothing: false,
            initial: None,
            kde_nodes: 4,
        }
    }
}

/// Finite-dictionary value of the rate functional; a lower bound of the
/// supremum over all test functions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub times: Vec<f64>,
    pub integrand: Vec<f64>,
    /// `+∞` (serialized as null) when `θ(0)` misses the initial law.
    #[serde(serialize_with = "finite_or_null")]
    pub total: f64,
    pub basis: usize,
    /// `λ_max / λ_min` over the retained modes of each Gram matrix.
    pub gram_condition: Vec<f64>,
    pub gram_rank: Vec<usize>,
    pub finite: bool,
    pub lower_bound: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_w2: Option<f64>,
}

fn finite_or_null<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

impl RateReport {
    pub fn write_json(&self, w: impl std::io::Write) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

/// Pairings of one snapshot against the dictionary.
struct Slice {
    pairing: Vec<f64>,
    generator: Vec<f64>,
    gram: DMatrix<f64>,
}

fn evaluate_slice(
    theta: &EmpiricalMeasure,
    model: &EffectiveModel,
    dict: &TestDictionary,
    bandwidth: Option<f64>,
    kde_nodes: usize,
) -> Result<Slice> {
    let d = theta.dim();
    let nb = dict.len();
    let mut pairing = vec![0.0; nb];
    let mut generator = vec![0.0; nb];
    let mut gram = DMatrix::<f64>::zeros(nb, nb);
    let (mut b, mut dm) = (vec![0.0; d], vec![0.0; d * d]);
    let mut grads = vec![0.0; nb * d];
    let mut hess = vec![0.0; d * d];
    let mut dg = vec![0.0; d];
    let (z, wz) = match bandwidth {
        Some(_) => gauss_hermite(kde_nodes),
        None => (vec![0.0], vec![1.0]),
    };
    let h = bandwidth.unwrap_or(0.0);
    let nodes = z.len().pow(d as u32);
    let mut x = vec![0.0; d];
    for (p, w_atom) in theta.iter() {
        for flat in 0..nodes {
            let mut rem = flat;
            let mut w = w_atom;
            for a in 0..d {
                let k = rem % z.len();
                rem /= z.len();
                x[a] = p[a] + h * z[k];
                w *= wz[k];
            }
            model.drift_into(&x, theta, &mut b)?;
            model.diffusion_into(&x, theta, &mut dm)?;
            for (j, phi) in dict.basis().iter().enumerate() {
                let g = &mut grads[j * d..(j + 1) * d];
                let v = phi.eval(&x, g, &mut hess);
                pairing[j] += w * v;
                generator[j] += w * generator_value(&b, &dm, g, &hess);
            }
            for j in 0..nb {
                let gj = &grads[j * d..(j + 1) * d];
                for a in 0..d {
                    dg[a] = (0..d).map(|c| dm[a * d + c] * gj[c]).sum();
                }
                for k in j..nb {
                    let gk = &grads[k * d..(k + 1) * d];
                    gram[(j, k)] += w * dg.iter().zip(gk).map(|(a, c)| a * c).sum::<f64>();
                }
            }
        }
    }
    for j in 0..nb {
        for k in 0..j {
            gram[(j, k)] = gram[(k, j)];
        }
    }
    if pairing.iter().chain(&generator).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("dictionary pairing".into()));
    }
    Ok(Slice {
        pairing,
        generator,
        gram,
    })
}

/// Derivative at `t[i]` of the quadratic through three neighbouring samples;
/// one-sided at the ends.
fn time_derivative(t: &[f64], f: &[f64], i: usize) -> f64 {
    let n = t.len();
    let (a, b, c) = match i {
        0 => (0, 1, 2),
        _ if i == n - 1 => (n - 3, n - 2, n - 1),
        _ => (i - 1, i, i + 1),
    };
    // Lagrange basis derivatives evaluated at t[i]
    let (ta, tb, tc, s) = (t[a], t[b], t[c], t[i]);
    let la = ((s - tb) + (s - tc)) / ((ta - tb) * (ta - tc));
    let lb = ((s - ta) + (s - tc)) / ((tb - ta) * (tb - tc));
    let lc = ((s - ta) + (s - tb)) / ((tc - ta) * (tc - tb));
    la * f[a] + lb * f[b] + lc * f[c]
}

fn moving_average(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    (0..n)
        .map(|i| {
            if i == 0 || i == n - 1 {
                f[i]
            } else {
                (f[i - 1] + f[i] + f[i + 1]) / 3.0
            }
        })
        .collect()
}

/// `½ aᵀ M⁺ a` with eigenvalue cutoff; returns `(value, condition, rank)`.
fn rayleigh(a: &[f64], m: &DMatrix<f64>, cutoff: f64) -> (f64, f64, usize) {
    let eig = SymmetricEigen::new(m.clone());
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    if !(lmax > 0.0) {
        return (0.0, f64::INFINITY, 0);
    }
    let a = DVector::from_column_slice(a);
    let proj = eig.eigenvectors.transpose() * a;
    let mut value = 0.0;
    let mut lmin = lmax;
    let mut rank = 0;
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l >= cutoff * lmax {
            value += proj[k] * proj[k] / l;
            lmin = lmin.min(l);
            rank += 1;
        }
    }
    (0.5 * value.max(0.0), lmax / lmin, rank)
}

/// Rate functional of `path` under the averaged generator, restricted to
/// the span of `dict`.
pub fn evaluate_jdg(
    path: &MeasurePath,
    model: &EffectiveModel,
    dict: &TestDictionary,
    opts: &RateOptions,
) -> Result<RateReport> {
    let n = path.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "rate functional needs at least 3 snapshots, got {n}"
        )));
    }
    for (dim, what) in [(model.dim(), "model"), (dict.dim(), "dictionary")] {
        if dim != path.dim() {
            let e = Error::DimensionMismatch {
                expected: path.dim(),
                got: dim,
            };
            return Err(e.context(format!("{what} vs path")));
        }
    }
    let times = path.times().to_vec();
    let mut initial_w2 = None;
    if let Some((nu0, tol)) = &opts.initial {
        let w = wasserstein2(&path.measures()[0], nu0)?;
        initial_w2 = Some(w);
        if w > *tol {
            return Ok(RateReport {
                integrand: vec![f64::INFINITY; n],
                times,
                total: f64::INFINITY,
                basis: dict.len(),
                gram_condition: Vec::new(),
                gram_rank: Vec::new(),
                finite: false,
                lower_bound: true,
                initial_w2,
            });
        }
    }
    let slices: Vec<Slice> = path
        .measures()
        .par_iter()
        .map(|m| evaluate_slice(m, model, dict, path.bandwidth(), opts.kde_nodes))
        .collect::<Result<_>>()?;
    let nb = dict.len();
    let mut series: Vec<Vec<f64>> = (0..nb)
        .map(|j| slices.iter().map(|s| s.pairing[j]).collect())
        .collect();
    if opts.smoothing {
        series = series.iter().map(|f| moving_average(f)).collect();
    }
    let mut integrand = Vec::with_capacity(n);
    let mut gram_condition = Vec::with_capacity(n);
    let mut gram_rank = Vec::with_capacity(n);
    for (i, s) in slices.iter().enumerate() {
        let a: Vec<f64> = (0..nb)
            .map(|j| time_derivative(&times, &series[j], i) - s.generator[j])
            .collect();
        let (v, cond, rank) = rayleigh(&a, &s.gram, opts.cutoff);
        if rank == 0 {
            warn!("Gram matrix at t = {} is singular; integrand set to 0", times[i]);
        }
        integrand.push(v);
        gram_condition.push(cond);
        gram_rank.push(rank);
    }
    let total = times
        .windows(2)
        .zip(integrand.windows(2))
        .map(|(t, j)| 0.5 * (t[1] - t[0]) * (j[0] + j[1]))
        .sum();
    Ok(RateReport {
        times,
        integrand,
        total,
        basis: nb,
        gram_condition,
        gram_rank,
        finite: true,
        lower_bound: true,
        initial_w2,
    })
}

/// `J` for each nested sub-dictionary with `per_axis` in `sizes`.
pub fn refinement_curve(
    path: &MeasurePath,
    model: &EffectiveModel,
    dict: &TestDictionary,
    sizes: &[usize],
    opts: &RateOptions,
) -> Result<Vec<(usize, f64)>> {
    sizes
        .iter()
        .map(|&b| {
            let sub = dict.truncated(b)?;
            Ok((sub.len(), evaluate_jdg(path, model, &sub, opts)?.total))
        })
        .collect()
}

pub const DEFAULT_COST_SLACK: f64 = 0.15;
pub const DEFAULT_COST_ABS_TOL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostBound {
    pub rate: f64,
    pub cost: f64,
    pub bound: f64,
    /// `bound − rate`; negative when the check fails.
    pub margin: f64,
    pub pass: bool,
}

/// Check `J ≤ max((1 + slack)·cost, abs_tol)` for a path produced under a
/// feedback control with mean quadratic cost `cost`.
pub fn control_cost_bound(
    path: &MeasurePath,
    cost: f64,
    model: &EffectiveModel,
    dict: &TestDictionary,
    opts: &RateOptions,
    slack: f64,
    abs_tol: f64,
) -> Result<CostBound> {
    let rate = evaluate_jdg(path, model, dict, opts)?.total;
    let bound = ((1.0 + slack) * cost).max(abs_tol);
    Ok(CostBound {
        rate,
        cost,
        bound,
        margin: bound - rate,
        pass: rate <= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_exact_on_quadratics() {
        let t = [0.0, 0.1, 0.35, 0.4, 0.9];
        let f: Vec<f64> = t.iter().map(|s| 2.0 * s * s - s + 3.0).collect();
        for i in 0..t.len() {
            assert!((time_derivative(&t, &f, i) - (4.0 * t[i] - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn pseudoinverse_ignores_null_modes() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let (v, cond, rank) = rayleigh(&[1.0, 5.0], &m, 1e-9);
        assert_eq!(rank, 1);
        assert_eq!(cond, 1.0);
        assert!((v - 0.25).abs() < 1e-15);
        assert_eq!(rayleigh(&[1.0], &DMatrix::zeros(1, 1), 1e-9).2, 0);
    }

    #[test]
    fn report_json_uses_null_for_infinite_total() {
        let r = RateReport {
            times: vec![0.0],
            integrand: vec![0.0],
            total: f64::INFINITY,
            basis: 2,
            gram_condition: vec![],
            gram_rank: vec![],
            finite: false,
            lower_bound: true,
            initial_w2: None,
        };
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert!(v["total"].is_null());
    }
}
