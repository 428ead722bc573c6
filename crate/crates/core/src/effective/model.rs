use std::io::Write;
use std::sync::{Arc, Mutex, OnceLock};

use serde::Serialize;

use super::cache::LruCache;
use super::local::{average_all, local_coefficients, LocalFields, XDerivatives};
use super::potentials::RoughPotentialSystem;
use super::separable::gamma_separable;
use super::sqrt::matrix_sqrt_psd_counted;
use crate::error::{Error, Result};
use crate::measure::{EmpiricalMeasure, MeasureFingerprint};
use crate::torus::{
    min_eigenvalue, solve_fast_problem, AssemblyOptions, CellSolution, CenteringPolicy,
    FastCoefficients, TorusGrid,
};

/// How an [`EffectiveModel`] was produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub route: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points_per_axis: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stencil_order: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quad_points: Option<usize>,
    pub negative_eigen_floor: f64,
}

/// Eigenvalues of `D̄` clamped to zero at a given evaluation point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClampEvent {
    pub x: Vec<f64>,
    pub clamped: usize,
}

/// Averages of one corrector solve.
#[derive(Debug, Clone)]
pub struct CellAverages {
    /// Point the corrector was solved at.
    pub x: Vec<f64>,
    pub cell: CellSolution,
    pub x_derivatives: Option<XDerivatives>,
    /// `∫ (I + ∇_yΦ) π`, row-major.
    pub flux: Vec<f64>,
    /// `∫ (∇_xΦ f + A:∇_x∇_yΦ) π`.
    pub offset: Vec<f64>,
    /// `∫ D π`.
    pub d_bar: Vec<f64>,
    /// `∫ D̃ π`.
    pub d_tilde_bar: Vec<f64>,
    /// Symmetric square root of `D̄`.
    pub b_bar: Vec<f64>,
    pub clamped: usize,
}

impl CellAverages {
    /// Largest entry of `|∫Dπ − ∫D̃π|`.
    pub fn diffusion_gap(&self) -> f64 {
        self.d_bar
            .iter()
            .zip(&self.d_tilde_bar)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

type DriftFn = dyn Fn(&[f64], &EmpiricalMeasure, &mut [f64]) + Send + Sync;

#[derive(Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    x: Option<Vec<u64>>,
    mu: Option<MeasureFingerprint>,
}

struct Homogenized {
    coeffs: Arc<dyn FastCoefficients>,
    grid: TorusGrid,
    opts: AssemblyOptions,
    policy: CenteringPolicy,
    frozen: OnceLock<Arc<CellAverages>>,
    cache: LruCache<CacheKey, Arc<CellAverages>>,
}

enum Kind {
    Gamma {
        system: RoughPotentialSystem,
        gamma: Vec<f64>,
    },
    Homogenized(Box<Homogenized>),
    Explicit {
        drift: Arc<DriftFn>,
        diffusion: Arc<DriftFn>,
        constant_diffusion: bool,
    },
}

/// Evaluators for the averaged drift `β̄(x, μ)`, diffusion `D̄(x, μ)` and its
/// root `B̄(x, μ)`. Matrices are row-major `d × d`.
pub struct EffectiveModel {
    dim: usize,
    kind: Kind,
    provenance: Provenance,
    clamps: Mutex<Vec<ClampEvent>>,
}

impl std::fmt::Debug for EffectiveModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EffectiveModel")
            .field("dim", &self.dim)
            .field("provenance", &self.provenance)
            .finish_non_exhaustive()
    }
}

impl EffectiveModel {
    /// Closed-form route for rough-potential systems:
    /// `β̄ = Γ(−∇V₁ − ⟨μ, ∇W(x − ·)⟩)`, `D̄ = σ²Γ`.
    pub fn from_rough_potential(system: RoughPotentialSystem, quad_points: usize) -> Result<Self> {
        let table = gamma_separable(&system.fast, quad_points)?;
        Ok(Self {
            dim: system.dim(),
            kind: Kind::Gamma {
                system,
                gamma: table.gamma,
            },
            provenance: Provenance {
                route: "separable",
                points_per_axis: None,
                stencil_order: None,
                quad_points: Some(quad_points),
                negative_eigen_floor: super::NEGATIVE_EIGEN_FLOOR,
            },
            clamps: Mutex::new(Vec::new()),
        })
    }

    /// General route through the corrector on `grid`.
    pub fn homogenized(
        coeffs: Arc<dyn FastCoefficients>,
        grid: TorusGrid,
        opts: AssemblyOptions,
    ) -> Result<Self> {
        if coeffs.dim() != grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: grid.dim(),
                got: coeffs.dim(),
            });
        }
        Ok(Self {
            dim: grid.dim(),
            provenance: Provenance {
                route: "cell_problem",
                points_per_axis: Some(grid.points_per_axis()),
                stencil_order: Some(opts.order.order()),
                quad_points: None,
                negative_eigen_floor: super::NEGATIVE_EIGEN_FLOOR,
            },
            kind: Kind::Homogenized(Box::new(Homogenized {
                coeffs,
                grid,
                opts,
                policy: CenteringPolicy::default(),
                frozen: OnceLock::new(),
                cache: LruCache::new(64),
            })),
            clamps: Mutex::new(Vec::new()),
        })
    }

    /// Model given directly by `β̄` and `D̄`.
    pub fn explicit(
        dim: usize,
        drift: impl Fn(&[f64], &EmpiricalMeasure, &mut [f64]) + Send + Sync + 'static,
        diffusion: impl Fn(&[f64], &EmpiricalMeasure, &mut [f64]) + Send + Sync + 'static,
        constant_diffusion: bool,
    ) -> Self {
        Self {
            dim,
            kind: Kind::Explicit {
                drift: Arc::new(drift),
                diffusion: Arc::new(diffusion),
                constant_diffusion,
            },
            provenance: Provenance {
                route: "explicit",
                points_per_axis: None,
                stencil_order: None,
                quad_points: None,
                negative_eigen_floor: super::NEGATIVE_EIGEN_FLOOR,
            },
            clamps: Mutex::new(Vec::new()),
        }
    }

    /// `β̄ ≡ 0`, `D̄ ≡ c I`.
    pub fn brownian(dim: usize, c: f64) -> Self {
        Self::explicit(
            dim,
            |_, _, o| o.fill(0.0),
            move |_, _, o| {
                o.fill(0.0);
                for i in 0..dim {
                    o[i * dim + i] = c;
                }
            },
            true,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// `Γ` diagonal on the separable route.
    pub fn gamma(&self) -> Option<&[f64]> {
        match &self.kind {
            Kind::Gamma { gamma, .. } => Some(gamma),
            _ => None,
        }
    }

    /// True when `D̄` depends on neither `x` nor `μ`.
    pub fn has_constant_diffusion(&self) -> bool {
        match &self.kind {
            Kind::Gamma { .. } => true,
            Kind::Homogenized(h) => {
                let dep = h.coeffs.dependence();
                !dep.cell_on_x && !dep.cell_on_measure
            }
            Kind::Explicit {
                constant_diffusion, ..
            } => *constant_diffusion,
        }
    }

    pub fn clamp_diagnostics(&self) -> Vec<ClampEvent> {
        self.clamps.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// `(hits, misses)` of the corrector cache; zero off the cell-problem route.
    pub fn cache_stats(&self) -> (u64, u64) {
        match &self.kind {
            Kind::Homogenized(h) => h.cache.stats(),
            _ => (0, 0),
        }
    }

    fn check_dims(&self, x: &[f64], out: &[f64], out_len: usize) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if out.len() != out_len {
            return Err(Error::DimensionMismatch {
                expected: out_len,
                got: out.len(),
            });
        }
        Ok(())
    }

    pub fn drift_into(&self, x: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]) -> Result<()> {
        self.check_dims(x, out, self.dim)?;
        match &self.kind {
            Kind::Gamma { system, gamma } => {
                system.slow_force(x, mu, out);
                for (o, g) in out.iter_mut().zip(gamma) {
                    *o *= g;
                }
            }
            Kind::Homogenized(h) => {
                let avg = self.averages(x, mu)?;
                let d = self.dim;
                if h.coeffs.dependence().slow_drift_on_y {
                    let fields = local_coefficients(
                        &avg.cell,
                        h.coeffs.as_ref(),
                        x,
                        mu,
                        avg.x_derivatives.as_ref(),
                    )?;
                    out.copy_from_slice(&average_all(&fields.beta, avg.cell.pi())?);
                } else {
                    let mut b = vec![0.0; d];
                    h.coeffs.slow_drift(x, &vec![0.0; d], mu, &mut b);
                    for l in 0..d {
                        out[l] = avg.offset[l]
                            + (0..d).map(|j| avg.flux[l * d + j] * b[j]).sum::<f64>();
                    }
                }
            }
            Kind::Explicit { drift, .. } => drift(x, mu, out),
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("averaged drift at {x:?}")));
        }
        Ok(())
    }

    pub fn diffusion_into(&self, x: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]) -> Result<()> {
        self.check_dims(x, out, self.dim * self.dim)?;
        let d = self.dim;
        match &self.kind {
            Kind::Gamma { system, gamma } => {
                let s2 = system.sigma() * system.sigma();
                out.fill(0.0);
                for k in 0..d {
                    out[k * d + k] = s2 * gamma[k];
                }
            }
            Kind::Homogenized(_) => out.copy_from_slice(&self.averages(x, mu)?.d_bar),
            Kind::Explicit { diffusion, .. } => diffusion(x, mu, out),
        }
        Ok(())
    }

    /// `B̄` with `B̄B̄ᵀ = D̄`, the symmetric PSD root.
    pub fn sqrt_diffusion_into(
        &self,
        x: &[f64],
        mu: &EmpiricalMeasure,
        out: &mut [f64],
    ) -> Result<()> {
        self.check_dims(x, out, self.dim * self.dim)?;
        let d = self.dim;
        match &self.kind {
            Kind::Gamma { system, gamma } => {
                out.fill(0.0);
                for k in 0..d {
                    out[k * d + k] = system.sigma() * gamma[k].sqrt();
                }
            }
            Kind::Homogenized(_) => out.copy_from_slice(&self.averages(x, mu)?.b_bar),
            Kind::Explicit { diffusion, .. } => {
                let mut m = vec![0.0; d * d];
                diffusion(x, mu, &mut m);
                let (s, clamped) = matrix_sqrt_psd_counted(&m, d)?;
                if clamped > 0 {
                    self.record_clamp(x, clamped);
                }
                out.copy_from_slice(&s);
            }
        }
        Ok(())
    }

    pub fn drift(&self, x: &[f64], mu: &EmpiricalMeasure) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.drift_into(x, mu, &mut out)?;
        Ok(out)
    }

    pub fn diffusion(&self, x: &[f64], mu: &EmpiricalMeasure) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim * self.dim];
        self.diffusion_into(x, mu, &mut out)?;
        Ok(out)
    }

    pub fn sqrt_diffusion(&self, x: &[f64], mu: &EmpiricalMeasure) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim * self.dim];
        self.sqrt_diffusion_into(x, mu, &mut out)?;
        Ok(out)
    }

    /// Smallest eigenvalue of `D̄(x, μ)`.
    pub fn min_diffusion_eigenvalue(&self, x: &[f64], mu: &EmpiricalMeasure) -> Result<f64> {
        Ok(min_eigenvalue(&self.diffusion(x, mu)?, self.dim))
    }

    fn record_clamp(&self, x: &[f64], clamped: usize) {
        self.clamps
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(ClampEvent {
                x: x.to_vec(),
                clamped,
            });
    }

    /// Corrector solve and its averages at `(x, μ)`; only available on the
    /// cell-problem route. Results are cached by the arguments the
    /// coefficients declare a dependence on.
    pub fn averages(&self, x: &[f64], mu: &EmpiricalMeasure) -> Result<Arc<CellAverages>> {
        let Kind::Homogenized(h) = &self.kind else {
            return Err(Error::InvalidArgument(
                "corrector averages exist only on the cell-problem route".into(),
            ));
        };
        let dep = h.coeffs.dependence();
        if !dep.cell_on_x && !dep.cell_on_measure {
            if let Some(a) = h.frozen.get() {
                return Ok(a.clone());
            }
            let a = Arc::new(self.solve_averages(h, x, mu)?);
            return Ok(h.frozen.get_or_init(|| a).clone());
        }
        let key = CacheKey {
            x: dep
                .cell_on_x
                .then(|| x.iter().map(|v| v.to_bits()).collect()),
            mu: dep.cell_on_measure.then(|| mu.fingerprint()),
        };
        if let Some(a) = h.cache.get(&key) {
            return Ok(a);
        }
        let a = Arc::new(self.solve_averages(h, x, mu)?);
        h.cache.insert(key, a.clone());
        Ok(a)
    }

    fn solve_averages(&self, h: &Homogenized, x: &[f64], mu: &EmpiricalMeasure) -> Result<CellAverages> {
        let d = self.dim;
        let solve = |x: &[f64]| -> Result<CellSolution> {
            solve_fast_problem(h.coeffs.as_ref(), x, mu, &h.grid, &h.opts, &h.policy)
                .map(|(_, c)| c)
        };
        let cell = solve(x)?;
        let xd = if h.coeffs.dependence().cell_on_x {
            let step = XDerivatives::step(x);
            let (mut plus, mut minus) = (Vec::with_capacity(d), Vec::with_capacity(d));
            for i in 0..d {
                let mut xp = x.to_vec();
                xp[i] += step;
                plus.push(solve(&xp)?);
                xp[i] -= 2.0 * step;
                minus.push(solve(&xp)?);
            }
            Some(XDerivatives::from_central_differences(
                &plus,
                &minus,
                &vec![step; d],
            )?)
        } else {
            None
        };
        let fields: LocalFields =
            local_coefficients(&cell, h.coeffs.as_ref(), x, mu, xd.as_ref())?;
        let pi = cell.pi();
        let mut flux = vec![0.0; d * d];
        for l in 0..d {
            for j in 0..d {
                flux[l * d + j] = pi.average(cell.grad(l, j)) + if l == j { 1.0 } else { 0.0 };
            }
        }
        let mut offset = vec![0.0; d];
        if let Some(xd) = &xd {
            let mut y = vec![0.0; d];
            let (mut f, mut a) = (vec![0.0; d], vec![0.0; d * d]);
            let w = pi.weights();
            for node in 0..h.grid.len() {
                h.grid.coords(node, &mut y);
                h.coeffs.fast_drift(x, &y, mu, &mut f);
                h.coeffs.diffusion(x, &y, mu, &mut a);
                for l in 0..d {
                    let mut v = 0.0;
                    for i in 0..d {
                        v += xd.dphi_dx(l, i)[node] * f[i];
                        for j in 0..d {
                            v += a[i * d + j] * xd.mixed(l, i, j)[node];
                        }
                    }
                    offset[l] += w[node] * v;
                }
            }
        }
        let mut d_bar = average_all(&fields.d, pi)?;
        let mut d_tilde_bar = average_all(&fields.d_tilde, pi)?;
        for m in [&mut d_bar, &mut d_tilde_bar] {
            for r in 0..d {
                for c in 0..r {
                    let s = 0.5 * (m[r * d + c] + m[c * d + r]);
                    m[r * d + c] = s;
                    m[c * d + r] = s;
                }
            }
        }
        let (b_bar, clamped) = matrix_sqrt_psd_counted(&d_bar, d)?;
        if clamped > 0 {
            self.record_clamp(x, clamped);
        }
        Ok(CellAverages {
            x: x.to_vec(),
            cell,
            x_derivatives: xd,
            flux,
            offset,
            d_bar,
            d_tilde_bar,
            b_bar,
            clamped,
        })
    }
}

/// Rows `x_1..x_d, beta_1..beta_d, D_ij (i ≤ j), gamma_k` for each point.
pub fn write_effective_table(
    model: &EffectiveModel,
    points: &[Vec<f64>],
    mu: &EmpiricalMeasure,
    mut w: impl Write,
) -> Result<()> {
    let d = model.dim();
    let mut header: Vec<String> = (1..=d).map(|k| format!("x{k}")).collect();
    header.extend((1..=d).map(|k| format!("beta{k}")));
    for i in 1..=d {
        for j in i..=d {
            header.push(format!("D{i}{j}"));
        }
    }
    if model.gamma().is_some() {
        header.extend((1..=d).map(|k| format!("gamma{k}")));
    }
    writeln!(w, "{}", header.join(","))?;
    for x in points {
        let beta = model.drift(x, mu)?;
        let dm = model.diffusion(x, mu)?;
        let mut row: Vec<String> = x.iter().chain(&beta).map(|v| format!("{v:.17e}")).collect();
        for i in 0..d {
            for j in i..d {
                row.push(format!("{:.17e}", dm[i * d + j]));
            }
        }
        if let Some(g) = model.gamma() {
            row.extend(g.iter().map(|v| format!("{v:.17e}")));
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// `‖B̄B̄ᵀ − D̄‖_F / max(‖D̄‖_F, tiny)`.
pub fn root_residual(model: &EffectiveModel, x: &[f64], mu: &EmpiricalMeasure) -> Result<f64> {
    let d = model.dim();
    let dm = model.diffusion(x, mu)?;
    let b = model.sqrt_diffusion(x, mu)?;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            let bbt: f64 = (0..d).map(|k| b[i * d + k] * b[j * d + k]).sum();
            num += (bbt - dm[i * d + j]).powi(2);
            den += dm[i * d + j].powi(2);
        }
    }
    Ok(num.sqrt() / den.sqrt().max(f64::MIN_POSITIVE))
}
