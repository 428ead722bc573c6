use std::sync::Arc;

use mfhom::effective::{
    gamma_separable, local_coefficients, matrix_sqrt_psd, root_residual, ConfiningPotential,
    EffectiveModel, Interaction, PeriodicProfile, RoughPotentialSystem, SeparablePotential,
};
use mfhom::measure::EmpiricalMeasure;
use mfhom::torus::{
    solve_fast_problem, AssemblyOptions, CenteringPolicy, ClosureCoefficients, StencilOrder,
    TorusGrid,
};
use proptest::prelude::*;

/// `I₀(1)` from its power series `Σ (1/4)^k / (k!)²`.
fn bessel_i0_at_one() -> f64 {
    let (mut term, mut sum) = (1.0f64, 1.0f64);
    for k in 1..30 {
        term *= 0.25 / (k as f64 * k as f64);
        sum += term;
    }
    sum
}

fn cos_system(confining: ConfiningPotential, interaction: Interaction) -> RoughPotentialSystem {
    RoughPotentialSystem::new(
        SeparablePotential::new(vec![PeriodicProfile::cosine(1.0)], 2f64.sqrt()).unwrap(),
        confining,
        interaction,
    )
    .unwrap()
}

fn point(d: usize) -> EmpiricalMeasure {
    EmpiricalMeasure::uniform(d, vec![0.0; d]).unwrap()
}

#[test]
fn bessel_series_matches_reference() {
    assert!((bessel_i0_at_one() - 1.2660658777520082).abs() < 1e-15);
}

#[test]
fn gamma_matches_bessel_oracle() {
    let p = SeparablePotential::new(vec![PeriodicProfile::cosine(1.0)], 2f64.sqrt()).unwrap();
    let t = gamma_separable(&p, 256).unwrap();
    let exact = bessel_i0_at_one().powi(-2);
    assert!(((t.gamma[0] - exact) / exact).abs() < 1e-12);
    assert!((t.z[0] - bessel_i0_at_one()).abs() < 1e-12);
    assert!((t.gamma[0] - 0.62386).abs() < 1e-5);
}

#[test]
fn cell_route_agrees_with_gamma_route() {
    let sys = cos_system(ConfiningPotential::Zero, Interaction::None);
    let gamma = EffectiveModel::from_rough_potential(sys.clone(), 256).unwrap();
    let pde = EffectiveModel::homogenized(
        Arc::new(sys),
        TorusGrid::new(1, 1024).unwrap(),
        AssemblyOptions::default(),
    )
    .unwrap();
    let mu = point(1);
    let a = gamma.diffusion(&[0.3], &mu).unwrap()[0];
    let b = pde.diffusion(&[0.3], &mu).unwrap()[0];
    assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    assert!((a - 2.0 * bessel_i0_at_one().powi(-2)).abs() < 1e-12);
    let avg = pde.averages(&[0.3], &mu).unwrap();
    assert!(avg.diffusion_gap() < 1e-8);
    assert!(pde.clamp_diagnostics().is_empty());
}

#[test]
fn one_dimensional_d_tilde_is_sigma_squared_flux_squared() {
    let sys = cos_system(ConfiningPotential::Zero, Interaction::None);
    let grid = TorusGrid::new(1, 512).unwrap();
    let mu = point(1);
    let (_, cell) = solve_fast_problem(
        &sys,
        &[0.0],
        &mu,
        &grid,
        &AssemblyOptions::default(),
        &CenteringPolicy::default(),
    )
    .unwrap();
    let fields = local_coefficients(&cell, &sys, &[0.0], &mu, None).unwrap();
    for node in 0..grid.len() {
        let g = 1.0 + cell.grad(0, 0)[node];
        assert!((fields.d_tilde[0][node] - 2.0 * g * g).abs() < 1e-12);
    }
}

#[test]
fn zero_fast_drift_leaves_coefficients_unchanged() {
    let coeffs = ClosureCoefficients::constant_noise(1, 0.8)
        .with_slow_drift(|x, _, _, o| o[0] = -x[0]);
    let grid = TorusGrid::new(1, 64).unwrap();
    let mu = point(1);
    let (_, cell) = solve_fast_problem(
        &coeffs,
        &[0.5],
        &mu,
        &grid,
        &AssemblyOptions::default(),
        &CenteringPolicy::default(),
    )
    .unwrap();
    assert!(cell.phi(0).iter().all(|&v| v == 0.0));
    let fields = local_coefficients(&cell, &coeffs, &[0.5], &mu, None).unwrap();
    for node in 0..grid.len() {
        assert_eq!(fields.beta[0][node], -0.5);
        assert!((fields.d[0][node] - 0.64).abs() < 1e-15);
        assert!((fields.d_tilde[0][node] - 0.64).abs() < 1e-15);
    }
}

#[test]
fn dawson_drift_expands_symbolically() {
    let kappa = 0.5;
    let sys = RoughPotentialSystem::new(
        SeparablePotential::new(vec![PeriodicProfile::cosine(0.25)], 1.0).unwrap(),
        ConfiningPotential::DoubleWell { a: 1.0, b: 1.0 },
        Interaction::Quadratic { kappa },
    )
    .unwrap();
    let model = EffectiveModel::from_rough_potential(sys, 512).unwrap();
    let g = model.gamma().unwrap()[0];
    let mu = EmpiricalMeasure::uniform(1, vec![-0.4, 0.1, 0.9]).unwrap();
    let m = 0.2;
    for x in [-1.5, -0.2, 0.0, 0.7, 2.0] {
        let expected = -g * (x * x * x - x) - kappa * g * (x - m);
        let got = model.drift(&[x], &mu).unwrap()[0];
        assert!((got - expected).abs() < 1e-13);
    }
}

#[test]
fn flat_system_is_brownian() {
    let sys = RoughPotentialSystem::new(
        SeparablePotential::new(vec![PeriodicProfile::zero(); 2], 0.7).unwrap(),
        ConfiningPotential::Zero,
        Interaction::None,
    )
    .unwrap();
    let model = EffectiveModel::from_rough_potential(sys, 64).unwrap();
    let mu = point(2);
    assert_eq!(model.drift(&[0.4, -1.0], &mu).unwrap(), vec![0.0, 0.0]);
    let b = model.sqrt_diffusion(&[0.4, -1.0], &mu).unwrap();
    assert!((b[0] - 0.7).abs() < 1e-15 && b[1] == 0.0 && (b[3] - 0.7).abs() < 1e-15);
}

#[test]
fn separable_2d_cell_route_matches_product_formula() {
    let sys = RoughPotentialSystem::new(
        SeparablePotential::new(
            vec![PeriodicProfile::cosine(1.0), PeriodicProfile::sine(1.0)],
            2f64.sqrt(),
        )
        .unwrap(),
        ConfiningPotential::Cosine { c: 1.0 },
        Interaction::None,
    )
    .unwrap();
    let pde = EffectiveModel::homogenized(
        Arc::new(sys.clone()),
        TorusGrid::new(2, 64).unwrap(),
        AssemblyOptions {
            order: StencilOrder::Sixth,
            ..Default::default()
        },
    )
    .unwrap();
    let closed = EffectiveModel::from_rough_potential(sys, 256).unwrap();
    let mu = point(2);
    let x = [0.4, -0.9];
    let (a, b) = (pde.diffusion(&x, &mu).unwrap(), closed.diffusion(&x, &mu).unwrap());
    for (p, q) in a.iter().zip(&b) {
        assert!((p - q).abs() < 1e-6);
    }
    let (a, b) = (pde.drift(&x, &mu).unwrap(), closed.drift(&x, &mu).unwrap());
    for (p, q) in a.iter().zip(&b) {
        assert!((p - q).abs() < 1e-6);
    }
    assert!(root_residual(&pde, &x, &mu).unwrap() < 1e-8);
    // one corrector solve serves every x
    pde.drift(&[1.0, 1.0], &mu).unwrap();
    assert_eq!(pde.cache_stats(), (0, 0));
}

#[test]
fn x_dependent_corrector_uses_parameter_derivatives() {
    // f = −∂_y V(x, y) with V = (1 + x²/4) cos 2πy / 2π², σ = 1: the cell
    // problem depends on x, the averaged drift picks up ∇_xΦ terms.
    use std::f64::consts::TAU;
    let coeffs = ClosureCoefficients::constant_noise(1, 1.0)
        .with_fast_drift(|x, y, _, o| o[0] = (1.0 + 0.25 * x[0] * x[0]) * (TAU * y[0]).sin() / std::f64::consts::PI)
        .with_dependence(mfhom::torus::Dependence {
            cell_on_x: true,
            cell_on_measure: false,
            slow_drift_on_y: false,
        });
    let model = EffectiveModel::homogenized(
        Arc::new(coeffs.clone()),
        TorusGrid::new(1, 256).unwrap(),
        AssemblyOptions::default(),
    )
    .unwrap();
    let mu = point(1);
    let b1 = model.drift(&[0.5], &mu).unwrap();
    let oracle = x_dependent_oracle(0.5);
    assert!(oracle.abs() > 1e-4);
    assert!((b1[0] - oracle).abs() < 1e-8, "{} vs {oracle}", b1[0]);
    let avg = model.averages(&[0.5], &mu).unwrap();
    assert!(avg.x_derivatives.is_some());
    // a second x is a cache miss, the same x a hit
    model.drift(&[0.5], &mu).unwrap();
    model.drift(&[0.7], &mu).unwrap();
    let (hits, misses) = model.cache_stats();
    assert!(hits >= 2 && misses >= 2);
    let grid = TorusGrid::new(1, 64).unwrap();
    let (_, cell) = solve_fast_problem(
        &coeffs,
        &[0.5],
        &mu,
        &grid,
        &AssemblyOptions::default(),
        &CenteringPolicy::default(),
    )
    .unwrap();
    assert!(matches!(
        local_coefficients(&cell, &coeffs, &[0.5], &mu, None),
        Err(mfhom::Error::MissingXDerivatives)
    ));
}

/// Closed-form 1-D corrector `Φ_y = e^{2V}/Ẑ − 1` for `σ = 1`, integrated in
/// `y` and differenced in `x`, gives `∫(Φ_x f + Φ_xy) π`.
fn x_dependent_oracle(x: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let m = 8192;
    let v = |x: f64, y: f64| (1.0 + 0.25 * x * x) * (TAU * y).cos() / (2.0 * PI * PI);
    let corrector = |x: f64| -> (Vec<f64>, Vec<f64>) {
        let ys: Vec<f64> = (0..m).map(|i| i as f64 / m as f64).collect();
        let zh: f64 = ys.iter().map(|&y| (2.0 * v(x, y)).exp()).sum::<f64>() / m as f64;
        let z: f64 = ys.iter().map(|&y| (-2.0 * v(x, y)).exp()).sum::<f64>() / m as f64;
        let dphi: Vec<f64> = ys.iter().map(|&y| (2.0 * v(x, y)).exp() / zh - 1.0).collect();
        let mut phi = vec![0.0; m];
        for i in 1..m {
            phi[i] = phi[i - 1] + 0.5 * (dphi[i] + dphi[i - 1]) / m as f64;
        }
        let mean: f64 = ys
            .iter()
            .zip(&phi)
            .map(|(&y, p)| p * (-2.0 * v(x, y)).exp() / z)
            .sum::<f64>()
            / m as f64;
        (phi.iter().map(|p| p - mean).collect(), dphi)
    };
    let h = 1e-4;
    let (pp, dp) = corrector(x + h);
    let (pm, dm) = corrector(x - h);
    let z: f64 = (0..m).map(|i| (-2.0 * v(x, i as f64 / m as f64)).exp()).sum::<f64>() / m as f64;
    (0..m)
        .map(|i| {
            let y = i as f64 / m as f64;
            let f = (1.0 + 0.25 * x * x) * (TAU * y).sin() / PI;
            let phi_x = (pp[i] - pm[i]) / (2.0 * h);
            let phi_xy = (dp[i] - dm[i]) / (2.0 * h);
            (phi_x * f + phi_xy) * (-2.0 * v(x, y)).exp() / z
        })
        .sum::<f64>()
        / m as f64
}

proptest! {
    #[test]
    fn sqrt_reconstructs_spd(a in prop::collection::vec(-2.0f64..2.0, 9), shift in 0.0f64..1.0) {
        let d = 3;
        let mut m = vec![0.0; 9];
        for i in 0..d {
            for j in 0..d {
                m[i * d + j] = (0..d).map(|k| a[i * d + k] * a[j * d + k]).sum::<f64>()
                    + if i == j { shift } else { 0.0 };
            }
        }
        let s = matrix_sqrt_psd(&m, d).unwrap();
        let (mut num, mut den) = (0.0f64, 0.0f64);
        for i in 0..d {
            for j in 0..d {
                let ss: f64 = (0..d).map(|k| s[i * d + k] * s[k * d + j]).sum();
                num += (ss - m[i * d + j]).powi(2);
                den += m[i * d + j].powi(2);
            }
        }
        prop_assert!(num.sqrt() <= 1e-10 * den.sqrt().max(1e-300));
    }

    #[test]
    fn gamma_lies_in_unit_interval(a in -1.5f64..1.5, k in 1u32..4, sigma in 0.5f64..2.0) {
        let q = PeriodicProfile { terms: vec![mfhom::effective::Harmonic { amplitude: a, wavenumber: k, phase: 0.3 }] };
        let p = SeparablePotential::new(vec![q], sigma).unwrap();
        let g = gamma_separable(&p, 512).unwrap().gamma[0];
        prop_assert!(g > 0.0 && g <= 1.0 + 1e-15);
        if a != 0.0 { prop_assert!(g < 1.0); }
    }
}
