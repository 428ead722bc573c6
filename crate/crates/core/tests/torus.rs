use std::f64::consts::PI;

use mfhom::measure::EmpiricalMeasure;
use mfhom::torus::{
    assemble_generator, check_centering, solve_fast_problem, solve_invariant_measure,
    AssemblyOptions, CenteringPolicy, ClosureCoefficients, StencilOrder, TorusGrid,
};

fn dummy() -> EmpiricalMeasure {
    EmpiricalMeasure::uniform(1, vec![0.0]).unwrap()
}

/// `f = −V'`, `V = cos 2πy`, `σ = √2`.
fn cos_potential() -> ClosureCoefficients {
    ClosureCoefficients::constant_noise(1, 2f64.sqrt())
        .with_fast_drift(|_, y, _, o| o[0] = 2.0 * PI * (2.0 * PI * y[0]).sin())
}

/// Trapezoid on a fine periodic grid is spectrally accurate.
fn periodic_integral(g: impl Fn(f64) -> f64) -> f64 {
    let n = 4096;
    (0..n).map(|i| g(i as f64 / n as f64)).sum::<f64>() / n as f64
}

fn solve(n: usize, order: StencilOrder) -> (TorusGrid, mfhom::torus::CellSolution) {
    let grid = TorusGrid::new(1, n).unwrap();
    let opts = AssemblyOptions {
        order,
        ..Default::default()
    };
    let (_, cell) = solve_fast_problem(
        &cos_potential(),
        &[0.0],
        &dummy(),
        &grid,
        &opts,
        &CenteringPolicy::default(),
    )
    .unwrap();
    (grid, cell)
}

#[test]
fn gibbs_density_and_flux_constant() {
    let z = periodic_integral(|y| (-(2.0 * PI * y).cos()).exp());
    let zh = periodic_integral(|y| (2.0 * PI * y).cos().exp());
    let (grid, cell) = solve(1024, StencilOrder::Fourth);
    let mut y = [0.0];
    let (mut e_pi, mut e_flux) = (0.0f64, 0.0f64);
    for node in 0..grid.len() {
        grid.coords(node, &mut y);
        let v = (2.0 * PI * y[0]).cos();
        e_pi = e_pi.max((cell.pi().density()[node] - (-v).exp() / z).abs());
        e_flux = e_flux.max((1.0 + cell.grad(0, 0)[node] - v.exp() / zh).abs());
    }
    assert!(e_pi < 1e-8, "density error {e_pi:e}");
    assert!(e_flux < 1e-6, "flux error {e_flux:e}");
    assert!(cell.pi().average(cell.phi(0)).abs() < 1e-12);
    assert!(check_centering(&cos_potential(), cell.pi(), &[0.0], &dummy())[0].abs() < 1e-10);
}

#[test]
fn fourth_order_convergence() {
    let zh = periodic_integral(|y| (2.0 * PI * y).cos().exp());
    let err = |n| {
        let (grid, cell) = solve(n, StencilOrder::Fourth);
        let mut y = [0.0];
        (0..grid.len())
            .map(|node| {
                grid.coords(node, &mut y);
                (1.0 + cell.grad(0, 0)[node] - (2.0 * PI * y[0]).cos().exp() / zh).abs()
            })
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (err(128), err(256));
    let ratio = e1 / e2;
    assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
}

#[test]
fn uniform_density_for_pure_noise_2d() {
    let grid = TorusGrid::new(2, 32).unwrap();
    let coeffs = ClosureCoefficients::constant_noise(2, 0.7);
    let mu = EmpiricalMeasure::uniform(2, vec![0.0, 0.0]).unwrap();
    let op = assemble_generator(&coeffs, &[0.0, 0.0], &mu, &grid, &AssemblyOptions::default())
        .unwrap();
    let pi = solve_invariant_measure(&op).unwrap();
    for p in pi.density() {
        assert!((p - 1.0).abs() < 1e-10);
    }
}

#[test]
fn refuses_uncentered_drift() {
    let coeffs = ClosureCoefficients::constant_noise(1, 1.0).with_fast_drift(|_, _, _, o| o[0] = 1.0);
    let grid = TorusGrid::new(1, 64).unwrap();
    let r = solve_fast_problem(
        &coeffs,
        &[0.0],
        &dummy(),
        &grid,
        &AssemblyOptions::default(),
        &CenteringPolicy::default(),
    );
    assert!(matches!(r, Err(mfhom::Error::Centering { .. })));
}

#[test]
fn rejects_degenerate_noise() {
    let coeffs = ClosureCoefficients::constant_noise(1, 0.0);
    let grid = TorusGrid::new(1, 64).unwrap();
    let r = assemble_generator(&coeffs, &[0.0], &dummy(), &grid, &AssemblyOptions::default());
    assert!(matches!(r, Err(mfhom::Error::Ellipticity { .. })));
}
