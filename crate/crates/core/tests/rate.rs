use mfhom::effective::{
    ConfiningPotential, EffectiveModel, Interaction, PeriodicProfile, RoughPotentialSystem,
    SeparablePotential,
};
use mfhom::measure::{EmpiricalMeasure, MeasurePath};
use mfhom::rate::{
    apply_generator, control_cost_bound, evaluate_jdg, AnalyticFunction, HermiteTensor,
    RateOptions, TestDictionary, TestFunction,
};
use mfhom::sim::{run, Dynamics, FeedbackControl, InitialCondition, SimConfig};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

/// Snapshots of `N(v t, s0² + t)` built from the same standard quantiles.
fn gaussian_shift_path(v: f64, s0: f64, atoms: usize, steps: usize) -> MeasurePath {
    let z: Vec<f64> = (0..atoms)
        .map(|i| Normal::standard().inverse_cdf((i as f64 + 0.5) / atoms as f64))
        .collect();
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 / steps as f64).collect();
    let measures = times
        .iter()
        .map(|&t| {
            let s = (s0 * s0 + t).sqrt();
            EmpiricalMeasure::uniform(1, z.iter().map(|z| v * t + s * z).collect()).unwrap()
        })
        .collect();
    MeasurePath::new(times, measures).unwrap()
}

fn point(x: f64) -> EmpiricalMeasure {
    EmpiricalMeasure::uniform(1, vec![x]).unwrap()
}

#[test]
fn generator_annihilates_constants() {
    let model = EffectiveModel::explicit(
        1,
        |x, _, out| out[0] = -x[0].powi(3),
        |_, _, out| out[0] = 1.7,
        true,
    );
    let one = AnalyticFunction {
        dim: 1,
        value: |_: &[f64]| 1.0,
        grad: |_: &[f64], g: &mut [f64]| g.fill(0.0),
        hess: |_: &[f64], h: &mut [f64]| h.fill(0.0),
    };
    let mu = point(0.3);
    let lg = apply_generator(&model, &mu, &one);
    for x in [-2.0, -0.1, 0.0, 1.3, 4.0] {
        assert_eq!(lg(&[x]).unwrap(), 0.0);
    }
}

#[test]
fn generator_on_envelope_function_is_half_second_derivative() {
    let model = EffectiveModel::brownian(1, 1.0);
    // x² e^{−x²/2}; second derivative (x⁴ − 5x² + 2) e^{−x²/2}
    let phi = AnalyticFunction {
        dim: 1,
        value: |x: &[f64]| x[0] * x[0] * (-0.5 * x[0] * x[0]).exp(),
        grad: |x: &[f64], g: &mut [f64]| {
            let u = x[0];
            g[0] = (2.0 * u - u.powi(3)) * (-0.5 * u * u).exp();
        },
        hess: |x: &[f64], h: &mut [f64]| {
            let u = x[0];
            h[0] = (u.powi(4) - 5.0 * u * u + 2.0) * (-0.5 * u * u).exp();
        },
    };
    let mu = point(0.0);
    let lg = apply_generator(&model, &mu, &phi);
    for x in [-2.5, -1.0, -0.2, 0.0, 0.7, 1.9] {
        let u: f64 = x;
        let symbolic = 0.5 * (u.powi(4) - 5.0 * u * u + 2.0) * (-0.5 * u * u).exp();
        assert!((lg(&[x]).unwrap() - symbolic).abs() <= 1e-10);
    }
}

#[test]
fn generator_on_linear_function_is_drift() {
    let model = EffectiveModel::explicit(1, |x, _, out| out[0] = -x[0], |_, _, out| out[0] = 2.0, true);
    let id = AnalyticFunction {
        dim: 1,
        value: |x: &[f64]| x[0],
        grad: |_: &[f64], g: &mut [f64]| g[0] = 1.0,
        hess: |_: &[f64], h: &mut [f64]| h[0] = 0.0,
    };
    let mu = point(0.0);
    let lg = apply_generator(&model, &mu, &id);
    for x in [-3.0, 0.5, 2.0] {
        assert_eq!(lg(&[x]).unwrap(), -x);
    }
}

#[test]
fn gaussian_shift_rate_is_half_v_squared() {
    let path = gaussian_shift_path(1.0, 1.0, 4000, 40);
    let dict = TestDictionary::fitted(&path, 6).unwrap();
    let model = EffectiveModel::brownian(1, 1.0);
    let r = evaluate_jdg(&path, &model, &dict, &RateOptions::default()).unwrap();
    assert!(r.finite && r.lower_bound);
    assert!((r.total - 0.5).abs() < 0.05, "J = {}", r.total);
    assert!(r.integrand.iter().all(|j| *j >= 0.0));
}

#[test]
fn heat_flow_has_zero_rate() {
    let path = gaussian_shift_path(0.0, 1.0, 4000, 40);
    let dict = TestDictionary::fitted(&path, 6).unwrap();
    let model = EffectiveModel::brownian(1, 1.0);
    let r = evaluate_jdg(&path, &model, &dict, &RateOptions::default()).unwrap();
    assert!(r.total.abs() < 1e-3, "J = {}", r.total);
}

#[test]
fn cutoff_sweep_is_stable() {
    let path = gaussian_shift_path(1.0, 1.0, 2000, 20);
    let dict = TestDictionary::fitted(&path, 6).unwrap();
    let model = EffectiveModel::brownian(1, 1.0);
    let at = |cutoff| {
        let opts = RateOptions {
            cutoff,
            ..RateOptions::default()
        };
        evaluate_jdg(&path, &model, &dict, &opts).unwrap().total
    };
    let (hi, lo) = (at(1e-8), at(1e-10));
    assert!((hi - lo).abs() < 0.01 * lo, "{hi} vs {lo}");
}

#[test]
fn wrong_initial_law_gives_infinite_rate() {
    let path = gaussian_shift_path(0.0, 1.0, 500, 10);
    let dict = TestDictionary::fitted(&path, 4).unwrap();
    let model = EffectiveModel::brownian(1, 1.0);
    let shifted = EmpiricalMeasure::uniform(1, path.measures()[0].atoms().iter().map(|x| x + 1.0).collect())
        .unwrap();
    let opts = RateOptions {
        initial: Some((shifted, 0.05)),
        ..RateOptions::default()
    };
    let r = evaluate_jdg(&path, &model, &dict, &opts).unwrap();
    assert!(!r.finite && r.total.is_infinite());
    let mut buf = Vec::new();
    r.write_json(&mut buf).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
    assert!(v["total"].is_null());
}

#[test]
fn too_few_snapshots_is_an_error() {
    let path = gaussian_shift_path(0.0, 1.0, 10, 1);
    let dict = TestDictionary::fitted(&path, 4).unwrap();
    assert!(evaluate_jdg(&path, &EffectiveModel::brownian(1, 1.0), &dict, &RateOptions::default()).is_err());
}

#[test]
fn smoothed_path_keeps_the_shift_rate() {
    let path = gaussian_shift_path(1.0, 1.0, 1000, 20).with_bandwidth(0.1).unwrap();
    let dict = TestDictionary::fitted(&path, 6).unwrap();
    let opts = RateOptions {
        smoothing: true,
        ..RateOptions::default()
    };
    let r = evaluate_jdg(&path, &EffectiveModel::brownian(1, 1.0), &dict, &opts).unwrap();
    assert!((r.total - 0.5).abs() < 0.05, "J = {}", r.total);
}

fn dawson_model() -> EffectiveModel {
    let system = RoughPotentialSystem::new(
        SeparablePotential::new(vec![PeriodicProfile::cosine(0.25)], 1.0).unwrap(),
        ConfiningPotential::DoubleWell { a: 1.0, b: 1.0 },
        Interaction::Quadratic { kappa: 0.5 },
    )
    .unwrap();
    EffectiveModel::from_rough_potential(system, 256).unwrap()
}

#[test]
fn mean_field_flow_has_small_rate() {
    let n = 20_000;
    let init = InitialCondition::GaussianQuantiles {
        mean: vec![0.0],
        std: 0.5,
    };
    let model = dawson_model();
    let times: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
    let cfg = SimConfig::new(1.0, n, 7).with_dt(1e-3).with_snapshots(times);
    let rec = run(&cfg, Dynamics::Averaged(&model), &init.sample(n, 7).unwrap(), None).unwrap();
    let path = rec.to_path().unwrap();
    let dict = TestDictionary::fitted(&path, 6).unwrap();
    let opts = RateOptions {
        initial: Some((init.reference_measure(n).unwrap(), 0.05)),
        ..RateOptions::default()
    };
    let r = evaluate_jdg(&path, &model, &dict, &opts).unwrap();
    assert!(r.finite);
    assert!(r.total <= 0.05, "J = {}", r.total);
}

#[test]
fn tilted_runs_respect_the_control_cost() {
    let n = 20_000;
    let model = EffectiveModel::brownian(1, 1.0);
    let times: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
    let cfg = SimConfig::new(1.0, n, 3).with_dt(1e-2).with_snapshots(times);
    let mut rates = Vec::new();
    for u in [0.0, 1.0, 2.0] {
        let ctrl = FeedbackControl::constant(vec![u]);
        let rec = run(&cfg, Dynamics::Averaged(&model), &vec![0.0; n], Some(&ctrl)).unwrap();
        let cost = rec.summary.cost.unwrap();
        assert!((cost - 0.5 * u * u).abs() < 1e-12);
        let path = rec.to_path().unwrap();
        let dict = TestDictionary::fitted(&path, 6).unwrap();
        let b = control_cost_bound(&path, cost, &model, &dict, &RateOptions::default(), 0.15, 0.05)
            .unwrap();
        assert!(b.pass, "u = {u}: {b:?}");
        rates.push(b.rate);
    }
    assert!(rates[1] >= 0.3 && rates[2] > rates[1], "{rates:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dictionary_gradients_match_differences(
        k0 in 0usize..6, k1 in 0usize..6, x0 in -3.0f64..3.0, x1 in -3.0f64..3.0,
    ) {
        let phi = HermiteTensor { degrees: vec![k0, k1], center: vec![0.2, -0.4], scale: vec![1.3, 0.8] };
        let (mut g, mut hs) = (vec![0.0; 2], vec![0.0; 4]);
        phi.eval(&[x0, x1], &mut g, &mut hs);
        let h = 1e-6;
        let (mut gp, mut gm) = (vec![0.0; 2], vec![0.0; 2]);
        for a in 0..2 {
            let mut p = [x0, x1];
            let mut m = [x0, x1];
            p[a] += h;
            m[a] -= h;
            let fd = (phi.eval(&p, &mut gp, &mut [0.0; 4]) - phi.eval(&m, &mut gm, &mut [0.0; 4])) / (2.0 * h);
            let scale = g.iter().fold(1e-3f64, |s, v| s.max(v.abs()));
            prop_assert!((fd - g[a]).abs() <= 1e-6 * scale, "axis {} fd {} analytic {}", a, fd, g[a]);
            for b in 0..2 {
                let fdh = (gp[b] - gm[b]) / (2.0 * h);
                let hscale = hs.iter().fold(1e-3f64, |s, v| s.max(v.abs()));
                prop_assert!((fdh - hs[a * 2 + b]).abs() <= 1e-6 * hscale);
            }
        }
    }

    #[test]
    fn nested_dictionaries_are_monotone(v in -1.5f64..1.5, s0 in 0.5f64..1.5, small in 2usize..6) {
        let path = gaussian_shift_path(v, s0, 300, 8);
        let big = TestDictionary::fitted(&path, 6).unwrap();
        let model = EffectiveModel::brownian(1, 1.0);
        let opts = RateOptions { cutoff: 1e-14, ..RateOptions::default() };
        let jb = evaluate_jdg(&path, &model, &big, &opts).unwrap().total;
        let js = evaluate_jdg(&path, &model, &big.truncated(small).unwrap(), &opts).unwrap().total;
        prop_assert!(js <= jb + 1e-8, "{} > {}", js, jb);
        prop_assert!(js >= 0.0);
    }

    #[test]
    fn rayleigh_ratio_is_scale_invariant(c in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0]) {
        let path = gaussian_shift_path(0.8, 1.0, 200, 6);
        let base = TestDictionary::fitted(&path, 3).unwrap();
        let model = EffectiveModel::brownian(1, 1.0);
        let opts = RateOptions::default();
        let j = evaluate_jdg(&path, &model, &base, &opts).unwrap().total;
        // a single scaled function: the ratio cancels c² exactly
        let phi = &base.basis()[1];
        let single = |scale: f64| {
            let f = AnalyticFunction {
                dim: 1,
                value: move |x: &[f64]| scale * phi.eval(x, &mut [0.0], &mut [0.0]),
                grad: move |x: &[f64], g: &mut [f64]| { phi.eval(x, g, &mut [0.0]); g[0] *= scale; },
                hess: move |x: &[f64], h: &mut [f64]| { phi.eval(x, &mut [0.0], h); h[0] *= scale; },
            };
            let mu = &path.measures()[3];
            let lg = apply_generator(&model, mu, &f);
            let gen: f64 = mu.atoms().iter().map(|x| lg(&[*x]).unwrap()).sum::<f64>() / mu.len() as f64;
            let mut g = [0.0];
            let den: f64 = mu.atoms().iter().map(|x| { f.eval(&[*x], &mut g, &mut [0.0]); g[0] * g[0] }).sum::<f64>() / mu.len() as f64;
            gen * gen / den
        };
        let (r1, rc) = (single(1.0), single(c));
        prop_assert!((r1 - rc).abs() <= 1e-12 * r1.abs().max(1e-300) + 1e-15);
        prop_assert!(j >= 0.0);
    }
}
