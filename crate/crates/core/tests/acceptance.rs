//! Acceptance suite: one PASS/FAIL line per criterion, then a nonzero exit
//! if any criterion failed. Run with `cargo test --test acceptance`.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::Arc;
use std::time::Instant;

use mfhom::effective::{
    gamma_separable, ConfiningPotential, EffectiveModel, Interaction, PeriodicProfile,
    RoughPotentialSystem, SeparablePotential,
};
use mfhom::measure::{wasserstein2, EmpiricalMeasure, MeasurePath};
use mfhom::rate::{
    apply_generator, control_cost_bound, evaluate_jdg, AnalyticFunction, RateOptions,
    TestDictionary,
};
use mfhom::scenario::{build_effective_model, find_scenario, registry, Route};
use mfhom::sim::{run, Dynamics, FeedbackControl, InitialCondition, SimConfig};
use mfhom::torus::{
    assemble_generator, solve_fast_problem, solve_invariant_measure, AssemblyOptions,
    CenteringPolicy, StencilOrder, TorusGrid,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

/// `I₀(z)` by its power series, summed to convergence.
fn bessel_i0(z: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > 1e-18 * sum {
        term *= (z / 2.0) * (z / 2.0) / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

fn check(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn cos_system(sigma: f64) -> RoughPotentialSystem {
    RoughPotentialSystem::new(
        SeparablePotential::new(vec![PeriodicProfile::cosine(1.0)], sigma).unwrap(),
        ConfiningPotential::Zero,
        Interaction::None,
    )
    .unwrap()
}

fn origin(d: usize) -> EmpiricalMeasure {
    EmpiricalMeasure::uniform(d, vec![0.0; d]).unwrap()
}

fn grid_opts(order: StencilOrder) -> AssemblyOptions {
    AssemblyOptions {
        order,
        ..AssemblyOptions::default()
    }
}

fn criterion_1() -> Outcome {
    let sigma = 2f64.sqrt();
    let t = Instant::now();
    let table = gamma_separable(&cos_system(sigma).fast, 256).map_err(|e| e.to_string())?;
    let elapsed = t.elapsed().as_secs_f64();
    let oracle = 1.0 / bessel_i0(1.0).powi(2);
    let rel = (table.gamma[0] - oracle).abs() / oracle;
    let model = EffectiveModel::homogenized(
        Arc::new(cos_system(sigma)),
        TorusGrid::new(1, 1024).unwrap(),
        grid_opts(StencilOrder::Fourth),
    )
    .map_err(|e| e.to_string())?;
    let d_bar = model.diffusion(&[0.0], &origin(1)).map_err(|e| e.to_string())?[0];
    let route_gap = (d_bar / (sigma * sigma) - table.gamma[0]).abs();
    check(
        rel <= 1e-10 && elapsed < 1.0 && route_gap <= 1e-6,
        format!(
            "gamma rel err {rel:.2e} (<= 1e-10) in {elapsed:.3}s (< 1s); cell route gap {route_gap:.2e} (<= 1e-6)"
        ),
    )
}

fn criterion_2() -> Outcome {
    let sigma = 2f64.sqrt();
    let t = Instant::now();
    let z_hat = bessel_i0(1.0);
    let sup_err = |n: usize| -> Result<f64, String> {
        let grid = TorusGrid::new(1, n).unwrap();
        let (_, cell) = solve_fast_problem(
            &cos_system(sigma),
            &[0.0],
            &origin(1),
            &grid,
            &grid_opts(StencilOrder::Fourth),
            &CenteringPolicy::default(),
        )
        .map_err(|e| e.to_string())?;
        let mut y = [0.0];
        Ok((0..n)
            .map(|i| {
                grid.coords(i, &mut y);
                let oracle = (std::f64::consts::TAU * y[0]).cos().exp() / z_hat;
                (1.0 + cell.grad(0, 0)[i] - oracle).abs()
            })
            .fold(0.0, f64::max))
    };
    let (coarse, fine) = (sup_err(512)?, sup_err(1024)?);
    let elapsed = t.elapsed().as_secs_f64();
    let ratio = coarse / fine;
    check(
        fine <= 1e-6 && ratio >= 3.0 && elapsed < 5.0,
        format!("sup |1+phi' - oracle| {fine:.2e} at n=1024 (<= 1e-6); halving-h ratio {ratio:.1} (>= 3); {elapsed:.2}s (< 5s)"),
    )
}

fn criterion_3() -> Outcome {
    let mut worst_gibbs = 0.0f64;
    for (name, n, order) in [
        ("cos_rough_1d", 1024, StencilOrder::Fourth),
        // the default 128 grid sits at 1.9e-8 discretization error
        ("separable_2d", 192, StencilOrder::Sixth),
    ] {
        let s = find_scenario(name).map_err(|e| e.to_string())?;
        let sys = s.rough_potential().unwrap().fast.clone();
        let d = s.dim;
        let grid = TorusGrid::new(d, n).unwrap();
        let fast = s.fast();
        let op = assemble_generator(fast.as_ref(), &vec![0.0; d], &origin(d), &grid, &grid_opts(order))
            .map_err(|e| e.to_string())?;
        let pi = solve_invariant_measure(&op).map_err(|e| e.to_string())?;
        // product of per-axis Gibbs factors e^{−2Q_k/σ²}/Z_k, Z_k from the Bessel series
        let s2 = sys.sigma * sys.sigma;
        let mut y = vec![0.0; d];
        let mut case = 0.0f64;
        for node in 0..grid.len() {
            grid.coords(node, &mut y);
            let mut g = 1.0;
            for (q, yk) in sys.q.iter().zip(&y) {
                let q = q.value(*yk);
                g *= (-2.0 * q / s2).exp() / bessel_i0(2.0 / s2);
            }
            case = case.max((pi.density()[node] - g).abs());
        }
        worst_gibbs = worst_gibbs.max(case);
    }
    let s = find_scenario("skew_2d").map_err(|e| e.to_string())?;
    let grid = TorusGrid::new(2, 64).unwrap();
    let op = assemble_generator(s.fast().as_ref(), &[0.0, 0.0], &origin(2), &grid, &grid_opts(StencilOrder::Sixth))
        .map_err(|e| e.to_string())?;
    let pi = solve_invariant_measure(&op).map_err(|e| e.to_string())?;
    let residual = op.apply_adjoint(pi.density()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mass = (pi.integral() - 1.0).abs();
    check(
        worst_gibbs <= 1e-8 && residual <= 1e-8 && mass <= 1e-12,
        format!(
            "Gibbs sup err {worst_gibbs:.2e} (<= 1e-8); skew_2d adjoint residual {residual:.2e} (<= 1e-8), |int pi - 1| {mass:.1e} (<= 1e-12)"
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for s in registry() {
        let model = build_effective_model(&s, Route::CellProblem, None).map_err(|e| e.to_string())?;
        let mu = s.initial.reference_measure(200).map_err(|e| e.to_string())?;
        let avg = model.averages(&vec![0.3; s.dim], &mu).map_err(|e| format!("{}: {e}", s.name))?;
        let gap = avg.diffusion_gap();
        let lam = mfhom::torus::min_eigenvalue(&avg.d_bar, s.dim);
        let clean = model.clamp_diagnostics().is_empty() && avg.clamped == 0;
        ok &= gap <= 1e-8 && lam >= 0.0 && clean;
        parts.push(format!("{} {gap:.1e}", s.name));
    }
    check(ok, format!("|<D> - <D~>| (<= 1e-8), PSD, no clamps: {}", parts.join(", ")))
}

fn dawson() -> RoughPotentialSystem {
    RoughPotentialSystem::new(
        SeparablePotential::new(vec![PeriodicProfile::cosine(0.25)], 1.0).unwrap(),
        ConfiningPotential::DoubleWell { a: 1.0, b: 1.0 },
        Interaction::Quadratic { kappa: 0.5 },
    )
    .unwrap()
}

fn dawson_initial() -> InitialCondition {
    InitialCondition::GaussianQuantiles {
        mean: vec![0.0],
        std: 0.5,
    }
}

fn criterion_5() -> Outcome {
    let t = Instant::now();
    let model = EffectiveModel::from_rough_potential(dawson(), 256).map_err(|e| e.to_string())?;
    let init = dawson_initial();
    let n_ref = 20_000;
    let cfg = SimConfig::new(1.0, n_ref, 0).with_dt(1e-3);
    let reference = run(&cfg, Dynamics::Averaged(&model), &init.sample(n_ref, 0).unwrap(), None)
        .and_then(|r| r.terminal_measure())
        .map_err(|e| e.to_string())?;
    let system = dawson();
    let terminal_w2 = |n: usize, eps: f64, seed: u64| -> Result<f64, String> {
        let cfg = SimConfig::new(eps, n, seed).with_dt(eps * eps / 10.0);
        let rec = run(&cfg, Dynamics::Multiscale(&system), &init.sample(n, seed).unwrap(), None)
            .map_err(|e| e.to_string())?;
        wasserstein2(&rec.terminal_measure().unwrap(), &reference).map_err(|e| e.to_string())
    };
    let mut at_2000 = Vec::new();
    for seed in 1..=3 {
        at_2000.push(terminal_w2(2000, 0.05, seed)?);
    }
    let mut inversions = 0;
    let mut rows = Vec::new();
    for seed in 1..=3 {
        let w: Vec<f64> = [(250, 0.2), (1000, 0.1), (4000, 0.05)]
            .iter()
            .map(|&(n, e)| terminal_w2(n, e, seed))
            .collect::<Result<_, _>>()?;
        inversions += w.windows(2).filter(|p| p[1] > p[0]).count();
        rows.push(format!("[{:.3} {:.3} {:.3}]", w[0], w[1], w[2]));
    }
    let worst = at_2000.iter().cloned().fold(0.0, f64::max);
    let elapsed = t.elapsed().as_secs_f64();
    check(
        worst <= 0.1 && inversions <= 1 && elapsed <= 600.0,
        format!(
            "W2 at (2000, 0.05) max over 3 seeds {worst:.3} (<= 0.1); ladder {} with {inversions} inversions (<= 1); {elapsed:.1}s (<= 600s)",
            rows.join(" ")
        ),
    )
}

fn gaussian_shift_path(v: f64, atoms: usize, steps: usize) -> MeasurePath {
    let z: Vec<f64> = (0..atoms)
        .map(|i| Normal::standard().inverse_cdf((i as f64 + 0.5) / atoms as f64))
        .collect();
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 / steps as f64).collect();
    let measures = times
        .iter()
        .map(|&t| EmpiricalMeasure::uniform(1, z.iter().map(|z| v * t + (1.0 + t).sqrt() * z).collect()).unwrap())
        .collect();
    MeasurePath::new(times, measures).unwrap()
}

fn criterion_6() -> Outcome {
    let t = Instant::now();
    let opts = RateOptions::default();
    let times: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();

    let model = EffectiveModel::from_rough_potential(dawson(), 256).map_err(|e| e.to_string())?;
    let n = 20_000;
    let cfg = SimConfig::new(1.0, n, 7).with_dt(1e-3).with_snapshots(times.clone());
    let rec = run(&cfg, Dynamics::Averaged(&model), &dawson_initial().sample(n, 7).unwrap(), None)
        .map_err(|e| e.to_string())?;
    let path = rec.to_path().unwrap();
    let dict = TestDictionary::fitted(&path, 6).unwrap();
    let with_initial = RateOptions {
        initial: Some((dawson_initial().reference_measure(n).unwrap(), 0.05)),
        ..RateOptions::default()
    };
    let j_mf = evaluate_jdg(&path, &model, &dict, &with_initial).map_err(|e| e.to_string())?.total;

    let shift = gaussian_shift_path(1.0, 4000, 40);
    let flat = EffectiveModel::brownian(1, 1.0);
    let dict = TestDictionary::fitted(&shift, 6).unwrap();
    let j_shift = evaluate_jdg(&shift, &flat, &dict, &opts).map_err(|e| e.to_string())?.total;

    let n = 40_000;
    let cfg = SimConfig::new(1.0, n, 3).with_dt(1e-2).with_snapshots(times);
    let mut tilts = Vec::new();
    let mut bound_ok = true;
    for u in [0.5, 1.0, 2.0] {
        let ctrl = FeedbackControl::constant(vec![u]);
        let rec = run(&cfg, Dynamics::Averaged(&flat), &vec![0.0; n], Some(&ctrl)).map_err(|e| e.to_string())?;
        let path = rec.to_path().unwrap();
        let dict = TestDictionary::fitted(&path, 6).unwrap();
        let b = control_cost_bound(&path, rec.summary.cost.unwrap(), &flat, &dict, &opts, 0.15, 0.05)
            .map_err(|e| e.to_string())?;
        bound_ok &= b.rate <= 1.15 * b.cost;
        tilts.push(format!("u={u}: J {:.3} vs 1.15*{:.3}", b.rate, b.cost));
    }
    let elapsed = t.elapsed().as_secs_f64();
    check(
        j_mf <= 0.05 && (j_shift - 0.5).abs() <= 0.05 && bound_ok && elapsed <= 120.0,
        format!(
            "(a) mean-field J {j_mf:.4} (<= 0.05); (b) shift J {j_shift:.4} (0.5 +- 10%, B=6); (c) {}; {elapsed:.1}s (<= 120s)",
            tilts.join(", ")
        ),
    )
}

fn criterion_7() -> Outcome {
    let t = Instant::now();
    // thread-count independence
    let system = dawson();
    let init = dawson_initial().sample(500, 4).unwrap();
    let cfg = SimConfig::new(0.1, 500, 4).with_snapshots(vec![0.0, 0.5, 1.0]);
    let mut hashes = Vec::new();
    for threads in [1, 4, 8] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let rec = pool
            .install(|| run(&cfg, Dynamics::Multiscale(&system), &init, None))
            .map_err(|e| e.to_string())?;
        let mut h = DefaultHasher::new();
        for s in &rec.snapshots {
            s.ids.hash(&mut h);
            s.positions.iter().for_each(|v| v.to_bits().hash(&mut h));
        }
        hashes.push(h.finish());
    }
    let identical = hashes.windows(2).all(|w| w[0] == w[1]);

    // metric axioms on random triples
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut axioms = true;
    for trial in 0..200 {
        let d = 1 + trial % 2;
        let sample = |rng: &mut ChaCha8Rng| {
            let n = rng.random_range(1..15);
            EmpiricalMeasure::uniform(d, (0..n * d).map(|_| rng.random_range(-4.0..4.0)).collect()).unwrap()
        };
        let (a, b, c) = (sample(&mut rng), sample(&mut rng), sample(&mut rng));
        let w = |p: &EmpiricalMeasure, q: &EmpiricalMeasure| wasserstein2(p, q).unwrap();
        axioms &= w(&a, &a) == 0.0
            && (w(&a, &b) - w(&b, &a)).abs() <= 1e-10
            && w(&a, &b) <= w(&a, &c) + w(&c, &b) + 1e-10;
    }

    // constants are annihilated by the cell generator and the averaged generator
    let mut kills = true;
    for s in registry() {
        let grid = TorusGrid::new(s.dim, 32).unwrap();
        let op = assemble_generator(s.fast().as_ref(), &vec![0.2; s.dim], &origin(s.dim), &grid, &AssemblyOptions::default())
            .map_err(|e| e.to_string())?;
        kills &= op.apply(&vec![3.7; grid.len()]).iter().all(|v| *v == 0.0);
    }
    let model = EffectiveModel::from_rough_potential(dawson(), 256).unwrap();
    let one = AnalyticFunction {
        dim: 1,
        value: |_: &[f64]| 1.0,
        grad: |_: &[f64], g: &mut [f64]| g.fill(0.0),
        hess: |_: &[f64], h: &mut [f64]| h.fill(0.0),
    };
    let mu = origin(1);
    let lg = apply_generator(&model, &mu, &one);
    kills &= [-2.0, 0.0, 1.5].iter().all(|x| lg(&[*x]).unwrap() == 0.0);

    // nested dictionaries never lower the rate
    let mut monotone = true;
    let opts = RateOptions {
        cutoff: 1e-14,
        ..RateOptions::default()
    };
    let flat = EffectiveModel::brownian(1, 1.0);
    for v in [0.0, 0.4, 1.0, 1.7] {
        let path = gaussian_shift_path(v, 400, 10);
        let big = TestDictionary::fitted(&path, 7).unwrap();
        let mut prev = 0.0;
        for b in 2..=7 {
            let j = evaluate_jdg(&path, &flat, &big.truncated(b).unwrap(), &opts).unwrap().total;
            monotone &= j >= prev - 1e-8;
            prev = j;
        }
    }
    let elapsed = t.elapsed().as_secs_f64();
    check(
        identical && axioms && kills && monotone && elapsed <= 300.0,
        format!(
            "threads 1/4/8 identical {identical}; W2 axioms on 200 triples {axioms}; constants killed {kills}; nested-basis monotone {monotone}; {elapsed:.1}s (<= 300s)"
        ),
    )
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("1 separable gamma", criterion_1),
        ("2 one-dimensional cell solution", criterion_2),
        ("3 invariant measure", criterion_3),
        ("4 diffusion-form equality", criterion_4),
        ("5 ladder convergence", criterion_5),
        ("6 rate functional", criterion_6),
        ("7 reproducibility and invariants", criterion_7),
    ];
    let mut failed = 0;
    // ACCEPTANCE_ONLY=3 runs a single criterion
    let only = std::env::var("ACCEPTANCE_ONLY").ok();
    let criteria = criteria
        .into_iter()
        .filter(|(name, _)| only.as_deref().is_none_or(|o| name.starts_with(o)));
    let total = criteria.clone().count();
    for (name, f) in criteria {
        match f() {
            Ok(msg) => println!("PASS criterion {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {name}: {msg}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", total - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
