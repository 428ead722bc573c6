use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::config::{Mode, SimConfig};
use super::control::FeedbackControl;
use super::ensemble::ParticleEnsemble;
use crate::effective::EffectiveModel;
use crate::error::{Error, Result};
use crate::torus::FastCoefficients;

struct Scratch {
    y: Vec<f64>,
    f: Vec<f64>,
    b: Vec<f64>,
    s: Vec<f64>,
    u: Vec<f64>,
    xi: Vec<f64>,
}

impl Scratch {
    fn new(d: usize, m: usize, mc: usize) -> Self {
        Self {
            y: vec![0.0; d],
            f: vec![0.0; d],
            b: vec![0.0; d],
            s: vec![0.0; d * m],
            u: vec![0.0; mc],
            xi: vec![0.0; m],
        }
    }
}

fn check_control(ctrl: Option<&FeedbackControl>, m: usize) -> Result<()> {
    match ctrl {
        Some(c) if c.dim() != m => Err(Error::DimensionMismatch {
            expected: m,
            got: c.dim(),
        }),
        _ => Ok(()),
    }
}

/// Post-step bookkeeping shared by both steppers.
fn finish_step(
    ens: &mut ParticleEnsemble,
    cfg: &SimConfig,
    dt: f64,
    log: Option<Vec<f64>>,
) -> Result<()> {
    ens.step_count += 1;
    ens.time = ens.step_count as f64 * dt;
    if let (Some(all), Some(step)) = (ens.control_log.as_mut(), log) {
        all.push(step);
    }
    let d = ens.dim;
    if let Some(k) = ens.positions.chunks(d).position(|x| x.iter().any(|v| !v.is_finite())) {
        return Err(Error::Blowup {
            particle: ens.ids[k],
            step: ens.step_count,
            time: ens.time,
        });
    }
    if let Some(cap) = cfg.moment_cap {
        let m4 = ens.moment(4);
        if m4 > cap {
            return Err(Error::MomentCap {
                moment: m4,
                cap,
                time: ens.time,
            });
        }
    }
    Ok(())
}

/// One Euler–Maruyama step of `dX = [f(X, X/ε, μ)/ε + b + σu]dt + σ dW` with
/// `μ` frozen at the start of the step.
pub fn step_multiscale(
    ens: &mut ParticleEnsemble,
    cfg: &SimConfig,
    coeffs: &dyn FastCoefficients,
    ctrl: Option<&FeedbackControl>,
) -> Result<()> {
    cfg.validate(Mode::Multiscale)?;
    let (d, m) = (ens.dim, coeffs.noise_dim());
    if coeffs.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: coeffs.dim(),
        });
    }
    check_control(ctrl, m)?;
    let (_, dt) = cfg.time_grid();
    let mu = ens.measure()?;
    let t = ens.time;
    let (inv_eps, sqdt) = (1.0 / cfg.epsilon, dt.sqrt());
    let logging = ens.control_log.is_some() && ctrl.is_some();
    let mut log = vec![0.0; if logging { ens.len() } else { 0 }];
    let work = |sc: &mut Scratch,
                x: &mut [f64],
                rng: &mut rand_chacha::ChaCha8Rng,
                cost: &mut f64|
     -> f64 {
        for (yk, &xk) in sc.y.iter_mut().zip(x.iter()) {
            *yk = (xk * inv_eps).rem_euclid(1.0);
        }
        coeffs.fast_drift(x, &sc.y, &mu, &mut sc.f);
        coeffs.slow_drift(x, &sc.y, &mu, &mut sc.b);
        coeffs.sigma(x, &sc.y, &mu, &mut sc.s);
        for v in sc.xi.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        let mut running = 0.0;
        if let Some(c) = ctrl {
            c.eval(t, x, &mu, &mut sc.u);
            running = 0.5 * sc.u.iter().map(|v| v * v).sum::<f64>();
            *cost += running * dt;
        }
        for k in 0..d {
            let row = &sc.s[k * m..(k + 1) * m];
            let mut drift = sc.f[k] * inv_eps + sc.b[k];
            if ctrl.is_some() {
                drift += row.iter().zip(&sc.u).map(|(a, b)| a * b).sum::<f64>();
            }
            let noise: f64 = row.iter().zip(&sc.xi).map(|(a, b)| a * b).sum();
            x[k] += drift * dt + sqdt * noise;
        }
        running
    };
    let mc = ctrl.map_or(0, |c| c.dim());
    let init = || Scratch::new(d, m, mc);
    run_particles(ens, init, work, &mut log, logging);
    finish_step(ens, cfg, dt, logging.then_some(log))
}

/// One Euler–Maruyama step of `dX = [β̄(X, μ) + B̄u]dt + B̄(X, μ) dW`.
pub fn step_averaged(
    ens: &mut ParticleEnsemble,
    cfg: &SimConfig,
    model: &EffectiveModel,
    ctrl: Option<&FeedbackControl>,
) -> Result<()> {
    cfg.validate(Mode::Averaged)?;
    let d = ens.dim;
    if model.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: model.dim(),
        });
    }
    check_control(ctrl, d)?;
    let (_, dt) = cfg.time_grid();
    let mu = ens.measure()?;
    let t = ens.time;
    let sqdt = dt.sqrt();
    let frozen_root = if model.has_constant_diffusion() {
        Some(model.sqrt_diffusion(&ens.positions[..d], &mu)?)
    } else {
        None
    };
    let logging = ens.control_log.is_some() && ctrl.is_some();
    let mut log = vec![0.0; if logging { ens.len() } else { 0 }];
    let failure = std::sync::Mutex::new(None::<Error>);
    let work = |sc: &mut Scratch,
                x: &mut [f64],
                rng: &mut rand_chacha::ChaCha8Rng,
                cost: &mut f64|
     -> f64 {
        let evaluated = model.drift_into(x, &mu, &mut sc.b).and_then(|_| match &frozen_root {
            Some(r) => {
                sc.s.copy_from_slice(r);
                Ok(())
            }
            None => model.sqrt_diffusion_into(x, &mu, &mut sc.s),
        });
        if let Err(e) = evaluated {
            failure.lock().unwrap_or_else(|p| p.into_inner()).get_or_insert(e);
            x.fill(f64::NAN);
            return 0.0;
        }
        for v in sc.xi.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        let mut running = 0.0;
        if let Some(c) = ctrl {
            c.eval(t, x, &mu, &mut sc.u);
            running = 0.5 * sc.u.iter().map(|v| v * v).sum::<f64>();
            *cost += running * dt;
        }
        for k in 0..d {
            let row = &sc.s[k * d..(k + 1) * d];
            let mut drift = sc.b[k];
            if ctrl.is_some() {
                drift += row.iter().zip(&sc.u).map(|(a, b)| a * b).sum::<f64>();
            }
            let noise: f64 = row.iter().zip(&sc.xi).map(|(a, b)| a * b).sum();
            x[k] += drift * dt + sqdt * noise;
        }
        running
    };
    let mc = ctrl.map_or(0, |c| c.dim());
    run_particles(ens, || Scratch::new(d, d, mc), work, &mut log, logging);
    if let Some(e) = failure.into_inner().unwrap_or_else(|p| p.into_inner()) {
        return Err(e);
    }
    finish_step(ens, cfg, dt, logging.then_some(log))
}

fn run_particles<I, W>(
    ens: &mut ParticleEnsemble,
    init: I,
    work: W,
    log: &mut [f64],
    logging: bool,
) where
    I: Fn() -> Scratch + Sync + Send,
    W: Fn(&mut Scratch, &mut [f64], &mut rand_chacha::ChaCha8Rng, &mut f64) -> f64 + Sync + Send,
{
    let d = ens.dim;
    let iter = ens
        .positions
        .par_chunks_mut(d)
        .zip(ens.rngs.par_iter_mut())
        .zip(ens.costs.par_iter_mut());
    if logging {
        iter.zip(log.par_iter_mut())
            .for_each_init(&init, |sc, (((x, rng), cost), l)| *l = work(sc, x, rng, cost));
    } else {
        iter.for_each_init(&init, |sc, ((x, rng), cost)| {
            work(sc, x, rng, cost);
        });
    }
}
