//! Hamiltonian Monte Carlo with a unit mass matrix, jittered trajectory
//! length and dual-averaging step-size adaptation during warmup.

use super::{chain_rng, run_chains, GradientDensity, RelaxedTarget};
use crate::draws::{Draw, DrawMeta, DrawSet, Method};
use crate::error::{Error, Result};
use crate::hardlik::Trace;
use crate::model::{transform, PriorConfig, UnconstrainedParams};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Energy error beyond which a transition counts as divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1000.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HmcConfig {
    pub warmup_iters: usize,
    pub sampling_iters: usize,
    pub target_accept: f64,
    pub max_leapfrog_steps: usize,
    pub init_step_size: f64,
    pub seed: u64,
    pub chains: usize,
}

impl Default for HmcConfig {
    fn default() -> Self {
        Self { warmup_iters: 500, sampling_iters: 500, target_accept: 0.9, max_leapfrog_steps: 32, init_step_size: 0.1, seed: 0, chains: 1 }
    }
}

impl HmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.warmup_iters == 0 || self.sampling_iters == 0 || self.max_leapfrog_steps == 0 || self.chains == 0 {
            return Err(Error::InvalidArgument("HMC iteration, step and chain counts must be positive".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::InvalidArgument("target_accept must lie in (0, 1)".into()));
        }
        if !(self.init_step_size > 0.0 && self.init_step_size.is_finite()) {
            return Err(Error::InvalidArgument("init_step_size must be positive".into()));
        }
        Ok(())
    }
}

/// `-log p(q) + |p|²/2`.
pub fn hamiltonian(log_density: f64, momentum: &[f64]) -> f64 {
    -log_density + 0.5 * momentum.iter().map(|v| v * v).sum::<f64>()
}

/// `steps` leapfrog steps of size `eps`, updating position, momentum and
/// gradient in place. Returns the log density at the end point.
pub fn leapfrog<T: GradientDensity + ?Sized>(
    target: &T,
    q: &mut [f64],
    p: &mut [f64],
    grad: &mut [f64],
    eps: f64,
    steps: usize,
) -> Result<f64> {
    let mut logp = f64::NAN;
    for _ in 0..steps {
        for i in 0..q.len() {
            p[i] += 0.5 * eps * grad[i];
            q[i] += eps * p[i];
        }
        logp = target.log_density_grad(q, grad)?;
        if !logp.is_finite() {
            return Err(Error::Numerical("non-finite log density along trajectory".into()));
        }
        for i in 0..q.len() {
            p[i] += 0.5 * eps * grad[i];
        }
    }
    Ok(logp)
}

/// Step-size adaptation of Hoffman and Gelman.
#[derive(Clone, Debug)]
pub struct DualAveraging {
    mu: f64,
    h_bar: f64,
    log_eps_bar: f64,
    m: f64,
    target: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    pub fn new(eps0: f64, target: f64) -> Self {
        Self { mu: (10.0 * eps0).ln(), h_bar: 0.0, log_eps_bar: 0.0, m: 0.0, target }
    }

    /// Feeds one acceptance statistic and returns the next step size.
    pub fn update(&mut self, accept: f64) -> f64 {
        self.m += 1.0;
        let w = 1.0 / (self.m + Self::T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept);
        let log_eps = self.mu - self.m.sqrt() / Self::GAMMA * self.h_bar;
        let eta = self.m.powf(-Self::KAPPA);
        self.log_eps_bar = eta * log_eps + (1.0 - eta) * self.log_eps_bar;
        log_eps.exp()
    }

    /// Averaged step size used after warmup.
    pub fn final_step_size(&self) -> f64 {
        self.log_eps_bar.exp()
    }
}

#[derive(Clone, Debug, Default)]
pub struct HmcRun {
    /// Post-warmup `(position, log density)` pairs.
    pub samples: Vec<(Vec<f64>, f64)>,
    pub step_size: f64,
    /// Divergent transitions during sampling.
    pub divergences: usize,
    pub warmup_divergences: usize,
    /// Per-iteration acceptance statistic, warmup included.
    pub accept_trail: Vec<f64>,
}

impl HmcRun {
    pub fn mean_accept(&self) -> f64 {
        let n = self.samples.len();
        let tail = &self.accept_trail[self.accept_trail.len() - n..];
        tail.iter().sum::<f64>() / n.max(1) as f64
    }
}

struct Transition {
    accept: f64,
    divergent: bool,
}

fn transition<T: GradientDensity + ?Sized>(
    target: &T,
    q: &mut Vec<f64>,
    logp: &mut f64,
    grad: &mut Vec<f64>,
    eps: f64,
    steps: usize,
    rng: &mut ChaCha8Rng,
) -> Transition {
    let mut p: Vec<f64> = (0..q.len()).map(|_| rng.sample(StandardNormal)).collect();
    let h0 = hamiltonian(*logp, &p);
    let mut q1 = q.clone();
    let mut g1 = grad.clone();
    let end = leapfrog(target, &mut q1, &mut p, &mut g1, eps, steps);
    let (accept, divergent) = match end {
        Ok(lp1) => {
            let dh = hamiltonian(lp1, &p) - h0;
            if !dh.is_finite() || dh > DIVERGENCE_THRESHOLD {
                (0.0, true)
            } else {
                let a = (-dh).exp().min(1.0);
                if rng.random::<f64>() < a {
                    *q = q1;
                    *grad = g1;
                    *logp = lp1;
                }
                (a, false)
            }
        }
        Err(_) => (0.0, true),
    };
    Transition { accept, divergent }
}

/// Doubles or halves `eps` until a single leapfrog step crosses acceptance 0.5.
pub fn find_reasonable_step_size<T: GradientDensity + ?Sized>(
    target: &T,
    q: &[f64],
    logp: f64,
    grad: &[f64],
    eps0: f64,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let p0: Vec<f64> = (0..q.len()).map(|_| rng.sample(StandardNormal)).collect();
    let h0 = hamiltonian(logp, &p0);
    let accept_log = |eps: f64| -> f64 {
        let (mut q1, mut p1, mut g1) = (q.to_vec(), p0.clone(), grad.to_vec());
        match leapfrog(target, &mut q1, &mut p1, &mut g1, eps, 1) {
            Ok(lp) => {
                let v = h0 - hamiltonian(lp, &p1);
                if v.is_finite() {
                    v
                } else {
                    f64::NEG_INFINITY
                }
            }
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let mut eps = eps0;
    let up = accept_log(eps) > 0.5f64.ln();
    for _ in 0..50 {
        let next = if up { eps * 2.0 } else { eps * 0.5 };
        let crosses = (accept_log(next) > 0.5f64.ln()) != up;
        eps = next;
        if crosses {
            break;
        }
    }
    eps.clamp(1e-8, 10.0)
}

/// One chain from `init`.
pub fn hmc_chain<T: GradientDensity + ?Sized>(target: &T, init: &[f64], cfg: &HmcConfig, rng: &mut ChaCha8Rng) -> Result<HmcRun> {
    cfg.validate()?;
    let mut q = init.to_vec();
    let mut grad = vec![0.0; q.len()];
    let mut logp = target.log_density_grad(&q, &mut grad)?;
    if !logp.is_finite() {
        return Err(Error::Initialisation("initial state has non-finite log density".into()));
    }
    let mut eps = find_reasonable_step_size(target, &q, logp, &grad, cfg.init_step_size, rng);
    let mut adapt = DualAveraging::new(eps, cfg.target_accept);
    let mut run = HmcRun::default();
    for it in 0..cfg.warmup_iters + cfg.sampling_iters {
        let steps = rng.random_range(1..=cfg.max_leapfrog_steps);
        let t = transition(target, &mut q, &mut logp, &mut grad, eps, steps, rng);
        run.accept_trail.push(t.accept);
        if it < cfg.warmup_iters {
            run.warmup_divergences += t.divergent as usize;
            eps = adapt.update(t.accept);
            if it + 1 == cfg.warmup_iters {
                eps = adapt.final_step_size();
            }
        } else {
            run.divergences += t.divergent as usize;
            run.samples.push((q.clone(), logp));
        }
    }
    run.step_size = eps;
    if 2 * run.divergences > cfg.sampling_iters {
        return Err(Error::Numerical("target too stiff, reduce tau/increase gamma prior mass".into()));
    }
    Ok(run)
}

fn initial_point(target: &RelaxedTarget<'_>, cfg: &PriorConfig, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let lay = target.layout;
    let mut grad = vec![0.0; lay.len()];
    for _ in 0..20 {
        let mut w: Vec<f64> = (0..lay.len()).map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
        w[lay.rho_index()] = 0.0;
        if let Some(i) = lay.beta_index() {
            w[i] = 0.0;
        }
        if let Some(i) = lay.gamma_index() {
            w[i] = cfg.gamma_default().ln();
        }
        if matches!(target.log_density_grad(&w, &mut grad), Ok(lp) if lp.is_finite()) {
            return Ok(w);
        }
    }
    Err(Error::Initialisation("no finite starting point for the relaxed posterior".into()))
}

fn run_chain(traces: &[Trace], n_items: usize, cfg: &PriorConfig, hmc: &HmcConfig, chain: usize) -> Result<DrawSet> {
    let start = Instant::now();
    let target = RelaxedTarget::new(traces, n_items, cfg);
    let mut rng = chain_rng(hmc.seed, chain);
    let init = initial_point(&target, cfg, &mut rng)?;
    let run = hmc_chain(&target, &init, hmc, &mut rng)?;
    let mean_accept = run.mean_accept();
    let draws = run
        .samples
        .into_iter()
        .map(|(w, lp)| {
            let (params, log_jac) = transform(&UnconstrainedParams { layout: target.layout, w }, cfg);
            Draw { params, log_posterior: lp - log_jac }
        })
        .collect();
    let mut meta = DrawMeta::new(Method::RelaxedHmc, hmc.seed, cfg.tau);
    meta.acceptance_rate = Some(mean_accept);
    meta.divergences = run.divergences;
    meta.trail = run.accept_trail;
    meta.runtime_seconds = start.elapsed().as_secs_f64();
    DrawSet::new(draws, meta)
}

/// Relaxed-posterior draws: `sampling_iters` per chain, chains concatenated in order.
pub fn hmc_sample(traces: &[Trace], n_items: usize, cfg: &PriorConfig, hmc: &HmcConfig) -> Result<DrawSet> {
    cfg.validate()?;
    hmc.validate()?;
    for t in traces {
        t.validate(n_items)?;
    }
    let sets = run_chains(hmc.chains, |c| run_chain(traces, n_items, cfg, hmc, c));
    DrawSet::merge(sets.into_iter().collect::<Result<Vec<_>>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::StandardNormalTarget;
    use rand::SeedableRng;

    #[test]
    fn leapfrog_is_reversible() {
        let target = StandardNormalTarget { dim: 3 };
        let q0 = vec![0.3, -1.1, 2.0];
        let p0 = vec![0.7, 0.2, -0.4];
        let (mut q, mut p) = (q0.clone(), p0.clone());
        let mut g = vec![0.0; 3];
        target.log_density_grad(&q, &mut g).unwrap();
        leapfrog(&target, &mut q, &mut p, &mut g, 0.13, 25).unwrap();
        p.iter_mut().for_each(|v| *v = -*v);
        leapfrog(&target, &mut q, &mut p, &mut g, 0.13, 25).unwrap();
        for i in 0..3 {
            assert!((q[i] - q0[i]).abs() < 1e-10);
            assert!((-p[i] - p0[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn tiny_steps_conserve_energy() {
        let target = StandardNormalTarget { dim: 4 };
        let mut q = vec![1.0, -0.5, 0.25, 2.0];
        let mut p = vec![-0.3, 0.8, 1.2, 0.1];
        let mut g = vec![0.0; 4];
        let lp0 = target.log_density_grad(&q, &mut g).unwrap();
        let h0 = hamiltonian(lp0, &p);
        let lp1 = leapfrog(&target, &mut q, &mut p, &mut g, 1e-3, 1000).unwrap();
        assert!((hamiltonian(lp1, &p) - h0).abs() < 1e-4);
    }

    #[test]
    fn standard_normal_moments() {
        let target = StandardNormalTarget { dim: 1 };
        let cfg = HmcConfig { warmup_iters: 500, sampling_iters: 2000, max_leapfrog_steps: 10, ..HmcConfig::default() };
        let mut rng = chain_rng(4, 0);
        let run = hmc_chain(&target, &[0.5], &cfg, &mut rng).unwrap();
        let xs: Vec<f64> = run.samples.iter().map(|(q, _)| q[0]).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 3.0 / n.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.1, "var {var}");
        assert_eq!(run.divergences, 0);
    }

    #[test]
    fn dual_averaging_reaches_target() {
        let target = StandardNormalTarget { dim: 10 };
        let cfg = HmcConfig { warmup_iters: 1000, sampling_iters: 1000, target_accept: 0.8, max_leapfrog_steps: 5, ..HmcConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let run = hmc_chain(&target, &[0.0; 10], &cfg, &mut rng).unwrap();
        assert!((run.mean_accept() - 0.8).abs() < 0.1, "accept {}", run.mean_accept());
    }

    #[test]
    fn config_validation() {
        assert!(HmcConfig { target_accept: 1.0, ..HmcConfig::default() }.validate().is_err());
        assert!(HmcConfig { sampling_iters: 0, ..HmcConfig::default() }.validate().is_err());
        assert!(HmcConfig::default().validate().is_ok());
    }

    #[test]
    fn relaxed_runs_are_deterministic() {
        let traces = vec![Trace::new(vec![0, 1, 2]).unwrap(), Trace::new(vec![0, 2, 1]).unwrap()];
        let cfg = PriorConfig { d: 2, ..PriorConfig::default() };
        let hmc = HmcConfig { warmup_iters: 50, sampling_iters: 50, max_leapfrog_steps: 8, seed: 3, chains: 2, ..HmcConfig::default() };
        let a = hmc_sample(&traces, 3, &cfg, &hmc).unwrap();
        let b = hmc_sample(&traces, 3, &cfg, &hmc).unwrap();
        assert_eq!(a.len(), 100);
        assert_eq!(a.draws(), b.draws());
        assert!(a.draws().iter().all(|d| d.params.rho > 0.0 && d.params.rho < 1.0 && d.params.beta > 0.0));
    }
}
