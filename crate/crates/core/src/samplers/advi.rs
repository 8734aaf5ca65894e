//! Full-rank Gaussian variational inference by stochastic ELBO ascent.
//!
//! `q(w) = N(μ, LLᵀ)` with `L` lower triangular. Gradients use the
//! reparameterisation `w = μ + Lε`; the entropy term contributes
//! `diag(1/L_ii)` exactly.

use super::{chain_rng, GradientDensity, RelaxedTarget};
use crate::draws::{Draw, DrawMeta, DrawSet, Method};
use crate::error::{Error, Result};
use crate::hardlik::Trace;
use crate::matrix::Matrix;
use crate::model::{transform, PriorConfig, UnconstrainedParams};
use crate::optim::Adam;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::time::Instant;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const MAX_ATTEMPTS: usize = 5;
const LR_DECAY_ITERS: f64 = 50.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdviConfig {
    pub iters: usize,
    pub mc_samples_grad: usize,
    pub mc_samples_elbo: usize,
    pub learning_rate: f64,
    pub tol_rel_obj: f64,
    pub n_output_draws: usize,
    pub seed: u64,
    /// Iterations between convergence checks.
    pub eval_every: usize,
}

impl Default for AdviConfig {
    fn default() -> Self {
        Self {
            iters: 10_000,
            mc_samples_grad: 1,
            mc_samples_elbo: 100,
            learning_rate: 0.05,
            tol_rel_obj: 0.01,
            n_output_draws: 1000,
            seed: 0,
            eval_every: 100,
        }
    }
}

impl AdviConfig {
    pub fn validate(&self) -> Result<()> {
        if [self.iters, self.mc_samples_grad, self.mc_samples_elbo, self.n_output_draws, self.eval_every].contains(&0) {
            return Err(Error::InvalidArgument("ADVI counts must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.tol_rel_obj > 0.0) {
            return Err(Error::InvalidArgument("learning rate and tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Fitted variational family.
#[derive(Clone, Debug, PartialEq)]
pub struct AdviFit {
    pub mu: Vec<f64>,
    pub l: Matrix,
    /// Per-iteration ELBO estimates from the gradient samples.
    pub trail: Vec<f64>,
    pub converged: bool,
    pub final_elbo: f64,
}

impl AdviFit {
    pub fn covariance(&self) -> Matrix {
        self.l.matmul(&self.l.transpose())
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let eps: Vec<f64> = (0..self.mu.len()).map(|_| rng.sample(StandardNormal)).collect();
        reparam(&self.mu, &self.l, &eps)
    }
}

fn reparam(mu: &[f64], l: &Matrix, eps: &[f64]) -> Vec<f64> {
    (0..mu.len()).map(|i| mu[i] + (0..=i).map(|j| l[(i, j)] * eps[j]).sum::<f64>()).collect()
}

/// `log q(μ + Lε)`.
fn log_q(l: &Matrix, eps: &[f64]) -> f64 {
    let d = eps.len();
    let log_det: f64 = (0..d).map(|i| l[(i, i)].abs().ln()).sum();
    -0.5 * d as f64 * LN_2PI - log_det - 0.5 * eps.iter().map(|e| e * e).sum::<f64>()
}

/// Single-sample ELBO estimate and its reparameterisation gradient at `ε`.
/// The `L` gradient is lower triangular.
pub fn elbo_gradient_estimate<T: GradientDensity + ?Sized>(
    target: &T,
    mu: &[f64],
    l: &Matrix,
    eps: &[f64],
) -> Result<(f64, Vec<f64>, Matrix)> {
    let d = mu.len();
    let w = reparam(mu, l, eps);
    let mut g = vec![0.0; d];
    let lp = target.log_density_grad(&w, &mut g)?;
    let mut gl = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..=i {
            gl[(i, j)] = g[i] * eps[j];
        }
        gl[(i, i)] += 1.0 / l[(i, i)];
    }
    Ok((lp - log_q(l, eps), g, gl))
}

/// Monte Carlo ELBO with `n` draws.
pub fn elbo_estimate<T: GradientDensity + ?Sized>(target: &T, mu: &[f64], l: &Matrix, n: usize, rng: &mut ChaCha8Rng) -> f64 {
    let mut total = 0.0;
    for _ in 0..n {
        let eps: Vec<f64> = (0..mu.len()).map(|_| rng.sample(StandardNormal)).collect();
        let lp = target.log_density(&reparam(mu, l, &eps)).unwrap_or(f64::NAN);
        total += lp - log_q(l, &eps);
    }
    total / n as f64
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn fit_once<T: GradientDensity + ?Sized>(target: &T, init: &[f64], cfg: &AdviConfig, lr: f64, rng: &mut ChaCha8Rng) -> Result<AdviFit> {
    let d = init.len();
    let n_tri = d * (d + 1) / 2;
    // packed parameters: μ, then the lower triangle of L row by row
    let mut theta = init.to_vec();
    for i in 0..d {
        for j in 0..=i {
            theta.push(if i == j { 0.1 } else { 0.0 });
        }
    }
    let unpack = |theta: &[f64]| -> Matrix {
        let mut l = Matrix::zeros(d, d);
        let mut k = d;
        for i in 0..d {
            for j in 0..=i {
                l[(i, j)] = theta[k];
                k += 1;
            }
        }
        l
    };
    let mut adam = Adam::new(d + n_tri);
    let mut grad = vec![0.0; d + n_tri];
    let mut trail = Vec::with_capacity(cfg.iters);
    let window = (cfg.iters / cfg.eval_every / 10).max(2);
    let mut rel_changes: Vec<f64> = Vec::new();
    let mut prev_elbo: Option<f64> = None;
    let mut converged = false;
    let mut last_elbo = f64::NAN;

    for t in 0..cfg.iters {
        let l = unpack(&theta);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut elbo_sum = 0.0;
        for _ in 0..cfg.mc_samples_grad {
            let eps: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let (e, gm, gl) = elbo_gradient_estimate(target, &theta[..d], &l, &eps)?;
            elbo_sum += e;
            for i in 0..d {
                grad[i] += gm[i];
            }
            let mut k = d;
            for i in 0..d {
                for j in 0..=i {
                    grad[k] += gl[(i, j)];
                    k += 1;
                }
            }
        }
        let m = cfg.mc_samples_grad as f64;
        grad.iter_mut().for_each(|g| *g /= m);
        let elbo = elbo_sum / m;
        if !elbo.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numerical(format!("non-finite ELBO at iteration {t}")));
        }
        trail.push(elbo);
        adam.ascend(&mut theta, &grad, lr / (1.0 + t as f64 / LR_DECAY_ITERS).sqrt());

        if (t + 1) % cfg.eval_every == 0 {
            let l = unpack(&theta);
            let e = elbo_estimate(target, &theta[..d], &l, cfg.mc_samples_elbo, rng);
            if !e.is_finite() {
                return Err(Error::Numerical(format!("non-finite ELBO at iteration {t}")));
            }
            last_elbo = e;
            if let Some(p) = prev_elbo {
                rel_changes.push(((e - p) / e).abs());
                if rel_changes.len() > window {
                    rel_changes.remove(0);
                }
                let mean = rel_changes.iter().sum::<f64>() / rel_changes.len() as f64;
                if mean < cfg.tol_rel_obj || median(&rel_changes) < cfg.tol_rel_obj {
                    converged = true;
                    break;
                }
            }
            prev_elbo = Some(e);
        }
    }
    let l = unpack(&theta);
    if !last_elbo.is_finite() {
        last_elbo = elbo_estimate(target, &theta[..d], &l, cfg.mc_samples_elbo, rng);
    }
    theta.truncate(d);
    Ok(AdviFit { mu: theta, l, trail, converged, final_elbo: last_elbo })
}

/// Fits `q` from mean `init`, halving the learning rate after a non-finite ELBO.
pub fn advi_run<T: GradientDensity + ?Sized>(target: &T, init: &[f64], cfg: &AdviConfig, rng: &mut ChaCha8Rng) -> Result<AdviFit> {
    cfg.validate()?;
    let mut lr = cfg.learning_rate;
    let mut last_err = None;
    for _ in 0..MAX_ATTEMPTS {
        match fit_once(target, init, cfg, lr, rng) {
            Ok(fit) => return Ok(fit),
            Err(e) => {
                last_err = Some(e);
                lr *= 0.5;
            }
        }
    }
    Err(Error::Numerical(format!(
        "ELBO stayed non-finite after {MAX_ATTEMPTS} attempts with reduced learning rate: {}",
        last_err.expect("at least one attempt")
    )))
}

/// Variational fit of the relaxed posterior and `n_output_draws` draws from it.
pub fn advi_fit(traces: &[Trace], n_items: usize, cfg: &PriorConfig, advi: &AdviConfig) -> Result<DrawSet> {
    let start = Instant::now();
    cfg.validate()?;
    advi.validate()?;
    for t in traces {
        t.validate(n_items)?;
    }
    let target = RelaxedTarget::new(traces, n_items, cfg);
    let lay = target.layout;
    let mut rng = chain_rng(advi.seed, 0);
    let mut init: Vec<f64> = (0..lay.len()).map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
    init[lay.rho_index()] = 0.0;
    if let Some(i) = lay.beta_index() {
        init[i] = 0.0;
    }
    if let Some(i) = lay.gamma_index() {
        init[i] = cfg.gamma_default().ln();
    }
    let fit = advi_run(&target, &init, advi, &mut rng)?;
    let draws = (0..advi.n_output_draws)
        .map(|_| {
            let w = fit.sample(&mut rng);
            let lp = crate::samplers::LogDensity::log_density(&target, &w).unwrap_or(f64::NEG_INFINITY);
            let (params, log_jac) = transform(&UnconstrainedParams { layout: lay, w }, cfg);
            Draw { params, log_posterior: lp - log_jac }
        })
        .collect();
    let mut meta = DrawMeta::new(Method::FullrankVi, advi.seed, cfg.tau);
    meta.trail = fit.trail;
    meta.runtime_seconds = start.elapsed().as_secs_f64();
    DrawSet::new(draws, meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::{LogDensity, StandardNormalTarget};
    use rand::SeedableRng;

    /// `N(m, P⁻¹)` with a fixed precision matrix.
    struct Gaussian {
        m: Vec<f64>,
        p: Matrix,
    }

    impl LogDensity for Gaussian {
        fn dim(&self) -> usize {
            self.m.len()
        }
        fn log_density(&self, w: &[f64]) -> Result<f64> {
            let mut g = vec![0.0; w.len()];
            self.log_density_grad(w, &mut g)
        }
    }

    impl GradientDensity for Gaussian {
        fn log_density_grad(&self, w: &[f64], grad: &mut [f64]) -> Result<f64> {
            let d = self.m.len();
            let r: Vec<f64> = (0..d).map(|i| w[i] - self.m[i]).collect();
            for i in 0..d {
                grad[i] = -(0..d).map(|j| self.p[(i, j)] * r[j]).sum::<f64>();
            }
            Ok(0.5 * (0..d).map(|i| r[i] * grad[i]).sum::<f64>())
        }
    }

    #[test]
    fn exact_match_has_zero_elbo() {
        let target = StandardNormalTarget { dim: 3 };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let e = elbo_estimate(&target, &[0.0; 3], &Matrix::identity(3), 50, &mut rng);
        assert!(e.abs() < 1e-12);
    }

    #[test]
    fn fits_a_standard_normal() {
        let target = StandardNormalTarget { dim: 2 };
        let cfg = AdviConfig { iters: 20000, mc_samples_grad: 10, learning_rate: 0.02, tol_rel_obj: 1e-9, ..AdviConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let fit = advi_run(&target, &[0.7, -0.4], &cfg, &mut rng).unwrap();
        assert!(fit.mu.iter().all(|m| m.abs() < 0.05), "mu {:?}", fit.mu);
        let cov = fit.covariance();
        let eye = Matrix::identity(2);
        let frob = cov.as_slice().iter().zip(eye.as_slice()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(frob < 0.1, "frobenius {frob}, cov {cov:?}");
    }

    #[test]
    fn gradient_estimator_is_unbiased() {
        let target = Gaussian { m: vec![0.5, -1.0], p: Matrix::from_rows(&[vec![2.0, 0.6], vec![0.6, 1.0]]) };
        let mu = vec![0.1, 0.3];
        let l = Matrix::from_rows(&[vec![0.8, 0.0], vec![-0.3, 0.5]]);
        let n = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // coordinates: μ0, μ1, L00, L10, L11
        let mut samples = vec![Vec::with_capacity(n); 5];
        for _ in 0..n {
            let eps: Vec<f64> = (0..2).map(|_| rng.sample(StandardNormal)).collect();
            let (_, gm, gl) = elbo_gradient_estimate(&target, &mu, &l, &eps).unwrap();
            for (k, v) in [gm[0], gm[1], gl[(0, 0)], gl[(1, 0)], gl[(1, 1)]].into_iter().enumerate() {
                samples[k].push(v);
            }
        }
        let r = [mu[0] - 0.5, mu[1] + 1.0];
        let pl = target.p.matmul(&l);
        let exact = [
            -(2.0 * r[0] + 0.6 * r[1]),
            -(0.6 * r[0] + 1.0 * r[1]),
            -pl[(0, 0)] + 1.0 / l[(0, 0)],
            -pl[(1, 0)],
            -pl[(1, 1)] + 1.0 / l[(1, 1)],
        ];
        for k in 0..5 {
            let s = &samples[k];
            let mean = s.iter().sum::<f64>() / n as f64;
            let se = (crate::numeric::sample_variance(s) / n as f64).sqrt();
            assert!((mean - exact[k]).abs() <= 3.0 * se.max(1e-12), "coord {k}: {mean} vs {}", exact[k]);
        }
    }

    #[test]
    fn relaxed_fit_improves_elbo_and_is_deterministic() {
        let traces = vec![
            Trace::new(vec![0, 1, 2, 3, 4]).unwrap(),
            Trace::new(vec![0, 2, 1, 4, 3]).unwrap(),
            Trace::new(vec![0, 1, 2, 4, 3]).unwrap(),
        ];
        let cfg = PriorConfig { d: 2, ..PriorConfig::default() };
        let advi = AdviConfig { iters: 1500, n_output_draws: 50, seed: 4, tol_rel_obj: 1e-6, ..AdviConfig::default() };
        let a = advi_fit(&traces, 5, &cfg, &advi).unwrap();
        let b = advi_fit(&traces, 5, &cfg, &advi).unwrap();
        assert_eq!(a.draws(), b.draws());
        let trail = &a.meta.trail;
        let smooth: Vec<f64> = trail.chunks(100).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        assert!(smooth.last().unwrap() > &smooth[0]);
        // each window is no worse than the first, up to Monte Carlo noise
        for w in smooth.windows(2).skip(smooth.len() / 2) {
            assert!(w[1] > w[0] - 2.0, "{smooth:?}");
        }
    }
}
