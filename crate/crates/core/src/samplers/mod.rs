//! Posterior approximation engines.
//!
//! * [`mh`]: random-walk Metropolis on the hard (non-differentiable) target.
//! * [`hmc`]: Hamiltonian Monte Carlo with dual-averaging step size on the
//!   relaxed target.
//! * [`advi`]: full-rank Gaussian variational inference on the relaxed target.
//!
//! All three work on unconstrained coordinates through [`LogDensity`], so the
//! test suites can swap in analytic targets.

pub mod advi;
pub mod hmc;
pub mod mh;

use crate::error::Result;
use crate::hardlik::Trace;
use crate::model::{hard_log_posterior_unconstrained, relaxed_log_posterior, ParamLayout, PriorConfig, UnconstrainedParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use advi::{advi_fit, AdviConfig};
pub use hmc::{hmc_sample, HmcConfig};
pub use mh::{hard_mh_sample, MhConfig};

/// Unnormalised log density on `R^dim`.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    fn log_density(&self, w: &[f64]) -> Result<f64>;
}

/// Log density with gradient.
pub trait GradientDensity: LogDensity {
    fn log_density_grad(&self, w: &[f64], grad: &mut [f64]) -> Result<f64>;
}

/// Relaxed posterior over `(vec Z, η_ρ, η_β, η_γ)`.
pub struct RelaxedTarget<'a> {
    pub traces: &'a [Trace],
    pub cfg: &'a PriorConfig,
    pub layout: ParamLayout,
}

impl<'a> RelaxedTarget<'a> {
    pub fn new(traces: &'a [Trace], n_items: usize, cfg: &'a PriorConfig) -> Self {
        Self { traces, cfg, layout: ParamLayout::relaxed(cfg, n_items) }
    }

    fn params(&self, w: &[f64]) -> Result<UnconstrainedParams> {
        UnconstrainedParams::new(self.layout, w.to_vec())
    }
}

impl LogDensity for RelaxedTarget<'_> {
    fn dim(&self) -> usize {
        self.layout.len()
    }

    fn log_density(&self, w: &[f64]) -> Result<f64> {
        Ok(relaxed_log_posterior(&self.params(w)?, self.traces, self.cfg)?.0)
    }
}

impl GradientDensity for RelaxedTarget<'_> {
    fn log_density_grad(&self, w: &[f64], grad: &mut [f64]) -> Result<f64> {
        let (lp, g) = relaxed_log_posterior(&self.params(w)?, self.traces, self.cfg)?;
        grad.copy_from_slice(&g);
        Ok(lp)
    }
}

/// Hard posterior over `(vec Z, η_ρ, η_β)`.
pub struct HardTarget<'a> {
    pub traces: &'a [Trace],
    pub cfg: &'a PriorConfig,
    pub layout: ParamLayout,
}

impl<'a> HardTarget<'a> {
    pub fn new(traces: &'a [Trace], n_items: usize, cfg: &'a PriorConfig) -> Self {
        Self { traces, cfg, layout: ParamLayout::hard(cfg, n_items) }
    }
}

impl LogDensity for HardTarget<'_> {
    fn dim(&self) -> usize {
        self.layout.len()
    }

    fn log_density(&self, w: &[f64]) -> Result<f64> {
        hard_log_posterior_unconstrained(&UnconstrainedParams::new(self.layout, w.to_vec())?, self.traces, self.cfg)
    }
}

/// Normalised standard normal on `R^dim`, for sampler checks.
pub struct StandardNormalTarget {
    pub dim: usize,
}

impl LogDensity for StandardNormalTarget {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, w: &[f64]) -> Result<f64> {
        let ss: f64 = w.iter().map(|v| v * v).sum();
        Ok(-0.5 * ss - 0.5 * self.dim as f64 * (2.0 * std::f64::consts::PI).ln())
    }
}

impl GradientDensity for StandardNormalTarget {
    fn log_density_grad(&self, w: &[f64], grad: &mut [f64]) -> Result<f64> {
        for (g, v) in grad.iter_mut().zip(w) {
            *g = -v;
        }
        self.log_density(w)
    }
}

/// Random stream for chain `chain` under root `seed`.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

/// Worker threads for independent chains: `POGRAD_THREADS` if set, else
/// the available parallelism.
pub fn thread_budget() -> usize {
    std::env::var("POGRAD_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `f(chain)` for every chain, at most [`thread_budget`] at a time,
/// returning results in chain order.
pub fn run_chains<T, F>(n_chains: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let threads = thread_budget().min(n_chains.max(1));
    if threads <= 1 {
        return (0..n_chains).map(&f).collect();
    }
    let mut out: Vec<Option<T>> = (0..n_chains).map(|_| None).collect();
    for batch in (0..n_chains).collect::<Vec<_>>().chunks(threads) {
        let f = &f;
        let results: Vec<(usize, T)> = std::thread::scope(|s| {
            let handles: Vec<_> = batch.iter().map(|&c| (c, s.spawn(move || f(c)))).collect();
            handles.into_iter().map(|(c, h)| (c, h.join().expect("chain thread panicked"))).collect()
        });
        for (c, r) in results {
            out[c] = Some(r);
        }
    }
    out.into_iter().map(|r| r.expect("every chain ran")).collect()
}

/// Indices of at most `max_keep` evenly spaced entries of `0..n`.
pub(crate) fn thin_indices(n: usize, max_keep: usize) -> Vec<usize> {
    if n <= max_keep {
        return (0..n).collect();
    }
    (0..max_keep).map(|i| i * n / max_keep).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thinning_is_even() {
        assert_eq!(thin_indices(4, 10), vec![0, 1, 2, 3]);
        assert_eq!(thin_indices(10, 5), vec![0, 2, 4, 6, 8]);
    }

    #[test]
    fn chains_come_back_in_order() {
        let out = run_chains(5, |c| c * 10);
        assert_eq!(out, vec![0, 10, 20, 30, 40]);
    }
}
