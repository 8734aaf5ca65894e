//! Blocked random-walk Metropolis for the hard posterior.
//!
//! Each iteration picks a proposal type uniformly (one row of `Z`, the
//! logit of `ρ`, or the log of `β` when it is free), perturbs that block with
//! an isotropic Gaussian, and accepts by the ratio of hard log posteriors in
//! unconstrained coordinates. Infeasible states have log density `-inf` and
//! are never entered.

use super::{chain_rng, run_chains, thin_indices, HardTarget, LogDensity};
use crate::draws::{Draw, DrawMeta, DrawSet, Method};
use crate::error::{Error, Result};
use crate::hardlik::Trace;
use crate::matrix::Matrix;
use crate::model::{prior_cholesky, transform, ParamLayout, PriorConfig, UnconstrainedParams};
use crate::numeric::logit;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Proposal standard deviations per block type.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MhScales {
    pub z_row: f64,
    pub logit_rho: f64,
    pub log_beta: f64,
}

impl Default for MhScales {
    fn default() -> Self {
        Self { z_row: 0.5, logit_rho: 0.3, log_beta: 0.3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MhConfig {
    pub n_iters: usize,
    pub scales: MhScales,
    pub seed: u64,
    /// Iterations of the scale-tuning pre-run (not counted in `n_iters`).
    pub tune_iters: usize,
    pub burn_in_fraction: f64,
    pub max_draws: usize,
    pub chains: usize,
}

impl Default for MhConfig {
    fn default() -> Self {
        Self {
            n_iters: 200_000,
            scales: MhScales::default(),
            seed: 0,
            tune_iters: 5_000,
            burn_in_fraction: 0.5,
            max_draws: 5_000,
            chains: 1,
        }
    }
}

/// A family of coordinate blocks sharing one proposal scale.
#[derive(Clone, Debug)]
pub struct BlockType {
    pub blocks: Vec<Vec<usize>>,
    pub scale: f64,
}

#[derive(Clone, Debug, Default)]
pub struct MhRun {
    /// Retained `(state, log density)` pairs.
    pub kept: Vec<(Vec<f64>, f64)>,
    pub proposed: Vec<usize>,
    pub accepted: Vec<usize>,
    /// Acceptance rate over consecutive windows of iterations.
    pub trail: Vec<f64>,
    pub state: Vec<f64>,
    pub log_density: f64,
}

impl MhRun {
    pub fn acceptance_rate(&self) -> f64 {
        let p: usize = self.proposed.iter().sum();
        let a: usize = self.accepted.iter().sum();
        if p == 0 {
            0.0
        } else {
            a as f64 / p as f64
        }
    }
}

/// Runs `n_iters` blocked Metropolis steps from `init`, keeping iterations
/// for which `keep(iter)` holds.
pub fn block_metropolis<T: LogDensity + ?Sized>(
    target: &T,
    init: &[f64],
    types: &[BlockType],
    n_iters: usize,
    keep: impl Fn(usize) -> bool,
    rng: &mut ChaCha8Rng,
) -> Result<MhRun> {
    let mut state = init.to_vec();
    let mut logp = target.log_density(&state)?;
    if logp == f64::NEG_INFINITY {
        return Err(Error::Initialisation("initial state has zero posterior density".into()));
    }
    let window = (n_iters / 100).max(1);
    let mut run = MhRun { proposed: vec![0; types.len()], accepted: vec![0; types.len()], ..MhRun::default() };
    let mut window_acc = 0usize;
    let mut proposal = state.clone();
    for iter in 0..n_iters {
        let ti = rng.random_range(0..types.len());
        let ty = &types[ti];
        let block = &ty.blocks[rng.random_range(0..ty.blocks.len())];
        proposal.copy_from_slice(&state);
        for &i in block {
            proposal[i] += ty.scale * rng.sample::<f64, _>(StandardNormal);
        }
        run.proposed[ti] += 1;
        // numerical failures (e.g. ρ rounding to 1) count as rejections
        let new_logp = target.log_density(&proposal).unwrap_or(f64::NEG_INFINITY);
        let log_u: f64 = rng.random::<f64>().ln();
        if new_logp > f64::NEG_INFINITY && log_u < new_logp - logp {
            std::mem::swap(&mut state, &mut proposal);
            logp = new_logp;
            run.accepted[ti] += 1;
            window_acc += 1;
        }
        if (iter + 1) % window == 0 {
            run.trail.push(window_acc as f64 / window as f64);
            window_acc = 0;
        }
        if keep(iter) {
            run.kept.push((state.clone(), logp));
        }
    }
    run.state = state;
    run.log_density = logp;
    Ok(run)
}

/// Halves or doubles each block scale until acceptance sits in `[0.2, 0.4]`.
pub fn tune_scales<T: LogDensity + ?Sized>(
    target: &T,
    init: &[f64],
    types: &mut [BlockType],
    tune_iters: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let round = 500.min(tune_iters.max(1));
    let mut state = init.to_vec();
    let mut done = 0;
    while done < tune_iters {
        let run = block_metropolis(target, &state, types, round, |_| false, rng)?;
        for (t, ty) in types.iter_mut().enumerate() {
            if run.proposed[t] < 10 {
                continue;
            }
            let rate = run.accepted[t] as f64 / run.proposed[t] as f64;
            if rate < 0.2 {
                ty.scale *= 0.5;
            } else if rate > 0.4 {
                ty.scale = (ty.scale * 2.0).min(10.0);
            }
        }
        state = run.state;
        done += round;
    }
    Ok(state)
}

/// `z = L⁻¹ u` by forward substitution.
fn solve_lower(l: &Matrix, u: &[f64]) -> Vec<f64> {
    let d = u.len();
    let mut z = vec![0.0; d];
    for i in 0..d {
        let s: f64 = (0..i).map(|j| l[(i, j)] * z[j]).sum();
        z[i] = (u[i] - s) / l[(i, i)];
    }
    z
}

fn w_from_embedding(rows: &[Vec<f64>], rho: f64, layout: ParamLayout, beta: f64) -> Vec<f64> {
    let l = prior_cholesky(rho, layout.dim).expect("rho in (0, 1)");
    let mut w: Vec<f64> = rows.iter().flat_map(|u| solve_lower(&l, u)).collect();
    w.push(logit(rho));
    if layout.beta_free {
        w.push(beta.ln());
    }
    w
}

/// Highest-density feasible starting point among random prior draws, a
/// chain by mean position, and (for `d ≥ 2`) an antichain.
fn feasible_start(target: &HardTarget<'_>, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let lay = target.layout;
    let n = lay.n_items;
    let mut candidates: Vec<Vec<f64>> = Vec::new();

    let mut pos_sum = vec![0.0; n];
    let mut pos_cnt = vec![0.0; n];
    for t in target.traces {
        let len = t.len().max(2) as f64;
        for (p, &x) in t.order().iter().enumerate() {
            pos_sum[x] += p as f64 / (len - 1.0);
            pos_cnt[x] += 1.0;
        }
    }
    let score: Vec<f64> =
        (0..n).map(|x| if pos_cnt[x] > 0.0 { 1.0 - 2.0 * pos_sum[x] / pos_cnt[x] } else { 0.0 } + 1e-6 * x as f64).collect();
    let chain_rows: Vec<Vec<f64>> = score.iter().map(|&s| vec![1.5 * s; lay.dim]).collect();
    candidates.push(w_from_embedding(&chain_rows, 0.5, lay, 1.0));

    if lay.dim >= 2 {
        let spread = |x: usize| 1.5 * (2.0 * x as f64 / (n.max(2) - 1) as f64 - 1.0);
        let anti: Vec<Vec<f64>> = (0..n)
            .map(|x| {
                let mut r = vec![0.0; lay.dim];
                r[0] = spread(x);
                r[1] = -spread(x);
                r
            })
            .collect();
        candidates.push(w_from_embedding(&anti, 0.5, lay, 1.0));
    }
    for _ in 0..200 {
        let mut w: Vec<f64> = (0..lay.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        w[lay.rho_index()] *= 0.5;
        candidates.push(w);
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    for w in candidates {
        let lp = target.log_density(&w).unwrap_or(f64::NEG_INFINITY);
        if lp > f64::NEG_INFINITY && best.as_ref().is_none_or(|(b, _)| lp > *b) {
            best = Some((lp, w));
        }
    }
    best.map(|(_, w)| w).ok_or_else(|| Error::Initialisation("no embedding found under which every trace is feasible".into()))
}

fn block_types(layout: ParamLayout, scales: &MhScales) -> Vec<BlockType> {
    let rows = (0..layout.n_items).map(|x| (x * layout.dim..(x + 1) * layout.dim).collect()).collect();
    let mut types = vec![
        BlockType { blocks: rows, scale: scales.z_row },
        BlockType { blocks: vec![vec![layout.rho_index()]], scale: scales.logit_rho },
    ];
    if let Some(b) = layout.beta_index() {
        types.push(BlockType { blocks: vec![vec![b]], scale: scales.log_beta });
    }
    types
}

fn run_chain(traces: &[Trace], n_items: usize, cfg: &PriorConfig, mh: &MhConfig, chain: usize) -> Result<DrawSet> {
    let start = Instant::now();
    let target = HardTarget::new(traces, n_items, cfg);
    let mut rng = chain_rng(mh.seed, chain);
    let init = feasible_start(&target, &mut rng)?;
    let mut types = block_types(target.layout, &mh.scales);
    let tuned = tune_scales(&target, &init, &mut types, mh.tune_iters, &mut rng)?;

    let burn = ((mh.n_iters as f64) * mh.burn_in_fraction).floor() as usize;
    let kept_iters = thin_indices(mh.n_iters - burn, mh.max_draws.max(1));
    let mut keep_flags = vec![false; mh.n_iters];
    for i in kept_iters {
        keep_flags[burn + i] = true;
    }
    let run = block_metropolis(&target, &tuned, &types, mh.n_iters, |it| keep_flags[it], &mut rng)?;

    let draws = run
        .kept
        .iter()
        .map(|(w, lp)| {
            let (params, log_jac) = transform(&UnconstrainedParams { layout: target.layout, w: w.clone() }, cfg);
            Draw { params, log_posterior: lp - log_jac }
        })
        .collect();
    let mut meta = DrawMeta::new(Method::HardMcmc, mh.seed, cfg.tau);
    meta.acceptance_rate = Some(run.acceptance_rate());
    meta.trail = run.trail;
    meta.runtime_seconds = start.elapsed().as_secs_f64();
    DrawSet::new(draws, meta)
}

/// Hard-posterior draws after 50% burn-in, evenly thinned to at most `max_draws` per chain.
pub fn hard_mh_sample(traces: &[Trace], n_items: usize, cfg: &PriorConfig, mh: &MhConfig) -> Result<DrawSet> {
    cfg.validate()?;
    if mh.n_iters == 0 || mh.chains == 0 {
        return Err(Error::InvalidArgument("iteration and chain counts must be positive".into()));
    }
    for t in traces {
        t.validate(n_items)?;
    }
    let sets = run_chains(mh.chains, |c| run_chain(traces, n_items, cfg, mh, c));
    DrawSet::merge(sets.into_iter().collect::<Result<Vec<_>>>()?)
}
