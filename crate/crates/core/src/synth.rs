//! Synthetic ground truths and traces.
//!
//! A truth is the product order of Gaussian embeddings; traces are drawn
//! from the hard frontier-softmax model, and training traces are picked
//! greedily from a larger pool to reach a target incomparable-pair coverage.

use crate::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::hardlik::{induced_order, Embedding, Trace};
use crate::matrix::Matrix;
use crate::model::prior_cholesky;
use crate::poset::{max_set, PartialOrder};
use crate::samplers::chain_rng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_items: usize,
    pub d_gen: usize,
    pub rho_gen: f64,
    pub beta_gen: f64,
    pub trace_budget_min: usize,
    pub trace_budget_max: usize,
    /// Defaults to a fifth of the selected training traces, rounded up.
    pub n_test_traces: Option<usize>,
    pub target_ip_cov: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self::new(10, 0.5, 0)
    }
}

impl SynthConfig {
    /// Full-coverage settings with a budget of `n` to `2n` training traces.
    pub fn new(n_items: usize, rho_gen: f64, seed: u64) -> Self {
        Self {
            n_items,
            d_gen: 4,
            rho_gen,
            beta_gen: 1.0,
            trace_budget_min: n_items.max(1),
            trace_budget_max: (2 * n_items).max(1),
            n_test_traces: None,
            target_ip_cov: 1.0,
            seed,
        }
    }

    /// Reduced-coverage settings: selection stops as soon as `target` is met.
    pub fn low_coverage(n_items: usize, rho_gen: f64, seed: u64, target: f64) -> Self {
        Self { trace_budget_min: 2, target_ip_cov: target, ..Self::new(n_items, rho_gen, seed) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_items == 0 || self.d_gen == 0 {
            return Err(Error::InvalidArgument("n_items and d_gen must be positive".into()));
        }
        if self.trace_budget_min == 0 || self.trace_budget_max < self.trace_budget_min {
            return Err(Error::InvalidArgument("trace budgets must satisfy 1 <= min <= max".into()));
        }
        if !(self.target_ip_cov > 0.0 && self.target_ip_cov <= 1.0) {
            return Err(Error::InvalidArgument("target_ip_cov must lie in (0, 1]".into()));
        }
        if !(self.rho_gen > 0.0 && self.rho_gen < 1.0) {
            return Err(Error::InvalidArgument("rho_gen must lie in (0, 1)".into()));
        }
        if !(self.beta_gen >= 0.0 && self.beta_gen.is_finite()) {
            return Err(Error::InvalidArgument("beta_gen must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Gaussian embedding `U = Z Lᵀ` and its product order.
pub fn generate_ground_truth(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<(Embedding, PartialOrder)> {
    cfg.validate()?;
    let l = prior_cholesky(cfg.rho_gen, cfg.d_gen)?;
    let z = Matrix::from_vec(cfg.n_items, cfg.d_gen, (0..cfg.n_items * cfg.d_gen).map(|_| rng.sample(StandardNormal)).collect());
    let e = Embedding::new(z.matmul(&l.transpose()))?;
    let po = induced_order(&e);
    Ok((e, po))
}

/// One full linear extension drawn step by step from the hard model.
pub fn sample_trace(po: &PartialOrder, beta: f64, rng: &mut ChaCha8Rng) -> Trace {
    let mut remaining: Vec<usize> = (0..po.n_items()).collect();
    let mut order = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let frontier = max_set(po, &remaining).expect("remaining items are in range");
        let weights: Vec<f64> = frontier
            .iter()
            .map(|&x| {
                let s = remaining.iter().filter(|&&y| po.precedes(x, y)).count();
                (1.0 + s as f64).powf(beta)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = frontier[frontier.len() - 1];
        for (&x, &w) in frontier.iter().zip(&weights) {
            if u < w {
                pick = x;
                break;
            }
            u -= w;
        }
        order.push(pick);
        remaining.retain(|&y| y != pick);
    }
    Trace::new(order).expect("a permutation of the items")
}

/// Coverage bookkeeping over the incomparable pairs of a truth.
struct Coverage {
    pairs: Vec<(usize, usize)>,
    fwd: Vec<bool>,
    bwd: Vec<bool>,
}

impl Coverage {
    fn new(truth: &PartialOrder) -> Self {
        let n = truth.n_items();
        let pairs: Vec<(usize, usize)> =
            (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).filter(|&(a, b)| !truth.comparable(a, b)).collect();
        let k = pairs.len();
        Self { pairs, fwd: vec![false; k], bwd: vec![false; k] }
    }

    fn value(&self) -> f64 {
        if self.pairs.is_empty() {
            return 1.0;
        }
        let c = self.fwd.iter().zip(&self.bwd).filter(|(f, b)| **f && **b).count();
        c as f64 / self.pairs.len() as f64
    }

    /// Pair orientations of a trace: `true` when `a` comes before `b`.
    fn orient(&self, t: &Trace, n: usize) -> Vec<Option<bool>> {
        let mut pos = vec![usize::MAX; n];
        for (p, &x) in t.order().iter().enumerate() {
            pos[x] = p;
        }
        self.pairs.iter().map(|&(a, b)| (pos[a] != usize::MAX && pos[b] != usize::MAX).then(|| pos[a] < pos[b])).collect()
    }

    fn gain(&self, o: &[Option<bool>]) -> usize {
        o.iter()
            .enumerate()
            .filter(|(k, v)| match v {
                Some(true) => !self.fwd[*k] && self.bwd[*k],
                Some(false) => self.fwd[*k] && !self.bwd[*k],
                None => false,
            })
            .count()
    }

    fn add(&mut self, o: &[Option<bool>]) {
        for (k, v) in o.iter().enumerate() {
            match v {
                Some(true) => self.fwd[k] = true,
                Some(false) => self.bwd[k] = true,
                None => {}
            }
        }
    }
}

/// Greedy selection from `pool`: take the trace with the largest coverage
/// gain (earliest on ties); if that would overshoot the target, take the
/// trace landing closest to it. Once the target is met, pad up to the
/// minimum budget with the traces adding least coverage. Returns the
/// selected traces and the coverage they reach.
pub fn select_training_traces(pool: &[Trace], truth: &PartialOrder, cfg: &SynthConfig) -> Result<(Vec<Trace>, f64)> {
    if pool.len() < cfg.trace_budget_min {
        return Err(Error::InvalidArgument(format!(
            "pool of {} traces cannot meet the minimum budget of {}",
            pool.len(),
            cfg.trace_budget_min
        )));
    }
    let n = truth.n_items();
    let mut cov = Coverage::new(truth);
    let orients: Vec<Vec<Option<bool>>> = pool.iter().map(|t| cov.orient(t, n)).collect();
    let n_pairs = cov.pairs.len().max(1) as f64;
    let mut used = vec![false; pool.len()];
    let mut selected = Vec::new();
    let mut covered = 0usize;
    let target = cfg.target_ip_cov;
    let reached = |c: usize, len: usize| cov_value(c, len, n_pairs) >= target - 1e-12;

    while selected.len() < cfg.trace_budget_max {
        let done = reached(covered, cov.pairs.len());
        if done && selected.len() >= cfg.trace_budget_min {
            break;
        }
        let candidates = (0..pool.len()).filter(|&i| !used[i]);
        let gains: Vec<(usize, usize)> = candidates.map(|i| (i, cov.gain(&orients[i]))).collect();
        if gains.is_empty() {
            break;
        }
        let pick = if done {
            gains.iter().min_by_key(|&&(i, g)| (g, i)).map(|&(i, _)| i)
        } else {
            let &(best, g_best) = gains.iter().max_by_key(|&&(i, g)| (g, std::cmp::Reverse(i))).expect("nonempty");
            if cov_value(covered + g_best, cov.pairs.len(), n_pairs) > target + 1e-12 {
                let dist = |g: usize| (cov_value(covered + g, cov.pairs.len(), n_pairs) - target).abs();
                gains.iter().min_by(|a, b| dist(a.1).total_cmp(&dist(b.1)).then(a.0.cmp(&b.0))).map(|&(i, _)| i)
            } else {
                Some(best)
            }
        }
        .expect("nonempty");
        covered += cov.gain(&orients[pick]);
        cov.add(&orients[pick]);
        used[pick] = true;
        selected.push(pick);
    }
    if selected.len() < cfg.trace_budget_min {
        return Err(Error::InvalidArgument("trace pool exhausted below the minimum budget".into()));
    }
    Ok((selected.into_iter().map(|i| pool[i].clone()).collect(), cov.value()))
}

fn cov_value(covered: usize, n_pairs: usize, denom: f64) -> f64 {
    if n_pairs == 0 {
        1.0
    } else {
        covered as f64 / denom
    }
}

/// A generated dataset together with the embedding behind its truth.
#[derive(Clone, Debug)]
pub struct SynthOutput {
    pub dataset: Dataset,
    pub embedding: Embedding,
}

/// Truth, pool of `20 × budget_max` traces, greedy training selection and
/// independent test traces, each from its own random stream of `cfg.seed`.
pub fn generate_dataset(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let (embedding, truth) = generate_ground_truth(cfg, &mut chain_rng(cfg.seed, 0))?;
    let mut pool_rng = chain_rng(cfg.seed, 1);
    let pool: Vec<Trace> = (0..20 * cfg.trace_budget_max).map(|_| sample_trace(&truth, cfg.beta_gen, &mut pool_rng)).collect();
    let (train, achieved) = select_training_traces(&pool, &truth, cfg)?;
    let n_test = cfg.n_test_traces.unwrap_or_else(|| train.len().div_ceil(5));
    let mut test_rng = chain_rng(cfg.seed, 2);
    let mut ds = Dataset::with_numbered_items(cfg.n_items);
    for t in train {
        ds.push(t, Split::Train)?;
    }
    for _ in 0..n_test {
        ds.push(sample_trace(&truth, cfg.beta_gen, &mut test_rng), Split::Test)?;
    }
    ds.set_ground_truth(truth)?;
    ds.train_ip_cov = Some(achieved);
    Ok(SynthOutput { dataset: ds, embedding })
}
