//! SoftDAG: a MAP-fitted weighted graph whose soft reachability replaces
//! the soft precedence matrix in the relaxed frontier likelihood.
//!
//! `W = σ(A)` with zero diagonal, `R = 1 - exp(-Σ_{ℓ≤K} W^ℓ)`, and the loss
//! `-log p̃(D | R, β) + λ₁ Σ W + λ_h h(W)²` with the truncated NOTEARS
//! penalty `h(W) = tr exp(W∘W) - n`.

use crate::error::{Error, Result};
use crate::hardlik::Trace;
use crate::matrix::Matrix;
use crate::numeric::sigmoid;
use crate::optim::Adam;
use crate::poset::{break_cycles_and_close, PartialOrder, WeightedDigraph};
use crate::relaxlik::{accumulate_trace_adjoint, relaxed_step_log_probs, PrecedenceAdjoint, SoftPrecedence};
use crate::samplers::chain_rng;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// The hyperparameter grid searched by [`softdag_grid_search`].
pub const DEFAULT_GRID: [(f64, f64); 9] =
    [(1e-4, 1.0), (1e-4, 10.0), (1e-4, 100.0), (1e-3, 1.0), (1e-3, 10.0), (1e-3, 100.0), (1e-2, 1.0), (1e-2, 10.0), (1e-2, 100.0)];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SoftDagConfig {
    pub lambda_l1: f64,
    pub lambda_h: f64,
    /// Path length cap; `min(8, n - 1)` when unset.
    pub k_hops: Option<usize>,
    /// Series degree of the penalty; `max(K, 12)` when unset.
    pub taylor_degree: Option<usize>,
    pub adam_lr: f64,
    pub steps: usize,
    pub restarts: usize,
    pub init_mean: f64,
    pub init_sd: f64,
    /// Decoding threshold on reachability.
    pub theta_dag: f64,
    pub seed: u64,
}

impl Default for SoftDagConfig {
    fn default() -> Self {
        Self {
            lambda_l1: 1e-3,
            lambda_h: 10.0,
            k_hops: None,
            taylor_degree: None,
            adam_lr: 0.05,
            steps: 400,
            restarts: 3,
            init_mean: -2.0,
            init_sd: 0.5,
            theta_dag: 0.5,
            seed: 0,
        }
    }
}

impl SoftDagConfig {
    pub fn hops(&self, n: usize) -> usize {
        self.k_hops.unwrap_or_else(|| 8.min(n.saturating_sub(1))).max(1)
    }

    pub fn degree(&self, n: usize) -> usize {
        self.taylor_degree.unwrap_or_else(|| self.hops(n).max(12))
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.restarts == 0 || self.k_hops == Some(0) || self.taylor_degree == Some(0) {
            return Err(Error::InvalidArgument("SoftDAG counts must be positive".into()));
        }
        if !(self.lambda_l1 >= 0.0 && self.lambda_h >= 0.0) {
            return Err(Error::InvalidArgument("SoftDAG penalties must be nonnegative".into()));
        }
        if !(self.adam_lr > 0.0) {
            return Err(Error::InvalidArgument("adam_lr must be positive".into()));
        }
        Ok(())
    }
}

/// Powers `W^0 .. W^k`.
fn powers(w: &Matrix, k: usize) -> Vec<Matrix> {
    let mut out = vec![Matrix::identity(w.rows())];
    for _ in 0..k {
        let next = out.last().expect("nonempty").matmul(w);
        out.push(next);
    }
    out
}

/// `Σ_{ℓ=1}^{K} W^ℓ`.
fn path_mass(pw: &[Matrix]) -> Matrix {
    let n = pw[0].rows();
    let mut p = Matrix::zeros(n, n);
    for m in &pw[1..] {
        p.add_assign(m);
    }
    p
}

/// `R = 1 - exp(-Σ_{ℓ=1}^{K} W^ℓ)` with zero diagonal.
pub fn softdag_reachability(w: &Matrix, k_hops: usize) -> Matrix {
    SoftPrecedence::from_path_mass(&path_mass(&powers(w, k_hops))).matrix().clone()
}

/// `tr(Σ_{k=0}^{deg} B^k / k!) - n` with `B = W∘W`.
pub fn notears_penalty(w: &Matrix, taylor_degree: usize) -> f64 {
    notears_with_grad(w, taylor_degree).0
}

/// Penalty and its gradient with respect to `W`.
fn notears_with_grad(w: &Matrix, degree: usize) -> (f64, Matrix) {
    let n = w.rows();
    let b = w.map(|v| v * v);
    let pb = powers(&b, degree);
    let mut h = 0.0;
    let mut fact = 1.0;
    // dh/dB = Σ_{k≥1} (B^{k-1})ᵀ / (k-1)!
    let mut dh_db = Matrix::zeros(n, n);
    for k in 1..=degree {
        let mut term = pb[k - 1].transpose();
        term.scale(1.0 / fact);
        dh_db.add_assign(&term);
        fact *= k as f64;
        h += pb[k].trace() / fact;
    }
    let mut g = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] = 2.0 * w[(i, j)] * dh_db[(i, j)];
        }
    }
    (h.max(0.0), g)
}

fn weights_from_logits(a: &Matrix) -> Matrix {
    let n = a.rows();
    let mut w = a.map(sigmoid);
    for i in 0..n {
        w[(i, i)] = 0.0;
    }
    w
}

/// Loss and gradients with respect to the edge logits `A` and `η = log β`.
pub fn softdag_loss_grad(a: &Matrix, eta_beta: f64, traces: &[Trace], cfg: &SoftDagConfig) -> (f64, Matrix, f64) {
    let n = a.rows();
    let k = cfg.hops(n);
    let w = weights_from_logits(a);
    let beta = eta_beta.exp();
    let pw = powers(&w, k);
    let p = path_mass(&pw);
    let d = SoftPrecedence::from_path_mass(&p);

    let mut adj = PrecedenceAdjoint::zeros(n);
    let mut loglik = 0.0;
    let mut dbeta = 0.0;
    for t in traces {
        let (ll, db) = accumulate_trace_adjoint(&d, t, beta, &mut adj);
        loglik += ll;
        dbeta += db;
    }
    // loss = -loglik; G = ∂loss/∂P with D = 1 - e^{-P}, log(1 - D) = -P
    let mut g = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                g[(i, j)] = -(adj.d[(i, j)] * (-p[(i, j)]).exp() - adj.log1m[(i, j)]);
            }
        }
    }
    // ∂/∂W of Σ_ℓ W^ℓ against G: Σ_ℓ Σ_{a<ℓ} (W^a)ᵀ G (W^{ℓ-1-a})ᵀ
    let pt: Vec<Matrix> = pw.iter().map(Matrix::transpose).collect();
    let mut dw = Matrix::zeros(n, n);
    for l in 1..=k {
        for a_pow in 0..l {
            dw.add_assign(&pt[a_pow].matmul(&g).matmul(&pt[l - 1 - a_pow]));
        }
    }
    let (h, dh) = notears_with_grad(&w, cfg.degree(n));
    let l1: f64 = w.as_slice().iter().sum();
    let loss = -loglik + cfg.lambda_l1 * l1 + cfg.lambda_h * h * h;
    let mut da = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let wij = w[(i, j)];
                let total = dw[(i, j)] + cfg.lambda_l1 + 2.0 * cfg.lambda_h * h * dh[(i, j)];
                da[(i, j)] = total * wij * (1.0 - wij);
            }
        }
    }
    (loss, da, -dbeta * beta)
}

/// Validation step NLL of the relaxed likelihood with `D = R`.
pub fn softdag_step_nll(reach: &Matrix, beta: f64, traces: &[Trace]) -> f64 {
    let d = SoftPrecedence::from_scores(reach);
    let mut total = 0.0;
    let mut count = 0usize;
    for t in traces {
        for lp in relaxed_step_log_probs(&d, t, beta) {
            total += lp;
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        -total / count as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SoftDagFit {
    pub order: PartialOrder,
    pub weights: Matrix,
    pub reachability: Matrix,
    pub beta: f64,
    pub val_step_nll: f64,
    pub lambda_l1: f64,
    pub lambda_h: f64,
}

/// Thresholds reachability at `theta` and breaks cycles.
pub fn decode_reachability(reach: &Matrix, theta: f64) -> PartialOrder {
    let n = reach.rows();
    let mut g = WeightedDigraph::new(n);
    for i in 0..n {
        for j in 0..n {
            if i != j && reach[(i, j)] > theta {
                g.add_edge(i, j, reach[(i, j)]);
            }
        }
    }
    break_cycles_and_close(&g)
}

/// Seeded 80/20-style split by trace index.
fn split(traces: &[Trace], validation_fraction: f64, seed: u64) -> Result<(Vec<Trace>, Vec<Trace>)> {
    if traces.len() < 2 {
        return Err(Error::InvalidArgument("SoftDAG needs at least two traces for a validation split".into()));
    }
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(Error::InvalidArgument("validation fraction must lie in (0, 1)".into()));
    }
    let mut idx: Vec<usize> = (0..traces.len()).collect();
    idx.shuffle(&mut chain_rng(seed, u64::MAX as usize));
    let n_val = ((traces.len() as f64 * validation_fraction).round() as usize).clamp(1, traces.len() - 1);
    let val = idx[..n_val].iter().map(|&i| traces[i].clone()).collect();
    let train = idx[n_val..].iter().map(|&i| traces[i].clone()).collect();
    Ok((train, val))
}

fn fit_restarts(train: &[Trace], val: &[Trace], n: usize, cfg: &SoftDagConfig, stream: usize) -> Option<SoftDagFit> {
    let mut best: Option<SoftDagFit> = None;
    for r in 0..cfg.restarts {
        let mut rng = chain_rng(cfg.seed, stream * cfg.restarts + r);
        let mut theta: Vec<f64> = (0..n * n).map(|_| cfg.init_mean + cfg.init_sd * rng.sample::<f64, _>(StandardNormal)).collect();
        theta.push(0.0);
        let mut adam = Adam::new(theta.len());
        let mut ok = true;
        for _ in 0..cfg.steps {
            let a = Matrix::from_vec(n, n, theta[..n * n].to_vec());
            let (loss, da, deta) = softdag_loss_grad(&a, theta[n * n], train, cfg);
            if !loss.is_finite() || !deta.is_finite() || !da.is_finite() {
                ok = false;
                break;
            }
            let mut grad = da.into_vec();
            grad.push(deta);
            adam.descend(&mut theta, &grad, cfg.adam_lr);
        }
        if !ok {
            continue;
        }
        let w = weights_from_logits(&Matrix::from_vec(n, n, theta[..n * n].to_vec()));
        let beta = theta[n * n].exp();
        let reach = softdag_reachability(&w, cfg.hops(n));
        let nll = softdag_step_nll(&reach, beta, val);
        if !nll.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|b| nll < b.val_step_nll) {
            best = Some(SoftDagFit {
                order: decode_reachability(&reach, cfg.theta_dag),
                weights: w,
                reachability: reach,
                beta,
                val_step_nll: nll,
                lambda_l1: cfg.lambda_l1,
                lambda_h: cfg.lambda_h,
            });
        }
    }
    best
}

/// Fits at the configured penalties; the restart with the lowest
/// validation step NLL wins.
pub fn softdag_fit(traces: &[Trace], n_items: usize, cfg: &SoftDagConfig, validation_fraction: f64) -> Result<SoftDagFit> {
    softdag_grid_search(traces, n_items, cfg, &[(cfg.lambda_l1, cfg.lambda_h)], validation_fraction)
}

/// Fits every `(λ₁, λ_h)` in `grid` and keeps the best validation step NLL.
pub fn softdag_grid_search(
    traces: &[Trace],
    n_items: usize,
    cfg: &SoftDagConfig,
    grid: &[(f64, f64)],
    validation_fraction: f64,
) -> Result<SoftDagFit> {
    cfg.validate()?;
    for t in traces {
        t.validate(n_items)?;
    }
    let (train, val) = split(traces, validation_fraction, cfg.seed)?;
    let mut best: Option<SoftDagFit> = None;
    for (g, &(l1, lh)) in grid.iter().enumerate() {
        let c = SoftDagConfig { lambda_l1: l1, lambda_h: lh, ..cfg.clone() };
        c.validate()?;
        if let Some(fit) = fit_restarts(&train, &val, n_items, &c, g) {
            if best.as_ref().is_none_or(|b| fit.val_step_nll < b.val_step_nll) {
                best = Some(fit);
            }
        }
    }
    best.ok_or_else(|| Error::Numerical("every SoftDAG restart produced a non-finite loss".into()))
}
