//! Smooth surrogate of the frontier-softmax likelihood and its gradients.
//!
//! The hard margin `min_k (u_zk - u_xk)` is replaced by a log-sum-exp soft
//! minimum at temperature `tau`, and the dominance indicator by
//! `sigmoid(gamma * margin)`. Frontier membership becomes the product of
//! `1 - D[z][x]` over remaining `z`, kept in log space throughout, and the
//! successor count becomes a row sum of `D`.
//!
//! Gradients are closed-form. A trace is evaluated in `O(T^2)` by carrying
//! log-frontier weights and soft successor sums from step to step; the
//! backward pass uses per-item cumulative sums of the softmax residuals so
//! it stays quadratic as well.

use crate::error::{Error, Result};
use crate::hardlik::{hard_margin, Embedding, Trace};
use crate::matrix::Matrix;
use crate::numeric::{log_sum_exp, sigmoid, softmax_into, softplus};

/// Temperatures of the relaxation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelaxConfig {
    pub tau: f64,
    pub gamma: f64,
    pub beta: f64,
}

impl RelaxConfig {
    pub fn new(tau: f64, gamma: f64, beta: f64) -> Result<Self> {
        if !(tau > 0.0) || !(gamma > 0.0) || !(beta >= 0.0) || !tau.is_finite() || !gamma.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidArgument(format!("relaxation needs tau > 0, gamma > 0, beta >= 0 (got {tau}, {gamma}, {beta})")));
        }
        Ok(Self { tau, gamma, beta })
    }
}

/// `-tau * log Σ exp(-a_k / tau)`.
pub fn soft_min(a: &[f64], tau: f64) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::InvalidArgument("soft_min of an empty vector".into()));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("soft_min temperature must be positive, got {tau}")));
    }
    Ok(soft_min_weights(a, tau, None))
}

/// Soft minimum; optionally writes `∂/∂a_k` (a softmax of `-a/tau`) into `weights`.
#[inline]
fn soft_min_weights(a: &[f64], tau: f64, weights: Option<&mut [f64]>) -> f64 {
    let lo = a.iter().copied().fold(f64::INFINITY, f64::min);
    let mut total = 0.0;
    match weights {
        Some(w) => {
            for (wk, &ak) in w.iter_mut().zip(a) {
                *wk = (-(ak - lo) / tau).exp();
                total += *wk;
            }
            for wk in w.iter_mut() {
                *wk /= total;
            }
        }
        None => {
            for &ak in a {
                total += (-(ak - lo) / tau).exp();
            }
        }
    }
    lo - tau * total.ln()
}

fn gaps(e: &Embedding, z: usize, x: usize, out: &mut [f64]) {
    for ((g, a), b) in out.iter_mut().zip(e.row(z)).zip(e.row(x)) {
        *g = a - b;
    }
}

/// Soft-min of the coordinate gaps `u_z - u_x`.
pub fn soft_margin(e: &Embedding, cfg: &RelaxConfig, z: usize, x: usize) -> Result<f64> {
    if z == x {
        return Err(Error::SelfComparison(z));
    }
    let mut g = vec![0.0; e.dim()];
    gaps(e, z, x, &mut g);
    Ok(soft_min_weights(&g, cfg.tau, None))
}

/// Pairwise soft precedence scores together with `log(1 - D)`.
///
/// Both are stored because `D` saturates to `1.0` in floating point long
/// before `log(1 - D)` stops being informative; the log form is computed
/// directly from the logit (`-softplus(a)`) and never from `D`.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftPrecedence {
    d: Matrix,
    log1m: Matrix,
}

impl SoftPrecedence {
    /// `D = sigmoid(logits)`, diagonal zero.
    pub fn from_logits(logits: &Matrix) -> Self {
        let n = logits.rows();
        let mut d = Matrix::zeros(n, n);
        let mut log1m = Matrix::zeros(n, n);
        for z in 0..n {
            for x in 0..n {
                if z != x {
                    let a = logits[(z, x)];
                    d[(z, x)] = sigmoid(a);
                    log1m[(z, x)] = -softplus(a);
                }
            }
        }
        Self { d, log1m }
    }

    /// `D = 1 - exp(-p)` for a nonnegative path-mass matrix `p`, diagonal zero.
    pub fn from_path_mass(p: &Matrix) -> Self {
        let n = p.rows();
        let mut d = Matrix::zeros(n, n);
        let mut log1m = Matrix::zeros(n, n);
        for z in 0..n {
            for x in 0..n {
                if z != x {
                    d[(z, x)] = -(-p[(z, x)]).exp_m1();
                    log1m[(z, x)] = -p[(z, x)];
                }
            }
        }
        Self { d, log1m }
    }

    /// Scores from an explicit matrix in `[0, 1)`; the diagonal is ignored.
    pub fn from_scores(scores: &Matrix) -> Self {
        let n = scores.rows();
        let mut d = Matrix::zeros(n, n);
        let mut log1m = Matrix::zeros(n, n);
        for z in 0..n {
            for x in 0..n {
                if z != x {
                    d[(z, x)] = scores[(z, x)];
                    log1m[(z, x)] = (-scores[(z, x)]).ln_1p();
                }
            }
        }
        Self { d, log1m }
    }

    pub fn n_items(&self) -> usize {
        self.d.rows()
    }

    #[inline]
    pub fn get(&self, z: usize, x: usize) -> f64 {
        self.d[(z, x)]
    }

    #[inline]
    pub fn log_one_minus(&self, z: usize, x: usize) -> f64 {
        self.log1m[(z, x)]
    }

    pub fn matrix(&self) -> &Matrix {
        &self.d
    }

    /// Rows and columns restricted to `items`.
    pub fn submatrix(&self, items: &[usize]) -> SoftPrecedence {
        let k = items.len();
        let mut d = Matrix::zeros(k, k);
        let mut log1m = Matrix::zeros(k, k);
        for (a, &i) in items.iter().enumerate() {
            for (b, &j) in items.iter().enumerate() {
                d[(a, b)] = self.d[(i, j)];
                log1m[(a, b)] = self.log1m[(i, j)];
            }
        }
        SoftPrecedence { d, log1m }
    }
}

/// Soft margins for every ordered pair (diagonal zero).
pub fn soft_margin_matrix(e: &Embedding, tau: f64) -> Matrix {
    let n = e.n_items();
    let mut m = Matrix::zeros(n, n);
    let mut g = vec![0.0; e.dim()];
    for z in 0..n {
        for x in 0..n {
            if z != x {
                gaps(e, z, x, &mut g);
                m[(z, x)] = soft_min_weights(&g, tau, None);
            }
        }
    }
    m
}

/// `D[z][x] = sigmoid(gamma * soft_margin(z, x))`; `O(M^2 d)`.
pub fn soft_precedence_matrix(e: &Embedding, cfg: &RelaxConfig) -> SoftPrecedence {
    let mut logits = soft_margin_matrix(e, cfg.tau);
    logits.scale(cfg.gamma);
    SoftPrecedence::from_logits(&logits)
}

fn require_member(remaining: &[usize], x: usize) -> Result<()> {
    if remaining.contains(&x) {
        Ok(())
    } else {
        Err(Error::NotRemaining { item: x })
    }
}

fn log_frontier(d: &SoftPrecedence, remaining: &[usize], x: usize) -> f64 {
    remaining.iter().filter(|&&z| z != x).map(|&z| d.log_one_minus(z, x)).sum()
}

fn successor_sum(d: &SoftPrecedence, remaining: &[usize], x: usize) -> f64 {
    remaining.iter().filter(|&&z| z != x).map(|&z| d.get(x, z)).sum()
}

/// `Π_{z ≠ x} (1 - D[z][x])` over the remaining set.
pub fn soft_frontier_weight(d: &SoftPrecedence, remaining: &[usize], x: usize) -> Result<f64> {
    require_member(remaining, x)?;
    Ok(log_frontier(d, remaining, x).exp())
}

/// Soft successor sum `s` and utility `log(1 + s)`.
pub fn soft_successor_utility(d: &SoftPrecedence, remaining: &[usize], x: usize) -> Result<(f64, f64)> {
    require_member(remaining, x)?;
    let s = successor_sum(d, remaining, x);
    Ok((s, s.ln_1p()))
}

/// Relaxed one-step probability; normalises over every remaining item.
pub fn relaxed_step_prob(d: &SoftPrecedence, remaining: &[usize], chosen: usize, beta: f64) -> Result<f64> {
    require_member(remaining, chosen)?;
    let score = |x: usize| log_frontier(d, remaining, x) + beta * successor_sum(d, remaining, x).ln_1p();
    let scores: Vec<f64> = remaining.iter().map(|&x| score(x)).collect();
    Ok((score(chosen) - log_sum_exp(&scores)).exp())
}

/// Per-step log-probabilities of a trace under precomputed soft precedences.
pub fn relaxed_step_log_probs(d: &SoftPrecedence, trace: &Trace, beta: f64) -> Vec<f64> {
    let order = trace.order();
    let t_len = order.len();
    let (mut phi, mut succ) = initial_state(d, order);
    let mut scores = vec![0.0; t_len];
    let mut out = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let live = &mut scores[t..];
        for (k, s) in live.iter_mut().enumerate() {
            let i = t + k;
            *s = phi[i] + beta * succ[i].ln_1p();
        }
        out.push(live[0] - log_sum_exp(live));
        advance(d, order, t, &mut phi, &mut succ);
    }
    out
}

/// Log-frontier weights and successor sums of every trace position at step 0.
fn initial_state(d: &SoftPrecedence, order: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let t_len = order.len();
    let mut phi = vec![0.0; t_len];
    let mut succ = vec![0.0; t_len];
    for (i, &x) in order.iter().enumerate() {
        for (j, &z) in order.iter().enumerate() {
            if i != j {
                phi[i] += d.log_one_minus(z, x);
                succ[i] += d.get(x, z);
            }
        }
    }
    (phi, succ)
}

/// Removes `order[t]` from the remaining set.
#[inline]
fn advance(d: &SoftPrecedence, order: &[usize], t: usize, phi: &mut [f64], succ: &mut [f64]) {
    let y = order[t];
    for i in (t + 1)..order.len() {
        let x = order[i];
        phi[i] -= d.log_one_minus(y, x);
        succ[i] -= d.get(x, y);
    }
}

pub fn relaxed_trace_loglik_with(d: &SoftPrecedence, trace: &Trace, beta: f64) -> f64 {
    relaxed_step_log_probs(d, trace, beta).iter().sum()
}

/// Relaxed log-likelihood of one trace. Always finite.
pub fn relaxed_trace_loglik(e: &Embedding, cfg: &RelaxConfig, trace: &Trace) -> f64 {
    let d = soft_precedence_matrix(e, cfg);
    relaxed_trace_loglik_with(&d, trace, cfg.beta)
}

/// Adjoints of a trace log-likelihood with respect to `D` and `log(1 - D)`.
#[derive(Clone, Debug)]
pub struct PrecedenceAdjoint {
    /// `∂ℓ/∂D[z][x]` through the successor utilities.
    pub d: Matrix,
    /// `∂ℓ/∂log(1 - D[z][x])` through the frontier weights.
    pub log1m: Matrix,
}

impl PrecedenceAdjoint {
    pub fn zeros(n: usize) -> Self {
        Self { d: Matrix::zeros(n, n), log1m: Matrix::zeros(n, n) }
    }
}

/// Adds the gradient of one trace log-likelihood into `adj` and returns
/// `(loglik, ∂ℓ/∂β)`.
///
/// With `c_i(t) = 1[i = t] - π_i(t)` the softmax residual of position `i` at
/// step `t`, the frontier term of pair `(z, x)` collects `c_x(t)` over every
/// step where both are still remaining, i.e. `t ≤ min(pos z, pos x)`. The
/// utility term does the same with `β c_x(t) / (1 + S_t(x))`. Running sums
/// of both per position make each pair an O(1) lookup.
pub fn accumulate_trace_adjoint(d: &SoftPrecedence, trace: &Trace, beta: f64, adj: &mut PrecedenceAdjoint) -> (f64, f64) {
    let order = trace.order();
    let t_len = order.len();
    if t_len < 2 {
        return (0.0, 0.0);
    }
    let (mut phi, mut succ) = initial_state(d, order);
    // cum_c[i * t_len + t] = Σ_{t' ≤ t} c_i(t'), valid for t ≤ i.
    let mut cum_c = vec![0.0; t_len * t_len];
    let mut cum_b = vec![0.0; t_len * t_len];
    let mut scores = vec![0.0; t_len];
    let mut probs = vec![0.0; t_len];
    let mut loglik = 0.0;
    let mut dbeta = 0.0;
    for t in 0..t_len {
        let live = t_len - t;
        for k in 0..live {
            let i = t + k;
            scores[k] = phi[i] + beta * succ[i].ln_1p();
        }
        let lse = softmax_into(&scores[..live], &mut probs[..live]);
        loglik += scores[0] - lse;
        for k in 0..live {
            let i = t + k;
            let c = if k == 0 { 1.0 - probs[k] } else { -probs[k] };
            let q = succ[i].ln_1p();
            dbeta += c * q;
            let prev_c = if t > 0 { cum_c[i * t_len + t - 1] } else { 0.0 };
            let prev_b = if t > 0 { cum_b[i * t_len + t - 1] } else { 0.0 };
            cum_c[i * t_len + t] = prev_c + c;
            cum_b[i * t_len + t] = prev_b + c * beta / (1.0 + succ[i]);
        }
        advance(d, order, t, &mut phi, &mut succ);
    }
    for (i, &x) in order.iter().enumerate() {
        for (j, &z) in order.iter().enumerate() {
            if i == j {
                continue;
            }
            let last = i.min(j);
            // z precedes x in the frontier product of x; x's utility counts D[x][z].
            adj.log1m[(z, x)] += cum_c[i * t_len + last];
            adj.d[(x, z)] += cum_b[i * t_len + last];
        }
    }
    (loglik, dbeta)
}

/// Relaxed log-likelihood and its gradient.
#[derive(Clone, Debug)]
pub struct RelaxedGrad {
    pub loglik: f64,
    pub d_u: Matrix,
    pub d_beta: f64,
    pub d_gamma: f64,
}

/// Joint log-likelihood of several traces with gradients for `U`, `β`, `γ`.
pub fn relaxed_loglik_grad(e: &Embedding, cfg: &RelaxConfig, traces: &[Trace]) -> RelaxedGrad {
    let n = e.n_items();
    let dim = e.dim();
    let margins = soft_margin_matrix(e, cfg.tau);
    let mut logits = margins.clone();
    logits.scale(cfg.gamma);
    let d = SoftPrecedence::from_logits(&logits);

    let mut adj = PrecedenceAdjoint::zeros(n);
    let mut loglik = 0.0;
    let mut d_beta = 0.0;
    for trace in traces {
        let (ll, db) = accumulate_trace_adjoint(&d, trace, cfg.beta, &mut adj);
        loglik += ll;
        d_beta += db;
    }

    let mut d_u = Matrix::zeros(n, dim);
    let mut d_gamma = 0.0;
    let mut g = vec![0.0; dim];
    let mut w = vec![0.0; dim];
    for z in 0..n {
        for x in 0..n {
            if z == x {
                continue;
            }
            let (gd, gl) = (adj.d[(z, x)], adj.log1m[(z, x)]);
            if gd == 0.0 && gl == 0.0 {
                continue;
            }
            let dzx = d.get(z, x);
            // D = σ(a), log(1 - D) = -softplus(a)
            let g_logit = gd * dzx * (1.0 - dzx) - gl * dzx;
            d_gamma += g_logit * margins[(z, x)];
            let g_margin = g_logit * cfg.gamma;
            gaps(e, z, x, &mut g);
            soft_min_weights(&g, cfg.tau, Some(&mut w));
            for k in 0..dim {
                let v = g_margin * w[k];
                d_u[(z, k)] += v;
                d_u[(x, k)] -= v;
            }
        }
    }
    RelaxedGrad { loglik, d_u, d_beta, d_gamma }
}

/// Gradient of a single trace.
pub fn relaxed_trace_grad(e: &Embedding, cfg: &RelaxConfig, trace: &Trace) -> RelaxedGrad {
    relaxed_loglik_grad(e, cfg, std::slice::from_ref(trace))
}

/// Smallest `|m_U(z, x)|` over distinct pairs of `remaining`.
pub fn compute_separation_margin(e: &Embedding, remaining: &[usize]) -> f64 {
    let mut best = f64::INFINITY;
    for &z in remaining {
        for &x in remaining {
            if z != x {
                best = best.min(hard_margin(e, z, x).expect("distinct").abs());
            }
        }
    }
    best
}

/// `τ log d + exp(-γ(δ - τ log d))`, the scale on which the relaxed frontier
/// approaches the hard indicator for a remaining set with separation `δ`.
pub fn compute_kappa(e: &Embedding, tau: f64, gamma: f64, remaining: &[usize]) -> f64 {
    let delta = compute_separation_margin(e, remaining);
    let shift = tau * (e.dim() as f64).ln();
    shift + (-gamma * (delta - shift)).exp()
}
