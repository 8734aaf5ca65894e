//! Priors, the non-centred parameterisation and the two posterior targets.
//!
//! Embedding rows are `u_x = L_ρ z_x` with `z_x` standard normal and `L_ρ`
//! the Cholesky factor of the equicorrelation matrix
//! `Σ_ρ = (1 - ρ) I + ρ 11ᵀ`. Continuous samplers work on the unconstrained
//! vector `w = (vec Z, η_ρ, η_β, η_γ)` with `ρ = σ(η_ρ)`, `β = exp(η_β)`,
//! `γ = exp(η_γ)`; a fixed scalar drops its coordinate, prior and Jacobian.

use crate::error::{Error, Result};
use crate::hardlik::{hard_trace_loglik, induced_order, Embedding, Trace, LOG_ZERO};
use crate::matrix::Matrix;
use crate::numeric::{log_sigmoid, logit, sigmoid};
use crate::relaxlik::{relaxed_loglik_grad, RelaxConfig};
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub a_rho: f64,
    pub b_rho: f64,
    pub a_beta: f64,
    pub b_beta: f64,
    pub a_gamma: f64,
    pub b_gamma: f64,
    /// Embedding dimension.
    pub d: usize,
    /// Soft-min temperature; fixed, never sampled.
    pub tau: f64,
    pub fix_beta: Option<f64>,
    pub fix_gamma: Option<f64>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            a_rho: 2.0,
            b_rho: 2.0,
            a_beta: 1.0,
            b_beta: 1.0,
            a_gamma: 2.0,
            b_gamma: 1.0,
            d: 4,
            tau: 0.3,
            fix_beta: None,
            fix_gamma: None,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        let shapes = [self.a_rho, self.b_rho, self.a_beta, self.b_beta, self.a_gamma, self.b_gamma];
        if shapes.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidArgument("prior shape and rate parameters must be positive".into()));
        }
        if self.d == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be at least 1".into()));
        }
        if !(self.tau > 0.0) {
            return Err(Error::InvalidArgument("tau must be positive".into()));
        }
        if let Some(b) = self.fix_beta {
            if !(b >= 0.0) {
                return Err(Error::InvalidArgument("fixed beta must be nonnegative".into()));
            }
        }
        if let Some(g) = self.fix_gamma {
            if !(g > 0.0) {
                return Err(Error::InvalidArgument("fixed gamma must be positive".into()));
            }
        }
        Ok(())
    }

    /// Prior mean of γ, or its fixed value.
    pub fn gamma_default(&self) -> f64 {
        self.fix_gamma.unwrap_or(self.a_gamma / self.b_gamma)
    }
}

/// Constrained parameters of one posterior state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub z: Matrix,
    pub rho: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl ModelParams {
    pub fn n_items(&self) -> usize {
        self.z.rows()
    }

    pub fn dim(&self) -> usize {
        self.z.cols()
    }
}

/// Which coordinates of the unconstrained vector are present.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamLayout {
    pub n_items: usize,
    pub dim: usize,
    pub beta_free: bool,
    pub gamma_free: bool,
}

impl ParamLayout {
    /// Layout of the relaxed target.
    pub fn relaxed(cfg: &PriorConfig, n_items: usize) -> Self {
        Self { n_items, dim: cfg.d, beta_free: cfg.fix_beta.is_none(), gamma_free: cfg.fix_gamma.is_none() }
    }

    /// Layout of the hard target, which has no γ.
    pub fn hard(cfg: &PriorConfig, n_items: usize) -> Self {
        Self { n_items, dim: cfg.d, beta_free: cfg.fix_beta.is_none(), gamma_free: false }
    }

    pub fn z_len(&self) -> usize {
        self.n_items * self.dim
    }

    pub fn rho_index(&self) -> usize {
        self.z_len()
    }

    pub fn beta_index(&self) -> Option<usize> {
        self.beta_free.then(|| self.z_len() + 1)
    }

    pub fn gamma_index(&self) -> Option<usize> {
        self.gamma_free.then(|| self.z_len() + 1 + usize::from(self.beta_free))
    }

    pub fn len(&self) -> usize {
        self.z_len() + 1 + usize::from(self.beta_free) + usize::from(self.gamma_free)
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Point in unconstrained coordinates, ordered `(vec Z, η_ρ, η_β, η_γ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnconstrainedParams {
    pub layout: ParamLayout,
    pub w: Vec<f64>,
}

impl UnconstrainedParams {
    pub fn new(layout: ParamLayout, w: Vec<f64>) -> Result<Self> {
        if w.len() != layout.len() {
            return Err(Error::DimensionMismatch(format!("expected {} coordinates, got {}", layout.len(), w.len())));
        }
        if let Some(i) = w.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { coordinate: i, context: "unconstrained parameter".into() });
        }
        Ok(Self { layout, w })
    }
}

/// Cholesky factor of `(1 - ρ) I + ρ 11ᵀ`.
pub fn prior_cholesky(rho: f64, d: usize) -> Result<Matrix> {
    Ok(prior_cholesky_with_derivative(rho, d)?.0)
}

/// Cholesky factor and its entrywise derivative with respect to `ρ`.
///
/// Every column `j` of the factor has diagonal `a_j` and a constant
/// sub-diagonal value `c_j`, with `s_j = Σ_{k<j} c_k²`, `a_j = √(1 - s_j)`
/// and `c_j = (ρ - s_j) / a_j`.
pub fn prior_cholesky_with_derivative(rho: f64, d: usize) -> Result<(Matrix, Matrix)> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidArgument(format!("rho must lie in (0, 1), got {rho}")));
    }
    let mut l = Matrix::zeros(d, d);
    let mut dl = Matrix::zeros(d, d);
    let (mut s, mut ds) = (0.0f64, 0.0f64);
    for j in 0..d {
        let a = (1.0 - s).sqrt();
        let da = -ds / (2.0 * a);
        let c = (rho - s) / a;
        let dc = ((1.0 - ds) * a - (rho - s) * da) / (a * a);
        l[(j, j)] = a;
        dl[(j, j)] = da;
        for i in (j + 1)..d {
            l[(i, j)] = c;
            dl[(i, j)] = dc;
        }
        s += c * c;
        ds += 2.0 * c * dc;
    }
    Ok((l, dl))
}

/// `U = Z L_ρᵀ`, i.e. each row is mapped as `u_x = L_ρ z_x`.
fn rows_times_transpose(z: &Matrix, l: &Matrix) -> Matrix {
    z.matmul(&l.transpose())
}

pub fn to_embedding(p: &ModelParams) -> Result<Embedding> {
    let l = prior_cholesky(p.rho, p.dim())?;
    Embedding::new(rows_times_transpose(&p.z, &l))
}

/// Maps `w` to constrained parameters; also returns `log |det J|`.
pub fn transform(w: &UnconstrainedParams, cfg: &PriorConfig) -> (ModelParams, f64) {
    let lay = w.layout;
    let z = Matrix::from_vec(lay.n_items, lay.dim, w.w[..lay.z_len()].to_vec());
    let eta_rho = w.w[lay.rho_index()];
    let rho = sigmoid(eta_rho);
    // log ρ + log(1 - ρ), computed without forming 1 - ρ
    let mut log_jac = log_sigmoid(eta_rho) + log_sigmoid(-eta_rho);
    let beta = match lay.beta_index() {
        Some(i) => {
            log_jac += w.w[i];
            w.w[i].exp()
        }
        None => cfg.fix_beta.unwrap_or(0.0),
    };
    let gamma = match lay.gamma_index() {
        Some(i) => {
            log_jac += w.w[i];
            w.w[i].exp()
        }
        None => cfg.gamma_default(),
    };
    (ModelParams { z, rho, beta, gamma }, log_jac)
}

pub fn inverse_transform(p: &ModelParams, layout: ParamLayout) -> Result<UnconstrainedParams> {
    let mut w = p.z.as_slice().to_vec();
    w.push(logit(p.rho));
    if layout.beta_free {
        w.push(p.beta.ln());
    }
    if layout.gamma_free {
        w.push(p.gamma.ln());
    }
    UnconstrainedParams::new(layout, w)
}

fn log_beta_density(x: f64, a: f64, b: f64) -> f64 {
    (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_beta(a, b)
}

fn log_gamma_density(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// Log prior of `(Z, ρ)` plus `β` and `γ` when `include_*` is set.
fn log_prior(p: &ModelParams, cfg: &PriorConfig, include_beta: bool, include_gamma: bool) -> f64 {
    let zz: f64 = p.z.as_slice().iter().map(|v| v * v).sum();
    let mut lp = -0.5 * zz - 0.5 * LN_2PI * p.z.as_slice().len() as f64;
    lp += log_beta_density(p.rho, cfg.a_rho, cfg.b_rho);
    if include_beta {
        lp += log_gamma_density(p.beta, cfg.a_beta, cfg.b_beta);
    }
    if include_gamma {
        lp += log_gamma_density(p.gamma, cfg.a_gamma, cfg.b_gamma);
    }
    lp
}

/// Log density of the relaxed posterior in unconstrained coordinates, with gradient.
pub fn relaxed_log_posterior(w: &UnconstrainedParams, traces: &[Trace], cfg: &PriorConfig) -> Result<(f64, Vec<f64>)> {
    let lay = w.layout;
    let (p, log_jac) = transform(w, cfg);
    let (l, dl) = prior_cholesky_with_derivative(p.rho, lay.dim)?;
    let u = rows_times_transpose(&p.z, &l);
    let e = Embedding::new(u).map_err(|_| Error::NonFinite { coordinate: 0, context: "embedding".into() })?;
    let relax = RelaxConfig { tau: cfg.tau, gamma: p.gamma, beta: p.beta };
    let lik = relaxed_loglik_grad(&e, &relax, traces);

    let logp = log_prior(&p, cfg, lay.beta_free, lay.gamma_free) + lik.loglik + log_jac;

    let mut grad = vec![0.0; lay.len()];
    // ∂/∂Z = dU · L, plus the standard-normal prior term -Z
    let gz = lik.d_u.matmul(&l);
    for (i, g) in grad[..lay.z_len()].iter_mut().enumerate() {
        *g = gz.as_slice()[i] - w.w[i];
    }
    let zdl = rows_times_transpose(&p.z, &dl);
    let d_rho_lik: f64 = lik.d_u.as_slice().iter().zip(zdl.as_slice()).map(|(a, b)| a * b).sum();
    let rho = p.rho;
    let d_rho = d_rho_lik + (cfg.a_rho - 1.0) / rho - (cfg.b_rho - 1.0) / (1.0 - rho);
    grad[lay.rho_index()] = d_rho * rho * (1.0 - rho) + (1.0 - 2.0 * rho);
    if let Some(i) = lay.beta_index() {
        let b = p.beta;
        grad[i] = (lik.d_beta + (cfg.a_beta - 1.0) / b - cfg.b_beta) * b + 1.0;
    }
    if let Some(i) = lay.gamma_index() {
        let g = p.gamma;
        grad[i] = (lik.d_gamma + (cfg.a_gamma - 1.0) / g - cfg.b_gamma) * g + 1.0;
    }

    if !logp.is_finite() {
        return Err(Error::NonFinite { coordinate: lay.len(), context: format!("log posterior = {logp}") });
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite { coordinate: i, context: "log posterior gradient".into() });
    }
    Ok((logp, grad))
}

/// Log density of the hard posterior over `(Z, ρ, β)`. [`LOG_ZERO`] if any trace is infeasible.
pub fn hard_log_posterior(p: &ModelParams, traces: &[Trace], cfg: &PriorConfig) -> Result<f64> {
    let e = to_embedding(p)?;
    let po = induced_order(&e);
    let mut lp = log_prior(p, cfg, cfg.fix_beta.is_none(), false);
    for t in traces {
        lp += hard_trace_loglik(&po, t, p.beta);
        if lp == LOG_ZERO {
            return Ok(LOG_ZERO);
        }
    }
    Ok(lp)
}

/// Hard posterior pulled back to unconstrained coordinates (Jacobian for ρ and β).
pub fn hard_log_posterior_unconstrained(w: &UnconstrainedParams, traces: &[Trace], cfg: &PriorConfig) -> Result<f64> {
    let (p, log_jac) = transform(w, cfg);
    Ok(hard_log_posterior(&p, traces, cfg)? + log_jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_w(rng: &mut ChaCha8Rng, layout: ParamLayout) -> UnconstrainedParams {
        let w = (0..layout.len()).map(|_| rng.sample::<f64, _>(StandardNormal) * 0.7).collect();
        UnconstrainedParams::new(layout, w).unwrap()
    }

    #[test]
    fn cholesky_examples() {
        let l = prior_cholesky(1e-12, 3).unwrap();
        assert!(l.max_abs_diff(&Matrix::identity(3)) < 1e-11);
        let l = prior_cholesky(0.9, 2).unwrap();
        let expected = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.9, 0.19f64.sqrt()]]);
        assert!(l.max_abs_diff(&expected) < 1e-15);
        assert_eq!(prior_cholesky(0.4, 1).unwrap().as_slice(), &[1.0]);
        assert!(prior_cholesky(1.0, 2).is_err());
        assert!(prior_cholesky(0.0, 2).is_err());
    }

    #[test]
    fn cholesky_reproduces_covariance() {
        for &rho in &[0.05, 0.5, 0.93] {
            for d in 1..=6 {
                let l = prior_cholesky(rho, d).unwrap();
                let s = l.matmul(&l.transpose());
                for i in 0..d {
                    for j in 0..d {
                        let want = if i == j { 1.0 } else { rho };
                        assert!((s[(i, j)] - want).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn cholesky_derivative_matches_finite_differences() {
        let h = 1e-6;
        for &rho in &[0.1, 0.45, 0.8] {
            let (_, dl) = prior_cholesky_with_derivative(rho, 5).unwrap();
            let up = prior_cholesky(rho + h, 5).unwrap();
            let dn = prior_cholesky(rho - h, 5).unwrap();
            for i in 0..5 {
                for j in 0..=i {
                    let fd = (up[(i, j)] - dn[(i, j)]) / (2.0 * h);
                    let an = dl[(i, j)];
                    assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-3), "({i},{j}) fd {fd} vs {an}");
                }
            }
        }
    }

    #[test]
    fn embedding_examples() {
        let z = Matrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 0.3]]);
        let e = to_embedding(&ModelParams { z: z.clone(), rho: 1e-12, beta: 1.0, gamma: 1.0 }).unwrap();
        assert!(e.matrix().max_abs_diff(&z) < 1e-11);
        let e0 = to_embedding(&ModelParams { z: Matrix::zeros(3, 2), rho: 0.7, beta: 1.0, gamma: 1.0 }).unwrap();
        assert!(e0.matrix().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn embedding_rows_have_prior_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let (n, d, rho) = (100_000, 3, 0.6);
        let z = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.sample(StandardNormal)).collect());
        let e = to_embedding(&ModelParams { z, rho, beta: 1.0, gamma: 1.0 }).unwrap();
        for i in 0..d {
            for j in 0..d {
                let cov: f64 = (0..n).map(|x| e.row(x)[i] * e.row(x)[j]).sum::<f64>() / n as f64;
                let want = if i == j { 1.0 } else { rho };
                // standard error of a product-moment estimate is at most sqrt(2/n)
                assert!((cov - want).abs() < 3.0 * (2.0 / n as f64).sqrt(), "({i},{j}) {cov}");
            }
        }
    }

    #[test]
    fn transform_examples() {
        let cfg = PriorConfig { d: 1, ..PriorConfig::default() };
        let lay = ParamLayout::relaxed(&cfg, 1);
        let w = UnconstrainedParams::new(lay, vec![0.3, 0.0, 0.0, 0.0]).unwrap();
        let (p, lj) = transform(&w, &cfg);
        assert_eq!(p.rho, 0.5);
        assert_eq!(p.beta, 1.0);
        assert_eq!(p.gamma, 1.0);
        assert!((lj - 0.25f64.ln()).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = PriorConfig { d: 3, ..PriorConfig::default() };
        let lay = ParamLayout::relaxed(&cfg, 4);
        for _ in 0..20 {
            let w = random_w(&mut rng, lay);
            let back = inverse_transform(&transform(&w, &cfg).0, lay).unwrap();
            for (a, b) in w.w.iter().zip(&back.w) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fixed_scalars_drop_coordinates() {
        let cfg = PriorConfig { d: 2, fix_beta: Some(0.0), ..PriorConfig::default() };
        let lay = ParamLayout::relaxed(&cfg, 3);
        assert_eq!(lay.len(), 3 * 2 + 2);
        assert_eq!(lay.beta_index(), None);
        assert_eq!(lay.gamma_index(), Some(7));
        let w = UnconstrainedParams::new(lay, vec![0.0; 8]).unwrap();
        let (p, lj) = transform(&w, &cfg);
        assert_eq!(p.beta, 0.0);
        assert!((lj - 0.25f64.ln()).abs() < 1e-15);
        assert_eq!(ParamLayout::hard(&cfg, 3).len(), 7);
    }

    fn traces() -> Vec<Trace> {
        vec![Trace::new(vec![0, 1, 2, 3, 4]).unwrap(), Trace::new(vec![1, 0, 3, 2]).unwrap(), Trace::new(vec![4, 2, 0]).unwrap()]
    }

    fn check_gradient(cfg: &PriorConfig, data: &[Trace], seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lay = ParamLayout::relaxed(cfg, 5);
        let w = random_w(&mut rng, lay);
        let (_, grad) = relaxed_log_posterior(&w, data, cfg).unwrap();
        let h = 1e-5;
        for i in 0..lay.len() {
            let mut up = w.clone();
            let mut dn = w.clone();
            up.w[i] += h;
            dn.w[i] -= h;
            let fd = (relaxed_log_posterior(&up, data, cfg).unwrap().0 - relaxed_log_posterior(&dn, data, cfg).unwrap().0) / (2.0 * h);
            let scale = fd.abs().max(grad[i].abs()).max(1e-2);
            assert!((fd - grad[i]).abs() <= 1e-4 * scale, "coord {i}: fd {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn posterior_gradient_matches_finite_differences() {
        let cfg = PriorConfig { d: 2, ..PriorConfig::default() };
        for seed in 0..5 {
            check_gradient(&cfg, &traces(), seed);
        }
        let fixed = PriorConfig { d: 3, fix_beta: Some(0.0), ..PriorConfig::default() };
        check_gradient(&fixed, &traces(), 9);
    }

    #[test]
    fn zero_traces_give_prior_plus_jacobian() {
        let cfg = PriorConfig { d: 2, ..PriorConfig::default() };
        let lay = ParamLayout::relaxed(&cfg, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = random_w(&mut rng, lay);
        let (lp, _) = relaxed_log_posterior(&w, &[], &cfg).unwrap();
        let (p, lj) = transform(&w, &cfg);
        assert!((lp - (log_prior(&p, &cfg, true, true) + lj)).abs() < 1e-12);
        check_gradient(&cfg, &[], 4);
    }

    #[test]
    fn duplicated_trace_doubles_its_contribution() {
        let cfg = PriorConfig { d: 2, ..PriorConfig::default() };
        let lay = ParamLayout::relaxed(&cfg, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w = random_w(&mut rng, lay);
        let t = Trace::new(vec![3, 1, 4, 0]).unwrap();
        let base = relaxed_log_posterior(&w, &[], &cfg).unwrap().0;
        let one = relaxed_log_posterior(&w, std::slice::from_ref(&t), &cfg).unwrap().0;
        let two = relaxed_log_posterior(&w, &[t.clone(), t], &cfg).unwrap().0;
        assert!(((two - base) - 2.0 * (one - base)).abs() < 1e-10);
    }

    #[test]
    fn hard_posterior_examples() {
        let cfg = PriorConfig { d: 2, fix_beta: Some(0.0), ..PriorConfig::default() };
        // diamond: 0 above 1 and 2, both above 3
        let z = Matrix::from_rows(&[vec![2.0, 2.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, -1.0]]);
        let p = ModelParams { z, rho: 1e-9, beta: 0.0, gamma: 1.0 };
        let prior = log_prior(&p, &cfg, false, false);
        let feasible = [Trace::new(vec![0, 1, 2, 3]).unwrap(), Trace::new(vec![0, 2, 1, 3]).unwrap()];
        let lp = hard_log_posterior(&p, &feasible, &cfg).unwrap();
        assert!((lp - (prior + 2.0 * 0.5f64.ln())).abs() < 1e-6);
        let bad = [Trace::new(vec![3, 0, 1, 2]).unwrap()];
        assert_eq!(hard_log_posterior(&p, &bad, &cfg).unwrap(), LOG_ZERO);
    }

    #[test]
    fn hard_and_relaxed_likelihoods_agree_in_sharp_regime() {
        let cfg = PriorConfig { d: 2, tau: 0.005, fix_gamma: Some(200.0), ..PriorConfig::default() };
        let z = Matrix::from_rows(&[vec![2.0, 2.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, -1.0]]);
        let p = ModelParams { z, rho: 1e-9, beta: 0.7, gamma: 200.0 };
        let data = [Trace::new(vec![0, 1, 2, 3]).unwrap(), Trace::new(vec![0, 2, 3]).unwrap()];
        let hard = hard_log_posterior(&p, &data, &cfg).unwrap() - log_prior(&p, &cfg, true, false);
        let lay = ParamLayout::relaxed(&cfg, 4);
        let w = inverse_transform(&p, lay).unwrap();
        let (p2, lj) = transform(&w, &cfg);
        let relaxed = relaxed_log_posterior(&w, &data, &cfg).unwrap().0 - log_prior(&p2, &cfg, true, false) - lj;
        assert!((hard - relaxed).abs() < 1e-3, "{hard} vs {relaxed}");
    }

    #[test]
    fn relaxed_posterior_is_finite_far_from_origin() {
        let cfg = PriorConfig { d: 3, tau: 0.05, ..PriorConfig::default() };
        let lay = ParamLayout::relaxed(&cfg, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..50 {
            let w: Vec<f64> = (0..lay.len()).map(|_| rng.random_range(-8.0..8.0)).collect();
            let w = UnconstrainedParams::new(lay, w).unwrap();
            let (lp, g) = relaxed_log_posterior(&w, &traces(), &cfg).unwrap();
            assert!(lp.is_finite() && g.iter().all(|v| v.is_finite()));
        }
    }
}
