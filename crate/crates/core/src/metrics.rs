//! Predictive and structural evaluation of fitted draws.

use crate::decode::Prf;
use crate::draws::{Draw, DrawSet};
use crate::error::{Error, Result};
use crate::hardlik::{hard_step_log_probs, induced_order, Trace};
use crate::model::to_embedding;
use crate::numeric::{log_mean_exp, sample_variance};
use crate::poset::PartialOrder;
use crate::relaxlik::{relaxed_step_log_probs, soft_precedence_matrix, RelaxConfig, SoftPrecedence};
use serde::{Deserialize, Serialize};

/// Floor on log-probabilities under the hard evaluator, close to the
/// smallest positive double.
pub const LOG_PROB_FLOOR: f64 = -745.0;

/// Likelihood used to score draws.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Evaluator {
    /// Frontier softmax on each draw's induced product order.
    Hard,
    /// Relaxed model at this temperature, with each draw's `γ` and `β`.
    Relaxed { tau: f64 },
}

enum Prepared {
    Hard(PartialOrder, f64),
    Relaxed(SoftPrecedence, f64),
}

impl Prepared {
    fn new(d: &Draw, ev: Evaluator) -> Result<Self> {
        let e = to_embedding(&d.params)?;
        Ok(match ev {
            Evaluator::Hard => Prepared::Hard(induced_order(&e), d.params.beta),
            Evaluator::Relaxed { tau } => {
                let cfg = RelaxConfig::new(tau, d.params.gamma, d.params.beta)?;
                Prepared::Relaxed(soft_precedence_matrix(&e, &cfg), d.params.beta)
            }
        })
    }

    fn step_log_probs(&self, t: &Trace) -> Vec<f64> {
        match self {
            Prepared::Hard(po, beta) => hard_step_log_probs(po, t, *beta).into_iter().map(|v| v.max(LOG_PROB_FLOOR)).collect(),
            Prepared::Relaxed(d, beta) => relaxed_step_log_probs(d, t, *beta),
        }
    }
}

/// `[trace][step][draw]` log-probabilities plus, per trace, whether every
/// draw found it infeasible.
pub struct PointwiseLogLik {
    steps: Vec<Vec<Vec<f64>>>,
    pub infeasible_traces: usize,
}

impl PointwiseLogLik {
    pub fn compute(draws: &DrawSet, traces: &[Trace], ev: Evaluator) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::InvalidArgument("no draws to evaluate".into()));
        }
        for t in traces {
            t.validate(draws.n_items())?;
        }
        let prepared = draws.draws().iter().map(|d| Prepared::new(d, ev)).collect::<Result<Vec<_>>>()?;
        let mut steps: Vec<Vec<Vec<f64>>> = traces.iter().map(|t| vec![Vec::with_capacity(prepared.len()); t.len()]).collect();
        for p in &prepared {
            for (ti, t) in traces.iter().enumerate() {
                for (k, lp) in p.step_log_probs(t).into_iter().enumerate() {
                    steps[ti][k].push(lp);
                }
            }
        }
        let infeasible_traces = match ev {
            Evaluator::Hard => steps.iter().filter(|s| s.iter().any(|draws| draws.iter().all(|&v| v <= LOG_PROB_FLOOR))).count(),
            Evaluator::Relaxed { .. } => 0,
        };
        Ok(Self { steps, infeasible_traces })
    }

    /// Per-trace log-likelihood of each draw.
    pub fn trace_by_draw(&self) -> Vec<Vec<f64>> {
        self.steps
            .iter()
            .map(|s| {
                let n_draws = s.first().map_or(0, |v| v.len());
                (0..n_draws).map(|d| s.iter().map(|step| step[d]).sum::<f64>().max(LOG_PROB_FLOOR)).collect()
            })
            .collect()
    }

    /// `-(1/|D|) Σ_traces log (1/S) Σ_s p(y | Θ_s)`.
    pub fn trace_nll(&self) -> f64 {
        let per = self.trace_by_draw();
        let n = per.len().max(1) as f64;
        -per.iter().filter(|v| !v.is_empty()).map(|v| log_mean_exp(v)).sum::<f64>() / n
    }

    /// Negative mean over all steps of the log posterior-predictive probability.
    pub fn step_nll(&self) -> f64 {
        let mut total = 0.0;
        let mut count = 0usize;
        for s in &self.steps {
            for step in s {
                total += log_mean_exp(step);
                count += 1;
            }
        }
        if count == 0 {
            0.0
        } else {
            -total / count as f64
        }
    }
}

pub fn trace_nll(draws: &DrawSet, test: &[Trace], ev: Evaluator) -> Result<f64> {
    Ok(PointwiseLogLik::compute(draws, test, ev)?.trace_nll())
}

pub fn step_nll(draws: &DrawSet, test: &[Trace], ev: Evaluator) -> Result<f64> {
    Ok(PointwiseLogLik::compute(draws, test, ev)?.step_nll())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waic {
    pub waic: f64,
    pub lppd: f64,
    pub p_waic: f64,
}

/// WAIC from a `[trace][draw]` log-likelihood matrix.
pub fn waic_from_matrix(ll: &[Vec<f64>]) -> Waic {
    let lppd: f64 = ll.iter().map(|v| log_mean_exp(v)).sum();
    let p_waic: f64 = ll.iter().map(|v| if v.len() < 2 { 0.0 } else { sample_variance(v) }).sum();
    Waic { waic: -2.0 * (lppd - p_waic), lppd, p_waic }
}

/// One pointwise term per trace.
pub fn waic(draws: &DrawSet, train: &[Trace], ev: Evaluator) -> Result<Waic> {
    Ok(waic_from_matrix(&PointwiseLogLik::compute(draws, train, ev)?.trace_by_draw()))
}

/// Fraction of incomparable pairs of `truth` seen in both relative orders
/// (1 when `truth` has none).
pub fn ip_cov(traces: &[Trace], truth: &PartialOrder) -> f64 {
    let n = truth.n_items();
    let mut seen = vec![false; n * n];
    for t in traces {
        let order = t.order();
        for (p, &a) in order.iter().enumerate() {
            for &b in &order[p + 1..] {
                if a < n && b < n {
                    seen[a * n + b] = true;
                }
            }
        }
    }
    let mut pairs = 0usize;
    let mut covered = 0usize;
    for a in 0..n {
        for b in a + 1..n {
            if !truth.comparable(a, b) {
                pairs += 1;
                covered += (seen[a * n + b] && seen[b * n + a]) as usize;
            }
        }
    }
    if pairs == 0 {
        1.0
    } else {
        covered as f64 / pairs as f64
    }
}

/// Metrics needing ground truth, a reference fit or test traces are `None`
/// when those are unavailable.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub mae_to_reference: Option<f64>,
    pub trace_nll: Option<f64>,
    pub step_nll: Option<f64>,
    pub waic: Option<f64>,
    pub lppd: Option<f64>,
    pub p_waic: Option<f64>,
    pub ip_cov: Option<f64>,
    pub infeasible_traces: usize,
    pub runtime_seconds: f64,
}

impl MetricsReport {
    pub const CSV_COLUMNS: [&'static str; 13] = [
        "method",
        "precision",
        "recall",
        "f1",
        "mae_to_reference",
        "trace_nll",
        "step_nll",
        "waic",
        "lppd",
        "p_waic",
        "ip_cov",
        "infeasible_traces",
        "runtime_seconds",
    ];

    pub fn set_prf(&mut self, prf: Prf) {
        self.precision = Some(prf.precision);
        self.recall = Some(prf.recall);
        self.f1 = Some(prf.f1);
    }

    pub fn csv_header() -> String {
        Self::CSV_COLUMNS.join(",")
    }

    /// Missing values are empty fields.
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        [
            self.method.clone(),
            opt(self.precision),
            opt(self.recall),
            opt(self.f1),
            opt(self.mae_to_reference),
            opt(self.trace_nll),
            opt(self.step_nll),
            opt(self.waic),
            opt(self.lppd),
            opt(self.p_waic),
            opt(self.ip_cov),
            self.infeasible_traces.to_string(),
            self.runtime_seconds.to_string(),
        ]
        .join(",")
    }
}
