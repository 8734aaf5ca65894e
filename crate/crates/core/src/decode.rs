//! Posterior decoding: closure probabilities from draws and a point closure
//! from those probabilities.

use crate::draws::DrawSet;
use crate::error::{Error, Result};
use crate::hardlik::induced_order;
use crate::matrix::Matrix;
use crate::model::to_embedding;
use crate::poset::{break_cycles_and_close, PartialOrder, WeightedDigraph};
use serde::{Deserialize, Serialize};

/// Posterior probability that `i` precedes `j` in the closure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosureProbabilities {
    p_hat: Matrix,
}

impl ClosureProbabilities {
    pub fn new(p_hat: Matrix) -> Result<Self> {
        let n = p_hat.rows();
        if p_hat.cols() != n {
            return Err(Error::DimensionMismatch("closure probabilities must be square".into()));
        }
        for i in 0..n {
            for j in 0..n {
                let v = p_hat[(i, j)];
                if !(0.0..=1.0).contains(&v) || (i == j && v != 0.0) {
                    return Err(Error::InvalidArgument(format!("entry ({i}, {j}) = {v} is not a valid probability")));
                }
            }
        }
        Ok(Self { p_hat })
    }

    /// 0/1 matrix of a point estimate.
    pub fn from_order(po: &PartialOrder) -> Self {
        Self { p_hat: po.to_probability_matrix() }
    }

    pub fn n_items(&self) -> usize {
        self.p_hat.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p_hat[(i, j)]
    }

    pub fn matrix(&self) -> &Matrix {
        &self.p_hat
    }
}

/// Average over draws of the product-order closure each draw induces.
pub fn closure_probabilities(draws: &DrawSet) -> Result<ClosureProbabilities> {
    if draws.is_empty() {
        return Err(Error::InvalidArgument("no draws to decode".into()));
    }
    let n = draws.n_items();
    let mut p = Matrix::zeros(n, n);
    for d in draws.draws() {
        let po = induced_order(&to_embedding(&d.params)?);
        for (i, j) in po.matrix().edges() {
            p[(i, j)] += 1.0;
        }
    }
    p.scale(1.0 / draws.len() as f64);
    Ok(ClosureProbabilities { p_hat: p })
}

/// Keeps edges with `P̂ > ζ`, breaks cycles lightest-edge first and closes.
pub fn decode_closure(p: &ClosureProbabilities, zeta: f64) -> PartialOrder {
    let n = p.n_items();
    let mut g = WeightedDigraph::new(n);
    for i in 0..n {
        for j in 0..n {
            if i != j && p.get(i, j) > zeta {
                g.add_edge(i, j, p.get(i, j));
            }
        }
    }
    break_cycles_and_close(&g)
}

/// Mean absolute off-diagonal difference.
pub fn mae_to_reference(a: &ClosureProbabilities, reference: &ClosureProbabilities) -> Result<f64> {
    let n = a.n_items();
    if reference.n_items() != n {
        return Err(Error::DimensionMismatch(format!("{n} items against a reference over {}", reference.n_items())));
    }
    if n < 2 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += (a.get(i, j) - reference.get(i, j)).abs();
            }
        }
    }
    Ok(total / (n * (n - 1)) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 from edge counts. An empty estimate scores
/// precision 1; an empty truth scores recall 1.
pub fn prf_from_counts(tp: usize, fp: usize, fn_: usize) -> Prf {
    let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 1.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    Prf { precision, recall, f1 }
}

/// Directed-edge agreement between two closures.
pub fn closure_prf(est: &PartialOrder, truth: &PartialOrder) -> Result<Prf> {
    let n = est.n_items();
    if truth.n_items() != n {
        return Err(Error::DimensionMismatch(format!("estimate over {n} items, truth over {}", truth.n_items())));
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for i in 0..n {
        for j in 0..n {
            match (est.precedes(i, j), truth.precedes(i, j)) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
    }
    Ok(prf_from_counts(tp, fp, fn_))
}
