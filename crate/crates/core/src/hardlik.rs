//! Product-order embeddings and the hard frontier-softmax likelihood.

use crate::error::{Error, Result};
use crate::matrix::{BoolMatrix, Matrix};
use crate::numeric::log_sum_exp;
use crate::poset::{max_set, PartialOrder};
use serde::{Deserialize, Serialize};

/// Log-probability of an impossible event. Adds like `-inf`.
pub const LOG_ZERO: f64 = f64::NEG_INFINITY;

/// Item embedding matrix: row `x` is the latent vector of item `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    u: Matrix,
}

impl Embedding {
    pub fn new(u: Matrix) -> Result<Self> {
        if u.cols() == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be at least 1".into()));
        }
        if !u.is_finite() {
            return Err(Error::InvalidArgument("embedding entries must be finite".into()));
        }
        Ok(Self { u })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows))
    }

    pub fn n_items(&self) -> usize {
        self.u.rows()
    }

    pub fn dim(&self) -> usize {
        self.u.cols()
    }

    pub fn row(&self, x: usize) -> &[f64] {
        self.u.row(x)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.u
    }

    /// Embedding restricted to `items`, in the given order.
    pub fn select_rows(&self, items: &[usize]) -> Embedding {
        let rows: Vec<Vec<f64>> = items.iter().map(|&x| self.row(x).to_vec()).collect();
        Embedding { u: Matrix::from_rows(&rows) }
    }
}

/// One observed ordering of a choice set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    choice_set: Vec<usize>,
    order: Vec<usize>,
}

impl Trace {
    /// Trace whose choice set is exactly the items it orders.
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut choice_set = order.clone();
        choice_set.sort_unstable();
        Self::with_choice_set(choice_set, order)
    }

    pub fn with_choice_set(choice_set: Vec<usize>, order: Vec<usize>) -> Result<Self> {
        let mut a = choice_set.clone();
        a.sort_unstable();
        if a.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidTrace("choice set contains a duplicate item".into()));
        }
        let mut b = order.clone();
        b.sort_unstable();
        if b.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidTrace("order contains a duplicate item".into()));
        }
        if a != b {
            return Err(Error::InvalidTrace("order is not a permutation of the choice set".into()));
        }
        Ok(Self { choice_set, order })
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn choice_set(&self) -> &[usize] {
        &self.choice_set
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Checks every item lies in a universe of `n_items`.
    pub fn validate(&self, n_items: usize) -> Result<()> {
        match self.order.iter().find(|&&x| x >= n_items) {
            Some(x) => Err(Error::InvalidTrace(format!("item {x} outside universe of {n_items} items"))),
            None => Ok(()),
        }
    }
}

fn distinct(z: usize, x: usize) -> Result<()> {
    if z == x {
        Err(Error::SelfComparison(z))
    } else {
        Ok(())
    }
}

/// `min_k (u_zk - u_xk)`.
pub fn hard_margin(e: &Embedding, z: usize, x: usize) -> Result<f64> {
    distinct(z, x)?;
    Ok(margin_unchecked(e, z, x))
}

#[inline]
fn margin_unchecked(e: &Embedding, z: usize, x: usize) -> f64 {
    e.row(z).iter().zip(e.row(x)).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min)
}

/// Strict coordinatewise dominance of `u_z` over `u_x`.
pub fn hard_precedes(e: &Embedding, z: usize, x: usize) -> Result<bool> {
    Ok(hard_margin(e, z, x)? > 0.0)
}

/// Product order induced by the embedding.
pub fn induced_order(e: &Embedding) -> PartialOrder {
    let n = e.n_items();
    let mut m = BoolMatrix::new(n);
    for z in 0..n {
        for x in 0..n {
            if z != x && margin_unchecked(e, z, x) > 0.0 {
                m.set(z, x, true);
            }
        }
    }
    PartialOrder::from_closure(m).expect("product orders are strict partial orders")
}

/// Number of remaining items that `x` precedes.
pub fn hard_successor_count(po: &PartialOrder, remaining: &[usize], x: usize) -> Result<usize> {
    if !remaining.contains(&x) {
        return Err(Error::NotRemaining { item: x });
    }
    Ok(remaining.iter().filter(|&&z| po.precedes(x, z)).count())
}

/// Frontier-softmax probability of choosing `chosen` from `remaining`.
pub fn hard_step_prob(po: &PartialOrder, remaining: &[usize], chosen: usize, beta: f64) -> Result<f64> {
    if !remaining.contains(&chosen) {
        return Err(Error::NotRemaining { item: chosen });
    }
    let frontier = max_set(po, remaining)?;
    if !frontier.contains(&chosen) {
        return Ok(0.0);
    }
    let utility = |a: usize| -> f64 {
        let s = remaining.iter().filter(|&&z| po.precedes(a, z)).count();
        beta * (1.0 + s as f64).ln()
    };
    let scores: Vec<f64> = frontier.iter().map(|&a| utility(a)).collect();
    Ok((utility(chosen) - log_sum_exp(&scores)).exp())
}

/// Per-step log-probabilities of a trace, maintained incrementally.
///
/// Successor counts and remaining-predecessor counts are built once in
/// `O(T^2)` and updated in `O(|remaining|)` per step. An infeasible step
/// yields [`LOG_ZERO`] and every later entry is [`LOG_ZERO`] as well.
pub fn hard_step_log_probs(po: &PartialOrder, trace: &Trace, beta: f64) -> Vec<f64> {
    let order = trace.order();
    let t_len = order.len();
    let mut alive = vec![true; t_len];
    let mut preds = vec![0usize; t_len];
    let mut succs = vec![0usize; t_len];
    for (i, &a) in order.iter().enumerate() {
        for (j, &b) in order.iter().enumerate() {
            if i != j && po.precedes(a, b) {
                succs[i] += 1;
                preds[j] += 1;
            }
        }
    }
    let mut out = Vec::with_capacity(t_len);
    let mut scores = Vec::with_capacity(t_len);
    for t in 0..t_len {
        if preds[t] > 0 {
            out.resize(t_len, LOG_ZERO);
            return out;
        }
        scores.clear();
        for i in t..t_len {
            if alive[i] && preds[i] == 0 {
                scores.push(beta * (1.0 + succs[i] as f64).ln());
            }
        }
        let chosen = beta * (1.0 + succs[t] as f64).ln();
        out.push(chosen - log_sum_exp(&scores));
        alive[t] = false;
        let y = order[t];
        for i in (t + 1)..t_len {
            if po.precedes(y, order[i]) {
                preds[i] -= 1;
            }
            if po.precedes(order[i], y) {
                succs[i] -= 1;
            }
        }
    }
    out
}

/// Log-likelihood of one trace under the hard model; [`LOG_ZERO`] when infeasible.
pub fn hard_trace_loglik(po: &PartialOrder, trace: &Trace, beta: f64) -> f64 {
    hard_step_log_probs(po, trace, beta).iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poset::PartialOrder;

    fn diamond() -> PartialOrder {
        PartialOrder::from_edges(4, &[(0, 1), (0, 2), (1, 3), (2, 3)]).unwrap()
    }

    fn emb(rows: &[&[f64]]) -> Embedding {
        Embedding::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn margin_examples() {
        let e = emb(&[&[2.0, 2.0], &[1.0, 1.0], &[2.0, 0.0]]);
        assert_eq!(hard_margin(&e, 0, 1).unwrap(), 1.0);
        assert_eq!(hard_margin(&e, 2, 1).unwrap(), -1.0);
        let e1 = emb(&[&[3.0], &[5.0]]);
        assert_eq!(hard_margin(&e1, 0, 1).unwrap(), -2.0);
        assert!(matches!(hard_margin(&e, 1, 1), Err(Error::SelfComparison(1))));
    }

    #[test]
    fn precedence_examples() {
        let e = emb(&[&[2.0, 2.0], &[1.0, 1.0], &[2.0, 0.0], &[1.0, 2.0]]);
        assert!(hard_precedes(&e, 0, 1).unwrap());
        assert!(!hard_precedes(&e, 2, 1).unwrap());
        assert!(!hard_precedes(&e, 1, 2).unwrap());
        // tie in the first coordinate
        assert!(!hard_precedes(&e, 3, 1).unwrap());
        assert!(hard_precedes(&e, 0, 0).is_err());
    }

    #[test]
    fn induced_order_examples() {
        let chain = induced_order(&emb(&[&[0.3], &[2.0], &[-1.0]]));
        assert_eq!(chain, PartialOrder::chain(&[1, 0, 2]));
        let flat = induced_order(&emb(&[&[1.0, 1.0], &[1.0, 1.0]]));
        assert_eq!(flat.matrix().edge_count(), 0);
        let e = emb(&[&[0.1, 0.9], &[-0.5, 0.3], &[1.2, -0.4], &[0.0, 0.0]]);
        let po = induced_order(&e);
        for z in 0..4 {
            for x in 0..4 {
                if z != x {
                    assert_eq!(po.precedes(z, x), hard_precedes(&e, z, x).unwrap());
                }
            }
        }
    }

    #[test]
    fn successor_counts() {
        let d = diamond();
        assert_eq!(hard_successor_count(&d, &[0, 1, 2, 3], 0).unwrap(), 3);
        assert_eq!(hard_successor_count(&d, &[1, 2, 3], 1).unwrap(), 1);
        assert_eq!(hard_successor_count(&PartialOrder::antichain(3), &[0, 1, 2], 1).unwrap(), 0);
        assert!(hard_successor_count(&d, &[1, 2], 0).is_err());
    }

    #[test]
    fn step_probabilities() {
        let d = diamond();
        for &beta in &[0.0, 0.7, 3.0] {
            assert!((hard_step_prob(&d, &[1, 2, 3], 1, beta).unwrap() - 0.5).abs() < 1e-15);
        }
        assert_eq!(hard_step_prob(&d, &[1, 2, 3], 3, 1.0).unwrap(), 0.0);
        let anti = PartialOrder::antichain(4);
        for x in 0..4 {
            assert!((hard_step_prob(&anti, &[0, 1, 2, 3], x, 0.0).unwrap() - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn trace_loglik_examples() {
        let d = diamond();
        let t = Trace::new(vec![0, 1, 2, 3]).unwrap();
        assert!((hard_trace_loglik(&d, &t, 0.0) - 0.5f64.ln()).abs() < 1e-15);
        assert_eq!(hard_trace_loglik(&d, &Trace::new(vec![2]).unwrap(), 1.0), 0.0);
        assert_eq!(hard_trace_loglik(&d, &Trace::new(vec![3, 0, 1, 2]).unwrap(), 0.0), LOG_ZERO);
    }

    #[test]
    fn incremental_matches_direct_step_probabilities() {
        let d = diamond();
        let t = Trace::new(vec![0, 2, 1, 3]).unwrap();
        let steps = hard_step_log_probs(&d, &t, 1.3);
        for (i, &lp) in steps.iter().enumerate() {
            let direct = hard_step_prob(&d, &t.order()[i..], t.order()[i], 1.3).unwrap();
            assert!((lp.exp() - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn trace_validation() {
        assert!(Trace::new(vec![0, 1, 1]).is_err());
        assert!(Trace::with_choice_set(vec![0, 1, 2], vec![0, 1]).is_err());
        assert!(Trace::new(vec![0, 5]).unwrap().validate(3).is_err());
    }
}
