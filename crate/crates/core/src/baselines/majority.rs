//! Majority pairwise precedence.

use crate::error::Result;
use crate::hardlik::Trace;
use crate::poset::{break_cycles_and_close, PartialOrder, WeightedDigraph};

/// Edge `i → j` when `i` precedes `j` in more than a `theta` fraction of the
/// traces containing both, and more often than the reverse. Edge weight is
/// `|r_ij - r_ji|`; cycles are broken at the lightest edge.
pub fn majority_fit(traces: &[Trace], n_items: usize, theta: f64) -> Result<PartialOrder> {
    let mut together = vec![0usize; n_items * n_items];
    let mut before = vec![0usize; n_items * n_items];
    for t in traces {
        t.validate(n_items)?;
        let order = t.order();
        for (p, &a) in order.iter().enumerate() {
            for &b in &order[p + 1..] {
                before[a * n_items + b] += 1;
                together[a * n_items + b] += 1;
                together[b * n_items + a] += 1;
            }
        }
    }
    let mut g = WeightedDigraph::new(n_items);
    for i in 0..n_items {
        for j in 0..n_items {
            let t = together[i * n_items + j];
            if i == j || t == 0 {
                continue;
            }
            let r_ij = before[i * n_items + j] as f64 / t as f64;
            let r_ji = before[j * n_items + i] as f64 / t as f64;
            if r_ij > theta && r_ij > r_ji {
                g.add_edge(i, j, (r_ij - r_ji).abs());
            }
        }
    }
    Ok(break_cycles_and_close(&g))
}
