//! Strict partial orders over `0..n` stored as dense precedence matrices.
//!
//! `precedes(z, x)` means `z` must occur before `x`. Every [`PartialOrder`]
//! is held at closure level, so frontier and successor queries can read the
//! matrix directly without walking paths.

use crate::error::{Error, Result};
use crate::matrix::{BoolMatrix, Matrix};

/// Largest choice set [`enumerate_linear_extensions`] accepts.
pub const ENUMERATION_LIMIT: usize = 10;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialOrder {
    precedes: BoolMatrix,
}

impl PartialOrder {
    /// Empty relation (antichain) over `n` items.
    pub fn antichain(n: usize) -> Self {
        Self { precedes: BoolMatrix::new(n) }
    }

    /// Total order following `order`, which must be a permutation of `0..n`.
    pub fn chain(order: &[usize]) -> Self {
        let n = order.len();
        let mut m = BoolMatrix::new(n);
        for (i, &a) in order.iter().enumerate() {
            for &b in &order[i + 1..] {
                m.set(a, b, true);
            }
        }
        Self { precedes: m }
    }

    /// Wraps a matrix that is already a strict, transitively closed relation.
    pub fn from_closure(m: BoolMatrix) -> Result<Self> {
        let n = m.size();
        for i in 0..n {
            if m.get(i, i) {
                return Err(Error::InvalidArgument(format!("relation is reflexive at item {i}")));
            }
            for j in 0..n {
                if m.get(i, j) && m.get(j, i) {
                    return Err(Error::InvalidArgument(format!("relation is not asymmetric on pair ({i}, {j})")));
                }
            }
        }
        if !is_transitive(&m) {
            return Err(Error::InvalidArgument("relation is not transitively closed".into()));
        }
        Ok(Self { precedes: m })
    }

    /// Closes an arbitrary acyclic relation.
    pub fn from_relation(g: &BoolMatrix) -> Result<Self> {
        let closure = transitive_closure(g);
        if (0..closure.size()).any(|i| closure.get(i, i)) {
            return Err(Error::NotADag);
        }
        Ok(Self { precedes: closure })
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::from_relation(&BoolMatrix::from_edges(n, edges))
    }

    pub fn n_items(&self) -> usize {
        self.precedes.size()
    }

    #[inline]
    pub fn precedes(&self, z: usize, x: usize) -> bool {
        self.precedes.get(z, x)
    }

    pub fn matrix(&self) -> &BoolMatrix {
        &self.precedes
    }

    pub fn into_matrix(self) -> BoolMatrix {
        self.precedes
    }

    pub fn comparable(&self, a: usize, b: usize) -> bool {
        self.precedes(a, b) || self.precedes(b, a)
    }

    /// Cover relation of this order (its Hasse diagram).
    pub fn cover_edges(&self) -> Vec<(usize, usize)> {
        transitive_reduction(&self.precedes).expect("a partial order is acyclic").edges()
    }

    pub fn to_probability_matrix(&self) -> Matrix {
        self.precedes.to_f64()
    }
}

/// Weighted directed graph fed to cycle breaking.
#[derive(Clone, Debug)]
pub struct WeightedDigraph {
    adjacency: BoolMatrix,
    weights: Matrix,
}

impl WeightedDigraph {
    pub fn new(n: usize) -> Self {
        Self { adjacency: BoolMatrix::new(n), weights: Matrix::zeros(n, n) }
    }

    pub fn from_parts(adjacency: BoolMatrix, weights: Matrix) -> Result<Self> {
        let n = adjacency.size();
        if weights.rows() != n || weights.cols() != n {
            return Err(Error::DimensionMismatch("weights must match adjacency".into()));
        }
        let mut weights = weights;
        for i in 0..n {
            for j in 0..n {
                if !adjacency.get(i, j) {
                    weights[(i, j)] = 0.0;
                } else if !(weights[(i, j)] >= 0.0) {
                    return Err(Error::InvalidArgument(format!("negative weight on edge ({i}, {j})")));
                }
            }
        }
        Ok(Self { adjacency, weights })
    }

    pub fn n_items(&self) -> usize {
        self.adjacency.size()
    }

    pub fn add_edge(&mut self, from: usize, to: usize, weight: f64) {
        assert!(weight >= 0.0, "edge weights are nonnegative");
        self.adjacency.set(from, to, true);
        self.weights[(from, to)] = weight;
    }

    pub fn remove_edge(&mut self, from: usize, to: usize) {
        self.adjacency.set(from, to, false);
        self.weights[(from, to)] = 0.0;
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.adjacency.get(from, to)
    }

    pub fn weight(&self, from: usize, to: usize) -> f64 {
        self.weights[(from, to)]
    }

    pub fn adjacency(&self) -> &BoolMatrix {
        &self.adjacency
    }
}

fn is_transitive(m: &BoolMatrix) -> bool {
    let n = m.size();
    for i in 0..n {
        for j in 0..n {
            if !m.get(i, j) {
                continue;
            }
            for k in 0..n {
                if m.get(j, k) && !m.get(i, k) {
                    return false;
                }
            }
        }
    }
    true
}

/// Reachability by one or more edges (Warshall).
pub fn transitive_closure(g: &BoolMatrix) -> BoolMatrix {
    let n = g.size();
    let mut c = g.clone();
    for k in 0..n {
        for i in 0..n {
            if !c.get(i, k) {
                continue;
            }
            for j in 0..n {
                if c.get(k, j) {
                    c.set(i, j, true);
                }
            }
        }
    }
    c
}

/// Minimal relation with the same closure. The input must be the closure of a DAG.
pub fn transitive_reduction(closure: &BoolMatrix) -> Result<BoolMatrix> {
    let n = closure.size();
    if (0..n).any(|i| closure.get(i, i)) {
        return Err(Error::NotADag);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if closure.get(i, j) && closure.get(j, i) {
                return Err(Error::NotADag);
            }
        }
    }
    let mut r = closure.clone();
    for i in 0..n {
        for j in 0..n {
            if closure.get(i, j) && (0..n).any(|k| closure.get(i, k) && closure.get(k, j)) {
                r.set(i, j, false);
            }
        }
    }
    Ok(r)
}

fn check_items(n: usize, items: &[usize]) -> Result<()> {
    let mut seen = vec![false; n];
    for &x in items {
        if x >= n {
            return Err(Error::InvalidTrace(format!("item {x} outside universe of {n} items")));
        }
        if seen[x] {
            return Err(Error::InvalidTrace(format!("item {x} appears twice")));
        }
        seen[x] = true;
    }
    Ok(())
}

/// Items of `remaining` with no remaining predecessor.
pub fn max_set(po: &PartialOrder, remaining: &[usize]) -> Result<Vec<usize>> {
    if remaining.is_empty() {
        return Err(Error::InvalidArgument("max_set of an empty remaining set".into()));
    }
    check_items(po.n_items(), remaining)?;
    Ok(remaining.iter().copied().filter(|&x| !remaining.iter().any(|&z| po.precedes(z, x))).collect())
}

/// Whether `seq` never places an item after one of its successors.
pub fn is_linear_extension(po: &PartialOrder, seq: &[usize]) -> Result<bool> {
    check_items(po.n_items(), seq)?;
    for (i, &a) in seq.iter().enumerate() {
        if seq[i + 1..].iter().any(|&b| po.precedes(b, a)) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Every linear extension of the suborder on `choice_set`, by depth-first
/// frontier expansion in ascending item order.
pub fn enumerate_linear_extensions(po: &PartialOrder, choice_set: &[usize]) -> Result<Vec<Vec<usize>>> {
    if choice_set.len() > ENUMERATION_LIMIT {
        return Err(Error::OracleLimit { size: choice_set.len(), limit: ENUMERATION_LIMIT });
    }
    check_items(po.n_items(), choice_set)?;
    let mut items = choice_set.to_vec();
    items.sort_unstable();

    fn expand(po: &PartialOrder, remaining: &mut Vec<usize>, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if remaining.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for idx in 0..remaining.len() {
            let x = remaining[idx];
            if remaining.iter().any(|&z| po.precedes(z, x)) {
                continue;
            }
            remaining.remove(idx);
            prefix.push(x);
            expand(po, remaining, prefix, out);
            prefix.pop();
            remaining.insert(idx, x);
        }
    }

    let mut out = Vec::new();
    expand(po, &mut items, &mut Vec::new(), &mut out);
    Ok(out)
}

/// First cycle met by a depth-first search that visits roots and neighbours in
/// ascending index order. Returned as its vertex sequence; the closing edge
/// runs from the last vertex back to the first.
fn find_cycle(adj: &BoolMatrix) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let n = adj.size();
    let mut mark = vec![Mark::New; n];
    let mut stack: Vec<(usize, usize)> = Vec::new();
    let mut path: Vec<usize> = Vec::new();
    for root in 0..n {
        if mark[root] != Mark::New {
            continue;
        }
        mark[root] = Mark::Active;
        stack.push((root, 0));
        path.push(root);
        while let Some(top) = stack.last_mut() {
            let (v, w) = *top;
            if w < n {
                top.1 += 1;
                if !adj.get(v, w) {
                    continue;
                }
                match mark[w] {
                    Mark::Active => {
                        let start = path.iter().position(|&p| p == w).expect("active vertex on path");
                        return Some(path[start..].to_vec());
                    }
                    Mark::New => {
                        mark[w] = Mark::Active;
                        stack.push((w, 0));
                        path.push(w);
                    }
                    Mark::Done => {}
                }
            } else {
                mark[v] = Mark::Done;
                stack.pop();
                path.pop();
            }
        }
    }
    None
}

/// Removes the lightest edge of one cycle at a time until the graph is
/// acyclic, then returns its transitive closure.
pub fn break_cycles_and_close(g: &WeightedDigraph) -> PartialOrder {
    let mut g = g.clone();
    while let Some(cycle) = find_cycle(g.adjacency()) {
        let k = cycle.len();
        let (u, v) = (0..k)
            .map(|i| (cycle[i], cycle[(i + 1) % k]))
            .min_by(|a, b| g.weight(a.0, a.1).total_cmp(&g.weight(b.0, b.1)))
            .expect("cycles have at least one edge");
        g.remove_edge(u, v);
    }
    PartialOrder::from_relation(g.adjacency()).expect("cycle breaking leaves a DAG")
}

#[cfg(test)]
mod tests {
    use super::*;

    // items 1..4 of the usual diamond mapped to 0..3
    fn diamond() -> PartialOrder {
        PartialOrder::from_edges(4, &[(0, 1), (0, 2), (1, 3), (2, 3)]).unwrap()
    }

    #[test]
    fn closure_of_chain_adds_shortcut() {
        let g = BoolMatrix::from_edges(3, &[(0, 1), (1, 2)]);
        let c = transitive_closure(&g);
        assert_eq!(c.edges(), vec![(0, 1), (0, 2), (1, 2)]);
        assert_eq!(transitive_closure(&BoolMatrix::new(3)).edge_count(), 0);
    }

    #[test]
    fn diamond_closure_has_top_to_bottom() {
        let d = diamond();
        assert!(d.precedes(0, 3));
        assert_eq!(d.matrix().edge_count(), 5);
    }

    #[test]
    fn reduction_examples() {
        let chain = transitive_closure(&BoolMatrix::from_edges(3, &[(0, 1), (1, 2)]));
        assert_eq!(transitive_reduction(&chain).unwrap().edges(), vec![(0, 1), (1, 2)]);
        assert_eq!(transitive_reduction(&BoolMatrix::new(4)).unwrap().edge_count(), 0);
        let red = transitive_reduction(diamond().matrix()).unwrap();
        assert_eq!(red.edges(), vec![(0, 1), (0, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn reduction_matches_brute_force_minimal_subgraph() {
        // Smallest edge subset of the diamond closure whose closure is the same relation.
        let closure = diamond().matrix().clone();
        let edges = closure.edges();
        let mut best: Option<Vec<(usize, usize)>> = None;
        for mask in 0u32..(1 << edges.len()) {
            let sub: Vec<_> = (0..edges.len()).filter(|b| mask >> b & 1 == 1).map(|b| edges[b]).collect();
            if transitive_closure(&BoolMatrix::from_edges(4, &sub)) == closure && best.as_ref().is_none_or(|b| sub.len() < b.len()) {
                best = Some(sub);
            }
        }
        let best = best.unwrap();
        assert_eq!(best.len(), 4);
        assert_eq!(transitive_reduction(&closure).unwrap().edges(), best);
    }

    #[test]
    fn reduction_rejects_cycles() {
        let g = BoolMatrix::from_edges(2, &[(0, 1), (1, 0)]);
        assert!(matches!(transitive_reduction(&g), Err(Error::NotADag)));
        assert!(matches!(PartialOrder::from_relation(&g), Err(Error::NotADag)));
    }

    #[test]
    fn max_set_examples() {
        let d = diamond();
        assert_eq!(max_set(&d, &[1, 2, 3]).unwrap(), vec![1, 2]);
        assert_eq!(max_set(&d, &[3]).unwrap(), vec![3]);
        assert_eq!(max_set(&PartialOrder::antichain(3), &[0, 1, 2]).unwrap(), vec![0, 1, 2]);
        assert!(max_set(&d, &[]).is_err());
    }

    #[test]
    fn linear_extension_checks() {
        let d = diamond();
        assert!(is_linear_extension(&d, &[0, 1, 2, 3]).unwrap());
        assert!(!is_linear_extension(&d, &[3, 0, 1, 2]).unwrap());
        assert!(is_linear_extension(&PartialOrder::antichain(3), &[2, 0, 1]).unwrap());
        assert!(is_linear_extension(&d, &[0, 0]).is_err());
        assert!(is_linear_extension(&d, &[0, 7]).is_err());
    }

    #[test]
    fn enumeration_examples() {
        let d = diamond();
        assert_eq!(enumerate_linear_extensions(&d, &[0, 1, 2, 3]).unwrap(), vec![vec![0, 1, 2, 3], vec![0, 2, 1, 3]]);
        assert_eq!(enumerate_linear_extensions(&PartialOrder::chain(&[2, 0, 1]), &[0, 1, 2]).unwrap().len(), 1);
        assert_eq!(enumerate_linear_extensions(&PartialOrder::antichain(3), &[0, 1, 2]).unwrap().len(), 6);
        let big = PartialOrder::antichain(11);
        let all: Vec<usize> = (0..11).collect();
        assert!(matches!(enumerate_linear_extensions(&big, &all), Err(Error::OracleLimit { .. })));
    }

    #[test]
    fn cycle_breaking_two_cycle() {
        let mut g = WeightedDigraph::new(2);
        g.add_edge(0, 1, 0.6);
        g.add_edge(1, 0, 0.2);
        let po = break_cycles_and_close(&g);
        assert_eq!(po.matrix().edges(), vec![(0, 1)]);
    }

    #[test]
    fn cycle_breaking_three_cycle() {
        let mut g = WeightedDigraph::new(3);
        g.add_edge(0, 1, 0.9);
        g.add_edge(1, 2, 0.3);
        g.add_edge(2, 0, 0.5);
        let po = break_cycles_and_close(&g);
        // 1->2 removed, remaining path 2->0->1 closed
        assert_eq!(po.matrix().edges(), vec![(0, 1), (2, 0), (2, 1)]);
    }

    #[test]
    fn cycle_breaking_acyclic_input_is_just_closed() {
        let mut g = WeightedDigraph::new(3);
        g.add_edge(0, 1, 0.1);
        g.add_edge(1, 2, 0.1);
        let po = break_cycles_and_close(&g);
        assert_eq!(po, PartialOrder::chain(&[0, 1, 2]));
    }

    #[test]
    fn from_closure_validates() {
        assert!(PartialOrder::from_closure(BoolMatrix::from_edges(3, &[(0, 1), (1, 2)])).is_err());
        assert!(PartialOrder::from_closure(BoolMatrix::from_edges(2, &[(0, 0)])).is_err());
        assert!(PartialOrder::from_closure(diamond().into_matrix()).is_ok());
    }
}
