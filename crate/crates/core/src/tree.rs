//! Rooted d-ary trees over signal coefficients and the supports they admit.
//!
//! A [`TreeTopology`] is a parent array: every coefficient except the root
//! names its parent, and no coefficient has more than `order` children. A
//! [`TreeSupport`] is a parent-closed index set containing the root, i.e. a
//! rooted subtree. The family of all such supports with `k` elements is
//! bounded in size by the number of ordered rooted `d`-ary trees with `k`
//! nodes, which [`tree_count`] computes exactly.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::theory::shannon_entropy;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeTopology {
    order: usize,
    root: usize,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
}

impl TreeTopology {
    /// Builds a topology from a parent array, checking every structural
    /// invariant: a single root, in-range parents, no node with more than
    /// `order` children and no cycles.
    pub fn from_parents(order: usize, parent: Vec<Option<usize>>) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidOrder(order));
        }
        let n = parent.len();
        if n == 0 {
            return Err(Error::InvalidTopology("tree has no nodes".into()));
        }
        let mut root = None;
        let mut children = vec![Vec::new(); n];
        for (i, p) in parent.iter().enumerate() {
            match *p {
                None => {
                    if let Some(r) = root {
                        return Err(Error::InvalidTopology(format!(
                            "nodes {r} and {i} both lack a parent"
                        )));
                    }
                    root = Some(i);
                }
                Some(p) if p >= n => {
                    return Err(Error::IndexOutOfRange {
                        index: p,
                        n_nodes: n,
                    })
                }
                Some(p) if p == i => {
                    return Err(Error::InvalidTopology(format!(
                        "node {i} is its own parent"
                    )))
                }
                Some(p) => children[p].push(i),
            }
        }
        let root = root.ok_or_else(|| Error::InvalidTopology("no root node".into()))?;
        if let Some((v, c)) = children.iter().enumerate().find(|(_, c)| c.len() > order) {
            return Err(Error::InvalidTopology(format!(
                "node {v} has {} children, more than the tree order {order}",
                c.len()
            )));
        }
        // With one parent per non-root node, reaching everything from the
        // root is equivalent to acyclicity.
        let mut seen = vec![false; n];
        let mut stack = vec![root];
        let mut reached = 0;
        while let Some(v) = stack.pop() {
            seen[v] = true;
            reached += 1;
            stack.extend(children[v].iter().copied());
        }
        if reached != n {
            let stray = seen.iter().position(|s| !s).unwrap_or(0);
            return Err(Error::InvalidTopology(format!(
                "node {stray} does not reach the root (parent links form a cycle)"
            )));
        }
        Ok(Self {
            order,
            root,
            parent,
            children,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.parent.len()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parent
    }

    /// Children of `node` in increasing index order.
    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    /// Nodes ordered so that every child precedes its parent.
    pub fn postorder(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.n_nodes());
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            order.push(v);
            stack.extend(self.children[v].iter().copied());
        }
        order.reverse();
        order
    }

    /// Number of nodes in the subtree hanging from each node.
    pub fn subtree_sizes(&self) -> Vec<usize> {
        let mut size = vec![1usize; self.n_nodes()];
        for v in self.postorder() {
            if let Some(p) = self.parent[v] {
                size[p] += size[v];
            }
        }
        size
    }
}

/// Heap-style complete `order`-ary tree: node 0 is the root and node `i` has
/// children `order*i + 1 ..= order*i + order`, truncated at `n_nodes`.
pub fn build_complete_tree(n_nodes: usize, order: usize) -> Result<TreeTopology> {
    if order < 2 {
        return Err(Error::InvalidOrder(order));
    }
    if n_nodes == 0 {
        return Err(Error::InvalidTopology("tree has no nodes".into()));
    }
    let parent = (0..n_nodes)
        .map(|i| if i == 0 { None } else { Some((i - 1) / order) })
        .collect();
    TreeTopology::from_parents(order, parent)
}

/// A rooted, parent-closed set of node indices, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TreeSupport {
    indices: Vec<usize>,
}

impl TreeSupport {
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn cardinality(&self) -> usize {
        self.indices.len()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    pub fn into_indices(self) -> Vec<usize> {
        self.indices
    }

    /// Wraps indices already known to be a valid support.
    pub(crate) fn from_sorted_unchecked(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        Self { indices }
    }
}

pub fn validate_support(topology: &TreeTopology, indices: &[usize]) -> Result<TreeSupport> {
    let n = topology.n_nodes();
    let mut member = vec![false; n];
    for &i in indices {
        if i >= n {
            return Err(Error::IndexOutOfRange {
                index: i,
                n_nodes: n,
            });
        }
        if member[i] {
            return Err(Error::DuplicateIndex(i));
        }
        member[i] = true;
    }
    if !member[topology.root()] {
        return Err(Error::MissingRoot);
    }
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    for &i in &sorted {
        if let Some(p) = topology.parent(i) {
            if !member[p] {
                return Err(Error::OrphanNode(i));
            }
        }
    }
    Ok(TreeSupport { indices: sorted })
}

/// All rooted subtrees with exactly `k` nodes, in lexicographic order of
/// their sorted index tuples. Exponential in `k`; intended for small trees.
pub fn enumerate_supports(topology: &TreeTopology, k: usize) -> std::vec::IntoIter<TreeSupport> {
    let mut found = Vec::new();
    if k >= 1 && k <= topology.n_nodes() {
        let mut chosen = Vec::with_capacity(k);
        extend_subtrees(topology, k, &mut chosen, vec![topology.root()], &mut found);
    }
    found.sort_unstable();
    found.into_iter()
}

// Each subtree is produced once: a frontier node that is skipped is never
// offered again on that branch.
fn extend_subtrees(
    topology: &TreeTopology,
    k: usize,
    chosen: &mut Vec<usize>,
    frontier: Vec<usize>,
    out: &mut Vec<TreeSupport>,
) {
    if chosen.len() == k {
        let mut indices = chosen.clone();
        indices.sort_unstable();
        out.push(TreeSupport { indices });
        return;
    }
    for (i, &v) in frontier.iter().enumerate() {
        let mut next: Vec<usize> = frontier[i + 1..].to_vec();
        next.extend_from_slice(topology.children(v));
        chosen.push(v);
        extend_subtrees(topology, k, chosen, next, out);
        chosen.pop();
    }
}

/// Number of ordered rooted `d`-ary trees with `k` nodes,
/// `C(dk, k) / ((d-1)k + 1)`, in exact arithmetic.
pub fn tree_count(order: usize, k: usize) -> Result<BigUint> {
    if order < 2 {
        return Err(Error::InvalidOrder(order));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("tree_count needs k >= 1".into()));
    }
    // C(dk, k) built as C(dk-k+i, i) for i = 1..=k; each partial is exact.
    let base = (order - 1) * k;
    let mut binom = BigUint::one();
    for i in 1..=k {
        binom *= BigUint::from(base + i);
        binom /= BigUint::from(i);
    }
    Ok(binom / BigUint::from(base + 1))
}

/// Natural log of [`tree_count`] through log-gamma, for `k` too large to
/// enumerate digits of.
pub fn ln_tree_count(order: usize, k: usize) -> Result<f64> {
    if order < 2 {
        return Err(Error::InvalidOrder(order));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("tree_count needs k >= 1".into()));
    }
    let (d, k) = (order as f64, k as f64);
    Ok(ln_gamma(d * k + 1.0)
        - ln_gamma(k + 1.0)
        - ln_gamma((d - 1.0) * k + 1.0)
        - ((d - 1.0) * k + 1.0).ln())
}

/// Limit of `ln T(k) / k`, equal to `d * H(1/d)`.
pub fn tree_count_exponent(order: usize) -> Result<f64> {
    if order < 2 {
        return Err(Error::InvalidOrder(order));
    }
    let d = order as f64;
    Ok(d * shannon_entropy(1.0 / d)?)
}

/// Upper bound on the number of size-`k` supports in `topology`:
/// `min(T(k), C(N-1, k-1))`, saturated to `u64::MAX`.
pub fn support_count_bound(topology: &TreeTopology, k: usize) -> u64 {
    let n = topology.n_nodes();
    if k == 0 || k > n {
        return 0;
    }
    let t = tree_count(topology.order(), k)
        .ok()
        .and_then(|c| c.to_u64())
        .unwrap_or(u64::MAX);
    let mut binom: u128 = 1;
    for i in 1..k {
        binom = binom * (n - k + i) as u128 / i as u128;
        if binom > u64::MAX as u128 {
            return t;
        }
    }
    t.min(binom as u64)
}
