//! Exact Euclidean projection onto vectors supported on a rooted subtree of
//! cardinality `k`.
//!
//! Projecting keeps the selected coefficients unchanged and zeroes the rest,
//! so the problem reduces to choosing the rooted subtree of size `k` with
//! the largest captured energy `sum x_i^2`. [`project`] solves it with a
//! bottom-up tree knapsack; [`project_bruteforce`] enumerates every support
//! and exists to check the former.
//!
//! Both routes compare energies exactly, on integer weights
//! `floor((|x_i| / max |x|)^2 2^96)`, so a tie is a tie regardless of
//! summation order. Ties are broken towards the support whose sorted index
//! tuple is lexicographically smallest.

use crate::error::{Error, Result};
use crate::tree::{enumerate_supports, support_count_bound, TreeSupport, TreeTopology};

/// Largest number of candidate supports [`project_bruteforce`] will scan.
pub const BRUTE_FORCE_BUDGET: u64 = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub support: TreeSupport,
    pub projected: Vec<f64>,
    /// `sum x_i^2` over the support, accumulated in increasing index order.
    pub captured_energy: f64,
    /// Set when `k` exceeded the number of nodes and the whole tree was
    /// returned instead.
    pub clipped: bool,
}

fn check_inputs(topology: &TreeTopology, x: &[f64], k: usize) -> Result<(usize, bool)> {
    if x.len() != topology.n_nodes() {
        return Err(Error::DimensionMismatch {
            expected: topology.n_nodes(),
            got: x.len(),
        });
    }
    if k == 0 {
        return Err(Error::InvalidArgument("projection needs k >= 1".into()));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("entry {i} is not finite")));
    }
    let n = topology.n_nodes();
    Ok((k.min(n), k > n))
}

/// Fixed-point squared magnitudes. Sums of up to `2^32` of them fit in a
/// `u128`, and rounding only merges energies closer than `2^-96` relative.
fn weights(x: &[f64]) -> Vec<u128> {
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return vec![0; x.len()];
    }
    let unit = 2f64.powi(96);
    x.iter()
        .map(|v| {
            let r = v.abs() / scale;
            (r * r * unit) as u128
        })
        .collect()
}

fn finish(x: &[f64], indices: Vec<usize>, clipped: bool) -> ProjectionResult {
    let mut projected = vec![0.0; x.len()];
    let mut captured_energy = 0.0;
    for &i in &indices {
        projected[i] = x[i];
        captured_energy += x[i] * x[i];
    }
    ProjectionResult {
        support: TreeSupport::from_sorted_unchecked(indices),
        projected,
        captured_energy,
        clipped,
    }
}

/// Tree-knapsack state: for every node, the split chosen at each merge step.
struct Knapsack<'a> {
    topology: &'a TreeTopology,
    /// `splits[v][t][j]`: nodes taken from the `t`-th child of `v` in the
    /// best `j`-node subtree rooted at `v` that uses only children `0..=t`.
    splits: Vec<Vec<Vec<u32>>>,
}

impl Knapsack<'_> {
    /// Appends the best `j`-node subtree at `v` restricted to its first
    /// `merged` children.
    fn collect(&self, v: usize, merged: usize, j: usize, out: &mut Vec<usize>) {
        let mut stack = vec![(v, merged, j)];
        while let Some((v, merged, mut j)) = stack.pop() {
            out.push(v);
            let children = self.topology.children(v);
            for t in (0..merged).rev() {
                let s = self.splits[v][t][j] as usize;
                if s > 0 {
                    let c = children[t];
                    stack.push((c, children_of(self.topology, c), s));
                    j -= s;
                }
            }
            debug_assert_eq!(j, 1);
        }
    }

    fn sorted_set(&self, v: usize, merged: usize, j: usize, child: usize, s: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(j);
        self.collect(v, merged, j - s, &mut out);
        if s > 0 {
            self.collect(child, children_of(self.topology, child), s, &mut out);
        }
        out.sort_unstable();
        out
    }
}

fn children_of(topology: &TreeTopology, v: usize) -> usize {
    topology.children(v).len()
}

/// Exact tree projection by dynamic programming, `O(N k^2)` worst case.
pub fn project(topology: &TreeTopology, x: &[f64], k: usize) -> Result<ProjectionResult> {
    let (k, clipped) = check_inputs(topology, x, k)?;
    let n = topology.n_nodes();
    let size = topology.subtree_sizes();
    let mut knapsack = Knapsack {
        topology,
        splits: vec![Vec::new(); n],
    };
    let w = weights(x);
    // best[v][j - 1]: largest weight of a j-node subtree rooted at v.
    let mut best: Vec<Vec<u128>> = vec![Vec::new(); n];

    for v in topology.postorder() {
        let mut cur = vec![w[v]];
        let children = topology.children(v);
        let mut splits = Vec::with_capacity(children.len());
        for (t, &c) in children.iter().enumerate() {
            let child = std::mem::take(&mut best[c]);
            let cap = (cur.len() + child.len()).min(k).min(size[v]);
            let mut next: Vec<Option<u128>> = vec![None; cap];
            let mut split = vec![0u32; cap + 1];
            for j in 1..=cap {
                let s_lo = j.saturating_sub(cur.len());
                let s_hi = child.len().min(j - 1);
                for s in s_lo..=s_hi {
                    let value = cur[j - s - 1] + if s > 0 { child[s - 1] } else { 0 };
                    let take = match next[j - 1] {
                        None => true,
                        Some(incumbent) if value > incumbent => true,
                        Some(incumbent) if value < incumbent => false,
                        // Exact tie: keep the lexicographically smaller set.
                        Some(_) => {
                            knapsack.splits[v] = std::mem::take(&mut splits);
                            let old = split[j] as usize;
                            let a = knapsack.sorted_set(v, t, j, c, s);
                            let b = knapsack.sorted_set(v, t, j, c, old);
                            splits = std::mem::take(&mut knapsack.splits[v]);
                            a < b
                        }
                    };
                    if take {
                        next[j - 1] = Some(value);
                        split[j] = s as u32;
                    }
                }
            }
            splits.push(split);
            cur = next
                .into_iter()
                .map(|e| e.expect("every size up to cap is reachable"))
                .collect();
        }
        knapsack.splits[v] = splits;
        best[v] = cur;
    }

    let root = topology.root();
    let mut indices = Vec::with_capacity(k);
    knapsack.collect(root, children_of(topology, root), k, &mut indices);
    indices.sort_unstable();
    Ok(finish(x, indices, clipped))
}

/// Projection by exhaustive search over every rooted subtree of size `k`.
pub fn project_bruteforce(
    topology: &TreeTopology,
    x: &[f64],
    k: usize,
) -> Result<ProjectionResult> {
    let (k, clipped) = check_inputs(topology, x, k)?;
    let bound = support_count_bound(topology, k);
    if bound > BRUTE_FORCE_BUDGET {
        return Err(Error::BudgetExceeded(format!(
            "up to {bound} supports of size {k} on {} nodes",
            topology.n_nodes()
        )));
    }
    let w = weights(x);
    let mut best: Option<(u128, TreeSupport)> = None;
    for support in enumerate_supports(topology, k) {
        let energy: u128 = support.indices().iter().map(|&i| w[i]).sum();
        // Enumeration is lexicographic, so strict improvement keeps the
        // smallest tuple among ties.
        if best.as_ref().is_none_or(|(e, _)| energy > *e) {
            best = Some((energy, support));
        }
    }
    let (_, support) = best.expect("a tree with k <= N nodes has a rooted subtree of size k");
    Ok(finish(x, support.into_indices(), clipped))
}
