//! Computational trees for pairwise-sum algorithms.
//!
//! A tree over `n` leaves `x_1..x_n` has `n - 1` internal nodes numbered
//! `2..=n` in topological order (children before parents); the root is
//! node `n`. Per-node tables throughout the crate are `Vec`s of length
//! `n + 1` indexed directly by node number, with slots 0 and 1 unused.

use std::fmt::Write as _;

use rand::Rng;
use thiserror::Error;

use crate::eft::{DoubleDouble, ExactAccumulator};
use crate::fp::Precision;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("a tree needs at least two leaves, got {0}")]
    TooFewLeaves(usize),
    #[error("invalid block size {b} for n = {n}")]
    InvalidBlockSize { n: usize, b: usize },
    #[error("node {node}: child {child} is out of range or not yet defined")]
    BadChild { node: usize, child: String },
    #[error("vertex {0} is used as a child more than once")]
    SharedChild(String),
    #[error("vertex {0} is never used")]
    Orphan(String),
    #[error("expected {expected} inputs, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("tree text line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Reference to a child vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Child {
    /// Input `x_i`, `1 ≤ i ≤ n`.
    Leaf(usize),
    /// Internal node `s_k`, `2 ≤ k ≤ n`.
    Node(usize),
}

impl Child {
    fn label(self) -> String {
        match self {
            Child::Leaf(i) => format!("x{i}"),
            Child::Node(k) => format!("s{k}"),
        }
    }

    fn parse(tok: &str) -> Option<Child> {
        let (kind, idx) = tok.split_at(1);
        let idx: usize = idx.parse().ok()?;
        match kind {
            "x" => Some(Child::Leaf(idx)),
            "s" => Some(Child::Node(idx)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InternalNode {
    pub left: Child,
    pub right: Child,
    pub precision: Precision,
}

/// Ordering used to reduce a list of operands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TreeShape {
    /// Left-to-right running sum.
    Sequential,
    /// Balanced reduction; an odd element at a level is carried up unchanged.
    Pairwise,
}

impl TreeShape {
    /// Height of the tree this shape builds over `m ≥ 1` operands.
    pub fn height(self, m: usize) -> usize {
        match self {
            TreeShape::Sequential => m.saturating_sub(1),
            TreeShape::Pairwise => ceil_log2(m),
        }
    }
}

fn ceil_log2(m: usize) -> usize {
    if m <= 1 {
        0
    } else {
        (usize::BITS - (m - 1).leading_zeros()) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompTree {
    n: usize,
    /// `nodes[k - 2]` is internal node `k`.
    nodes: Vec<InternalNode>,
}

/// Structural statistics of a [`CompTree`].
#[derive(Debug, Clone, PartialEq)]
pub struct TreeStats {
    /// Root height, leaves at height 0.
    pub height: usize,
    /// Internal nodes with two leaf children.
    pub leaf_pairs: usize,
    /// `n - L - 1`.
    pub n_tilde: usize,
    /// Maximum over all vertices of the sum of `u_ℓ²` over strict ancestors.
    /// Equals `h u²` for a mono-precision tree.
    pub weighted_height: f64,
    /// Per internal node: number of strict ancestors.
    pub depths: Vec<usize>,
    /// Per internal node `k`: `Σ u_ℓ²` over `k ≺ ℓ ⪯ n`.
    pub weighted_depths: Vec<f64>,
    /// Per internal node: height.
    pub node_heights: Vec<usize>,
}

fn push_node(nodes: &mut Vec<InternalNode>, left: Child, right: Child, p: Precision) -> Child {
    nodes.push(InternalNode {
        left,
        right,
        precision: p,
    });
    Child::Node(nodes.len() + 1)
}

/// Reduces `items` with the given shape, appending internal nodes in
/// topological order. Returns the root operand.
fn reduce(
    items: Vec<Child>,
    shape: TreeShape,
    p: Precision,
    nodes: &mut Vec<InternalNode>,
) -> Child {
    debug_assert!(!items.is_empty());
    match shape {
        TreeShape::Sequential => {
            let mut iter = items.into_iter();
            let mut acc = iter.next().unwrap();
            for item in iter {
                acc = push_node(nodes, acc, item, p);
            }
            acc
        }
        TreeShape::Pairwise => {
            let mut level = items;
            while level.len() > 1 {
                let mut next = Vec::with_capacity(level.len().div_ceil(2));
                for pair in level.chunks(2) {
                    match *pair {
                        [a, b] => next.push(push_node(nodes, a, b, p)),
                        [a] => next.push(a),
                        _ => unreachable!(),
                    }
                }
                level = next;
            }
            level[0]
        }
    }
}

impl CompTree {
    fn leaves(n: usize) -> Vec<Child> {
        (1..=n).map(Child::Leaf).collect()
    }

    pub fn build(n: usize, shape: TreeShape, p: Precision) -> Result<Self, TreeError> {
        if n < 2 {
            return Err(TreeError::TooFewLeaves(n));
        }
        let mut nodes = Vec::with_capacity(n - 1);
        reduce(Self::leaves(n), shape, p, &mut nodes);
        Ok(CompTree { n, nodes })
    }

    /// Node 2 sums `(x_1, x_2)`, node `k` sums `(s_{k-1}, x_k)`.
    pub fn sequential(n: usize, p: Precision) -> Result<Self, TreeError> {
        Self::build(n, TreeShape::Sequential, p)
    }

    /// Balanced reduction of height `⌈log2 n⌉`.
    pub fn pairwise(n: usize, p: Precision) -> Result<Self, TreeError> {
        Self::build(n, TreeShape::Pairwise, p)
    }

    /// Random tree: repeatedly merges two uniformly chosen members of the
    /// current forest.
    pub fn random<R: Rng + ?Sized>(n: usize, p: Precision, rng: &mut R) -> Result<Self, TreeError> {
        if n < 2 {
            return Err(TreeError::TooFewLeaves(n));
        }
        let mut forest = Self::leaves(n);
        let mut nodes = Vec::with_capacity(n - 1);
        while forest.len() > 1 {
            let i = rng.random_range(0..forest.len());
            let a = forest.swap_remove(i);
            let j = rng.random_range(0..forest.len());
            let b = forest.swap_remove(j);
            let s = push_node(&mut nodes, a, b, p);
            forest.push(s);
        }
        Ok(CompTree { n, nodes })
    }

    /// Two-stage block summation: blocks of `b` inputs reduced by `inner` in
    /// `lo`, block results reduced by `outer` in `hi`. A final short block
    /// holds the remaining `n mod b` inputs.
    pub fn fabsum(
        n: usize,
        b: usize,
        inner: TreeShape,
        outer: TreeShape,
        lo: Precision,
        hi: Precision,
    ) -> Result<Self, TreeError> {
        if n < 2 {
            return Err(TreeError::TooFewLeaves(n));
        }
        if b == 0 || b > n {
            return Err(TreeError::InvalidBlockSize { n, b });
        }
        let mut nodes = Vec::with_capacity(n - 1);
        let leaves = Self::leaves(n);
        let block_roots: Vec<Child> = leaves
            .chunks(b)
            .map(|block| reduce(block.to_vec(), inner, lo, &mut nodes))
            .collect();
        reduce(block_roots, outer, hi, &mut nodes);
        Ok(CompTree { n, nodes })
    }

    /// Builds a tree from explicit internal nodes (node `k` is
    /// `nodes[k - 2]`), validating the structure.
    pub fn from_nodes(n: usize, nodes: Vec<InternalNode>) -> Result<Self, TreeError> {
        if n < 2 {
            return Err(TreeError::TooFewLeaves(n));
        }
        if nodes.len() != n - 1 {
            return Err(TreeError::LengthMismatch {
                expected: n - 1,
                got: nodes.len(),
            });
        }
        let mut leaf_used = vec![false; n + 1];
        let mut node_used = vec![false; n + 1];
        for (idx, node) in nodes.iter().enumerate() {
            let k = idx + 2;
            for child in [node.left, node.right] {
                let used = match child {
                    Child::Leaf(i) if (1..=n).contains(&i) => &mut leaf_used[i],
                    Child::Node(j) if (2..k).contains(&j) => &mut node_used[j],
                    _ => {
                        return Err(TreeError::BadChild {
                            node: k,
                            child: child.label(),
                        })
                    }
                };
                if *used {
                    return Err(TreeError::SharedChild(child.label()));
                }
                *used = true;
            }
        }
        if let Some(i) = (1..=n).find(|&i| !leaf_used[i]) {
            return Err(TreeError::Orphan(Child::Leaf(i).label()));
        }
        if let Some(k) = (2..n).find(|&k| !node_used[k]) {
            return Err(TreeError::Orphan(Child::Node(k).label()));
        }
        Ok(CompTree { n, nodes })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Internal node `k`, `2 ≤ k ≤ n`.
    pub fn node(&self, k: usize) -> &InternalNode {
        &self.nodes[k - 2]
    }

    /// Internal nodes with their numbers, in topological order.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, &InternalNode)> + '_ {
        self.nodes.iter().enumerate().map(|(i, node)| (i + 2, node))
    }

    /// Parent of each internal node (`0` for the root).
    pub fn node_parents(&self) -> Vec<usize> {
        let mut parent = vec![0; self.n + 1];
        for (k, node) in self.nodes() {
            for child in [node.left, node.right] {
                if let Child::Node(j) = child {
                    parent[j] = k;
                }
            }
        }
        parent
    }

    /// Parent of each leaf, indexed by leaf number.
    pub fn leaf_parents(&self) -> Vec<usize> {
        let mut parent = vec![0; self.n + 1];
        for (k, node) in self.nodes() {
            for child in [node.left, node.right] {
                if let Child::Leaf(i) = child {
                    parent[i] = k;
                }
            }
        }
        parent
    }

    /// The common precision, if every node uses the same one.
    pub fn mono_precision(&self) -> Option<Precision> {
        let p = self.nodes[0].precision;
        self.nodes.iter().all(|nd| nd.precision == p).then_some(p)
    }

    /// Coarsest precision among nodes that have a leaf child.
    pub fn coarsest_leaf_precision(&self) -> Precision {
        self.nodes
            .iter()
            .filter(|nd| matches!(nd.left, Child::Leaf(_)) || matches!(nd.right, Child::Leaf(_)))
            .map(|nd| nd.precision)
            .min()
            .expect("every tree has a node with a leaf child")
    }

    pub fn stats(&self) -> TreeStats {
        let n = self.n;
        let mut node_heights = vec![0usize; n + 1];
        let mut leaf_pairs = 0;
        let child_height = |c: Child, h: &[usize]| match c {
            Child::Leaf(_) => 0,
            Child::Node(j) => h[j],
        };
        for (k, node) in self.nodes() {
            node_heights[k] = 1 + child_height(node.left, &node_heights)
                .max(child_height(node.right, &node_heights));
            if matches!((node.left, node.right), (Child::Leaf(_), Child::Leaf(_))) {
                leaf_pairs += 1;
            }
        }

        // Walk from the root down: parents have larger numbers than children.
        let mut depths = vec![0usize; n + 1];
        let mut weighted_depths = vec![0.0f64; n + 1];
        let mut weighted_height = 0.0f64;
        for k in (2..=n).rev() {
            let node = self.node(k);
            let u = node.precision.unit_roundoff();
            let below = weighted_depths[k] + u * u;
            weighted_height = weighted_height.max(below);
            for child in [node.left, node.right] {
                if let Child::Node(j) = child {
                    depths[j] = depths[k] + 1;
                    weighted_depths[j] = below;
                }
            }
        }

        TreeStats {
            height: node_heights[n],
            leaf_pairs,
            n_tilde: n - leaf_pairs - 1,
            weighted_height,
            depths,
            weighted_depths,
            node_heights,
        }
    }

    fn check_len(&self, x: &[f64]) -> Result<(), TreeError> {
        if x.len() != self.n {
            return Err(TreeError::LengthMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Exact partial sums as double-double values (`x` is 0-based: `x[i-1]`
    /// is leaf `i`).
    pub fn exact_partial_sums_dd(&self, x: &[f64]) -> Result<Vec<DoubleDouble>, TreeError> {
        self.check_len(x)?;
        let mut s = vec![DoubleDouble::ZERO; self.n + 1];
        let value = |c: Child, s: &[DoubleDouble]| match c {
            Child::Leaf(i) => DoubleDouble::from(x[i - 1]),
            Child::Node(j) => s[j],
        };
        for (k, node) in self.nodes() {
            s[k] = value(node.left, &s) + value(node.right, &s);
        }
        Ok(s)
    }

    /// Exact partial sums `s_k`, rounded once to double.
    pub fn exact_partial_sums(&self, x: &[f64]) -> Result<Vec<f64>, TreeError> {
        Ok(self
            .exact_partial_sums_dd(x)?
            .into_iter()
            .map(DoubleDouble::to_f64)
            .collect())
    }

    /// One line per internal node: `k left right t`, children written as
    /// `x<i>` (leaf) or `s<k>` (internal node).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, node) in self.nodes() {
            let _ = writeln!(
                out,
                "{k} {} {} {}",
                node.left.label(),
                node.right.label(),
                node.precision.bits()
            );
        }
        out
    }

    /// Parses [`CompTree::to_text`] output. Blank lines and `#` comments are
    /// ignored; node lines must appear in order `2, 3, …, n`.
    pub fn from_text(text: &str) -> Result<Self, TreeError> {
        let mut nodes = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| TreeError::Parse {
                line: lineno + 1,
                msg: msg.to_string(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(err("expected `k left right precision_t`"));
            }
            let k: usize = fields[0].parse().map_err(|_| err("bad node number"))?;
            if k != nodes.len() + 2 {
                return Err(err("node numbers must run 2, 3, … in order"));
            }
            let left = Child::parse(fields[1]).ok_or_else(|| err("bad left child"))?;
            let right = Child::parse(fields[2]).ok_or_else(|| err("bad right child"))?;
            let bits: u32 = fields[3].parse().map_err(|_| err("bad precision"))?;
            let precision = Precision::new(bits).map_err(|e| err(&e.to_string()))?;
            nodes.push(InternalNode {
                left,
                right,
                precision,
            });
        }
        let n = nodes.len() + 1;
        CompTree::from_nodes(n, nodes)
    }
}

/// Reference sum of a slice (double-double accumulation).
pub fn exact_sum(x: &[f64]) -> DoubleDouble {
    let mut acc = ExactAccumulator::new();
    for &v in x {
        acc.add(v);
    }
    acc.total()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const P: Precision = Precision::HALF;

    #[test]
    fn sequential_structure() {
        let t = CompTree::sequential(4, P).unwrap();
        assert_eq!(t.node(2).left, Child::Leaf(1));
        assert_eq!(t.node(2).right, Child::Leaf(2));
        assert_eq!(t.node(4).left, Child::Node(3));
        assert_eq!(t.node(4).right, Child::Leaf(4));
        let st = t.stats();
        assert_eq!((st.height, st.leaf_pairs, st.n_tilde), (3, 1, 2));

        let big = CompTree::sequential(1000, P).unwrap().stats();
        assert_eq!((big.leaf_pairs, big.n_tilde, big.height), (1, 998, 999));
    }

    #[test]
    fn pairwise_structure() {
        let st = CompTree::pairwise(4, P).unwrap().stats();
        assert_eq!((st.height, st.leaf_pairs, st.n_tilde), (2, 2, 1));
        assert_eq!(CompTree::pairwise(8, P).unwrap().stats().leaf_pairs, 4);
        // (x1+x2), (x3+x4), x5 -> (s2+s3), x5 -> root
        let t5 = CompTree::pairwise(5, P).unwrap();
        assert_eq!(t5.stats().height, 3);
        assert_eq!(t5.node(5).right, Child::Leaf(5));
        assert_eq!(
            CompTree::pairwise(2, P).unwrap(),
            CompTree::sequential(2, P).unwrap()
        );
    }

    #[test]
    fn pairwise_eight_matches_worked_numbering() {
        let t = CompTree::pairwise(8, P).unwrap();
        assert_eq!(t.node(6).left, Child::Node(2));
        assert_eq!(t.node(6).right, Child::Node(3));
        assert_eq!(t.node(7).left, Child::Node(4));
        assert_eq!(t.node(8).left, Child::Node(6));
        assert_eq!(t.node(8).right, Child::Node(7));
    }

    #[test]
    fn too_few_leaves() {
        assert_eq!(CompTree::sequential(1, P), Err(TreeError::TooFewLeaves(1)));
        assert!(CompTree::pairwise(0, P).is_err());
        assert!(
            CompTree::fabsum(10, 0, TreeShape::Sequential, TreeShape::Sequential, P, P).is_err()
        );
    }

    #[test]
    fn fabsum_layout_and_weighted_height() {
        let lo = Precision::HALF;
        let hi = Precision::SINGLE;
        let t =
            CompTree::fabsum(64, 32, TreeShape::Sequential, TreeShape::Sequential, lo, hi).unwrap();
        assert_eq!(t.mono_precision(), None);
        assert_eq!(t.node(64).precision, hi);
        assert_eq!(t.node(33).precision, lo);
        let st = t.stats();
        let (ul, uh) = (lo.unit_roundoff(), hi.unit_roundoff());
        // Deepest leaves sit under 31 low-precision sums and the single outer sum.
        assert_eq!(st.weighted_height, 31.0 * ul * ul + uh * uh);

        // b = n: one block, no outer nodes.
        let whole =
            CompTree::fabsum(10, 10, TreeShape::Sequential, TreeShape::Pairwise, lo, hi).unwrap();
        assert_eq!(whole.mono_precision(), Some(lo));
        // b = 1: everything in the high precision.
        let ones =
            CompTree::fabsum(10, 1, TreeShape::Sequential, TreeShape::Sequential, lo, hi).unwrap();
        assert_eq!(ones.mono_precision(), Some(hi));
    }

    #[test]
    fn ragged_fabsum_blocks() {
        let t = CompTree::fabsum(
            10,
            4,
            TreeShape::Sequential,
            TreeShape::Sequential,
            P,
            Precision::SINGLE,
        )
        .unwrap();
        // blocks 4 + 4 + 2 -> 3 + 3 + 1 low nodes, 2 high nodes
        let lo_count = t.nodes().filter(|(_, nd)| nd.precision == P).count();
        assert_eq!(lo_count, 7);
        assert_eq!(t.n(), 10);
    }

    #[test]
    fn mono_weighted_height_is_height_times_u2() {
        let u = P.unit_roundoff();
        for t in [
            CompTree::sequential(37, P).unwrap(),
            CompTree::pairwise(37, P).unwrap(),
        ] {
            let st = t.stats();
            assert_eq!(st.weighted_height, st.height as f64 * u * u);
        }
    }

    #[test]
    fn partial_sums_pairwise() {
        let t = CompTree::pairwise(4, P).unwrap();
        let s = t.exact_partial_sums(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(&s[2..], &[3.0, 7.0, 10.0]);
        assert!(t.exact_partial_sums(&[1.0]).is_err());
    }

    #[test]
    fn text_roundtrip_and_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = CompTree::random(17, P, &mut rng).unwrap();
        let back = CompTree::from_text(&format!("# random tree\n{}", t.to_text())).unwrap();
        assert_eq!(t, back);

        assert!(CompTree::from_text("2 x1 x1 11\n").is_err());
        assert!(CompTree::from_text("2 x1 x2 11\n3 s2 x3 11\n4 s3 x3 11\n").is_err());
        assert!(CompTree::from_text("2 x1 s3 11\n3 x2 x3 11\n").is_err());
        assert!(CompTree::from_text("2 x1 x2 99\n").is_err());
        let short = vec![InternalNode {
            left: Child::Leaf(1),
            right: Child::Leaf(2),
            precision: P,
        }];
        assert!(CompTree::from_nodes(3, short).is_err());
    }
}
