//! Traced summation kernels: general tree summation, shifted summation,
//! compensated (Kahan) summation and mixed-precision block summation.
//!
//! Inputs are first rounded (to nearest) into the working precision of the
//! nodes that consume them, so every kernel sums exactly representable
//! values. That quantization is reported separately and is not part of the
//! forward error `e_n = ŝ_n - s_n`.

use rand::Rng;
use thiserror::Error;

use crate::eft::DoubleDouble;
use crate::fp::{FpError, OpLabel, Precision, Rounder, RoundingMode, RoundoffRecord};
use crate::tree::{exact_sum, Child, CompTree, TreeError, TreeShape};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error(transparent)]
    Fp(#[from] FpError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("need at least {need} inputs, got {got}")]
    TooFewInputs { need: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Tree,
    Shifted,
    Compensated,
    Fabsum,
}

/// One executed summation with every roundoff recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct TracedRun {
    pub algorithm: Algorithm,
    /// Inputs after rounding into the working precision.
    pub inputs: Vec<f64>,
    /// `Σ rounded inputs - Σ raw inputs`; excluded from `error`.
    pub input_quantization: f64,
    pub exact_sum: f64,
    pub computed_sum: f64,
    /// `computed_sum - exact_sum`, evaluated without cancellation loss.
    pub error: f64,
    /// Computed partial sums, indexed by node number.
    pub computed_partials: Vec<f64>,
    /// Exact partial sums, indexed by node number.
    pub exact_partials: Vec<f64>,
    pub trace: Vec<RoundoffRecord>,
    /// Extra quantities of a shifted run.
    pub shift: Option<ShiftDetail>,
}

impl TracedRun {
    pub fn relative_error(&self) -> f64 {
        (self.error / self.exact_sum).abs()
    }

    /// Roundoff of every internal tree node, indexed by node number.
    /// `None` if the trace does not hold exactly one record per node `2..=n`.
    pub fn node_deltas(&self, n: usize) -> Option<Vec<f64>> {
        let mut deltas = vec![0.0; n + 1];
        let mut seen = vec![false; n + 1];
        for rec in &self.trace {
            if let OpLabel::NodeSum(k) = rec.op {
                if k < 2 || k > n || seen[k] {
                    return None;
                }
                seen[k] = true;
                deltas[k] = rec.delta;
            }
        }
        seen[2..].iter().all(|&s| s).then_some(deltas)
    }
}

/// Quantities specific to shifted summation. Vectors are indexed `1..=n+1`
/// (`y_{n+1} = n c`).
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftDetail {
    pub shift: f64,
    pub y_exact: Vec<f64>,
    pub y_computed: Vec<f64>,
    /// Exact partial sums `t_k` of the exact shifted inputs, by node.
    pub t_exact: Vec<f64>,
}

/// Per-step values and roundoffs of compensated summation, indexed by `k`
/// (slots below 2 hold the initial values `s_1 = x_1`, `c_1 = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct CompensatedTrace {
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    pub z: Vec<f64>,
    pub c: Vec<f64>,
    pub eta: Vec<f64>,
    pub sigma: Vec<f64>,
    pub delta: Vec<f64>,
    pub beta: Vec<f64>,
}

impl CompensatedTrace {
    pub fn n(&self) -> usize {
        self.s.len() - 1
    }
}

fn quantize(x: &[f64], p: Precision) -> Result<(Vec<f64>, f64), KernelError> {
    let mut out = Vec::with_capacity(x.len());
    for &v in x {
        out.push(crate::fp::round_value::<rand_chacha::ChaCha8Rng>(
            v,
            p,
            RoundingMode::NearestTiesEven,
            None,
        )?);
    }
    let q = (exact_sum(&out) - exact_sum(x)).to_f64();
    Ok((out, q))
}

fn error_of(computed: f64, exact: DoubleDouble) -> f64 {
    (DoubleDouble::from(computed) - exact).to_f64()
}

fn record<R: Rng>(rounder: &Rounder<R>, delta: f64, op: OpLabel, p: Precision) -> RoundoffRecord {
    RoundoffRecord {
        delta,
        op,
        bound: rounder.roundoff_bound(p),
    }
}

/// Sums already-quantized `x` over `tree`, appending node records.
fn tree_pass<R: Rng>(
    tree: &CompTree,
    x: &[f64],
    rounder: &mut Rounder<R>,
    trace: &mut Vec<RoundoffRecord>,
) -> Result<Vec<f64>, KernelError> {
    let mut computed = vec![0.0; tree.n() + 1];
    for (k, node) in tree.nodes() {
        let value = |c: Child, s: &[f64]| match c {
            Child::Leaf(i) => x[i - 1],
            Child::Node(j) => s[j],
        };
        let a = value(node.left, &computed);
        let b = value(node.right, &computed);
        let r = rounder.add(a, b, node.precision)?;
        computed[k] = r.value;
        trace.push(record(
            rounder,
            r.delta,
            OpLabel::NodeSum(k),
            node.precision,
        ));
    }
    Ok(computed)
}

/// General summation over a computational tree: node `k` computes the
/// rounded sum of its two computed children in the node's precision.
pub fn run_tree_sum<R: Rng>(
    tree: &CompTree,
    x: &[f64],
    rounder: &mut Rounder<R>,
) -> Result<TracedRun, KernelError> {
    if x.len() != tree.n() {
        return Err(TreeError::LengthMismatch {
            expected: tree.n(),
            got: x.len(),
        }
        .into());
    }
    let (inputs, input_quantization) = quantize(x, tree.coarsest_leaf_precision())?;
    let exact_dd = tree.exact_partial_sums_dd(&inputs)?;
    let n = tree.n();
    let mut trace = Vec::with_capacity(n - 1);
    let computed = tree_pass(tree, &inputs, rounder, &mut trace)?;
    let computed_sum = computed[n];
    Ok(TracedRun {
        algorithm: Algorithm::Tree,
        inputs,
        input_quantization,
        exact_sum: exact_dd[n].to_f64(),
        computed_sum,
        error: error_of(computed_sum, exact_dd[n]),
        computed_partials: computed,
        exact_partials: exact_dd.iter().map(|v| v.to_f64()).collect(),
        trace,
        shift: None,
    })
}

/// `(min + max) / 2`, rounded to nearest in `p`.
pub fn choose_shift(x: &[f64], p: Precision) -> Result<f64, KernelError> {
    if x.is_empty() {
        return Err(KernelError::TooFewInputs { need: 1, got: 0 });
    }
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let mid = (DoubleDouble::from(lo) + hi).to_f64() * 0.5;
    Ok(crate::fp::round_value::<rand_chacha::ChaCha8Rng>(
        mid,
        p,
        RoundingMode::NearestTiesEven,
        None,
    )?)
}

/// Shifted summation: `y_k = x_k - c` (in the precision of the leaf's parent
/// node), `t_n` = tree sum of the `y_k`, `y_{n+1} = n c` and
/// `ŝ_n = t_n + y_{n+1}` (both in the root's precision).
///
/// The shift is rounded into the working precision like the inputs.
/// Trace: `n` subtractions, `n - 1` node sums, one product, one final sum.
pub fn run_shifted_sum<R: Rng>(
    tree: &CompTree,
    x: &[f64],
    shift: f64,
    rounder: &mut Rounder<R>,
) -> Result<TracedRun, KernelError> {
    let n = tree.n();
    if x.len() != n {
        return Err(TreeError::LengthMismatch {
            expected: n,
            got: x.len(),
        }
        .into());
    }
    let p_in = tree.coarsest_leaf_precision();
    let p_root = tree.node(n).precision;
    let (inputs, input_quantization) = quantize(x, p_in)?;
    let (c_vec, _) = quantize(&[shift], p_in)?;
    let c = c_vec[0];
    let leaf_parent = tree.leaf_parents();

    let mut trace = Vec::with_capacity(2 * n + 1);
    let mut y_computed = vec![0.0; n + 2];
    let mut y_exact_dd = vec![DoubleDouble::ZERO; n + 2];
    for i in 1..=n {
        let p = tree.node(leaf_parent[i]).precision;
        let r = rounder.sub(inputs[i - 1], c, p)?;
        y_computed[i] = r.value;
        y_exact_dd[i] = DoubleDouble::from(inputs[i - 1]) - c;
        trace.push(record(rounder, r.delta, OpLabel::ShiftSub(i), p));
    }
    let t_computed = tree_pass(tree, &y_computed[1..=n], rounder, &mut trace)?;
    let nc = rounder.mul(n as f64, c, p_root)?;
    y_computed[n + 1] = nc.value;
    y_exact_dd[n + 1] = DoubleDouble::from(n as f64) * c;
    trace.push(record(rounder, nc.delta, OpLabel::ShiftMul, p_root));
    let last = rounder.add(t_computed[n], nc.value, p_root)?;
    trace.push(record(rounder, last.delta, OpLabel::ShiftAdd, p_root));

    let y_exact: Vec<f64> = y_exact_dd.iter().map(|v| v.to_f64()).collect();
    let t_exact_dd = {
        let mut t = vec![DoubleDouble::ZERO; n + 1];
        for (k, node) in tree.nodes() {
            let value = |ch: Child, t: &[DoubleDouble]| match ch {
                Child::Leaf(i) => y_exact_dd[i],
                Child::Node(j) => t[j],
            };
            t[k] = value(node.left, &t) + value(node.right, &t);
        }
        t
    };
    let exact = exact_sum(&inputs);
    Ok(TracedRun {
        algorithm: Algorithm::Shifted,
        inputs,
        input_quantization,
        exact_sum: exact.to_f64(),
        computed_sum: last.value,
        error: error_of(last.value, exact),
        computed_partials: t_computed,
        exact_partials: t_exact_dd.iter().map(|v| v.to_f64()).collect(),
        trace,
        shift: Some(ShiftDetail {
            shift: c,
            y_exact,
            y_computed,
            t_exact: t_exact_dd.iter().map(|v| v.to_f64()).collect(),
        }),
    })
}

/// Compensated summation with the correction subtracted from the next input:
///
/// ```text
/// y_k = x_k - c_{k-1};  s_k = s_{k-1} + y_k;  z_k = s_k - s_{k-1};  c_k = z_k - y_k
/// ```
///
/// Every line is rounded; `η_2 = 0` because `c_1 = 0`. The trace holds
/// `4(n - 1)` records including the exact first subtraction.
pub fn run_compensated<R: Rng>(
    x: &[f64],
    p: Precision,
    rounder: &mut Rounder<R>,
) -> Result<(TracedRun, CompensatedTrace), KernelError> {
    let n = x.len();
    if n < 2 {
        return Err(KernelError::TooFewInputs { need: 2, got: n });
    }
    let (inputs, input_quantization) = quantize(x, p)?;
    let mut ct = CompensatedTrace {
        y: vec![0.0; n + 1],
        s: vec![0.0; n + 1],
        z: vec![0.0; n + 1],
        c: vec![0.0; n + 1],
        eta: vec![0.0; n + 1],
        sigma: vec![0.0; n + 1],
        delta: vec![0.0; n + 1],
        beta: vec![0.0; n + 1],
    };
    let mut trace = Vec::with_capacity(4 * (n - 1));
    ct.s[1] = inputs[0];
    for k in 2..=n {
        let y = rounder.sub(inputs[k - 1], ct.c[k - 1], p)?;
        let s = rounder.add(ct.s[k - 1], y.value, p)?;
        let z = rounder.sub(s.value, ct.s[k - 1], p)?;
        let c = rounder.sub(z.value, y.value, p)?;
        ct.y[k] = y.value;
        ct.s[k] = s.value;
        ct.z[k] = z.value;
        ct.c[k] = c.value;
        ct.eta[k] = y.delta;
        ct.sigma[k] = s.delta;
        ct.delta[k] = z.delta;
        ct.beta[k] = c.delta;
        trace.push(record(rounder, y.delta, OpLabel::CompY(k), p));
        trace.push(record(rounder, s.delta, OpLabel::CompS(k), p));
        trace.push(record(rounder, z.delta, OpLabel::CompZ(k), p));
        trace.push(record(rounder, c.delta, OpLabel::CompC(k), p));
    }
    let prefix = prefix_sums_dd(&inputs);
    let exact = prefix[n];
    let run = TracedRun {
        algorithm: Algorithm::Compensated,
        inputs,
        input_quantization,
        exact_sum: exact.to_f64(),
        computed_sum: ct.s[n],
        error: error_of(ct.s[n], exact),
        computed_partials: ct.s.clone(),
        exact_partials: prefix.iter().map(|v| v.to_f64()).collect(),
        trace,
        shift: None,
    };
    Ok((run, ct))
}

/// Exact prefix sums `s_k = x_1 + … + x_k`, indexed `1..=n` (slot 0 is 0).
pub fn prefix_sums_dd(x: &[f64]) -> Vec<DoubleDouble> {
    let mut out = Vec::with_capacity(x.len() + 1);
    let mut acc = DoubleDouble::ZERO;
    out.push(acc);
    for &v in x {
        acc = acc + v;
        out.push(acc);
    }
    out
}

/// Mixed-precision block summation: blocks of `b` summed by `inner` in
/// `lo`, block sums combined by `outer` in `hi`. Returns the tree it ran on.
pub fn run_fabsum<R: Rng>(
    x: &[f64],
    b: usize,
    lo: Precision,
    hi: Precision,
    inner: TreeShape,
    outer: TreeShape,
    rounder: &mut Rounder<R>,
) -> Result<(CompTree, TracedRun), KernelError> {
    let tree = CompTree::fabsum(x.len(), b, inner, outer, lo, hi)?;
    let mut run = run_tree_sum(&tree, x, rounder)?;
    run.algorithm = Algorithm::Fabsum;
    Ok((tree, run))
}

/// Rounding-model replays in double-double arithmetic.
///
/// Instead of rounding, each operation is perturbed by a prescribed relative
/// error. Scaling a fixed pattern of perturbations by `u` makes the forward
/// error a smooth function of `u`, which is what the convergence-order
/// checks need.
pub mod model {
    use super::*;

    /// Forward error of tree summation when node `k` is perturbed by
    /// `deltas[k]`.
    pub fn tree_error(tree: &CompTree, x: &[f64], deltas: &[f64]) -> f64 {
        tree_error_dd(tree, x, deltas).to_f64()
    }

    pub fn tree_error_dd(tree: &CompTree, x: &[f64], deltas: &[f64]) -> DoubleDouble {
        let n = tree.n();
        let mut computed = vec![DoubleDouble::ZERO; n + 1];
        let mut exact = vec![DoubleDouble::ZERO; n + 1];
        for (k, node) in tree.nodes() {
            let pick = |c: Child, v: &[DoubleDouble]| match c {
                Child::Leaf(i) => DoubleDouble::from(x[i - 1]),
                Child::Node(j) => v[j],
            };
            exact[k] = pick(node.left, &exact) + pick(node.right, &exact);
            let sum = pick(node.left, &computed) + pick(node.right, &computed);
            computed[k] = sum + sum * deltas[k];
        }
        computed[n] - exact[n]
    }

    /// Perturbations for the four lines of compensated summation, indexed by
    /// step `k` (`eta[2]` is ignored: that subtraction is exact).
    #[derive(Debug, Clone)]
    pub struct CompensatedPerturbation {
        pub eta: Vec<f64>,
        pub sigma: Vec<f64>,
        pub delta: Vec<f64>,
        pub beta: Vec<f64>,
    }

    /// Forward error of compensated summation under the given perturbations,
    /// together with a trace holding the perturbations and the values rounded
    /// to double.
    pub fn compensated_error(x: &[f64], pert: &CompensatedPerturbation) -> (f64, CompensatedTrace) {
        let n = x.len();
        let mut ct = CompensatedTrace {
            y: vec![0.0; n + 1],
            s: vec![0.0; n + 1],
            z: vec![0.0; n + 1],
            c: vec![0.0; n + 1],
            eta: pert.eta.clone(),
            sigma: pert.sigma.clone(),
            delta: pert.delta.clone(),
            beta: pert.beta.clone(),
        };
        ct.eta[2] = 0.0;
        let perturb = |v: DoubleDouble, d: f64| v + v * d;
        let mut s_prev = DoubleDouble::from(x[0]);
        let mut c_prev = DoubleDouble::ZERO;
        ct.s[1] = x[0];
        for k in 2..=n {
            let y = perturb(DoubleDouble::from(x[k - 1]) - c_prev, ct.eta[k]);
            let s = perturb(s_prev + y, ct.sigma[k]);
            let z = perturb(s - s_prev, ct.delta[k]);
            let c = perturb(z - y, ct.beta[k]);
            ct.y[k] = y.to_f64();
            ct.s[k] = s.to_f64();
            ct.z[k] = z.to_f64();
            ct.c[k] = c.to_f64();
            s_prev = s;
            c_prev = c;
        }
        let exact = prefix_sums_dd(x)[n];
        ((s_prev - exact).to_f64(), ct)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const P: Precision = Precision::HALF;

    fn nearest() -> Rounder<ChaCha8Rng> {
        Rounder::nearest()
    }

    #[test]
    fn exact_quarter_sums() {
        for tree in [
            CompTree::sequential(4, P).unwrap(),
            CompTree::pairwise(4, P).unwrap(),
        ] {
            let run = run_tree_sum(&tree, &[0.25; 4], &mut nearest()).unwrap();
            assert_eq!(run.error, 0.0);
            assert_eq!(run.computed_sum, 1.0);
            assert_eq!(run.trace.len(), 3);
        }
    }

    #[test]
    fn sequential_three_term_trace() {
        let tree = CompTree::sequential(3, P).unwrap();
        let u = P.unit_roundoff();
        let run = run_tree_sum(&tree, &[1.0, u, u], &mut nearest()).unwrap();
        // 1 + u is a tie that rounds down, twice.
        assert_eq!(run.computed_sum, 1.0);
        assert_eq!(run.error, -2.0 * u);
        let d = run.node_deltas(3).unwrap();
        let s2 = 1.0 + u;
        assert_eq!(d[2], -u / s2);
        // Local-error expansion by hand: s_2 δ_2 (1 + δ_3) + s_3 δ_3.
        let s3 = 1.0 + 2.0 * u;
        let d3 = ((1.0 - 1.0) - u) / (1.0 + u);
        assert!((d[3] - d3).abs() < 1e-18);
        let e = s2 * d[2] * (1.0 + d[3]) + s3 * d[3];
        assert!((e - run.error).abs() < 1e-15 * u);
    }

    #[test]
    fn inputs_are_quantized_and_reported() {
        let tree = CompTree::sequential(2, P).unwrap();
        let run = run_tree_sum(&tree, &[0.1, 0.2], &mut nearest()).unwrap();
        assert_ne!(run.inputs[0], 0.1);
        assert!(run.input_quantization != 0.0);
        assert!(run.input_quantization.abs() < 1e-3);
        assert!(run_tree_sum(&tree, &[1.0], &mut nearest()).is_err());
    }

    #[test]
    fn shifted_by_zero_matches_plain() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..50).map(|_| rng.random::<f64>()).collect();
        let tree = CompTree::pairwise(50, P).unwrap();
        let plain = run_tree_sum(&tree, &x, &mut nearest()).unwrap();
        let shifted = run_shifted_sum(&tree, &x, 0.0, &mut nearest()).unwrap();
        assert_eq!(shifted.trace.len(), 2 * 50 + 1);
        assert_eq!(plain.computed_sum, shifted.computed_sum);
        assert_eq!(plain.error, shifted.error);
        assert!(shifted
            .trace
            .iter()
            .filter(|r| !matches!(r.op, OpLabel::NodeSum(_)))
            .all(|r| r.delta == 0.0));
    }

    #[test]
    fn shifted_constant_data() {
        let c = 0.3;
        let tree = CompTree::sequential(7, P).unwrap();
        let run = run_shifted_sum(&tree, &[c; 7], c, &mut nearest()).unwrap();
        let detail = run.shift.as_ref().unwrap();
        assert!(detail.y_computed[1..=7].iter().all(|&y| y == 0.0));
        let cq = detail.shift;
        let expect = Rounder::<ChaCha8Rng>::nearest().mul(7.0, cq, P).unwrap();
        assert_eq!(run.computed_sum, expect.value);
        let mul = run
            .trace
            .iter()
            .find(|r| r.op == OpLabel::ShiftMul)
            .unwrap();
        assert_eq!(mul.delta, expect.delta);
        assert!((run.error - 7.0 * cq * expect.delta).abs() < 1e-15);
    }

    #[test]
    fn shift_choice() {
        assert_eq!(choose_shift(&[0.0, 1.0], P).unwrap(), 0.5);
        assert_eq!(choose_shift(&[0.375; 3], P).unwrap(), 0.375);
        assert!(choose_shift(&[], P).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
        assert!((choose_shift(&x, P).unwrap() - 0.5).abs() < 0.01);
    }

    #[test]
    fn compensated_exact_powers_of_two() {
        let (run, ct) = run_compensated(&[0.5, 0.25, 0.125, 0.125], P, &mut nearest()).unwrap();
        assert_eq!(run.error, 0.0);
        assert_eq!(run.trace.len(), 4 * 3);
        assert_eq!(ct.eta[2], 0.0);
        assert_eq!(ct.c[1], 0.0);
        assert!(run_compensated(&[1.0], P, &mut nearest()).is_err());
    }

    #[test]
    fn compensated_beats_plain_sequential() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 20_000;
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let (comp, _) = run_compensated(&x, P, &mut nearest()).unwrap();
        let seq = run_tree_sum(&CompTree::sequential(n, P).unwrap(), &x, &mut nearest()).unwrap();
        assert!(comp.relative_error() < 4.0 * P.unit_roundoff());
        assert!(seq.relative_error() > 10.0 * comp.relative_error());
    }

    #[test]
    fn fabsum_degenerate_blocks() {
        let lo = Precision::HALF;
        let hi = Precision::SINGLE;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x: Vec<f64> = (0..64).map(|_| rng.random::<f64>()).collect();
        let (_, all_lo) = run_fabsum(
            &x,
            64,
            lo,
            hi,
            TreeShape::Sequential,
            TreeShape::Sequential,
            &mut nearest(),
        )
        .unwrap();
        let seq_lo =
            run_tree_sum(&CompTree::sequential(64, lo).unwrap(), &x, &mut nearest()).unwrap();
        assert_eq!(all_lo.computed_sum, seq_lo.computed_sum);
        let (_, all_hi) = run_fabsum(
            &x,
            1,
            lo,
            hi,
            TreeShape::Sequential,
            TreeShape::Sequential,
            &mut nearest(),
        )
        .unwrap();
        // b = 1 quantizes inputs to the high precision only.
        let seq_hi =
            run_tree_sum(&CompTree::sequential(64, hi).unwrap(), &x, &mut nearest()).unwrap();
        assert_eq!(all_hi.computed_sum, seq_hi.computed_sum);
        assert!(all_hi.trace.iter().all(|r| r.bound == hi.unit_roundoff()));
    }

    #[test]
    fn model_replay_without_perturbation_is_exact() {
        let tree = CompTree::pairwise(9, P).unwrap();
        let x = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
        assert_eq!(model::tree_error(&tree, &x, &[0.0; 10]), 0.0);
        let zeros = vec![0.0; 10];
        let pert = model::CompensatedPerturbation {
            eta: zeros.clone(),
            sigma: zeros.clone(),
            delta: zeros.clone(),
            beta: zeros,
        };
        assert_eq!(model::compensated_error(&x, &pert).0, 0.0);
    }
}
