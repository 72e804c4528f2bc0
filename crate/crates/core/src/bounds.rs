//! Deterministic and probabilistic forward-error bounds.
//!
//! All functions take the per-operation roundoff bound `u` directly; pass
//! `2u` (see [`RoundingMode::bound_factor`]) to evaluate a bound for
//! stochastic rounding.
//!
//! [`RoundingMode::bound_factor`]: crate::fp::RoundingMode::bound_factor

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::eft::DoubleDouble;
use crate::kernels::{prefix_sums_dd, TracedRun};
use crate::tree::{Child, CompTree};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("invalid failure budget delta={delta}, eta={eta}")]
    InvalidBudget { delta: f64, eta: f64 },
    #[error("tree mixes precisions; use the mixed-precision bounds")]
    MixedPrecision,
    #[error("run carries no shifted-summation detail")]
    NotShifted,
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("need at least 2 summands, got {0}")]
    TooFewSummands(usize),
    #[error("invalid block size {b} for n={n}")]
    InvalidBlockSize { n: usize, b: usize },
}

/// Failure probabilities: `delta` for the first-order term, `eta` for the
/// higher-order terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbBudget {
    delta: f64,
    eta: f64,
}

impl ProbBudget {
    pub fn new(delta: f64, eta: f64) -> Result<Self, BoundError> {
        let ok = delta > 0.0 && eta > 0.0 && delta + eta < 1.0;
        if !ok {
            return Err(BoundError::InvalidBudget { delta, eta });
        }
        Ok(ProbBudget { delta, eta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn total(&self) -> f64 {
        self.delta + self.eta
    }

    /// `√(2 ln(2/δ))`.
    pub fn first_order_factor(&self) -> f64 {
        (2.0 * (2.0 / self.delta).ln()).sqrt()
    }
}

impl Default for ProbBudget {
    fn default() -> Self {
        ProbBudget {
            delta: 1e-2,
            eta: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoundId {
    DetPartial,
    DetInputs,
    ProbRec,
    ProbClosedPartial,
    ProbClosedInputs,
    ShiftPartial,
    ShiftInputs,
    CompDetPartial,
    CompDetInputs,
    CompProbRec,
    CompProbPartial,
    CompProbInputs,
    MixRec,
    MixClosedPartial,
    MixClosedInputs,
    FabsumInputs,
    FabsumDetFirstOrder,
}

impl BoundId {
    pub const ALL: [BoundId; 17] = [
        BoundId::DetPartial,
        BoundId::DetInputs,
        BoundId::ProbRec,
        BoundId::ProbClosedPartial,
        BoundId::ProbClosedInputs,
        BoundId::ShiftPartial,
        BoundId::ShiftInputs,
        BoundId::CompDetPartial,
        BoundId::CompDetInputs,
        BoundId::CompProbRec,
        BoundId::CompProbPartial,
        BoundId::CompProbInputs,
        BoundId::MixRec,
        BoundId::MixClosedPartial,
        BoundId::MixClosedInputs,
        BoundId::FabsumInputs,
        BoundId::FabsumDetFirstOrder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundId::DetPartial => "DET_PARTIAL",
            BoundId::DetInputs => "DET_INPUTS",
            BoundId::ProbRec => "PROB_REC",
            BoundId::ProbClosedPartial => "PROB_CLOSED_PARTIAL",
            BoundId::ProbClosedInputs => "PROB_CLOSED_INPUTS",
            BoundId::ShiftPartial => "SHIFT_PARTIAL",
            BoundId::ShiftInputs => "SHIFT_INPUTS",
            BoundId::CompDetPartial => "COMP_DET_PARTIAL",
            BoundId::CompDetInputs => "COMP_DET_INPUTS",
            BoundId::CompProbRec => "COMP_PROB_REC",
            BoundId::CompProbPartial => "COMP_PROB_PARTIAL",
            BoundId::CompProbInputs => "COMP_PROB_INPUTS",
            BoundId::MixRec => "MIX_REC",
            BoundId::MixClosedPartial => "MIX_CLOSED_PARTIAL",
            BoundId::MixClosedInputs => "MIX_CLOSED_INPUTS",
            BoundId::FabsumInputs => "FABSUM_INPUTS",
            BoundId::FabsumDetFirstOrder => "FABSUM_DET_FIRSTORDER",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        BoundId::ALL.into_iter().find(|b| b.name() == name)
    }

    /// Holds with probability `1 - (δ + η)` rather than always.
    pub fn is_probabilistic(self) -> bool {
        !matches!(
            self,
            BoundId::DetPartial
                | BoundId::DetInputs
                | BoundId::CompDetPartial
                | BoundId::CompDetInputs
                | BoundId::FabsumDetFirstOrder
        )
    }

    /// Drops a higher-order remainder, so it is not a strict bound.
    pub fn is_truncated(self) -> bool {
        matches!(
            self,
            BoundId::CompDetPartial
                | BoundId::CompDetInputs
                | BoundId::CompProbInputs
                | BoundId::FabsumDetFirstOrder
        )
    }
}

impl fmt::Display for BoundId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Evaluated bounds keyed by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundReport {
    values: BTreeMap<BoundId, f64>,
}

impl BoundReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: BoundId, value: f64) {
        self.values.insert(id, value);
    }

    pub fn get(&self, id: BoundId) -> Option<f64> {
        self.values.get(&id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (BoundId, f64)> + '_ {
        self.values.iter().map(|(k, v)| (*k, *v))
    }

    pub fn extend(&mut self, other: BoundReport) {
        self.values.extend(other.values);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `(1 + u)^h`.
pub fn lambda_h(h: f64, u: f64) -> f64 {
    (h * u.ln_1p()).exp()
}

/// `λ_{m,η} = √(2 ln(2m/η))`.
pub fn lambda(m: f64, eta: f64) -> f64 {
    (2.0 * (2.0 * m / eta).ln()).sqrt()
}

/// `φ = λ √(2h) u exp(λ² h u²)`.
pub fn phi(lambda: f64, h: f64, u: f64) -> f64 {
    lambda * (2.0 * h).sqrt() * u * (lambda * lambda * h * u * u).exp()
}

/// Weighted-height version `λ √(2h̃) exp(λ² h̃)`. For a single precision
/// `h̃ = h u²` and this equals [`phi`].
pub fn phi_weighted(lambda: f64, h_tilde: f64) -> f64 {
    lambda * (2.0 * h_tilde).sqrt() * (lambda * lambda * h_tilde).exp()
}

/// `α² = (1 + 3(1+u)² + 2(1+u)⁴) / (1 - u(1+u)²)²` in double-double.
pub fn alpha_squared_dd(u: f64) -> DoubleDouble {
    let one_u = DoubleDouble::ONE + u;
    let sq = one_u.sqr();
    let num = DoubleDouble::ONE + sq * 3.0 + sq.sqr() * 2.0;
    let den = DoubleDouble::ONE - sq * u;
    num / den.sqr()
}

pub fn alpha(u: f64) -> f64 {
    let sq = (1.0 + u) * (1.0 + u);
    (1.0 + 3.0 * sq + 2.0 * sq * sq).sqrt() / (1.0 - u * sq)
}

/// `γ = √(1 + λ²u²) (1 + λ α √(2n) u² exp(λ² α² n u⁴))` with `λ = λ_{n,η}`.
pub fn gamma(n: f64, eta: f64, u: f64) -> f64 {
    let l = lambda(n, eta);
    let a = alpha(u);
    let u2 = u * u;
    (1.0 + l * l * u2).sqrt()
        * (1.0 + l * a * (2.0 * n).sqrt() * u2 * (l * l * a * a * n * u2 * u2).exp())
}

/// Scalar constants entering the bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub u: f64,
    pub lambda_h: f64,
    /// `√(2 ln(2/δ))`.
    pub first_order: f64,
    pub lambda_n: f64,
    /// `None` when no node has a non-leaf child.
    pub lambda_n_tilde: Option<f64>,
    pub phi_n: f64,
    pub phi_n_tilde: Option<f64>,
    pub alpha: f64,
    pub gamma: f64,
    /// `u (1 + u)²`.
    pub beta_aux: f64,
}

/// Counts are taken as reals so that values like `n = 10^10` fit.
pub fn constants(n: f64, n_tilde: f64, h: f64, u: f64, budget: ProbBudget) -> Constants {
    let eta = budget.eta();
    let lambda_n = lambda(n, eta);
    let lambda_n_tilde = (n_tilde >= 1.0).then(|| lambda(n_tilde, eta));
    Constants {
        u,
        lambda_h: lambda_h(h, u),
        first_order: budget.first_order_factor(),
        lambda_n,
        lambda_n_tilde,
        phi_n: phi(lambda_n, h, u),
        phi_n_tilde: lambda_n_tilde.map(|l| phi(l, h, u)),
        alpha: alpha(u),
        gamma: gamma(n, eta, u),
        beta_aux: u * (1.0 + u) * (1.0 + u),
    }
}

fn check_partials(tree: &CompTree, s: &[f64]) -> Result<(), BoundError> {
    if s.len() != tree.n() + 1 {
        return Err(BoundError::LengthMismatch {
            expected: tree.n() + 1,
            got: s.len(),
        });
    }
    Ok(())
}

/// `DET_PARTIAL = λ_h u Σ|s_k|` and `DET_INPUTS = λ_h h u Σ|x_j|`.
/// `s` holds exact partial sums by node, `u` the per-operation bound.
pub fn det_bounds(
    tree: &CompTree,
    s: &[f64],
    x: &[f64],
    u: f64,
) -> Result<BoundReport, BoundError> {
    check_partials(tree, s)?;
    tree.mono_precision().ok_or(BoundError::MixedPrecision)?;
    let h = tree.stats().height as f64;
    let lh = lambda_h(h, u);
    let sum_s: f64 = s[2..].iter().map(|v| v.abs()).sum();
    let sum_x: f64 = x.iter().map(|v| v.abs()).sum();
    let mut r = BoundReport::new();
    r.insert(BoundId::DetPartial, lh * u * sum_s);
    r.insert(BoundId::DetInputs, lh * h * u * sum_x);
    Ok(r)
}

/// Which `λ` drives the child-error bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaVariant {
    /// `λ_{ñ,η}`, ñ = number of nodes with a non-leaf child.
    NTilde,
    /// `λ_{n,η}`.
    N,
}

/// Child-error bounds `F_k = λ (Σ_{j≺k} u_j² (|s_j| + F_j)²)^{1/2}` for
/// per-node roundoff bounds `weights` (indexed by node). Also returns the
/// inner sum `G_k` for every node.
pub fn f_table_weighted(
    tree: &CompTree,
    s: &[f64],
    lambda: f64,
    weights: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let n = tree.n();
    let mut f = vec![0.0; n + 1];
    let mut g = vec![0.0; n + 1];
    for (k, node) in tree.nodes() {
        let part = |c: Child, f: &[f64], g: &[f64]| match c {
            Child::Leaf(_) => 0.0,
            Child::Node(j) => {
                let t = weights[j] * (s[j].abs() + f[j]);
                g[j] + t * t
            }
        };
        g[k] = part(node.left, &f, &g) + part(node.right, &f, &g);
        f[k] = lambda * g[k].sqrt();
    }
    (f, g)
}

/// Mono-precision child-error bounds, indexed by node.
pub fn f_table(
    tree: &CompTree,
    s: &[f64],
    eta: f64,
    variant: LambdaVariant,
    u: f64,
) -> Result<Vec<f64>, BoundError> {
    check_partials(tree, s)?;
    let stats = tree.stats();
    let m = match variant {
        LambdaVariant::N => tree.n(),
        LambdaVariant::NTilde => stats.n_tilde,
    };
    if m == 0 {
        // Every node has two leaf children, so every F_k is zero.
        return Ok(vec![0.0; tree.n() + 1]);
    }
    let weights = vec![u; tree.n() + 1];
    Ok(f_table_weighted(tree, s, lambda(m as f64, eta), &weights).0)
}

/// `PROB_REC`, `PROB_CLOSED_PARTIAL` and `PROB_CLOSED_INPUTS` (all with
/// `λ_{n,η}`).
pub fn prob_bounds_general(
    tree: &CompTree,
    s: &[f64],
    x: &[f64],
    u: f64,
    budget: ProbBudget,
) -> Result<BoundReport, BoundError> {
    check_partials(tree, s)?;
    tree.mono_precision().ok_or(BoundError::MixedPrecision)?;
    let n = tree.n();
    let h = tree.stats().height as f64;
    let lam = lambda(n as f64, budget.eta());
    let weights = vec![u; n + 1];
    let (f, g) = f_table_weighted(tree, s, lam, &weights);
    let root = u * (s[n].abs() + f[n]);
    let c1 = budget.first_order_factor();
    let onephi = 1.0 + phi(lam, h, u);
    let sum_s2: f64 = s[2..].iter().map(|v| v * v).sum();
    let sum_x: f64 = x.iter().map(|v| v.abs()).sum();
    let mut r = BoundReport::new();
    r.insert(BoundId::ProbRec, c1 * (g[n] + root * root).sqrt());
    r.insert(BoundId::ProbClosedPartial, u * c1 * onephi * sum_s2.sqrt());
    r.insert(
        BoundId::ProbClosedInputs,
        u * h.sqrt() * c1 * onephi * sum_x,
    );
    Ok(r)
}

/// Height of the shifted-summation tree: the inner tree plus the shift
/// subtractions below it and the final addition above it.
pub fn shifted_height(tree: &CompTree) -> usize {
    tree.stats().height + 2
}

/// `SHIFT_PARTIAL` and `SHIFT_INPUTS` for a shifted run on `tree`.
pub fn shifted_bounds(
    tree: &CompTree,
    run: &TracedRun,
    u: f64,
    budget: ProbBudget,
) -> Result<BoundReport, BoundError> {
    let detail = run.shift.as_ref().ok_or(BoundError::NotShifted)?;
    let n = tree.n();
    if run.inputs.len() != n {
        return Err(BoundError::LengthMismatch {
            expected: n,
            got: run.inputs.len(),
        });
    }
    let h = shifted_height(tree) as f64;
    let lam = lambda(n as f64, budget.eta());
    let scale = u * budget.first_order_factor() * (1.0 + phi(lam, h, u));
    let c = detail.shift;
    let sum_t2: f64 = detail.t_exact[2..].iter().map(|v| v * v).sum();
    let sum_y2: f64 = detail.y_exact[1..].iter().map(|v| v * v).sum();
    let partial = (run.exact_sum * run.exact_sum + sum_t2 + sum_y2).sqrt();
    let inputs_sum: f64 = run.inputs.iter().map(|&xk| (xk - c).abs() + xk.abs()).sum();
    let mut r = BoundReport::new();
    r.insert(BoundId::ShiftPartial, scale * partial);
    r.insert(
        BoundId::ShiftInputs,
        scale * (n as f64 * c.abs() + h.sqrt() * inputs_sum),
    );
    Ok(r)
}

/// Bounds `Y_k, S_k, Z_k, C_k` on the compensated child-errors, and the
/// summands `R_j²` they are built from.
#[derive(Debug, Clone, PartialEq)]
pub struct CompensatedBoundTable {
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    pub z: Vec<f64>,
    pub c: Vec<f64>,
    /// `Σ_{j=3}^{n} R_j²`.
    pub r2_total: f64,
}

/// Evaluates the `Y/S/Z/C` recurrences for inputs `x` and exact prefix sums
/// `s` (indexed `1..=n`).
pub fn compensated_bound_table(
    x: &[f64],
    s: &[f64],
    u: f64,
    lambda_n: f64,
) -> CompensatedBoundTable {
    let n = x.len();
    let xa = |k: usize| x[k - 1].abs();
    let mut t = CompensatedBoundTable {
        y: vec![0.0; n + 1],
        s: vec![0.0; n + 1],
        z: vec![0.0; n + 1],
        c: vec![0.0; n + 1],
        r2_total: 0.0,
    };
    t.z[2] = u * s[2].abs();
    t.c[2] = u * (xa(2) + t.z[2]) + u * s[2].abs();
    let mut acc = 0.0;
    for k in 3..=n {
        t.y[k] = t.c[k - 1] * (1.0 + u);
        let a = xa(k) + t.y[k];
        let b = xa(k - 1) + t.z[k - 1];
        acc += a * a + t.c[k - 1] * t.c[k - 1] + b * b;
        t.s[k] = lambda_n * u * acc.sqrt();
        t.z[k] = u * (s[k].abs() + t.s[k]) + u * (xa(k) + t.y[k]) + t.y[k];
        t.c[k] = u * (xa(k) + t.z[k]) + u * (s[k].abs() + t.s[k]);
    }
    t.r2_total = acc;
    t
}

/// The five compensated-summation bounds for inputs `x`.
pub fn compensated_bounds(
    x: &[f64],
    u: f64,
    budget: ProbBudget,
) -> Result<BoundReport, BoundError> {
    let n = x.len();
    if n < 2 {
        return Err(BoundError::TooFewSummands(n));
    }
    let s: Vec<f64> = prefix_sums_dd(x).iter().map(|v| v.to_f64()).collect();
    let nf = n as f64;
    let u2 = u * u;
    let sum_x: f64 = x.iter().map(|v| v.abs()).sum();
    let sum_x_tail: f64 = x[1..].iter().map(|v| v.abs()).sum();
    let sum_s_mid: f64 = s[2..n].iter().map(|v| v.abs()).sum();
    let sum_x2_tail: f64 = x[1..].iter().map(|v| v * v).sum();
    let sum_s2: f64 = s[2..].iter().map(|v| v * v).sum();
    let sn = s[n].abs();

    let lam = lambda(nf, budget.eta());
    let c1 = budget.first_order_factor();
    let table = compensated_bound_table(x, &s, u, lam);
    let head = sn + table.s[n];
    let a = alpha(u);
    let g = gamma(nf, budget.eta(), u);
    let sqrt2 = std::f64::consts::SQRT_2;

    let mut r = BoundReport::new();
    r.insert(
        BoundId::CompDetPartial,
        u * sn + 2.0 * u * (1.0 + 3.0 * u) * sum_x_tail + 4.0 * u2 * sum_s_mid,
    );
    r.insert(
        BoundId::CompDetInputs,
        (3.0 * u + (4.0 * nf - 2.0) * u2) * sum_x,
    );
    r.insert(
        BoundId::CompProbRec,
        u * c1 * (head * head + table.r2_total).sqrt(),
    );
    r.insert(
        BoundId::CompProbPartial,
        u * c1 * (sn + g * (sqrt2 + a * u) * sum_x2_tail.sqrt() + g * a * u * sum_s2.sqrt()),
    );
    r.insert(
        BoundId::CompProbInputs,
        u * c1 * (1.0 + sqrt2 + 6f64.sqrt() * (nf.sqrt() + 1.0) * u) * sum_x,
    );
    Ok(r)
}

/// `MIX_REC`, `MIX_CLOSED_PARTIAL` and `MIX_CLOSED_INPUTS`. Each node's
/// roundoff bound is `factor` times its unit roundoff.
pub fn mixed_bounds(
    tree: &CompTree,
    s: &[f64],
    x: &[f64],
    factor: f64,
    budget: ProbBudget,
) -> Result<BoundReport, BoundError> {
    check_partials(tree, s)?;
    let n = tree.n();
    let mut weights = vec![0.0; n + 1];
    for (k, node) in tree.nodes() {
        weights[k] = factor * node.precision.unit_roundoff();
    }
    let h_tilde = factor * factor * tree.stats().weighted_height;
    let lam = lambda(n as f64, budget.eta());
    let (f, g) = f_table_weighted(tree, s, lam, &weights);
    let root = weights[n] * (s[n].abs() + f[n]);
    let c1 = budget.first_order_factor();
    let onephi = 1.0 + phi_weighted(lam, h_tilde);
    let sum_us2: f64 = (2..=n)
        .map(|k| (weights[k] * s[k]) * (weights[k] * s[k]))
        .sum();
    let sum_x: f64 = x.iter().map(|v| v.abs()).sum();
    let mut r = BoundReport::new();
    r.insert(BoundId::MixRec, c1 * (g[n] + root * root).sqrt());
    r.insert(BoundId::MixClosedPartial, c1 * onephi * sum_us2.sqrt());
    r.insert(
        BoundId::MixClosedInputs,
        h_tilde.sqrt() * c1 * onephi * sum_x,
    );
    Ok(r)
}

/// Weighted height `b u_lo² + (n/b) u_hi²` used for the block-summation
/// experiments (stage heights taken as `b` and `n/b`).
pub fn fabsum_h_tilde(n: usize, b: usize, u_lo: f64, u_hi: f64) -> f64 {
    b as f64 * u_lo * u_lo + (n as f64 / b as f64) * u_hi * u_hi
}

/// `FABSUM_INPUTS` and the first-order deterministic `FABSUM_DET_FIRSTORDER
/// = b u_lo Σ|x|`. `u_lo`, `u_hi` are per-operation bounds.
pub fn fabsum_bounds(
    x: &[f64],
    b: usize,
    u_lo: f64,
    u_hi: f64,
    budget: ProbBudget,
) -> Result<BoundReport, BoundError> {
    let n = x.len();
    if b == 0 || b > n {
        return Err(BoundError::InvalidBlockSize { n, b });
    }
    let h_tilde = fabsum_h_tilde(n, b, u_lo, u_hi);
    let lam = lambda(n as f64, budget.eta());
    let sum_x: f64 = x.iter().map(|v| v.abs()).sum();
    let c1 = budget.first_order_factor();
    let mut r = BoundReport::new();
    r.insert(
        BoundId::FabsumInputs,
        h_tilde.sqrt() * c1 * (1.0 + phi_weighted(lam, h_tilde)) * sum_x,
    );
    r.insert(BoundId::FabsumDetFirstOrder, b as f64 * u_lo * sum_x);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fp::Precision;

    fn budget() -> ProbBudget {
        ProbBudget::new(1e-2, 1e-3).unwrap()
    }

    #[test]
    fn budget_validation() {
        assert!(ProbBudget::new(0.5, 0.5).is_err());
        assert!(ProbBudget::new(0.0, 0.1).is_err());
        assert!(ProbBudget::new(0.1, 0.1).is_ok());
    }

    #[test]
    fn ids_roundtrip() {
        for id in BoundId::ALL {
            assert_eq!(BoundId::from_name(id.name()), Some(id));
        }
    }

    #[test]
    fn printed_constants() {
        let b = budget();
        assert!((b.first_order_factor() - 3.26).abs() < 0.01);
        let u = 2f64.powi(-11);
        let c = constants(1e5, 1e5, 1e5, u, b);
        assert!((c.lambda_n - 6.2).abs() / 6.2 < 0.02);
        assert!((1.0 + c.phi_n - 4.4).abs() / 4.4 < 0.02);
        let c = constants(
            1e10,
            1e10,
            1e10,
            2f64.powi(-24),
            ProbBudget::new(1e-2, 1e-32).unwrap(),
        );
        assert!((c.lambda_n - 14.0).abs() / 14.0 < 0.02);
        assert!(1.0 + c.phi_n < 1.12);
    }

    #[test]
    fn alpha_limits() {
        assert_eq!(alpha(0.0), 6f64.sqrt());
        let u = 2f64.powi(-24);
        let a2 = alpha_squared_dd(u);
        let ratio = ((a2 - 6.0 - 26.0 * u) * (1.0 / (u * u))).to_f64();
        assert!((ratio - 85.0).abs() < 1e-3, "{ratio}");
        assert!((gamma(1e4, 1e-3, 1e-12) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn det_bounds_small() {
        let p = Precision::HALF;
        let u = p.unit_roundoff();
        let tree = CompTree::sequential(2, p).unwrap();
        let s = tree.exact_partial_sums(&[1.0, 2.0]).unwrap();
        let r = det_bounds(&tree, &s, &[1.0, 2.0], u).unwrap();
        assert_eq!(r.get(BoundId::DetPartial).unwrap(), (1.0 + u) * u * 3.0);
        let z = det_bounds(&tree, &[0.0; 3], &[0.0; 2], u).unwrap();
        assert!(z.iter().all(|(_, v)| v == 0.0));
    }

    #[test]
    fn f_tables_by_hand() {
        let p = Precision::HALF;
        let u = p.unit_roundoff();
        let eta = 1e-3;
        let x = [0.1, 0.2, 0.3, 0.4];
        let tree = CompTree::pairwise(4, p).unwrap();
        let s = tree.exact_partial_sums(&x).unwrap();
        let f = f_table(&tree, &s, eta, LambdaVariant::N, u).unwrap();
        let l = lambda(4.0, eta);
        assert_eq!((f[2], f[3]), (0.0, 0.0));
        assert!((f[4] - l * u * (s[2] * s[2] + s[3] * s[3]).sqrt()).abs() < 1e-18);
        let tree = CompTree::sequential(3, p).unwrap();
        let s = tree.exact_partial_sums(&x[..3]).unwrap();
        let f = f_table(&tree, &s, eta, LambdaVariant::NTilde, u).unwrap();
        assert_eq!(f[2], 0.0);
        assert!((f[3] - lambda(1.0, eta) * u * s[2].abs()).abs() < 1e-18);
    }

    #[test]
    fn comp_base_case() {
        let u = 2f64.powi(-11);
        let x = [0.3, 0.5, 0.7];
        let s = [0.0, 0.3, 0.8, 1.5];
        let t = compensated_bound_table(&x, &s, u, 5.0);
        assert_eq!((t.y[2], t.s[2]), (0.0, 0.0));
        assert_eq!(t.z[2], u * 0.8);
        assert_eq!(t.c[2], u * (0.5 + u * 0.8) + u * 0.8);
        assert_eq!(t.y[3], t.c[2] * (1.0 + u));
    }

    #[test]
    fn mixed_reduces_to_mono() {
        let p = Precision::HALF;
        let u = p.unit_roundoff();
        let x: Vec<f64> = (1..=100).map(|i| (i as f64).sqrt()).collect();
        let tree = CompTree::pairwise(100, p).unwrap();
        let s = tree.exact_partial_sums(&x).unwrap();
        let mono = prob_bounds_general(&tree, &s, &x, u, budget()).unwrap();
        let mixed = mixed_bounds(&tree, &s, &x, 1.0, budget()).unwrap();
        for (a, b) in [
            (BoundId::ProbRec, BoundId::MixRec),
            (BoundId::ProbClosedPartial, BoundId::MixClosedPartial),
            (BoundId::ProbClosedInputs, BoundId::MixClosedInputs),
        ] {
            let (va, vb) = (mono.get(a).unwrap(), mixed.get(b).unwrap());
            assert!((va - vb).abs() <= 1e-12 * va, "{a}: {va} vs {vb}");
        }
    }

    #[test]
    fn fabsum_h_tilde_printed() {
        let (lo, hi) = (2f64.powi(-11), 2f64.powi(-24));
        assert_eq!(
            fabsum_h_tilde(64, 32, lo, hi),
            32.0 * lo * lo + 2.0 * hi * hi
        );
        let r = fabsum_bounds(&[1.0; 64], 32, lo, hi, budget()).unwrap();
        assert_eq!(
            r.get(BoundId::FabsumDetFirstOrder).unwrap(),
            32.0 * lo * 64.0
        );
    }
}
