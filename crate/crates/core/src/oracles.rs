//! Exact error identities replayed from traced roundoffs.
//!
//! Every oracle here is an identity in real arithmetic. Evaluation uses
//! double-double arithmetic, so the only remaining discrepancy comes from
//! storing each roundoff `δ` as a double; [`IdentityCheck::noise_floor`]
//! bounds that contribution.

use thiserror::Error;

use crate::eft::DoubleDouble;
use crate::kernels::{prefix_sums_dd, CompensatedTrace, TracedRun};
use crate::tree::{Child, CompTree};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("trace does not hold one node roundoff per internal node of the tree")]
    TraceMismatch,
    #[error("input length {got} does not match trace length {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("{which} recurrence at k={k}: {recurrence} vs definition {definition}")]
    RecurrenceMismatch {
        which: &'static str,
        k: usize,
        recurrence: f64,
        definition: f64,
    },
}

/// Oracle value next to the observed error it should equal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    pub value: f64,
    pub observed: f64,
    /// Rounding noise from storing roundoffs in double: `2ε Σ|terms|`.
    pub noise_floor: f64,
}

impl IdentityCheck {
    pub fn abs_diff(&self) -> f64 {
        (self.value - self.observed).abs()
    }

    /// `|value - observed| / |observed|` (or the absolute difference when
    /// `observed` is zero).
    pub fn rel_diff(&self) -> f64 {
        if self.observed == 0.0 {
            self.abs_diff()
        } else {
            self.abs_diff() / self.observed.abs()
        }
    }

    pub fn holds(&self, rel_tol: f64) -> bool {
        self.abs_diff() <= rel_tol * self.observed.abs() + self.noise_floor
    }
}

/// Child-errors `f_k` per internal node, indexed by node number.
#[derive(Debug, Clone, PartialEq)]
pub struct ChildErrorTable {
    pub f: Vec<f64>,
}

fn deltas_for(run: &TracedRun, tree: &CompTree) -> Result<Vec<f64>, OracleError> {
    run.node_deltas(tree.n()).ok_or(OracleError::TraceMismatch)
}

fn exact_partials(run: &TracedRun, tree: &CompTree) -> Result<Vec<DoubleDouble>, OracleError> {
    tree.exact_partial_sums_dd(&run.inputs)
        .map_err(|_| OracleError::LengthMismatch {
            expected: tree.n(),
            got: run.inputs.len(),
        })
}

/// `e_n = Σ s_k δ_k Π_{k≺j⪯n} (1 + δ_j)`.
pub fn error_via_local_products(
    run: &TracedRun,
    tree: &CompTree,
) -> Result<IdentityCheck, OracleError> {
    let n = tree.n();
    let deltas = deltas_for(run, tree)?;
    let s = exact_partials(run, tree)?;
    let parent = tree.node_parents();
    // prod[k] = Π over strict ancestors of k of (1 + δ_j).
    let mut prod = vec![DoubleDouble::ONE; n + 1];
    for k in (2..n).rev() {
        let p = parent[k];
        prod[k] = prod[p] + prod[p] * deltas[p];
    }
    let mut total = DoubleDouble::ZERO;
    let mut magnitude = 0.0;
    for k in 2..=n {
        let term = s[k] * deltas[k] * prod[k];
        magnitude += term.to_f64().abs();
        total = total + term;
    }
    Ok(IdentityCheck {
        value: total.to_f64(),
        observed: run.error,
        noise_floor: 2.0 * f64::EPSILON * magnitude,
    })
}

/// Deterministic bound from the trace: `Σ |s_k| |δ_k| Π_{k≺j⪯n} |1 + δ_j|`.
pub fn local_error_magnitude(run: &TracedRun, tree: &CompTree) -> Result<f64, OracleError> {
    let n = tree.n();
    let deltas = deltas_for(run, tree)?;
    let s = exact_partials(run, tree)?;
    let parent = tree.node_parents();
    let mut prod = vec![1.0; n + 1];
    for k in (2..n).rev() {
        let p = parent[k];
        prod[k] = prod[p] * (1.0 + deltas[p]).abs();
    }
    Ok((2..=n)
        .map(|k| s[k].to_f64().abs() * deltas[k].abs() * prod[k])
        .sum())
}

/// Child-error recurrence: `f_k` = sum of the children's forward errors,
/// `e_k = f_k + (s_k + f_k) δ_k`, so `e_n = Σ (s_j + f_j) δ_j`.
pub fn error_via_child_recurrence(
    run: &TracedRun,
    tree: &CompTree,
) -> Result<(IdentityCheck, ChildErrorTable), OracleError> {
    let n = tree.n();
    let deltas = deltas_for(run, tree)?;
    let s = exact_partials(run, tree)?;
    let mut f = vec![DoubleDouble::ZERO; n + 1];
    let mut e = vec![DoubleDouble::ZERO; n + 1];
    let mut total = DoubleDouble::ZERO;
    let mut magnitude = 0.0;
    for (k, node) in tree.nodes() {
        let child_err = |c: Child, e: &[DoubleDouble]| match c {
            Child::Leaf(_) => DoubleDouble::ZERO,
            Child::Node(j) => e[j],
        };
        f[k] = child_err(node.left, &e) + child_err(node.right, &e);
        let local = (s[k] + f[k]) * deltas[k];
        e[k] = f[k] + local;
        magnitude += local.to_f64().abs();
        total = total + local;
    }
    let check = IdentityCheck {
        value: total.to_f64(),
        observed: run.error,
        noise_floor: 2.0 * f64::EPSILON * magnitude,
    };
    Ok((
        check,
        ChildErrorTable {
            f: f.iter().map(|v| v.to_f64()).collect(),
        },
    ))
}

/// First-order part `Σ s_k δ_k` of the tree-summation error.
pub fn first_order_error(run: &TracedRun, tree: &CompTree) -> Result<f64, OracleError> {
    let deltas = deltas_for(run, tree)?;
    let s = exact_partials(run, tree)?;
    Ok(first_order_from(&s, &deltas))
}

/// `Σ s_k δ_k` for given exact partial sums and node roundoffs.
pub fn first_order_from(s: &[DoubleDouble], deltas: &[f64]) -> f64 {
    (2..s.len())
        .fold(DoubleDouble::ZERO, |acc, k| acc + s[k] * deltas[k])
        .to_f64()
}

/// Single-dot forward errors and double-dot child-errors of compensated
/// summation, all indexed by step `k` (`2..=n` meaningful).
///
/// `*_rec` hold the values produced by the child-error recurrences, `*_def`
/// the values taken straight from their definitions on the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct CompensatedErrorTable {
    pub y_dot: Vec<f64>,
    pub s_dot: Vec<f64>,
    pub z_dot: Vec<f64>,
    pub c_dot: Vec<f64>,
    pub y_rec: Vec<f64>,
    pub s_rec: Vec<f64>,
    pub z_rec: Vec<f64>,
    pub c_rec: Vec<f64>,
    pub y_def: Vec<f64>,
    pub s_def: Vec<f64>,
    pub z_def: Vec<f64>,
    pub c_def: Vec<f64>,
    /// Largest `|rec - def| / max(|def|, u_k (|s_k| + |x_k|))` over all four.
    pub worst_mismatch: f64,
}

fn to_f64s(v: &[DoubleDouble]) -> Vec<f64> {
    v.iter().map(|d| d.to_f64()).collect()
}

/// Runs the child-error recurrences of compensated summation and checks them
/// against their definitions. `u` sets the comparison floor and `rel_tol`
/// the accepted relative mismatch.
pub fn compensated_child_errors(
    ct: &CompensatedTrace,
    x: &[f64],
    u: f64,
    rel_tol: f64,
) -> Result<CompensatedErrorTable, OracleError> {
    let n = ct.n();
    if x.len() != n {
        return Err(OracleError::LengthMismatch {
            expected: n,
            got: x.len(),
        });
    }
    let s = prefix_sums_dd(x);
    let xd = |k: usize| DoubleDouble::from(x[k - 1]);
    let zero = vec![DoubleDouble::ZERO; n + 1];

    // Definitions.
    let (mut yd, mut sd, mut zd, mut cd) = (zero.clone(), zero.clone(), zero.clone(), zero.clone());
    for k in 2..=n {
        yd[k] = DoubleDouble::from(ct.y[k]) - xd(k);
        sd[k] = DoubleDouble::from(ct.s[k]) - s[k];
        zd[k] = DoubleDouble::from(ct.z[k]) - xd(k);
        cd[k] = DoubleDouble::from(ct.c[k]);
    }
    let (mut y_def, mut s_def, mut z_def, mut c_def) =
        (zero.clone(), zero.clone(), zero.clone(), zero.clone());
    for k in 2..=n {
        y_def[k] = -cd[k - 1];
        s_def[k] = sd[k - 1] + yd[k];
        z_def[k] = sd[k] - sd[k - 1];
        c_def[k] = zd[k] - yd[k];
    }

    // Recurrences.
    let (mut yr, mut sr, mut zr, mut cr) = (zero.clone(), zero.clone(), zero.clone(), zero);
    if n >= 2 {
        let s2sig = s[2] * ct.sigma[2];
        zr[2] = s2sig;
        cr[2] = (xd(2) + zr[2]) * ct.delta[2] + s2sig;
    }
    for k in 3..=n {
        yr[k] = -(cr[k - 1] + cr[k - 1] * ct.beta[k - 1]);
        sr[k] = sr[k - 1] + (xd(k) + yr[k]) * ct.eta[k]
            - cr[k - 1] * ct.beta[k - 1]
            - (xd(k - 1) + zr[k - 1]) * ct.delta[k - 1];
        zr[k] = (s[k] + sr[k]) * ct.sigma[k] + (xd(k) + yr[k]) * ct.eta[k] + yr[k];
        cr[k] = (xd(k) + zr[k]) * ct.delta[k] + (s[k] + sr[k]) * ct.sigma[k];
    }

    let mut worst = 0.0f64;
    let named = [
        ("y", &yr, &y_def),
        ("s", &sr, &s_def),
        ("z", &zr, &z_def),
        ("c", &cr, &c_def),
    ];
    for (which, rec, def) in named {
        for k in 2..=n {
            let floor = u * (s[k].to_f64().abs() + x[k - 1].abs());
            let scale = def[k].to_f64().abs().max(floor);
            let diff = (rec[k] - def[k]).to_f64().abs();
            let rel = if scale > 0.0 { diff / scale } else { diff };
            worst = worst.max(rel);
            if rel > rel_tol {
                return Err(OracleError::RecurrenceMismatch {
                    which,
                    k,
                    recurrence: rec[k].to_f64(),
                    definition: def[k].to_f64(),
                });
            }
        }
    }

    Ok(CompensatedErrorTable {
        y_dot: to_f64s(&yd),
        s_dot: to_f64s(&sd),
        z_dot: to_f64s(&zd),
        c_dot: to_f64s(&cd),
        y_rec: to_f64s(&yr),
        s_rec: to_f64s(&sr),
        z_rec: to_f64s(&zr),
        c_rec: to_f64s(&cr),
        y_def: to_f64s(&y_def),
        s_def: to_f64s(&s_def),
        z_def: to_f64s(&z_def),
        c_def: to_f64s(&c_def),
        worst_mismatch: worst,
    })
}

/// Second-order expansion of the compensated-summation error:
///
/// ```text
/// s_n σ_n + (1 + σ_n) Σ_{k=2}^{n} x_k μ_k
///   - Σ_{k=2}^{n-1} s_k σ_k (μ_{k+1} + β_k + δ_k)
///   - Σ_{k=2}^{n-1} x_k δ_k (μ_{k+1} + β_k + η_k)
/// ```
///
/// with `μ_k = η_k - δ_k` for `k < n` and `μ_n = η_n`.
pub fn compensated_second_order(ct: &CompensatedTrace, x: &[f64]) -> f64 {
    let n = ct.n();
    let s = prefix_sums_dd(x);
    let mu = |k: usize| {
        if k == n {
            ct.eta[n]
        } else {
            ct.eta[k] - ct.delta[k]
        }
    };
    let mut first = DoubleDouble::ZERO;
    for k in 2..=n {
        first = first + DoubleDouble::from(x[k - 1]) * mu(k);
    }
    let mut total = s[n] * ct.sigma[n] + first + first * ct.sigma[n];
    for k in 2..n {
        let a = DoubleDouble::from(mu(k + 1)) + ct.beta[k] + ct.delta[k];
        total = total - s[k] * ct.sigma[k] * a;
        let b = DoubleDouble::from(mu(k + 1)) + ct.beta[k] + ct.eta[k];
        total = total - DoubleDouble::from(x[k - 1]) * ct.delta[k] * b;
    }
    total.to_f64()
}

/// Outcome of the aggregate backward-error check for compensated summation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoCheck {
    pub error: f64,
    pub bound: f64,
}

impl RhoCheck {
    pub fn pass(&self) -> bool {
        self.error.abs() <= self.bound
    }
}

/// Default slack constant for the unstated third-order term.
pub const RHO_SLACK: f64 = 16.0;

/// Checks `|ŝ_n - s_n| ≤ Σ_k (3u + (4(n-k)+6)u² + C u³ n) |x_k|`, where `u` is
/// the per-operation roundoff bound (`2u` under stochastic rounding).
pub fn check_rho_bound(ct: &CompensatedTrace, x: &[f64], u: f64, slack: f64) -> RhoCheck {
    let n = ct.n();
    let exact = prefix_sums_dd(x)[n];
    let error = (DoubleDouble::from(ct.s[n]) - exact).to_f64();
    let u2 = u * u;
    let cubic = slack * u2 * u * n as f64;
    let bound = x
        .iter()
        .enumerate()
        .map(|(i, xi)| {
            let k = (i + 1) as f64;
            (3.0 * u + (4.0 * (n as f64 - k) + 6.0) * u2 + cubic) * xi.abs()
        })
        .sum();
    RhoCheck { error, bound }
}
