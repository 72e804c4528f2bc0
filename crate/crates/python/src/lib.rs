//! Python bindings: trees, traced summation kernels, bounds and the
//! experiment harness.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::time::Duration;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sumlab_core::bounds::{self, BoundReport, ProbBudget};
use sumlab_core::harness::{self, ExperimentConfig};
use sumlab_core::kernels::{self, TracedRun};
use sumlab_core::verify::{self, Scale};
use sumlab_core::{oracles, CompTree, Precision, Rounder, RoundingMode, TreeShape};

fn err<E: Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn precision(t: u32) -> PyResult<Precision> {
    Precision::new(t).map_err(err)
}

fn mode(tag: &str) -> PyResult<RoundingMode> {
    RoundingMode::from_tag(tag)
        .ok_or_else(|| PyValueError::new_err(format!("unknown rounding mode {tag:?}")))
}

fn rounder(tag: &str, seed: u64) -> PyResult<Rounder<ChaCha8Rng>> {
    Ok(match mode(tag)? {
        RoundingMode::Stochastic => Rounder::stochastic(ChaCha8Rng::seed_from_u64(seed)),
        _ => Rounder::nearest(),
    })
}

fn budget(delta: f64, eta: f64) -> PyResult<ProbBudget> {
    ProbBudget::new(delta, eta).map_err(err)
}

fn report_dict(r: &BoundReport) -> BTreeMap<String, f64> {
    r.iter().map(|(id, v)| (id.name().to_string(), v)).collect()
}

/// A computational summation tree over leaves `1..=n`.
#[pyclass(name = "Tree", module = "sumlab", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTree {
    inner: CompTree,
}

#[pymethods]
impl PyTree {
    #[staticmethod]
    #[pyo3(signature = (n, t = 11))]
    fn sequential(n: usize, t: u32) -> PyResult<Self> {
        Ok(PyTree {
            inner: CompTree::sequential(n, precision(t)?).map_err(err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (n, t = 11))]
    fn pairwise(n: usize, t: u32) -> PyResult<Self> {
        Ok(PyTree {
            inner: CompTree::pairwise(n, precision(t)?).map_err(err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (n, t = 11, seed = 0))]
    fn random(n: usize, t: u32, seed: u64) -> PyResult<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(PyTree {
            inner: CompTree::random(n, precision(t)?, &mut rng).map_err(err)?,
        })
    }

    /// Blocks of `b` summed sequentially in `t_lo`, block sums combined
    /// pairwise in `t_hi`.
    #[staticmethod]
    #[pyo3(signature = (n, b = 32, t_lo = 11, t_hi = 24))]
    fn fabsum(n: usize, b: usize, t_lo: u32, t_hi: u32) -> PyResult<Self> {
        let tree = CompTree::fabsum(
            n,
            b,
            TreeShape::Sequential,
            TreeShape::Pairwise,
            precision(t_lo)?,
            precision(t_hi)?,
        )
        .map_err(err)?;
        Ok(PyTree { inner: tree })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(PyTree {
            inner: CompTree::from_text(text).map_err(err)?,
        })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    /// `height`, `leaf_pairs`, `n_tilde` and `weighted_height`.
    fn stats(&self) -> BTreeMap<&'static str, f64> {
        let st = self.inner.stats();
        BTreeMap::from([
            ("height", st.height as f64),
            ("leaf_pairs", st.leaf_pairs as f64),
            ("n_tilde", st.n_tilde as f64),
            ("weighted_height", st.weighted_height),
        ])
    }

    /// Exact partial sums indexed by node number (entries 0 and 1 unused).
    fn exact_partial_sums(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.exact_partial_sums(&x).map_err(err)
    }

    fn __repr__(&self) -> String {
        let st = self.inner.stats();
        format!("Tree(n={}, height={})", self.inner.n(), st.height)
    }
}

/// Result of a traced summation.
#[pyclass(name = "Run", module = "sumlab", frozen)]
struct PyRun {
    inner: TracedRun,
}

#[pymethods]
impl PyRun {
    #[getter]
    fn computed_sum(&self) -> f64 {
        self.inner.computed_sum
    }

    #[getter]
    fn exact_sum(&self) -> f64 {
        self.inner.exact_sum
    }

    #[getter]
    fn error(&self) -> f64 {
        self.inner.error
    }

    #[getter]
    fn relative_error(&self) -> f64 {
        self.inner.relative_error()
    }

    /// Inputs after rounding into the working precision.
    #[getter]
    fn inputs(&self) -> Vec<f64> {
        self.inner.inputs.clone()
    }

    #[getter]
    fn computed_partials(&self) -> Vec<f64> {
        self.inner.computed_partials.clone()
    }

    #[getter]
    fn exact_partials(&self) -> Vec<f64> {
        self.inner.exact_partials.clone()
    }

    /// Relative roundoff of every rounded operation, in execution order.
    #[getter]
    fn deltas(&self) -> Vec<f64> {
        self.inner.trace.iter().map(|r| r.delta).collect()
    }

    /// `(op, delta, bound)` per rounded operation.
    fn trace(&self) -> Vec<(String, f64, f64)> {
        self.inner
            .trace
            .iter()
            .map(|r| (r.op.to_string(), r.delta, r.bound))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Run(computed={:e}, exact={:e}, rel_error={:e})",
            self.inner.computed_sum,
            self.inner.exact_sum,
            self.inner.relative_error()
        )
    }
}

/// Unit roundoff `2^-t`.
#[pyfunction]
fn unit_roundoff(t: u32) -> PyResult<f64> {
    Ok(precision(t)?.unit_roundoff())
}

/// Rounds `x` to `t` bits; `mode` is `"rtn"` or `"sr"`.
#[pyfunction]
#[pyo3(signature = (x, t, mode = "rtn", seed = 0))]
fn round(x: f64, t: u32, mode: &str, seed: u64) -> PyResult<f64> {
    rounder(mode, seed)?.round(x, precision(t)?).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (tree, x, mode = "rtn", seed = 0))]
fn tree_sum(tree: &PyTree, x: Vec<f64>, mode: &str, seed: u64) -> PyResult<PyRun> {
    let run = kernels::run_tree_sum(&tree.inner, &x, &mut rounder(mode, seed)?).map_err(err)?;
    Ok(PyRun { inner: run })
}

/// Shifted summation; the shift defaults to the midrange of `x`.
#[pyfunction]
#[pyo3(signature = (tree, x, mode = "rtn", seed = 0, shift = None))]
fn shifted_sum(
    tree: &PyTree,
    x: Vec<f64>,
    mode: &str,
    seed: u64,
    shift: Option<f64>,
) -> PyResult<PyRun> {
    let c = match shift {
        Some(c) => c,
        None => kernels::choose_shift(&x, tree.inner.coarsest_leaf_precision()).map_err(err)?,
    };
    let run =
        kernels::run_shifted_sum(&tree.inner, &x, c, &mut rounder(mode, seed)?).map_err(err)?;
    Ok(PyRun { inner: run })
}

#[pyfunction]
#[pyo3(signature = (x, t = 11, mode = "rtn", seed = 0))]
fn compensated_sum(x: Vec<f64>, t: u32, mode: &str, seed: u64) -> PyResult<PyRun> {
    let (run, _) =
        kernels::run_compensated(&x, precision(t)?, &mut rounder(mode, seed)?).map_err(err)?;
    Ok(PyRun { inner: run })
}

/// `(oracle_value, observed_error)` for a tree run.
#[pyfunction]
fn error_via_local_products(run: &PyRun, tree: &PyTree) -> PyResult<(f64, f64)> {
    let c = oracles::error_via_local_products(&run.inner, &tree.inner).map_err(err)?;
    Ok((c.value, c.observed))
}

#[pyfunction]
fn first_order_error(run: &PyRun, tree: &PyTree) -> PyResult<f64> {
    oracles::first_order_error(&run.inner, &tree.inner).map_err(err)
}

/// Deterministic and probabilistic bounds for a mono-precision tree over
/// the inputs `x` (absolute values). `mode = "sr"` doubles `u`.
#[pyfunction]
#[pyo3(signature = (tree, x, mode = "rtn", delta = 1e-2, eta = 1e-3))]
fn tree_bounds(
    tree: &PyTree,
    x: Vec<f64>,
    mode: &str,
    delta: f64,
    eta: f64,
) -> PyResult<BTreeMap<String, f64>> {
    let factor = self::mode(mode)?.bound_factor();
    let s = tree.inner.exact_partial_sums(&x).map_err(err)?;
    let mut report = match tree.inner.mono_precision() {
        Some(p) => {
            let u = factor * p.unit_roundoff();
            let mut r = bounds::det_bounds(&tree.inner, &s, &x, u).map_err(err)?;
            r.extend(
                bounds::prob_bounds_general(&tree.inner, &s, &x, u, budget(delta, eta)?)
                    .map_err(err)?,
            );
            r
        }
        None => BoundReport::new(),
    };
    report.extend(
        bounds::mixed_bounds(&tree.inner, &s, &x, factor, budget(delta, eta)?).map_err(err)?,
    );
    Ok(report_dict(&report))
}

#[pyfunction]
#[pyo3(signature = (x, t = 11, mode = "rtn", delta = 1e-2, eta = 1e-3))]
fn compensated_bounds(
    x: Vec<f64>,
    t: u32,
    mode: &str,
    delta: f64,
    eta: f64,
) -> PyResult<BTreeMap<String, f64>> {
    let u = self::mode(mode)?.bound_factor() * precision(t)?.unit_roundoff();
    let r = bounds::compensated_bounds(&x, u, budget(delta, eta)?).map_err(err)?;
    Ok(report_dict(&r))
}

/// The scalar constants that enter the bounds.
#[pyfunction]
#[pyo3(signature = (n, h, t = 11, n_tilde = None, delta = 1e-2, eta = 1e-3))]
fn constants(
    n: f64,
    h: f64,
    t: u32,
    n_tilde: Option<f64>,
    delta: f64,
    eta: f64,
) -> PyResult<BTreeMap<&'static str, f64>> {
    let c = bounds::constants(
        n,
        n_tilde.unwrap_or(n),
        h,
        precision(t)?.unit_roundoff(),
        budget(delta, eta)?,
    );
    let mut out = BTreeMap::from([
        ("u", c.u),
        ("lambda_h", c.lambda_h),
        ("first_order", c.first_order),
        ("lambda_n", c.lambda_n),
        ("phi_n", c.phi_n),
        ("alpha", c.alpha),
        ("gamma", c.gamma),
        ("beta", c.beta_aux),
    ]);
    if let Some(v) = c.lambda_n_tilde {
        out.insert("lambda_n_tilde", v);
    }
    if let Some(v) = c.phi_n_tilde {
        out.insert("phi_n_tilde", v);
    }
    Ok(out)
}

/// Runs an experiment from `key = value` config text and returns the CSV.
#[pyfunction]
fn run_experiment(config: &str, py: Python<'_>) -> PyResult<String> {
    let cfg = ExperimentConfig::parse(config).map_err(err)?;
    let out = py.detach(|| harness::run_experiment(&cfg)).map_err(err)?;
    let mut buf = Vec::new();
    harness::write_csv(&mut buf, &cfg.experiment, &out.rows).map_err(err)?;
    String::from_utf8(buf).map_err(err)
}

/// Runs the verification suite; returns `(criterion, name, passed, detail)`.
#[pyfunction]
#[pyo3(signature = (quick = true, seed = 20240601))]
fn verify_suite(quick: bool, seed: u64, py: Python<'_>) -> Vec<(String, String, bool, String)> {
    let scale = if quick { Scale::quick() } else { Scale::full() };
    py.detach(|| verify::run_all(scale, seed, Duration::from_secs(600)))
        .into_iter()
        .map(|r| {
            (
                r.criterion.to_string(),
                r.name.clone(),
                r.pass,
                r.detail.clone(),
            )
        })
        .collect()
}

#[pymodule]
fn sumlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTree>()?;
    m.add_class::<PyRun>()?;
    m.add("SCHEMA_VERSION", harness::SCHEMA_VERSION)?;
    m.add_function(wrap_pyfunction!(unit_roundoff, m)?)?;
    m.add_function(wrap_pyfunction!(round, m)?)?;
    m.add_function(wrap_pyfunction!(tree_sum, m)?)?;
    m.add_function(wrap_pyfunction!(shifted_sum, m)?)?;
    m.add_function(wrap_pyfunction!(compensated_sum, m)?)?;
    m.add_function(wrap_pyfunction!(error_via_local_products, m)?)?;
    m.add_function(wrap_pyfunction!(first_order_error, m)?)?;
    m.add_function(wrap_pyfunction!(tree_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(compensated_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(constants, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(verify_suite, m)?)?;
    Ok(())
}
