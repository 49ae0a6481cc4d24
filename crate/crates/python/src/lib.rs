use nalgebra::DMatrix;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use npgm::error::{Error, ErrorKind};
use npgm::graph::EdgeMatrix;
use npgm::pipeline::{self, FitSettings, Method};
use npgm::simulation::{self, ModelKind, PrecisionModel};
use npgm::stats::seeded_rng;

type Rows = Vec<Vec<f64>>;

fn to_py(e: Error) -> PyErr {
    match e.kind() {
        ErrorKind::Input => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn matrix(rows: &Rows, what: &str) -> PyResult<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        return Err(PyValueError::new_err(format!("{what} is empty")));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err(format!("{what} rows differ in length")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn edge_list(e: &EdgeMatrix) -> Vec<(usize, usize)> {
    e.edges()
}

/// Outcome of `fit`. Matrices are lists of rows; edges are 0-based pairs
/// `(i, j)` with `i < j`.
#[pyclass(frozen, module = "npgm")]
struct FitResult {
    #[pyo3(get)]
    method: String,
    #[pyo3(get)]
    omega: Rows,
    #[pyo3(get)]
    inclusion: Rows,
    #[pyo3(get)]
    edges: Vec<(usize, usize)>,
    #[pyo3(get)]
    selected_c: Option<f64>,
    /// `(c, k, -2 loglik, bic)` per candidate.
    #[pyo3(get)]
    bic_table: Vec<(f64, usize, f64, f64)>,
    #[pyo3(get)]
    vlb_trace: Vec<f64>,
    #[pyo3(get)]
    converged: Option<bool>,
}

#[pymethods]
impl FitResult {
    fn __repr__(&self) -> String {
        format!("FitResult(method={:?}, p={}, edges={})", self.method, self.omega.len(), self.edges.len())
    }
}

/// Estimate the precision matrix and graph of `data` (rows are
/// observations). Columns are rescaled to [0, 1] unless `rescale` is false.
#[pyfunction]
#[pyo3(signature = (data, method = "horseshoe", seed = 0, burnin = 5000, samples = 10000, c_grid = None, transform = true, rescale = true))]
#[allow(clippy::too_many_arguments)]
fn fit(
    py: Python<'_>,
    data: Rows,
    method: &str,
    seed: u64,
    burnin: usize,
    samples: usize,
    c_grid: Option<Vec<f64>>,
    transform: bool,
    rescale: bool,
) -> PyResult<FitResult> {
    let mut x = matrix(&data, "data")?;
    let method: Method = method.parse().map_err(to_py)?;
    let mut settings = FitSettings { method, seed, n_burn: burnin, n_keep: samples, ..FitSettings::default() };
    if let Some(c) = c_grid {
        settings.c_grid = c;
    }
    if !transform {
        settings.transform = None;
    }
    let result = py
        .detach(|| {
            if rescale {
                x = pipeline::rescale_unit(&x)?;
            }
            pipeline::fit(&x, &settings)
        })
        .map_err(to_py)?;
    Ok(FitResult {
        method: result.method.name().to_owned(),
        omega: rows(&result.omega_hat),
        inclusion: rows(&result.inclusion),
        edges: edge_list(&result.edges),
        selected_c: result.selected_c,
        bic_table: result.bic_table.iter().map(|b| (b.c, b.k, b.minus_two_loglik, b.bic)).collect(),
        vlb_trace: result.vlb_trace,
        converged: result.converged,
    })
}

/// Synthetic data set with a known precision matrix.
#[pyclass(frozen, module = "npgm")]
struct Simulated {
    #[pyo3(get)]
    data: Rows,
    #[pyo3(get)]
    omega: Rows,
    #[pyo3(get)]
    edges: Vec<(usize, usize)>,
}

/// Draw `n` observations from one of the "circle", "ar2" or "percent"
/// precision models.
#[pyfunction]
#[pyo3(signature = (model, p, n, seed = 0, level = None))]
fn simulate(model: &str, p: usize, n: usize, seed: u64, level: Option<f64>) -> PyResult<Simulated> {
    let kind = match model {
        "circle" => ModelKind::Circle,
        "ar2" => ModelKind::Ar2,
        "percent" => {
            let level = level
                .or_else(|| simulation::percent_target(p))
                .ok_or_else(|| PyValueError::new_err(format!("percent model needs a level for p = {p}")))?;
            ModelKind::Percent { level }
        }
        other => return Err(PyValueError::new_err(format!("unknown model {other:?}"))),
    };
    let omega = simulation::generate_precision(&PrecisionModel { kind, p, seed }).map_err(to_py)?;
    let mut rng = seeded_rng(seed);
    let (y, _) = simulation::generate_observations(&omega, n, &mut rng).map_err(to_py)?;
    Ok(Simulated { data: rows(&y), edges: edge_list(&EdgeMatrix::support(&omega)), omega: rows(&omega) })
}

/// Confusion counts and rates of an estimated graph against the truth.
/// Nonzero off-diagonal entries are edges. Undefined rates are `None`.
#[pyfunction]
#[pyo3(signature = (estimated, truth, omega_hat = None, omega_true = None))]
fn score(
    py: Python<'_>,
    estimated: Rows,
    truth: Rows,
    omega_hat: Option<Rows>,
    omega_true: Option<Rows>,
) -> PyResult<Py<pyo3::types::PyDict>> {
    let est = EdgeMatrix::support(&matrix(&estimated, "estimated")?);
    let truth = EdgeMatrix::support(&matrix(&truth, "truth")?);
    let omegas = match (omega_hat, omega_true) {
        (Some(h), Some(t)) => Some((matrix(&h, "omega_hat")?, matrix(&t, "omega_true")?)),
        (None, None) => None,
        _ => return Err(PyValueError::new_err("omega_hat and omega_true go together")),
    };
    let zeros = DMatrix::zeros(truth.dim(), truth.dim());
    let (oh, ot) = omegas.as_ref().map_or((&zeros, &zeros), |(h, t)| (h, t));
    let report = simulation::score(&est, &truth, oh, ot).map_err(to_py)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("tp", report.tp)?;
    d.set_item("tn", report.tn)?;
    d.set_item("fp", report.fp)?;
    d.set_item("fn", report.fn_)?;
    d.set_item("sensitivity", report.sensitivity)?;
    d.set_item("specificity", report.specificity)?;
    d.set_item("mcc", report.mcc)?;
    d.set_item("scaled_l1", omegas.is_some().then_some(report.scaled_l1))?;
    Ok(d.unbind())
}

/// Partial correlations `-w_kd / sqrt(w_kk w_dd)` with unit diagonal.
#[pyfunction]
fn partial_correlation(omega: Rows) -> PyResult<Rows> {
    Ok(rows(&npgm::graph::partial_correlation(&matrix(&omega, "omega")?)))
}

#[pymodule]
#[pyo3(name = "npgm")]
fn npgm_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<FitResult>()?;
    m.add_class::<Simulated>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(partial_correlation, m)?)?;
    Ok(())
}
