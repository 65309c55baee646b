//! Python bindings, importable as `qrecon`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyIndexError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use qrecon_core::harness::{batch_stats, run_batch};
use qrecon_core::reconstruct::GenericityFlag;
use qrecon_core::state::{format_parties, parse_parties};
use qrecon_core::{Dims, Error, ReconstructionConfig};

create_exception!(qrecon, QreconError, PyException, "Base class of all qrecon errors.");
create_exception!(qrecon, ContractError, QreconError, "Invalid arguments or inputs.");
create_exception!(qrecon, NumericalError, QreconError, "A numerical routine failed.");
create_exception!(
    qrecon,
    ReconstructionError,
    QreconError,
    "The marginals are inconsistent or not generic."
);
create_exception!(qrecon, SpectrumMismatch, ReconstructionError);
create_exception!(qrecon, GenericityViolation, ReconstructionError);
create_exception!(qrecon, PhaseGraphDisconnected, ReconstructionError);
create_exception!(qrecon, PhaseInconsistency, ReconstructionError);
create_exception!(qrecon, ExpansionLeakage, ReconstructionError);
create_exception!(qrecon, MarginalInconsistency, ReconstructionError);

fn py_err(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Index { .. } => PyIndexError::new_err(msg),
        Error::Contract(_) => ContractError::new_err(msg),
        Error::Numerical(_) => NumericalError::new_err(msg),
        Error::SpectrumMismatch(_) => SpectrumMismatch::new_err(msg),
        Error::GenericityViolation(_) => GenericityViolation::new_err(msg),
        Error::PhaseGraphDisconnected { .. } => PhaseGraphDisconnected::new_err(msg),
        Error::PhaseInconsistency { .. } => PhaseInconsistency::new_err(msg),
        Error::ExpansionLeakage { .. } => ExpansionLeakage::new_err(msg),
        Error::MarginalInconsistency { .. } => MarginalInconsistency::new_err(msg),
    }
}

fn dims_of((a, b, c): (usize, usize, usize)) -> PyResult<Dims> {
    Dims::new(a, b, c).map_err(py_err)
}

fn dims_tuple(d: Dims) -> (usize, usize, usize) {
    (d.a(), d.b(), d.c())
}

fn rows_of(m: &DMatrix<Complex64>) -> Vec<Vec<Complex64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Normalized pure state on `A⊗B⊗C`, amplitudes in row-major `(i, j, k)` order.
#[pyclass(module = "qrecon", name = "PureState", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyPureState(qrecon_core::PureState);

#[pymethods]
impl PyPureState {
    #[new]
    #[pyo3(signature = (dims, amplitudes, normalize = false))]
    fn new(dims: (usize, usize, usize), amplitudes: Vec<Complex64>, normalize: bool) -> PyResult<Self> {
        let d = dims_of(dims)?;
        let v = DVector::from_vec(amplitudes);
        let psi = if normalize { qrecon_core::PureState::normalized(d, v) } else { qrecon_core::PureState::new(d, v) };
        psi.map(PyPureState).map_err(py_err)
    }

    #[staticmethod]
    fn basis(dims: (usize, usize, usize), i: usize, j: usize, k: usize) -> PyResult<Self> {
        qrecon_core::PureState::basis(dims_of(dims)?, i, j, k).map(PyPureState).map_err(py_err)
    }

    #[getter]
    fn dims(&self) -> (usize, usize, usize) {
        dims_tuple(self.0.dims())
    }

    #[getter]
    fn amplitudes(&self) -> Vec<Complex64> {
        self.0.amplitudes().iter().copied().collect()
    }

    fn amplitude(&self, i: usize, j: usize, k: usize) -> PyResult<Complex64> {
        self.0.amplitude(i, j, k).map_err(py_err)
    }

    fn with_global_phase(&self, theta: f64) -> Self {
        PyPureState(self.0.with_global_phase(theta))
    }

    /// Reduced density matrix over `keep`, e.g. `"AB"`.
    fn partial_trace(&self, keep: &str) -> PyResult<PyDensityMatrix> {
        let keep = parse_parties(keep).map_err(py_err)?;
        self.0.partial_trace(&keep).map(PyDensityMatrix).map_err(py_err)
    }

    fn density_matrix(&self) -> PyDensityMatrix {
        PyDensityMatrix(self.0.density_matrix())
    }

    fn __len__(&self) -> usize {
        self.0.dims().total()
    }

    fn __repr__(&self) -> String {
        format!("PureState(dims={})", self.0.dims())
    }
}

/// Density matrix over an ordered set of labeled parties.
#[pyclass(module = "qrecon", name = "DensityMatrix", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyDensityMatrix(qrecon_core::DensityMatrix);

#[pymethods]
impl PyDensityMatrix {
    #[new]
    fn new(subsystems: &str, dims: Vec<usize>, matrix: Vec<Vec<Complex64>>) -> PyResult<Self> {
        let parties = parse_parties(subsystems).map_err(py_err)?;
        let n = matrix.len();
        if matrix.iter().any(|r| r.len() != n) {
            return Err(ContractError::new_err("matrix rows must all have the same length as the row count"));
        }
        let m = DMatrix::from_fn(n, n, |r, c| matrix[r][c]);
        qrecon_core::DensityMatrix::new(parties, dims, m).map(PyDensityMatrix).map_err(py_err)
    }

    #[getter]
    fn subsystems(&self) -> String {
        format_parties(self.0.parties())
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.0.local_dims().to_vec()
    }

    #[getter]
    fn matrix(&self) -> Vec<Vec<Complex64>> {
        rows_of(self.0.matrix())
    }

    fn trace(&self) -> f64 {
        self.0.trace()
    }

    fn purity(&self) -> f64 {
        self.0.purity()
    }

    fn partial_trace(&self, keep: &str) -> PyResult<PyDensityMatrix> {
        let keep = parse_parties(keep).map_err(py_err)?;
        self.0.partial_trace(&keep).map(PyDensityMatrix).map_err(py_err)
    }

    /// Frobenius distance to another density matrix over the same parties.
    fn distance(&self, other: &PyDensityMatrix) -> PyResult<f64> {
        self.0.distance(&other.0).map_err(py_err)
    }

    /// Descending eigenvalues above `rank_threshold`.
    #[pyo3(signature = (rank_threshold = 1e-10))]
    fn eigenvalues(&self, rank_threshold: f64) -> PyResult<Vec<f64>> {
        qrecon_core::eig_hermitian(&self.0, rank_threshold).map(|s| s.eigenvalues().to_vec()).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("DensityMatrix(subsystems={:?}, dims={:?})", self.subsystems(), self.0.local_dims())
    }
}

/// Result of a successful reconstruction.
#[pyclass(module = "qrecon", name = "ReconstructionReport", frozen, get_all)]
pub struct PyReconstructionReport {
    state: PyPureState,
    marginal_residual_ab: f64,
    marginal_residual_bc: f64,
    eq8_residual: f64,
    cycle_residual: f64,
    alpha: Vec<f64>,
    gamma: Vec<f64>,
    genericity_flags: Vec<String>,
}

#[pymethods]
impl PyReconstructionReport {
    fn __repr__(&self) -> String {
        format!(
            "ReconstructionReport(eq8_residual={:e}, cycle_residual={:e}, flags={:?})",
            self.eq8_residual, self.cycle_residual, self.genericity_flags
        )
    }
}

fn describe_flag(flag: &GenericityFlag) -> String {
    match flag {
        GenericityFlag::DegenerateSpectrum { party, clusters } => {
            format!("degenerate spectrum of rho_{party} at {clusters:?}")
        }
        GenericityFlag::PrunedEdges { count, threshold } => format!("{count} phase edges pruned below {threshold:e}"),
    }
}

#[pyfunction]
fn sample_haar_state(dims: (usize, usize, usize), seed: u64) -> PyResult<PyPureState> {
    Ok(PyPureState(qrecon_core::harness::sample_haar_state(dims_of(dims)?, seed)))
}

#[pyfunction]
fn fidelity(a: &PyPureState, b: &PyPureState) -> PyResult<f64> {
    qrecon_core::fidelity(&a.0, &b.0).map_err(py_err)
}

#[pyfunction]
fn purity(rho: &PyDensityMatrix) -> f64 {
    qrecon_core::purity(&rho.0)
}

/// Reduced density matrix of a `PureState` or `DensityMatrix`.
#[pyfunction]
fn partial_trace(obj: &Bound<'_, PyAny>, keep: &str) -> PyResult<PyDensityMatrix> {
    if let Ok(psi) = obj.cast::<PyPureState>() {
        return psi.get().partial_trace(keep);
    }
    if let Ok(rho) = obj.cast::<PyDensityMatrix>() {
        return rho.get().partial_trace(keep);
    }
    Err(ContractError::new_err("partial_trace expects a PureState or a DensityMatrix"))
}

fn config_from(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<ReconstructionConfig> {
    let mut config = ReconstructionConfig::default();
    if let Some(kwargs) = kwargs {
        for (key, value) in kwargs.iter() {
            let key: String = key.extract()?;
            let value: f64 = value.extract()?;
            let slot = match key.as_str() {
                "rank_threshold" => &mut config.rank_threshold,
                "gap_tol" => &mut config.gap_tol,
                "pair_tol" => &mut config.pair_tol,
                "edge_tol" => &mut config.edge_tol,
                "phase_tol" => &mut config.phase_tol,
                "marginal_tol" => &mut config.marginal_tol,
                other => return Err(ContractError::new_err(format!("unknown tolerance {other:?}"))),
            };
            *slot = value;
        }
    }
    config.validate().map_err(py_err)?;
    Ok(config)
}

/// Default tolerances as a dict.
#[pyfunction]
fn default_config(py: Python<'_>) -> PyResult<Bound<'_, PyDict>> {
    let c = ReconstructionConfig::default();
    let d = PyDict::new(py);
    d.set_item("rank_threshold", c.rank_threshold)?;
    d.set_item("gap_tol", c.gap_tol)?;
    d.set_item("pair_tol", c.pair_tol)?;
    d.set_item("edge_tol", c.edge_tol)?;
    d.set_item("phase_tol", c.phase_tol)?;
    d.set_item("marginal_tol", c.marginal_tol)?;
    Ok(d)
}

/// Reconstructs the pure state with marginals `rho_ab` and `rho_bc`.
/// Tolerances may be overridden by keyword.
#[pyfunction]
#[pyo3(signature = (rho_ab, rho_bc, dims, **tolerances))]
fn reconstruct_tripartite(
    py: Python<'_>,
    rho_ab: &PyDensityMatrix,
    rho_bc: &PyDensityMatrix,
    dims: (usize, usize, usize),
    tolerances: Option<&Bound<'_, PyDict>>,
) -> PyResult<PyReconstructionReport> {
    let config = config_from(tolerances)?;
    let d = dims_of(dims)?;
    let (ab, bc) = (rho_ab.0.clone(), rho_bc.0.clone());
    let r = py
        .detach(move || qrecon_core::reconstruct_tripartite(&ab, &bc, d, &config))
        .map_err(py_err)?;
    Ok(PyReconstructionReport {
        state: PyPureState(r.state),
        marginal_residual_ab: r.marginal_residual_ab,
        marginal_residual_bc: r.marginal_residual_bc,
        eq8_residual: r.eq8_residual,
        cycle_residual: r.cycle_residual,
        alpha: r.phases.alpha,
        gamma: r.phases.gamma,
        genericity_flags: r.genericity_flags.iter().map(describe_flag).collect(),
    })
}

/// Runs `trials` Haar round trips and returns summary statistics.
#[pyfunction]
#[pyo3(signature = (dims, trials, seed_base = 0, **tolerances))]
fn roundtrip<'py>(
    py: Python<'py>,
    dims: (usize, usize, usize),
    trials: usize,
    seed_base: u64,
    tolerances: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyDict>> {
    let config = config_from(tolerances)?;
    let d = dims_of(dims)?;
    if trials == 0 {
        return Err(ContractError::new_err("trials must be at least 1"));
    }
    let summary = py
        .detach(move || batch_stats(&run_batch(d, trials, seed_base, &config)))
        .map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("trials", summary.trials)?;
    out.set_item("successes", summary.successes)?;
    out.set_item("success_rate", summary.success_rate)?;
    out.set_item("min_fidelity", summary.min_fidelity())?;
    out.set_item("max_eq8_residual", summary.eq8_residual.map(|q| q.max))?;
    out.set_item("max_cycle_residual", summary.cycle_residual.map(|q| q.max))?;
    out.set_item("outcomes", summary.outcomes.into_iter().collect::<BTreeMap<_, _>>())?;
    Ok(out)
}

#[pymodule]
fn qrecon(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add_class::<PyPureState>()?;
    m.add_class::<PyDensityMatrix>()?;
    m.add_class::<PyReconstructionReport>()?;
    m.add_function(wrap_pyfunction!(sample_haar_state, m)?)?;
    m.add_function(wrap_pyfunction!(fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(purity, m)?)?;
    m.add_function(wrap_pyfunction!(partial_trace, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct_tripartite, m)?)?;
    m.add_function(wrap_pyfunction!(roundtrip, m)?)?;
    m.add("QreconError", py.get_type::<QreconError>())?;
    m.add("ContractError", py.get_type::<ContractError>())?;
    m.add("NumericalError", py.get_type::<NumericalError>())?;
    m.add("ReconstructionError", py.get_type::<ReconstructionError>())?;
    m.add("SpectrumMismatch", py.get_type::<SpectrumMismatch>())?;
    m.add("GenericityViolation", py.get_type::<GenericityViolation>())?;
    m.add("PhaseGraphDisconnected", py.get_type::<PhaseGraphDisconnected>())?;
    m.add("PhaseInconsistency", py.get_type::<PhaseInconsistency>())?;
    m.add("ExpansionLeakage", py.get_type::<ExpansionLeakage>())?;
    m.add("MarginalInconsistency", py.get_type::<MarginalInconsistency>())?;
    Ok(())
}
