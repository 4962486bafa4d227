//! Python bindings. Matrices cross the boundary as lists of rows and
//! sequences as lists of vectors.

use koopbound::bounds::{self, BoundInputs, DisturbanceKind, DisturbanceSpec, Horizon};
use koopbound::dmd::{self, KoopmanModel};
use koopbound::hinf::{self, TransferFunction};
use koopbound::trajectory::{ensemble_mean, load_trajectories, MeanTrajectory};
use koopbound::{cli, Error};
use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        Error::Internal(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_matrix(rows: &[Vec<f64>], what: &str) -> PyResult<DMatrix<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 {
        return Err(PyValueError::new_err(format!(
            "{what} must be a non-empty list of rows"
        )));
    }
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err(format!(
            "{what} has rows of unequal length"
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn to_vectors(seq: Vec<Vec<f64>>) -> Vec<DVector<f64>> {
    seq.into_iter().map(DVector::from_vec).collect()
}

fn from_vectors(seq: &[DVector<f64>]) -> Vec<Vec<f64>> {
    seq.iter().map(|v| v.as_slice().to_vec()).collect()
}

/// Fitted (or supplied) Koopman state and action operators.
#[pyclass(name = "KoopmanModel", module = "pykoopbound")]
pub struct PyKoopmanModel {
    inner: KoopmanModel,
}

#[pymethods]
impl PyKoopmanModel {
    /// Fits a model to a mean trajectory: `states` holds K+1 state vectors,
    /// `actions` K action vectors.
    #[staticmethod]
    #[pyo3(signature = (states, actions, rank_tol = 1e-10))]
    fn fit(states: Vec<Vec<f64>>, actions: Vec<Vec<f64>>, rank_tol: f64) -> PyResult<Self> {
        let k = actions.len();
        let mean =
            MeanTrajectory::from_sequences(to_vectors(states), to_vectors(actions), vec![0.0; k])
                .map_err(py_err)?;
        Ok(Self {
            inner: KoopmanModel::fit(&mean, rank_tol).map_err(py_err)?,
        })
    }

    /// Fits a model to the ensemble mean of a trajectory file.
    #[staticmethod]
    #[pyo3(signature = (path, rank_tol = 1e-10))]
    fn fit_file(path: &str, rank_tol: f64) -> PyResult<Self> {
        let ensemble = load_trajectories(path.as_ref(), None).map_err(py_err)?;
        let mean = ensemble_mean(&ensemble).map_err(py_err)?;
        Ok(Self {
            inner: KoopmanModel::fit(&mean, rank_tol).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn from_operators(
        state_operator: Vec<Vec<f64>>,
        action_operator: Vec<Vec<f64>>,
    ) -> PyResult<Self> {
        let kh = to_matrix(&state_operator, "state_operator")?;
        let kf = to_matrix(&action_operator, "action_operator")?;
        Ok(Self {
            inner: KoopmanModel::from_operators(kh, kf).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: KoopmanModel::from_json(text).map_err(py_err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(py_err)
    }

    #[getter]
    fn state_operator(&self) -> Vec<Vec<f64>> {
        from_matrix(&self.inner.state_operator)
    }

    #[getter]
    fn action_operator(&self) -> Vec<Vec<f64>> {
        from_matrix(&self.inner.action_operator)
    }

    /// Nonzero DMD eigenvalues as `(re, im)` pairs.
    #[getter]
    fn eigenvalues(&self) -> Vec<(f64, f64)> {
        self.inner
            .state_dmd
            .eigenvalues
            .iter()
            .map(|z| (z.re, z.im))
            .collect()
    }

    #[getter]
    fn rank(&self) -> usize {
        self.inner.state_dmd.rank
    }

    #[getter]
    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }

    #[getter]
    fn action_dim(&self) -> usize {
        self.inner.action_dim()
    }

    /// `(T_hinf, Kf_hinf)`; `T_hinf` is `inf` for an unstable state operator.
    #[pyo3(signature = (grid_points = hinf::DEFAULT_GRID_POINTS, refinement_tol = hinf::DEFAULT_REFINEMENT_TOL))]
    fn norms(&self, grid_points: usize, refinement_tol: f64) -> PyResult<(f64, f64)> {
        let n = bounds::ModelNorms::compute(&self.inner, grid_points, refinement_tol)
            .map_err(py_err)?;
        Ok((n.t_hinf.value, n.kf_hinf.value))
    }

    #[allow(clippy::type_complexity)]
    /// Rolls the linear surrogate forward: `(states, actions)`.
    fn predict(&self, x0: Vec<f64>, steps: usize) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let p = dmd::predict(&self.inner, &DVector::from_vec(x0), steps).map_err(py_err)?;
        Ok((from_vectors(&p.states), from_vectors(&p.actions)))
    }

    fn __repr__(&self) -> String {
        format!(
            "KoopmanModel(n={}, m={}, rank={})",
            self.inner.state_dim(),
            self.inner.action_dim(),
            self.inner.state_dmd.rank
        )
    }
}

/// H-infinity norm of the resolvent `(zI - K)^-1` (kind="resolvent") or of a
/// constant gain (kind="constant").
#[pyfunction]
#[pyo3(signature = (matrix, kind = "resolvent", grid_points = hinf::DEFAULT_GRID_POINTS, refinement_tol = hinf::DEFAULT_REFINEMENT_TOL))]
fn hinf_norm<'py>(
    py: Python<'py>,
    matrix: Vec<Vec<f64>>,
    kind: &str,
    grid_points: usize,
    refinement_tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let m = to_matrix(&matrix, "matrix")?;
    let tf = match kind {
        "resolvent" => TransferFunction::resolvent(m),
        "constant" => TransferFunction::constant(m),
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown transfer kind `{other}`"
            )))
        }
    }
    .map_err(py_err)?;
    let r = hinf::hinf_norm(&tf, grid_points, refinement_tol).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("value", r.value)?;
    d.set_item("omega_star", r.omega_star)?;
    d.set_item("spectral_radius", r.spectral_radius)?;
    d.set_item("converged", r.converged)?;
    d.set_item("ill_conditioned", r.ill_conditioned)?;
    Ok(d)
}

/// Disturbance `w_0..w_{K-1}` rescaled to DTFT supremum `gamma`.
#[pyfunction]
#[pyo3(signature = (kind, gamma, horizon, dim, seed = 0))]
fn generate_disturbance(
    kind: &str,
    gamma: f64,
    horizon: usize,
    dim: usize,
    seed: u64,
) -> PyResult<Vec<Vec<f64>>> {
    let kind = DisturbanceKind::parse(kind).map_err(py_err)?;
    let w = bounds::generate_disturbance(&DisturbanceSpec::new(kind, gamma, horizon, dim, seed))
        .map_err(py_err)?;
    Ok(from_vectors(&w))
}

#[pyfunction]
#[pyo3(signature = (w, gamma, grid_points = None))]
fn disturbance_admissible<'py>(
    py: Python<'py>,
    w: Vec<Vec<f64>>,
    gamma: f64,
    grid_points: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let grid = grid_points.unwrap_or_else(|| bounds::default_grid_points(w.len()));
    let a = bounds::disturbance_admissible(&to_vectors(w), gamma, grid).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("admissible", a.admissible)?;
    d.set_item("sup_value", a.sup_value)?;
    d.set_item("energy", a.energy)?;
    d.set_item("max_step_norm", a.max_step_norm)?;
    d.set_item("necessary_conditions", a.necessary_conditions)?;
    Ok(d)
}

/// `(omega*, sup ||W(omega)||)` of a sequence.
#[pyfunction]
fn dtft_sup(w: Vec<Vec<f64>>) -> (f64, f64) {
    bounds::dtft_sup(&to_vectors(w))
}

/// `(M^2, M)` with `M = T_hinf * gamma`.
#[pyfunction]
fn theorem2_bounds(t_hinf: f64, gamma: f64) -> (f64, f64) {
    bounds::theorem2_bounds(t_hinf, gamma)
}

/// `(N^2, N)` with `N = Kf_hinf * T_hinf * gamma`.
#[pyfunction]
fn corollary1_bounds(kf_hinf: f64, t_hinf: f64, gamma: f64) -> (f64, f64) {
    bounds::corollary1_bounds(kf_hinf, t_hinf, gamma)
}

#[allow(clippy::too_many_arguments)]
fn inputs(
    gamma: f64,
    t_hinf: f64,
    kf_hinf: f64,
    l: f64,
    q: f64,
    c: f64,
    gamma_d: f64,
    horizon: Option<usize>,
) -> BoundInputs {
    BoundInputs {
        gamma,
        t_hinf,
        kf_hinf,
        l,
        q,
        c,
        gamma_d,
        horizon: horizon.map_or(Horizon::Infinite, Horizon::Finite),
    }
}

/// Discounted reward-impact bound; `horizon=None` means infinite.
#[pyfunction]
#[pyo3(signature = (gamma, t_hinf, kf_hinf, l, q, gamma_d, horizon = None))]
fn corollary2_bound(
    gamma: f64,
    t_hinf: f64,
    kf_hinf: f64,
    l: f64,
    q: f64,
    gamma_d: f64,
    horizon: Option<usize>,
) -> PyResult<f64> {
    bounds::corollary2_bound(&inputs(gamma, t_hinf, kf_hinf, l, q, 0.0, gamma_d, horizon))
        .map_err(py_err)
}

/// Generalization-error bound.
#[pyfunction]
fn corollary3_bound(
    gamma: f64,
    t_hinf: f64,
    kf_hinf: f64,
    l: f64,
    q: f64,
    c: f64,
    gamma_d: f64,
) -> PyResult<f64> {
    bounds::corollary3_bound(&inputs(gamma, t_hinf, kf_hinf, l, q, c, gamma_d, None))
        .map_err(py_err)
}

/// Runs the command-line tool in-process, e.g. `run_cli(["simulate", "--config", "c.toml"])`.
/// Returns the exit code.
#[pyfunction]
fn run_cli(args: Vec<String>) -> i32 {
    cli::main_with_args(std::iter::once("koopbound".to_string()).chain(args))
}

#[pymodule]
fn pykoopbound(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKoopmanModel>()?;
    m.add_function(wrap_pyfunction!(hinf_norm, m)?)?;
    m.add_function(wrap_pyfunction!(generate_disturbance, m)?)?;
    m.add_function(wrap_pyfunction!(disturbance_admissible, m)?)?;
    m.add_function(wrap_pyfunction!(dtft_sup, m)?)?;
    m.add_function(wrap_pyfunction!(theorem2_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(corollary1_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(corollary2_bound, m)?)?;
    m.add_function(wrap_pyfunction!(corollary3_bound, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
