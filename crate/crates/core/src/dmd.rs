//! Finite-dimensional Koopman approximations fitted by dynamic mode
//! decomposition (standard and exact variants) and by a truncated
//! pseudoinverse for the non-square state-to-action operator.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CVector, TruncatedSvd};
use crate::trajectory::{
    build_action_pairs, build_state_snapshots, MeanTrajectory, SnapshotKind, SnapshotPair,
};

pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Eigenvalues with `|lambda| <= ZERO_EIGENVALUE_RTOL * ||A_tilde||_F` count as zero.
pub const ZERO_EIGENVALUE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DmdResult {
    pub operator: DMatrix<f64>,
    /// Nonzero eigenvalues, sorted by [`linalg::eigen_order`].
    pub eigenvalues: Vec<Complex64>,
    /// `modes[i]` pairs with `eigenvalues[i]`.
    pub modes: Vec<CVector>,
    pub rank: usize,
    /// All singular values of the left snapshot matrix, descending.
    pub singular_values: Vec<f64>,
    /// `||right - operator * left||_F / ||right||_F`.
    pub residual: f64,
    /// Eigenvalues of the reduced operator that were numerically zero and
    /// therefore carry no mode.
    pub zero_eigenvalues: usize,
}

struct ReducedFit {
    svd: TruncatedSvd,
    /// `Y V_r S_r^{-1}`
    y_v_sinv: DMatrix<f64>,
    eigenvalues: Vec<Complex64>,
    modes: Vec<CVector>,
    zero_eigenvalues: usize,
}

fn reduced_fit(pair: &SnapshotPair, rank_tol: f64) -> Result<ReducedFit> {
    if pair.left.ncols() == 0 {
        return Err(Error::EmptyInput("snapshot pair has no columns".into()));
    }
    if pair.left.nrows() != pair.right.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "DMD needs square dynamics: left has {} rows, right has {}",
            pair.left.nrows(),
            pair.right.nrows()
        )));
    }
    linalg::ensure_finite(&pair.right, "right snapshot matrix")?;
    let svd = linalg::truncated_svd(&pair.left, rank_tol)?;
    let y_v_sinv = &pair.right * svd.v_sinv();
    let a_tilde = svd.u.transpose() * &y_v_sinv;

    let (values, vectors) = linalg::eigen_decompose(&a_tilde);
    let zero_cut = ZERO_EIGENVALUE_RTOL * a_tilde.norm();
    let y_c = linalg::to_complex(&y_v_sinv);
    let mut eigenvalues = Vec::new();
    let mut modes = Vec::new();
    let mut zero_eigenvalues = 0;
    for (lambda, v) in values.into_iter().zip(vectors) {
        if lambda.norm() <= zero_cut || lambda.norm() == 0.0 {
            zero_eigenvalues += 1;
            continue;
        }
        modes.push(&y_c * v / lambda);
        eigenvalues.push(lambda);
    }
    Ok(ReducedFit {
        svd,
        y_v_sinv,
        eigenvalues,
        modes,
        zero_eigenvalues,
    })
}

fn relative_misfit(pair: &SnapshotPair, operator: &DMatrix<f64>) -> f64 {
    let misfit = (&pair.right - operator * &pair.left).norm();
    let scale = pair.right.norm();
    if scale > 0.0 {
        misfit / scale
    } else {
        misfit
    }
}

/// Standard DMD on sequential snapshots: `operator = U_r A_tilde U_r^T`.
pub fn dmd_standard(pair: &SnapshotPair, rank_tol: f64) -> Result<DmdResult> {
    if pair.kind != SnapshotKind::StateShifted {
        return Err(Error::Parameter(
            "standard DMD needs a state-shifted snapshot pair".into(),
        ));
    }
    let fit = reduced_fit(pair, rank_tol)?;
    let u = &fit.svd.u;
    let operator = u * (u.transpose() * &fit.y_v_sinv) * u.transpose();
    let residual = relative_misfit(pair, &operator);
    Ok(DmdResult {
        operator,
        eigenvalues: fit.eigenvalues,
        modes: fit.modes,
        rank: fit.svd.rank(),
        singular_values: fit.svd.all_singular_values,
        residual,
        zero_eigenvalues: fit.zero_eigenvalues,
    })
}

/// Exact DMD on arbitrary column-aligned pairs `(X, Y)`:
/// `operator = Y X^+`, whose nonzero eigenpairs are exactly the returned
/// `(mode, eigenvalue)` pairs.
pub fn dmd_exact(pair: &SnapshotPair, rank_tol: f64) -> Result<DmdResult> {
    let fit = reduced_fit(pair, rank_tol)?;
    let operator = &fit.y_v_sinv * fit.svd.u.transpose();
    let residual = relative_misfit(pair, &operator);
    Ok(DmdResult {
        operator,
        eigenvalues: fit.eigenvalues,
        modes: fit.modes,
        rank: fit.svd.rank(),
        singular_values: fit.svd.all_singular_values,
        residual,
        zero_eigenvalues: fit.zero_eigenvalues,
    })
}

pub fn fit_state_operator(mean: &MeanTrajectory, rank_tol: f64) -> Result<DmdResult> {
    dmd_standard(&build_state_snapshots(mean)?, rank_tol)
}

/// Least-squares `K_f = U_bar X_bar^+` over all `K` state/action column pairs.
pub fn fit_action_operator(mean: &MeanTrajectory, rank_tol: f64) -> Result<DMatrix<f64>> {
    let pair = build_action_pairs(mean)?;
    action_operator_from_pair(&pair, rank_tol)
}

pub fn action_operator_from_pair(pair: &SnapshotPair, rank_tol: f64) -> Result<DMatrix<f64>> {
    linalg::ensure_finite(&pair.right, "action snapshot matrix")?;
    let svd = linalg::truncated_svd(&pair.left, rank_tol)?;
    Ok(&pair.right * svd.pseudo_inverse())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    pub rank_tol: f64,
    /// Columns in the state snapshot pair.
    pub snapshot_count: usize,
    /// Columns in the state/action pair.
    pub action_pair_count: usize,
    /// Runs averaged into the fitted mean trajectory.
    pub r_count: usize,
    pub action_residual: f64,
    /// `||K_h - A||_F / ||A||_F` when a ground-truth transition matrix is known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_state_error: Option<f64>,
    /// `||K_f - F||_F / ||F||_F` when a ground-truth policy matrix is known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_action_error: Option<f64>,
}

/// Interpretable linear surrogate of a policy/environment loop:
/// `x_{k+1} = K_h x_k`, `u_k = K_f x_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct KoopmanModel {
    pub state_operator: DMatrix<f64>,
    pub action_operator: DMatrix<f64>,
    pub state_dmd: DmdResult,
    pub fit_metadata: FitMetadata,
}

impl KoopmanModel {
    pub fn fit(mean: &MeanTrajectory, rank_tol: f64) -> Result<Self> {
        let state_pair = build_state_snapshots(mean)?;
        let action_pair = build_action_pairs(mean)?;
        let state_dmd = dmd_standard(&state_pair, rank_tol)?;
        let action_operator = action_operator_from_pair(&action_pair, rank_tol)?;
        let action_residual = relative_misfit(&action_pair, &action_operator);
        Ok(Self {
            state_operator: state_dmd.operator.clone(),
            action_operator,
            fit_metadata: FitMetadata {
                rank_tol,
                snapshot_count: state_pair.left.ncols(),
                action_pair_count: action_pair.left.ncols(),
                r_count: mean.r_count,
                action_residual,
                oracle_state_error: None,
                oracle_action_error: None,
            },
            state_dmd,
        })
    }

    /// Wraps known operators (e.g. a ground-truth linear system) as a model.
    pub fn from_operators(
        state_operator: DMatrix<f64>,
        action_operator: DMatrix<f64>,
    ) -> Result<Self> {
        let n = state_operator.nrows();
        if state_operator.ncols() != n {
            return Err(Error::DimensionMismatch(
                "state operator must be square".into(),
            ));
        }
        if action_operator.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "action operator has {} columns, state dimension is {n}",
                action_operator.ncols()
            )));
        }
        linalg::ensure_finite(&state_operator, "state operator")?;
        linalg::ensure_finite(&action_operator, "action operator")?;
        let (values, vectors) = linalg::eigen_decompose(&state_operator);
        let scale = state_operator.norm();
        let mut eigenvalues = Vec::new();
        let mut modes = Vec::new();
        let mut zero_eigenvalues = 0;
        for (l, v) in values.into_iter().zip(vectors) {
            if l.norm() <= ZERO_EIGENVALUE_RTOL * scale || l.norm() == 0.0 {
                zero_eigenvalues += 1;
            } else {
                eigenvalues.push(l);
                modes.push(v);
            }
        }
        Ok(Self {
            state_dmd: DmdResult {
                operator: state_operator.clone(),
                eigenvalues,
                modes,
                rank: n,
                singular_values: Vec::new(),
                residual: 0.0,
                zero_eigenvalues,
            },
            state_operator,
            action_operator,
            fit_metadata: FitMetadata {
                rank_tol: DEFAULT_RANK_TOL,
                snapshot_count: 0,
                action_pair_count: 0,
                r_count: 0,
                action_residual: 0.0,
                oracle_state_error: None,
                oracle_action_error: None,
            },
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state_operator.nrows()
    }

    pub fn action_dim(&self) -> usize {
        self.action_operator.nrows()
    }

    /// Records relative Frobenius errors against known ground-truth operators.
    pub fn record_oracle(&mut self, a: &DMatrix<f64>, f: &DMatrix<f64>) {
        if a.shape() == self.state_operator.shape() {
            self.fit_metadata.oracle_state_error = Some(relative_error(&self.state_operator, a));
        }
        if f.shape() == self.action_operator.shape() {
            self.fit_metadata.oracle_action_error = Some(relative_error(&self.action_operator, f));
        }
    }
}

pub fn relative_error(estimate: &DMatrix<f64>, truth: &DMatrix<f64>) -> f64 {
    let scale = truth.norm();
    let diff = (estimate - truth).norm();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// `steps + 1` states starting at `x0`.
    pub states: Vec<DVector<f64>>,
    /// `steps` actions.
    pub actions: Vec<DVector<f64>>,
}

pub fn predict(model: &KoopmanModel, x0: &DVector<f64>, steps: usize) -> Result<Prediction> {
    if x0.len() != model.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has dimension {}, model expects {}",
            x0.len(),
            model.state_dim()
        )));
    }
    let mut states = Vec::with_capacity(steps + 1);
    let mut actions = Vec::with_capacity(steps);
    states.push(x0.clone());
    for _ in 0..steps {
        let x = states.last().expect("non-empty");
        actions.push(&model.action_operator * x);
        let next = &model.state_operator * x;
        states.push(next);
    }
    Ok(Prediction { states, actions })
}

// ---------------------------------------------------------------------------
// JSON document

const MODEL_FORMAT: &str = "koopman-model/v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ResidualBlock {
    state: f64,
    action: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    oracle_state_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    oracle_action_error: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    n: usize,
    m: usize,
    rank: usize,
    rank_tol: f64,
    snapshot_count: usize,
    action_pair_count: usize,
    r_count: usize,
    /// Row-major `n x n`.
    state_operator: Vec<f64>,
    /// Row-major `m x n`.
    action_operator: Vec<f64>,
    eigenvalues: Vec<[f64; 2]>,
    modes: Vec<Vec<[f64; 2]>>,
    zero_eigenvalues: usize,
    singular_values: Vec<f64>,
    residuals: ResidualBlock,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn from_row_major(rows: usize, cols: usize, data: &[f64], field: &str) -> Result<DMatrix<f64>> {
    if data.len() != rows * cols {
        return Err(Error::Schema(field.into()));
    }
    Ok(DMatrix::from_row_slice(rows, cols, data))
}

impl KoopmanModel {
    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDocument {
            format: MODEL_FORMAT.into(),
            n: self.state_dim(),
            m: self.action_dim(),
            rank: self.state_dmd.rank,
            rank_tol: self.fit_metadata.rank_tol,
            snapshot_count: self.fit_metadata.snapshot_count,
            action_pair_count: self.fit_metadata.action_pair_count,
            r_count: self.fit_metadata.r_count,
            state_operator: row_major(&self.state_operator),
            action_operator: row_major(&self.action_operator),
            eigenvalues: self
                .state_dmd
                .eigenvalues
                .iter()
                .map(|z| [z.re, z.im])
                .collect(),
            modes: self
                .state_dmd
                .modes
                .iter()
                .map(|v| v.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
            zero_eigenvalues: self.state_dmd.zero_eigenvalues,
            singular_values: self.state_dmd.singular_values.clone(),
            residuals: ResidualBlock {
                state: self.state_dmd.residual,
                action: self.fit_metadata.action_residual,
                oracle_state_error: self.fit_metadata.oracle_state_error,
                oracle_action_error: self.fit_metadata.oracle_action_error,
            },
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.format != MODEL_FORMAT {
            return Err(Error::Schema("format".into()));
        }
        let state_operator = from_row_major(doc.n, doc.n, &doc.state_operator, "state_operator")?;
        let action_operator =
            from_row_major(doc.m, doc.n, &doc.action_operator, "action_operator")?;
        linalg::ensure_finite(&state_operator, "state operator")?;
        linalg::ensure_finite(&action_operator, "action operator")?;
        if doc.modes.len() != doc.eigenvalues.len() || doc.modes.iter().any(|m| m.len() != doc.n) {
            return Err(Error::Schema("modes".into()));
        }
        let eigenvalues = doc
            .eigenvalues
            .iter()
            .map(|p| Complex64::new(p[0], p[1]))
            .collect();
        let modes = doc
            .modes
            .iter()
            .map(|v| CVector::from_iterator(v.len(), v.iter().map(|p| Complex64::new(p[0], p[1]))))
            .collect();
        Ok(Self {
            state_dmd: DmdResult {
                operator: state_operator.clone(),
                eigenvalues,
                modes,
                rank: doc.rank,
                singular_values: doc.singular_values,
                residual: doc.residuals.state,
                zero_eigenvalues: doc.zero_eigenvalues,
            },
            state_operator,
            action_operator,
            fit_metadata: FitMetadata {
                rank_tol: doc.rank_tol,
                snapshot_count: doc.snapshot_count,
                action_pair_count: doc.action_pair_count,
                r_count: doc.r_count,
                action_residual: doc.residuals.action,
                oracle_state_error: doc.residuals.oracle_state_error,
                oracle_action_error: doc.residuals.oracle_action_error,
            },
        })
    }
}
