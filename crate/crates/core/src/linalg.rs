//! Dense linear-algebra helpers shared by the fitting and spectral modules.
//!
//! Matrices are `nalgebra` types throughout. Singular value decompositions go
//! through `faer`, whose SVD stays accurate on exactly rank-deficient snapshot
//! matrices where the `nalgebra` one does not. [`eigen_decompose`] derives
//! eigenvectors of a general real matrix from its complex Schur form by
//! back-substitution.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, Scalar, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub(crate) fn ensure_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Data(format!("{what} contains non-finite entries")))
    }
}

pub(crate) fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Compact SVD truncated at `sigma_i >= rank_tol * sigma_1`.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// Left singular vectors, `rows x r`.
    pub u: DMatrix<f64>,
    /// Retained singular values, descending.
    pub s: Vec<f64>,
    /// Right singular vectors, `cols x r`.
    pub v: DMatrix<f64>,
    /// Every singular value of the input, descending.
    pub all_singular_values: Vec<f64>,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `V_r S_r^{-1}`, the right factor shared by every DMD variant.
    pub fn v_sinv(&self) -> DMatrix<f64> {
        let mut out = self.v.clone();
        for (j, s) in self.s.iter().enumerate() {
            out.column_mut(j).scale_mut(1.0 / s);
        }
        out
    }

    /// Rank-truncated Moore-Penrose pseudoinverse `V_r S_r^{-1} U_r^T`.
    pub fn pseudo_inverse(&self) -> DMatrix<f64> {
        self.v_sinv() * self.u.transpose()
    }
}

pub fn truncated_svd(m: &DMatrix<f64>, rank_tol: f64) -> Result<TruncatedSvd> {
    if !(rank_tol > 0.0 && rank_tol < 1.0) {
        return Err(Error::Parameter(format!(
            "rank_tol must lie in (0, 1), got {rank_tol}"
        )));
    }
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::EmptyInput("snapshot matrix has no entries".into()));
    }
    ensure_finite(m, "snapshot matrix")?;
    let svd = to_faer(m)
        .thin_svd()
        .map_err(|e| Error::Degenerate(format!("SVD did not converge: {e:?}")))?;
    let (fu, fs, fv) = (svd.U(), svd.S(), svd.V());
    let sv: Vec<f64> = (0..fs.dim()).map(|i| fs[i]).collect();
    let sigma1 = sv.first().copied().unwrap_or(0.0);
    if sigma1 <= 0.0 {
        return Err(Error::Degenerate(
            "snapshot matrix is identically zero".into(),
        ));
    }
    let r = sv.iter().take_while(|&&s| s >= rank_tol * sigma1).count();
    let u = DMatrix::from_fn(m.nrows(), r, |i, j| fu[(i, j)]);
    let v = DMatrix::from_fn(m.ncols(), r, |i, j| fv[(i, j)]);
    Ok(TruncatedSvd {
        u,
        s: sv[..r].to_vec(),
        v,
        all_singular_values: sv,
    })
}

/// Deterministic eigenvalue order: modulus descending, then real part
/// descending, then imaginary part descending.
pub fn eigen_order(a: &Complex64, b: &Complex64) -> Ordering {
    b.norm()
        .total_cmp(&a.norm())
        .then_with(|| b.re.total_cmp(&a.re))
        .then_with(|| b.im.total_cmp(&a.im))
}

/// Eigenvalues and unit-norm eigenvectors of a real square matrix, sorted by
/// [`eigen_order`]. Conjugate pairs are symmetrised so that they sort adjacently.
pub fn eigen_decompose(a: &DMatrix<f64>) -> (Vec<Complex64>, Vec<CVector>) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let (q, t) = Schur::new(to_complex(a)).unpack();
    let scale = t
        .iter()
        .map(|z| z.norm())
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * scale;

    let mut values: Vec<Complex64> = (0..n).map(|k| t[(k, k)]).collect();
    let mut vectors: Vec<CVector> = (0..n)
        .map(|k| {
            let lambda = t[(k, k)];
            let mut y = CVector::zeros(n);
            y[k] = Complex64::new(1.0, 0.0);
            for j in (0..k).rev() {
                let mut acc = Complex64::new(0.0, 0.0);
                for l in (j + 1)..=k {
                    acc += t[(j, l)] * y[l];
                }
                let mut d = t[(j, j)] - lambda;
                if d.norm() < small {
                    d = Complex64::new(small, 0.0);
                }
                y[j] = -acc / d;
            }
            let v = &q * y;
            let norm = v.norm();
            v / Complex64::new(norm, 0.0)
        })
        .collect();

    symmetrise_conjugates(&mut values, &mut vectors, scale);

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eigen_order(&values[i], &values[j]));
    let values = idx.iter().map(|&i| values[i]).collect();
    let vectors = idx.iter().map(|&i| vectors[i].clone()).collect();
    (values, vectors)
}

// A real matrix has a conjugate-closed spectrum; Schur rounding breaks that
// symmetry by a few ulps, which would make the sort order depend on noise.
fn symmetrise_conjugates(values: &mut [Complex64], vectors: &mut [CVector], scale: f64) {
    let tol = 1e-12 * scale;
    let n = values.len();
    let mut used = vec![false; n];
    for i in 0..n {
        if used[i] {
            continue;
        }
        if values[i].im.abs() <= tol {
            values[i].im = 0.0;
            used[i] = true;
            continue;
        }
        let target = values[i].conj();
        let partner = (0..n).filter(|&j| j != i && !used[j]).min_by(|&a, &b| {
            (values[a] - target)
                .norm()
                .total_cmp(&(values[b] - target).norm())
        });
        used[i] = true;
        if let Some(j) = partner {
            if (values[j] - target).norm() <= 1e-8 * scale.max(1.0) {
                let avg = (values[i] + values[j].conj()) * 0.5;
                let (pos, neg) = if avg.im > 0.0 { (i, j) } else { (j, i) };
                let avg = if avg.im > 0.0 { avg } else { avg.conj() };
                values[pos] = avg;
                values[neg] = avg.conj();
                vectors[neg] = vectors[pos].map(|z| z.conj());
                used[j] = true;
            }
        }
    }
}

fn to_faer<T: Scalar + Copy>(m: &DMatrix<T>) -> faer::Mat<T> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

// Singular values, descending. A non-converged SVD yields NaN so that callers
// surface it instead of silently using a wrong value.
fn singular_values_c(m: &CMatrix) -> Vec<f64> {
    to_faer(m)
        .singular_values()
        .unwrap_or_else(|_| vec![f64::NAN])
}

/// Largest singular value of a complex matrix (0 for an empty matrix).
pub fn sigma_max(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_values_c(m).first().copied().unwrap_or(0.0)
}

/// Smallest singular value of a complex square matrix.
pub fn sigma_min(m: &CMatrix) -> f64 {
    singular_values_c(m)
        .last()
        .copied()
        .unwrap_or(f64::INFINITY)
}

pub fn sigma_max_real(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    to_faer(m)
        .singular_values()
        .map_or(f64::NAN, |s| s.first().copied().unwrap_or(0.0))
}
