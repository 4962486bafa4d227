//! Discrete-time transfer functions on the unit circle and their H-infinity
//! norms.
//!
//! Two kinds are supported: the disturbance-to-state resolvent
//! `(zI - K)^{-1}` and a constant (static) gain matrix, whose H-infinity norm
//! reduces to its largest singular value.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

pub const DEFAULT_GRID_POINTS: usize = 4096;
pub const DEFAULT_REFINEMENT_TOL: f64 = 1e-10;
pub const MIN_GRID_POINTS: usize = 16;
/// Evaluation points closer than this to an eigenvalue are rejected.
pub const POLE_DISTANCE_TOL: f64 = 1e-12;
/// Spectral radii in `[1 - ILL_CONDITIONED_MARGIN, 1)` are flagged.
pub const ILL_CONDITIONED_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum TransferFunction {
    /// `(e^{jw} I - K)^{-1}`
    Resolvent(DMatrix<f64>),
    /// `M`, constant in frequency.
    Constant(DMatrix<f64>),
}

impl TransferFunction {
    pub fn resolvent(k: DMatrix<f64>) -> Result<Self> {
        if k.nrows() != k.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "resolvent needs a square matrix, got {}x{}",
                k.nrows(),
                k.ncols()
            )));
        }
        linalg::ensure_finite(&k, "state operator")?;
        Ok(Self::Resolvent(k))
    }

    pub fn constant(m: DMatrix<f64>) -> Result<Self> {
        linalg::ensure_finite(&m, "gain matrix")?;
        Ok(Self::Constant(m))
    }
}

pub fn spectral_radius(k: &DMatrix<f64>) -> Result<f64> {
    if k.nrows() != k.ncols() {
        return Err(Error::DimensionMismatch(
            "spectral radius needs a square matrix".into(),
        ));
    }
    linalg::ensure_finite(k, "matrix")?;
    if k.is_empty() {
        return Ok(0.0);
    }
    Ok(k.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone)]
pub struct FrequencyResponse {
    pub matrix: CMatrix,
    pub sigma_max: f64,
}

fn unit_circle(omega: f64) -> Complex64 {
    Complex64::from_polar(1.0, omega)
}

fn shifted(k: &DMatrix<f64>, z: Complex64) -> CMatrix {
    let mut m = linalg::to_complex(k).map(|v| -v);
    for i in 0..k.nrows() {
        m[(i, i)] += z;
    }
    m
}

pub fn frequency_response(tf: &TransferFunction, omega: f64) -> Result<FrequencyResponse> {
    match tf {
        TransferFunction::Constant(m) => Ok(FrequencyResponse {
            matrix: linalg::to_complex(m),
            sigma_max: linalg::sigma_max_real(m),
        }),
        TransferFunction::Resolvent(k) => {
            let z = unit_circle(omega);
            let eigs = k.complex_eigenvalues();
            if let Some(closest) = eigs
                .iter()
                .min_by(|a, b| (*a - z).norm().total_cmp(&(*b - z).norm()))
            {
                let distance = (closest - z).norm();
                if distance <= POLE_DISTANCE_TOL {
                    return Err(Error::PoleProximity {
                        eigenvalue: *closest,
                        distance,
                    });
                }
            }
            let n = k.nrows();
            let inv =
                shifted(k, z)
                    .lu()
                    .solve(&CMatrix::identity(n, n))
                    .ok_or(Error::PoleProximity {
                        eigenvalue: z,
                        distance: 0.0,
                    })?;
            let sigma_max = linalg::sigma_max(&inv);
            Ok(FrequencyResponse {
                matrix: inv,
                sigma_max,
            })
        }
    }
}

// sigma_max((zI - K)^{-1}) = 1 / sigma_min(zI - K); avoids forming the inverse.
fn resolvent_gain(k: &DMatrix<f64>, omega: f64) -> f64 {
    let s = linalg::sigma_min(&shifted(k, unit_circle(omega)));
    if s > 0.0 {
        1.0 / s
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TransferKind {
    #[serde(rename = "resolvent")]
    Resolvent,
    #[serde(rename = "constant")]
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HinfReport {
    pub kind: TransferKind,
    /// `f64::INFINITY` when the resolvent has a pole on or outside the unit circle.
    #[serde(with = "inf_f64")]
    pub value: f64,
    pub omega_star: f64,
    pub spectral_radius: f64,
    pub grid_points: usize,
    pub refinement_tol: f64,
    pub converged: bool,
    /// Spectral radius within `ILL_CONDITIONED_MARGIN` of the unit circle.
    pub ill_conditioned: bool,
}

impl HinfReport {
    pub fn is_infinite(&self) -> bool {
        self.value.is_infinite()
    }
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Supremum of `sigma_max` over `w in [0, pi]`: uniform grid sweep followed by
/// golden-section refinement around the best grid point and around the
/// argument of every eigenvalue (where resolvent peaks concentrate).
pub fn hinf_norm(
    tf: &TransferFunction,
    grid_points: usize,
    refinement_tol: f64,
) -> Result<HinfReport> {
    if grid_points < MIN_GRID_POINTS {
        return Err(Error::Parameter(format!(
            "grid_points must be at least {MIN_GRID_POINTS}, got {grid_points}"
        )));
    }
    if !(refinement_tol > 0.0) {
        return Err(Error::Parameter("refinement_tol must be positive".into()));
    }
    let k = match tf {
        TransferFunction::Constant(m) => {
            return Ok(HinfReport {
                kind: TransferKind::Constant,
                value: linalg::sigma_max_real(m),
                omega_star: 0.0,
                spectral_radius: 0.0,
                grid_points,
                refinement_tol,
                converged: true,
                ill_conditioned: false,
            })
        }
        TransferFunction::Resolvent(k) => k,
    };
    let rho = spectral_radius(k)?;
    if rho >= 1.0 {
        return Ok(HinfReport {
            kind: TransferKind::Resolvent,
            value: f64::INFINITY,
            omega_star: 0.0,
            spectral_radius: rho,
            grid_points,
            refinement_tol,
            converged: false,
            ill_conditioned: false,
        });
    }
    if k.is_empty() {
        return Ok(HinfReport {
            kind: TransferKind::Resolvent,
            value: 0.0,
            omega_star: 0.0,
            spectral_radius: 0.0,
            grid_points,
            refinement_tol,
            converged: true,
            ill_conditioned: false,
        });
    }

    let step = PI / (grid_points - 1) as f64;
    let gains: Vec<f64> = (0..grid_points)
        .into_par_iter()
        .map(|i| resolvent_gain(k, i as f64 * step))
        .collect();
    let (best_i, mut best_val) =
        gains
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, g)| if g > acc.1 { (i, g) } else { acc },
            );
    let mut best_omega = best_i as f64 * step;

    let mut centres = vec![best_omega];
    centres.extend(k.complex_eigenvalues().iter().map(|z| z.arg().abs()));
    let f = |w: f64| resolvent_gain(k, w);
    let refined: Vec<(f64, f64)> = centres
        .par_iter()
        .map(|&c| {
            let lo = (c - step).max(0.0);
            let hi = (c + step).min(PI);
            golden_max(&f, lo, hi, refinement_tol)
        })
        .collect();
    for (w, v) in refined {
        if v > best_val {
            best_val = v;
            best_omega = w;
        }
    }

    Ok(HinfReport {
        kind: TransferKind::Resolvent,
        value: best_val,
        omega_star: best_omega,
        spectral_radius: rho,
        grid_points,
        refinement_tol,
        converged: true,
        ill_conditioned: rho >= 1.0 - ILL_CONDITIONED_MARGIN,
    })
}

/// Serialises non-finite magnitudes as the string `"inf"`.
pub(crate) mod inf_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(de::Error::custom(format!(
                "expected number or \"inf\", got {s:?}"
            ))),
        }
    }
}

/// [`inf_f64`] for optional magnitudes; `None` is written as `null`.
pub(crate) mod inf_f64_opt {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => super::inf_f64::serialize(x, s),
            None => s.serialize_none(),
        }
    }

    #[derive(Deserialize)]
    struct Wrap(#[serde(with = "super::inf_f64")] f64);

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}
