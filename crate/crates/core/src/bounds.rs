//! Admissible disturbances, the worst-case impact bounds derived from a fitted
//! Koopman model, and their empirical verification on simulated ensembles.
//!
//! A disturbance sequence `w_0..w_{K-1}` is admissible at level `gamma` when
//! its DTFT satisfies `sup_w ||sum_k w_k e^{-jwk}||_2 <= gamma`. With
//! `M = ||T||_inf * gamma` and `N = ||K_f||_inf * M`:
//!
//! * state deviation energy `<= M^2`, peak `<= M`
//! * action deviation energy `<= N^2`, peak `<= N`
//! * discounted reward impact `<= L (Q + M + N) (1 - gamma_d^{K+1}) / (1 - gamma_d)`
//! * generalization error `<= (L (Q + M + N) + L C) / (1 - gamma_d)`

use std::collections::HashSet;
use std::f64::consts::{PI, TAU};
use std::io::Write;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dmd::KoopmanModel;
use crate::error::{Error, Result};
use crate::hinf::{self, hinf_norm, HinfReport, TransferFunction};
use crate::trajectory::{MeanTrajectory, TrajectoryEnsemble};

/// Relative slack on the admissibility test `sup <= gamma (1 + tol)`.
pub const ADMISSIBILITY_RTOL: f64 = 1e-9;
/// A measured value violates a bound when `measured > bound (1 + rtol) + atol`.
pub const VIOLATION_RTOL: f64 = 1e-9;
pub const VIOLATION_ATOL: f64 = 1e-12;
/// Pairs closer than this in `||dx|| + ||du||` are skipped by the Lipschitz estimate.
pub const LIPSCHITZ_DENOM_TOL: f64 = 1e-12;
/// Sample cap for the quadratic-cost Lipschitz estimate.
pub const MAX_LIPSCHITZ_SAMPLES: usize = 2000;
/// DFT oversampling factor relative to the sequence length.
pub const GRID_OVERSAMPLING: usize = 8;

pub fn default_grid_points(horizon: usize) -> usize {
    (GRID_OVERSAMPLING * horizon).max(hinf::MIN_GRID_POINTS)
}

// ---------------------------------------------------------------------------
// Disturbances

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceKind {
    Impulse,
    ConstantDirection,
    ScaledGaussianProjected,
    SingleTone,
}

impl DisturbanceKind {
    pub const ALL: [DisturbanceKind; 4] = [
        DisturbanceKind::Impulse,
        DisturbanceKind::ConstantDirection,
        DisturbanceKind::ScaledGaussianProjected,
        DisturbanceKind::SingleTone,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DisturbanceKind::Impulse => "impulse",
            DisturbanceKind::ConstantDirection => "constant_direction",
            DisturbanceKind::ScaledGaussianProjected => "scaled_gaussian_projected",
            DisturbanceKind::SingleTone => "single_tone",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown disturbance kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceSpec {
    pub kind: DisturbanceKind,
    pub gamma: f64,
    pub horizon: usize,
    /// State dimension `n`.
    pub dim: usize,
    pub seed: u64,
    /// Direction for impulse, constant and tone kinds; normalised before use.
    /// Defaults to `e_1`.
    pub direction: Option<DVector<f64>>,
    /// Step at which the impulse fires.
    pub onset: usize,
    /// Tone frequency in rad/sample; drawn from the seed when `None`.
    pub frequency: Option<f64>,
    /// Coordinates the Gaussian kind may excite; all when `None`.
    pub support: Option<Vec<usize>>,
}

impl DisturbanceSpec {
    pub fn new(kind: DisturbanceKind, gamma: f64, horizon: usize, dim: usize, seed: u64) -> Self {
        Self {
            kind,
            gamma,
            horizon,
            dim,
            seed,
            direction: None,
            onset: 0,
            frequency: None,
            support: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::Parameter(format!(
                "gamma must be finite and >= 0, got {}",
                self.gamma
            )));
        }
        if self.horizon == 0 {
            return Err(Error::Parameter(
                "disturbance horizon must be at least 1".into(),
            ));
        }
        if self.dim == 0 {
            return Err(Error::Parameter(
                "disturbance dimension must be at least 1".into(),
            ));
        }
        if self.onset >= self.horizon {
            return Err(Error::Parameter(format!(
                "impulse onset {} outside horizon {}",
                self.onset, self.horizon
            )));
        }
        if let Some(d) = &self.direction {
            if d.len() != self.dim {
                return Err(Error::DimensionMismatch(format!(
                    "direction has dimension {}, expected {}",
                    d.len(),
                    self.dim
                )));
            }
            if !(d.norm() > 0.0) || !d.iter().all(|v| v.is_finite()) {
                return Err(Error::Parameter(
                    "direction must be finite and nonzero".into(),
                ));
            }
        }
        if let Some(s) = &self.support {
            if s.is_empty() || s.iter().any(|&i| i >= self.dim) {
                return Err(Error::Parameter(format!(
                    "support must be non-empty indices below {}",
                    self.dim
                )));
            }
        }
        if let Some(f) = self.frequency {
            if !f.is_finite() {
                return Err(Error::Parameter("tone frequency must be finite".into()));
            }
        }
        Ok(())
    }

    fn unit_direction(&self) -> DVector<f64> {
        match &self.direction {
            Some(d) => d / d.norm(),
            None => {
                let mut e = DVector::zeros(self.dim);
                e[0] = 1.0;
                e
            }
        }
    }
}

/// Generates `w_0..w_{K-1}` and rescales it so that its DTFT supremum equals
/// `gamma`. Impulse and constant kinds are admissible by construction.
pub fn generate_disturbance(spec: &DisturbanceSpec) -> Result<Vec<DVector<f64>>> {
    spec.validate()?;
    let (n, k_max, gamma) = (spec.dim, spec.horizon, spec.gamma);
    let mut w = vec![DVector::zeros(n); k_max];
    if gamma == 0.0 {
        return Ok(w);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.kind {
        DisturbanceKind::Impulse => {
            w[spec.onset] = spec.unit_direction() * gamma;
            return Ok(w);
        }
        DisturbanceKind::ConstantDirection => {
            let step = spec.unit_direction() * (gamma / k_max as f64);
            w.iter_mut().for_each(|wk| wk.copy_from(&step));
            return Ok(w);
        }
        DisturbanceKind::ScaledGaussianProjected => {
            let support: Vec<usize> = spec.support.clone().unwrap_or_else(|| (0..n).collect());
            for wk in w.iter_mut() {
                for &i in &support {
                    wk[i] = StandardNormal.sample(&mut rng);
                }
            }
        }
        DisturbanceKind::SingleTone => {
            let omega = spec.frequency.unwrap_or_else(|| rng.random::<f64>() * PI);
            let phase = rng.random::<f64>() * TAU;
            let d = spec.unit_direction();
            for (k, wk) in w.iter_mut().enumerate() {
                *wk = &d * (omega * k as f64 + phase).cos();
            }
        }
    }
    let (_, sup) = dtft_sup(&w);
    if sup > 0.0 {
        let scale = gamma / sup;
        w.iter_mut().for_each(|wk| *wk *= scale);
    }
    Ok(w)
}

/// `||w_hat(2 pi p / P)||_2` for `p = 0..P`, via one zero-padded FFT per coordinate.
pub fn dtft_magnitudes(w: &[DVector<f64>], grid_points: usize) -> Vec<f64> {
    let n = w.first().map_or(0, |v| v.len());
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(grid_points);
    let mut power = vec![0.0; grid_points];
    let mut buf = vec![Complex64::new(0.0, 0.0); grid_points];
    for i in 0..n {
        buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        // Wrap samples beyond the grid length (aliasing keeps Parseval exact only for P >= K).
        for (k, wk) in w.iter().enumerate() {
            buf[k % grid_points] += wk[i];
        }
        fft.process(&mut buf);
        for (p, z) in power.iter_mut().zip(&buf) {
            *p += z.norm_sqr();
        }
    }
    power.into_iter().map(f64::sqrt).collect()
}

/// `||sum_k w_k e^{-j omega k}||_2` at a single frequency.
pub fn dtft_norm_at(w: &[DVector<f64>], omega: f64) -> f64 {
    let n = w.first().map_or(0, |v| v.len());
    let phasors: Vec<(f64, f64)> = (0..w.len()).map(|k| (omega * k as f64).sin_cos()).collect();
    let mut total = 0.0;
    for i in 0..n {
        let (mut re, mut im) = (0.0, 0.0);
        for (wk, &(s, c)) in w.iter().zip(&phasors) {
            re += wk[i] * c;
            im -= wk[i] * s;
        }
        total += re * re + im * im;
    }
    total.sqrt()
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
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

/// Near-continuous DTFT supremum `(omega*, value)` of a real sequence:
/// oversampled FFT grid over `[0, pi]` plus golden-section refinement of every
/// grid local maximum within 10% of the best.
pub fn dtft_sup(w: &[DVector<f64>]) -> (f64, f64) {
    if w.is_empty() {
        return (0.0, 0.0);
    }
    let p = default_grid_points(w.len());
    let mags = dtft_magnitudes(w, p);
    let half = p / 2;
    let step = TAU / p as f64;
    let (mut best_i, mut best) = (0, mags[0]);
    for (i, &m) in mags.iter().enumerate().take(half + 1) {
        if m > best {
            best = m;
            best_i = i;
        }
    }
    let mut best_omega = best_i as f64 * step;
    if best == 0.0 {
        return (0.0, 0.0);
    }
    let candidates: Vec<usize> = (0..=half)
        .filter(|&i| {
            let left = if i == 0 { mags[1 % p] } else { mags[i - 1] };
            let right = mags[(i + 1) % p];
            mags[i] >= 0.9 * best && mags[i] >= left && mags[i] >= right
        })
        .collect();
    for i in candidates {
        let lo = (i as f64 - 1.0) * step;
        let hi = (i as f64 + 1.0) * step;
        let (om, val) = golden_max(
            |x| dtft_norm_at(w, x),
            lo.max(-step),
            hi.min(PI + step),
            1e-12,
        );
        if val > best {
            best = val;
            best_omega = om;
        }
    }
    (best_omega.abs(), best)
}

/// `(1/P) sum_p ||w_hat_p||^2`, equal to the time-domain energy for `P >= K`.
pub fn parseval_energy(w: &[DVector<f64>], grid_points: usize) -> f64 {
    let mags = dtft_magnitudes(w, grid_points);
    mags.iter().map(|m| m * m).sum::<f64>() / grid_points as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub admissible: bool,
    /// Maximum DTFT norm over the uniform grid.
    pub sup_value: f64,
    /// `sum_k ||w_k||^2`.
    pub energy: f64,
    pub max_step_norm: f64,
    /// `energy <= gamma^2` and `||w_k|| <= gamma` for all k.
    pub necessary_conditions: bool,
}

pub fn disturbance_admissible(
    w: &[DVector<f64>],
    gamma: f64,
    grid_points: usize,
) -> Result<Admissibility> {
    if w.is_empty() {
        return Err(Error::EmptyInput("disturbance sequence is empty".into()));
    }
    if grid_points < 4 * w.len() {
        return Err(Error::Parameter(format!(
            "grid_points must be >= 4K = {}, got {grid_points}",
            4 * w.len()
        )));
    }
    if !(gamma >= 0.0) {
        return Err(Error::Parameter(format!("gamma must be >= 0, got {gamma}")));
    }
    let n = w[0].len();
    if w.iter().any(|v| v.len() != n) {
        return Err(Error::DimensionMismatch(
            "disturbance vectors differ in dimension".into(),
        ));
    }
    let energy: f64 = w.iter().map(|v| v.norm_squared()).sum();
    let max_step_norm = w.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let slack = 1.0 + ADMISSIBILITY_RTOL;
    let necessary_conditions =
        energy <= gamma * gamma * slack * slack && max_step_norm <= gamma * slack;
    let sup_value = dtft_magnitudes(w, grid_points)
        .into_iter()
        .fold(0.0, f64::max);
    Ok(Admissibility {
        admissible: necessary_conditions && sup_value <= gamma * slack,
        sup_value,
        energy,
        max_step_norm,
        necessary_conditions,
    })
}

// ---------------------------------------------------------------------------
// Bound expressions

// Product with the convention 0 * inf = 0 (no disturbance, no impact).
fn product(factors: &[f64]) -> f64 {
    if factors.contains(&0.0) {
        0.0
    } else {
        factors.iter().product()
    }
}

/// `((T gamma)^2, T gamma)`.
pub fn theorem2_bounds(t_hinf: f64, gamma: f64) -> (f64, f64) {
    let m = product(&[t_hinf, gamma]);
    (m * m, m)
}

/// `((Kf T gamma)^2, Kf T gamma)`.
pub fn corollary1_bounds(kf_hinf: f64, t_hinf: f64, gamma: f64) -> (f64, f64) {
    let n = product(&[kf_hinf, t_hinf, gamma]);
    (n * n, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Finite(usize),
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub gamma: f64,
    pub t_hinf: f64,
    pub kf_hinf: f64,
    pub l: f64,
    pub q: f64,
    pub c: f64,
    pub gamma_d: f64,
    pub horizon: Horizon,
}

impl BoundInputs {
    pub fn m(&self) -> f64 {
        product(&[self.t_hinf, self.gamma])
    }

    pub fn n(&self) -> f64 {
        product(&[self.kf_hinf, self.t_hinf, self.gamma])
    }

    fn validate(&self) -> Result<()> {
        let named = [
            ("gamma", self.gamma),
            ("T_hinf", self.t_hinf),
            ("Kf_hinf", self.kf_hinf),
            ("L", self.l),
            ("Q", self.q),
            ("C", self.c),
            ("gamma_d", self.gamma_d),
        ];
        for (name, v) in named {
            if !(v >= 0.0) {
                return Err(Error::Parameter(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

fn discount_sum(gamma_d: f64, horizon: Horizon) -> Result<f64> {
    match horizon {
        Horizon::Infinite if gamma_d >= 1.0 => Err(Error::Divergence(format!(
            "infinite-horizon discount sum diverges for gamma_d = {gamma_d}"
        ))),
        Horizon::Infinite => Ok(1.0 / (1.0 - gamma_d)),
        Horizon::Finite(k) if gamma_d == 1.0 => Ok((k + 1) as f64),
        Horizon::Finite(k) => Ok((1.0 - gamma_d.powi(k as i32 + 1)) / (1.0 - gamma_d)),
    }
}

/// `L (Q + M + N) (1 - gamma_d^{K+1}) / (1 - gamma_d)`, or `L (Q + M + N) / (1 - gamma_d)` for `K = inf`.
pub fn corollary2_bound(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    let s = discount_sum(inputs.gamma_d, inputs.horizon)?;
    Ok(product(&[inputs.l, inputs.q + inputs.m() + inputs.n(), s]))
}

/// `(L (Q + M + N) + L C) / (1 - gamma_d)`.
pub fn corollary3_bound(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    if inputs.gamma_d >= 1.0 {
        return Err(Error::Divergence(format!(
            "generalization bound diverges for gamma_d = {}",
            inputs.gamma_d
        )));
    }
    let s = 1.0 / (1.0 - inputs.gamma_d);
    Ok(product(&[
        inputs.l,
        inputs.q + inputs.m() + inputs.n() + inputs.c,
        s,
    ]))
}

// ---------------------------------------------------------------------------
// Estimators

#[derive(Debug, Clone, PartialEq)]
pub struct RewardSample {
    pub state: DVector<f64>,
    pub action: DVector<f64>,
    pub reward: f64,
}

/// `(x_{k+1}, u_k, r_k)` for every transition in the ensemble.
pub fn reward_samples(ensemble: &TrajectoryEnsemble) -> Vec<RewardSample> {
    ensemble
        .trajectories()
        .iter()
        .flat_map(|t| {
            (0..t.horizon()).map(move |k| RewardSample {
                state: t.states[k + 1].clone(),
                action: t.actions[k].clone(),
                reward: t.rewards[k],
            })
        })
        .collect()
}

/// Sampled Lipschitz ratio `max |r1 - r2| / (||x1 - x2|| + ||u1 - u2||)`.
/// This is a lower bound on the true constant. At most
/// [`MAX_LIPSCHITZ_SAMPLES`] evenly strided samples enter the pairwise sweep.
pub fn estimate_lipschitz(samples: &[RewardSample]) -> Result<f64> {
    let stride = samples.len().div_ceil(MAX_LIPSCHITZ_SAMPLES).max(1);
    let picked: Vec<&RewardSample> = samples.iter().step_by(stride).collect();
    let distinct: HashSet<Vec<u64>> = picked
        .iter()
        .map(|s| {
            s.state
                .iter()
                .chain(s.action.iter())
                .map(|v| v.to_bits())
                .collect()
        })
        .collect();
    if distinct.len() < 2 {
        return Err(Error::InsufficientData(
            "Lipschitz estimate needs at least 2 distinct samples".into(),
        ));
    }
    let mut best: f64 = 0.0;
    for (i, a) in picked.iter().enumerate() {
        for b in &picked[i + 1..] {
            let denom = (&a.state - &b.state).norm() + (&a.action - &b.action).norm();
            if denom >= LIPSCHITZ_DENOM_TOL {
                best = best.max((a.reward - b.reward).abs() / denom);
            }
        }
    }
    Ok(best)
}

/// Per-step mean over runs of `||x_{k+1} - x_bar_{k+1}|| + ||u_k - u_bar_k||`.
pub fn dispersion_profile(
    ensemble: &TrajectoryEnsemble,
    mean: &MeanTrajectory,
) -> Result<Vec<f64>> {
    if ensemble.runs() < 2 {
        return Err(Error::InsufficientData(format!(
            "dispersion needs at least 2 runs, got {}",
            ensemble.runs()
        )));
    }
    if mean.horizon() != ensemble.horizon()
        || mean.state_dim() != ensemble.state_dim()
        || mean.action_dim() != ensemble.action_dim()
    {
        return Err(Error::DimensionMismatch(
            "mean trajectory does not match the ensemble".into(),
        ));
    }
    let r = ensemble.runs() as f64;
    Ok((0..ensemble.horizon())
        .map(|k| {
            ensemble
                .trajectories()
                .iter()
                .map(|t| {
                    (&t.states[k + 1] - &mean.mean_states[k + 1]).norm()
                        + (&t.actions[k] - &mean.mean_actions[k]).norm()
                })
                .sum::<f64>()
                / r
        })
        .collect())
}

/// In-run deviation `Q` of the disturbed ensemble, maximised over steps.
pub fn estimate_q(disturbed: &TrajectoryEnsemble, disturbed_mean: &MeanTrajectory) -> Result<f64> {
    Ok(dispersion_profile(disturbed, disturbed_mean)?
        .into_iter()
        .fold(0.0, f64::max))
}

/// Nominal deviation constant `C`; same estimator as [`estimate_q`].
pub fn estimate_c(nominal: &TrajectoryEnsemble, nominal_mean: &MeanTrajectory) -> Result<f64> {
    estimate_q(nominal, nominal_mean)
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LipschitzSource {
    Analytic,
    /// Sampled lower bound; bounds built on it are not certified.
    #[serde(rename = "estimated-L")]
    Estimated,
}

/// How the reward's Lipschitz constant is obtained during verification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RewardDescriptor {
    Analytic(f64),
    Estimate,
}

/// `||T||_inf` of the fitted resolvent and `||K_f||_inf = sigma_max(K_f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelNorms {
    pub t_hinf: HinfReport,
    pub kf_hinf: HinfReport,
}

impl ModelNorms {
    pub fn compute(model: &KoopmanModel, grid_points: usize, refinement_tol: f64) -> Result<Self> {
        Ok(Self {
            t_hinf: hinf_norm(
                &TransferFunction::resolvent(model.state_operator.clone())?,
                grid_points,
                refinement_tol,
            )?,
            kf_hinf: hinf_norm(
                &TransferFunction::constant(model.action_operator.clone())?,
                grid_points,
                refinement_tol,
            )?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalLhs {
    /// `sum_k ||x_bar^n_k - x_bar^w_k||^2` over `k = 0..=K`.
    pub state_energy: f64,
    pub state_max: f64,
    pub action_energy: f64,
    pub action_max: f64,
    /// `|sum_k gamma_d^k (r_bar^w_k - r_bar^n_k)|` with ensemble-mean rewards.
    pub reward_impact: f64,
    /// Difference of the discounted ensemble-mean returns.
    pub generalization_error: f64,
    pub nominal_mean_reward: f64,
    pub disturbed_mean_reward: f64,
    /// `nominal_mean_reward - disturbed_mean_reward`.
    pub reward_degradation: f64,
    /// `100 |disturbed - nominal| / |nominal|` on per-step mean rewards.
    pub reward_impact_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub bound: String,
    pub measured: f64,
    #[serde(with = "hinf::inf_f64")]
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub gamma: f64,
    pub gamma_d: f64,
    #[serde(rename = "K")]
    pub horizon: Horizon,
    #[serde(rename = "T_hinf", with = "hinf::inf_f64")]
    pub t_hinf: f64,
    #[serde(rename = "Kf_hinf", with = "hinf::inf_f64")]
    pub kf_hinf: f64,
    pub spectral_radius: f64,
    #[serde(rename = "M", with = "hinf::inf_f64")]
    pub m: f64,
    #[serde(rename = "N", with = "hinf::inf_f64")]
    pub n: f64,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    #[serde(rename = "L_source")]
    pub l_source: Option<LipschitzSource>,
    #[serde(rename = "Q")]
    pub q: Option<f64>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    #[serde(with = "hinf::inf_f64")]
    pub state_energy_bound: f64,
    #[serde(with = "hinf::inf_f64")]
    pub state_max_bound: f64,
    #[serde(with = "hinf::inf_f64")]
    pub action_energy_bound: f64,
    #[serde(with = "hinf::inf_f64")]
    pub action_max_bound: f64,
    #[serde(with = "hinf::inf_f64_opt")]
    pub reward_impact_bound: Option<f64>,
    #[serde(with = "hinf::inf_f64_opt")]
    pub generalization_error_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub empirical: Option<EmpiricalLhs>,
    pub violations: Vec<Violation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violation_rate: Option<f64>,
    pub notes: Vec<String>,
}

pub const PENDING: &str = "pending verification data";

impl BoundReport {
    /// Bounds from model norms alone. Reward-level bounds stay `None` until
    /// `L`, `Q` and `C` are supplied.
    pub fn from_norms(
        norms: &ModelNorms,
        gamma: f64,
        gamma_d: f64,
        horizon: Horizon,
        lipschitz: Option<(f64, LipschitzSource)>,
        q: Option<f64>,
        c: Option<f64>,
    ) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::Parameter(format!(
                "gamma must be finite and >= 0, got {gamma}"
            )));
        }
        if !(0.0..1.0).contains(&gamma_d) {
            return Err(Error::Parameter(format!(
                "gamma_d must lie in [0, 1), got {gamma_d}"
            )));
        }
        let t = norms.t_hinf.value;
        let kf = norms.kf_hinf.value;
        let (se, sm) = theorem2_bounds(t, gamma);
        let (ae, am) = corollary1_bounds(kf, t, gamma);
        let mut notes = Vec::new();
        if norms.t_hinf.is_infinite() {
            notes.push(format!(
                "state operator has spectral radius {:.6} >= 1: T_hinf is infinite",
                norms.t_hinf.spectral_radius
            ));
        } else if norms.t_hinf.ill_conditioned {
            notes.push("state operator spectral radius is within 1e-6 of the unit circle".into());
        }
        let (reward_impact_bound, generalization_error_bound) = match (lipschitz, q, c) {
            (Some((l, _)), Some(q), Some(c)) => {
                let inputs = BoundInputs {
                    gamma,
                    t_hinf: t,
                    kf_hinf: kf,
                    l,
                    q,
                    c,
                    gamma_d,
                    horizon,
                };
                (
                    Some(corollary2_bound(&inputs)?),
                    Some(corollary3_bound(&inputs)?),
                )
            }
            _ => {
                let missing: Vec<&str> = [
                    ("L", lipschitz.is_none()),
                    ("Q", q.is_none()),
                    ("C", c.is_none()),
                ]
                .into_iter()
                .filter_map(|(s, m)| m.then_some(s))
                .collect();
                notes.push(format!("reward bounds {PENDING} ({})", missing.join(", ")));
                (None, None)
            }
        };
        if q.is_some() {
            notes.push("Q is estimated from the disturbed rollouts (a posteriori)".into());
        }
        if matches!(lipschitz, Some((_, LipschitzSource::Estimated))) {
            notes.push("reward bounds use estimated-L, a sampled lower bound on L".into());
        }
        Ok(Self {
            label: None,
            gamma,
            gamma_d,
            horizon,
            t_hinf: t,
            kf_hinf: kf,
            spectral_radius: norms.t_hinf.spectral_radius,
            m: product(&[t, gamma]),
            n: product(&[kf, t, gamma]),
            l: lipschitz.map(|(l, _)| l),
            l_source: lipschitz.map(|(_, s)| s),
            q,
            c,
            state_energy_bound: se,
            state_max_bound: sm,
            action_energy_bound: ae,
            action_max_bound: am,
            reward_impact_bound,
            generalization_error_bound,
            empirical: None,
            violations: Vec::new(),
            violation_rate: None,
            notes,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(schema_field(&e)))
    }
}

// Pulls the offending field name out of a serde error message when present.
pub(crate) fn schema_field(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    msg.split('`').nth(1).map(str::to_owned).unwrap_or(msg)
}

pub fn violates(measured: f64, limit: f64) -> bool {
    measured > limit * (1.0 + VIOLATION_RTOL) + VIOLATION_ATOL
}

fn check_dims(a: &MeanTrajectory, b: &MeanTrajectory) -> Result<()> {
    if a.horizon() != b.horizon()
        || a.state_dim() != b.state_dim()
        || a.action_dim() != b.action_dim()
    {
        return Err(Error::DimensionMismatch(format!(
            "nominal (K={}, n={}, m={}) and disturbed (K={}, n={}, m={}) means differ",
            a.horizon(),
            a.state_dim(),
            a.action_dim(),
            b.horizon(),
            b.state_dim(),
            b.action_dim()
        )));
    }
    Ok(())
}

/// Measured left-hand sides of every bound.
pub fn empirical_lhs(
    nominal: &MeanTrajectory,
    disturbed: &MeanTrajectory,
    gamma_d: f64,
) -> Result<EmpiricalLhs> {
    check_dims(nominal, disturbed)?;
    let state_dev: Vec<f64> = nominal
        .mean_states
        .iter()
        .zip(&disturbed.mean_states)
        .map(|(a, b)| (a - b).norm())
        .collect();
    let action_dev: Vec<f64> = nominal
        .mean_actions
        .iter()
        .zip(&disturbed.mean_actions)
        .map(|(a, b)| (a - b).norm())
        .collect();
    let mut weight = 1.0;
    let (mut gap, mut ret_n, mut ret_w) = (0.0, 0.0, 0.0);
    for (rn, rw) in nominal.mean_rewards.iter().zip(&disturbed.mean_rewards) {
        gap += weight * (rw - rn);
        ret_n += weight * rn;
        ret_w += weight * rw;
        weight *= gamma_d;
    }
    let k = nominal.horizon().max(1) as f64;
    let mean_n = nominal.mean_rewards.iter().sum::<f64>() / k;
    let mean_w = disturbed.mean_rewards.iter().sum::<f64>() / k;
    let pct = if mean_n != 0.0 {
        100.0 * (mean_w - mean_n).abs() / mean_n.abs()
    } else if mean_w == mean_n {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(EmpiricalLhs {
        state_energy: state_dev.iter().map(|d| d * d).sum(),
        state_max: state_dev.iter().copied().fold(0.0, f64::max),
        action_energy: action_dev.iter().map(|d| d * d).sum(),
        action_max: action_dev.iter().copied().fold(0.0, f64::max),
        reward_impact: gap.abs(),
        generalization_error: (ret_w - ret_n).abs(),
        nominal_mean_reward: mean_n,
        disturbed_mean_reward: mean_w,
        reward_degradation: mean_n - mean_w,
        reward_impact_pct: pct,
    })
}

/// Evaluates every bound for `model` against the measured deviation between
/// a nominal and a disturbed ensemble generated with common random numbers.
#[allow(clippy::too_many_arguments)]
pub fn verify_bounds(
    nominal_mean: &MeanTrajectory,
    disturbed_mean: &MeanTrajectory,
    nominal: &TrajectoryEnsemble,
    disturbed: &TrajectoryEnsemble,
    model: &KoopmanModel,
    gamma: f64,
    gamma_d: f64,
    reward: RewardDescriptor,
) -> Result<BoundReport> {
    let norms = ModelNorms::compute(
        model,
        hinf::DEFAULT_GRID_POINTS,
        hinf::DEFAULT_REFINEMENT_TOL,
    )?;
    verify_with_norms(
        nominal_mean,
        disturbed_mean,
        nominal,
        disturbed,
        &norms,
        gamma,
        gamma_d,
        reward,
    )
}

/// [`verify_bounds`] with precomputed model norms.
#[allow(clippy::too_many_arguments)]
pub fn verify_with_norms(
    nominal_mean: &MeanTrajectory,
    disturbed_mean: &MeanTrajectory,
    nominal: &TrajectoryEnsemble,
    disturbed: &TrajectoryEnsemble,
    norms: &ModelNorms,
    gamma: f64,
    gamma_d: f64,
    reward: RewardDescriptor,
) -> Result<BoundReport> {
    check_dims(nominal_mean, disturbed_mean)?;
    let n = nominal_mean.state_dim();
    let lipschitz = match reward {
        RewardDescriptor::Analytic(l) => (l, LipschitzSource::Analytic),
        RewardDescriptor::Estimate => {
            let mut samples = reward_samples(nominal);
            samples.extend(reward_samples(disturbed));
            (estimate_lipschitz(&samples)?, LipschitzSource::Estimated)
        }
    };
    let (q, c) = if nominal.runs() >= 2 && disturbed.runs() >= 2 {
        (
            estimate_q(disturbed, disturbed_mean)?,
            estimate_c(nominal, nominal_mean)?,
        )
    } else {
        // A single run has no in-run dispersion around its own mean.
        (0.0, 0.0)
    };
    let horizon = Horizon::Finite(nominal_mean.horizon());
    let mut report = BoundReport::from_norms(
        norms,
        gamma,
        gamma_d,
        horizon,
        Some(lipschitz),
        Some(q),
        Some(c),
    )?;
    if nominal.state_dim() != n || disturbed.state_dim() != n {
        return Err(Error::DimensionMismatch(
            "ensembles and means differ in state dimension".into(),
        ));
    }
    let emp = empirical_lhs(nominal_mean, disturbed_mean, gamma_d)?;
    let checks = [
        (
            "state_energy",
            emp.state_energy,
            Some(report.state_energy_bound),
        ),
        ("state_max", emp.state_max, Some(report.state_max_bound)),
        (
            "action_energy",
            emp.action_energy,
            Some(report.action_energy_bound),
        ),
        ("action_max", emp.action_max, Some(report.action_max_bound)),
        (
            "reward_impact",
            emp.reward_impact,
            report.reward_impact_bound,
        ),
        (
            "generalization_error",
            emp.generalization_error,
            report.generalization_error_bound,
        ),
    ];
    let mut checked = 0;
    for (name, measured, limit) in checks {
        if let Some(limit) = limit {
            checked += 1;
            if violates(measured, limit) {
                report.violations.push(Violation {
                    bound: name.into(),
                    measured,
                    limit,
                });
            }
        }
    }
    report.violation_rate = Some(report.violations.len() as f64 / checked.max(1) as f64);
    if !report.violations.is_empty() {
        report
            .notes
            .push("violations reflect model-approximation error of the fitted operators".into());
    }
    report.empirical = Some(emp);
    Ok(report)
}

/// Per-step deviation table: `k, state_dev, action_dev, reward_nominal_mean,
/// reward_disturbed_mean`. The terminal row `k = K` leaves the action and
/// reward columns empty.
pub fn write_deviation_table<W: Write>(
    nominal: &MeanTrajectory,
    disturbed: &MeanTrajectory,
    out: W,
) -> Result<()> {
    check_dims(nominal, disturbed)?;
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record([
        "k",
        "state_dev",
        "action_dev",
        "reward_nominal_mean",
        "reward_disturbed_mean",
    ])
    .map_err(csv_err)?;
    let k_max = nominal.horizon();
    for k in 0..=k_max {
        let sd = (&nominal.mean_states[k] - &disturbed.mean_states[k]).norm();
        let row = if k < k_max {
            [
                k.to_string(),
                format!("{sd:?}"),
                format!(
                    "{:?}",
                    (&nominal.mean_actions[k] - &disturbed.mean_actions[k]).norm()
                ),
                format!("{:?}", nominal.mean_rewards[k]),
                format!("{:?}", disturbed.mean_rewards[k]),
            ]
        } else {
            [
                k.to_string(),
                format!("{sd:?}"),
                String::new(),
                String::new(),
                String::new(),
            ]
        };
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn seq(rows: &[&[f64]]) -> Vec<DVector<f64>> {
        rows.iter().map(|r| DVector::from_row_slice(r)).collect()
    }

    #[test]
    fn impulse_is_flat() {
        let spec = DisturbanceSpec::new(DisturbanceKind::Impulse, 0.7, 10, 3, 0);
        let w = generate_disturbance(&spec).unwrap();
        assert_eq!(w[0], DVector::from_vec(vec![0.7, 0.0, 0.0]));
        assert!(w[1..].iter().all(|v| v.norm() == 0.0));
        let a = disturbance_admissible(&w, 0.7, 80).unwrap();
        assert!(a.admissible);
        assert!((a.sup_value - 0.7).abs() < 1e-12);
        assert!((a.energy - 0.49).abs() < 1e-15);
    }

    #[test]
    fn zero_gamma_gives_zeros() {
        for kind in DisturbanceKind::ALL {
            let w = generate_disturbance(&DisturbanceSpec::new(kind, 0.0, 5, 2, 1)).unwrap();
            assert!(w.iter().all(|v| v.norm() == 0.0));
        }
    }

    #[test]
    fn constant_direction_peaks_at_dc() {
        let spec = DisturbanceSpec::new(DisturbanceKind::ConstantDirection, 2.0, 8, 2, 0);
        let w = generate_disturbance(&spec).unwrap();
        assert!(w.iter().all(|v| (v[0] - 0.25).abs() < 1e-15 && v[1] == 0.0));
        let a = disturbance_admissible(&w, 2.0, 64).unwrap();
        assert!(a.admissible);
        assert!((a.sup_value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn double_impulse_is_inadmissible() {
        let w = seq(&[&[1.5], &[1.5], &[0.0]]);
        let a = disturbance_admissible(&w, 1.5, 12).unwrap();
        assert!(!a.admissible);
        assert!((a.sup_value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn admissibility_errors_and_zero_case() {
        assert!(matches!(
            disturbance_admissible(&[], 1.0, 16),
            Err(Error::EmptyInput(_))
        ));
        let w = vec![DVector::zeros(2); 4];
        assert!(disturbance_admissible(&w, 1.0, 15).is_err());
        let a = disturbance_admissible(&w, 0.0, 16).unwrap();
        assert!(a.admissible && a.sup_value == 0.0 && a.energy == 0.0);
    }

    #[test]
    fn generated_kinds_hit_gamma() {
        for kind in [
            DisturbanceKind::ScaledGaussianProjected,
            DisturbanceKind::SingleTone,
        ] {
            for seed in 0..5 {
                let mut spec = DisturbanceSpec::new(kind, 1.3, 40, 3, seed);
                spec.support = Some(vec![1, 2]);
                let w = generate_disturbance(&spec).unwrap();
                let (_, sup) = dtft_sup(&w);
                assert!((sup - 1.3).abs() < 1e-12, "{kind:?} {sup}");
                assert!(
                    disturbance_admissible(&w, 1.3, default_grid_points(40))
                        .unwrap()
                        .admissible
                );
                if kind == DisturbanceKind::ScaledGaussianProjected {
                    assert!(w.iter().all(|v| v[0] == 0.0));
                }
            }
        }
    }

    #[test]
    fn parseval_small() {
        let w = seq(&[&[1.0, -2.0], &[0.5, 0.0], &[3.0, 1.0]]);
        let e: f64 = w.iter().map(|v| v.norm_squared()).sum();
        assert!((parseval_energy(&w, 12) - e).abs() < 1e-12);
    }

    #[test]
    fn dtft_point_matches_fft_grid() {
        let w = seq(&[&[1.0], &[0.5], &[-0.25], &[2.0]]);
        let mags = dtft_magnitudes(&w, 16);
        for (p, m) in mags.iter().enumerate() {
            assert!((dtft_norm_at(&w, TAU * p as f64 / 16.0) - m).abs() < 1e-12);
        }
    }

    #[test]
    fn theorem_and_corollary_arithmetic() {
        assert_eq!(theorem2_bounds(10.0, 0.5), (25.0, 5.0));
        assert_eq!(theorem2_bounds(10.0, 0.0), (0.0, 0.0));
        assert_eq!(theorem2_bounds(2.0, 3.0), (36.0, 6.0));
        assert_eq!(theorem2_bounds(f64::INFINITY, 0.0), (0.0, 0.0));
        assert_eq!(corollary1_bounds(0.5, 10.0, 0.5), (6.25, 2.5));
        assert_eq!(corollary1_bounds(0.0, 10.0, 0.5), (0.0, 0.0));
        assert_eq!(corollary1_bounds(1.0, 1.0, 1.0), (1.0, 1.0));
    }

    fn inputs(
        l: f64,
        q: f64,
        m: f64,
        n: f64,
        c: f64,
        gamma_d: f64,
        horizon: Horizon,
    ) -> BoundInputs {
        // gamma = 1 and T = M make M and N come out as given.
        BoundInputs {
            gamma: 1.0,
            t_hinf: m,
            kf_hinf: if m > 0.0 { n / m } else { 0.0 },
            l,
            q,
            c,
            gamma_d,
            horizon,
        }
    }

    #[test]
    fn corollary_arithmetic() {
        let b = inputs(1.0, 0.0, 2.0, 1.0, 0.0, 0.5, Horizon::Infinite);
        assert!((corollary2_bound(&b).unwrap() - 6.0).abs() < 1e-12);
        let b = inputs(0.0, 5.0, 2.0, 1.0, 3.0, 0.5, Horizon::Infinite);
        assert_eq!(corollary2_bound(&b).unwrap(), 0.0);
        let b = inputs(1.0, 1.0, 1.0, 1.0, 0.0, 0.0, Horizon::Infinite);
        assert!((corollary2_bound(&b).unwrap() - 3.0).abs() < 1e-12);
        let b = inputs(1.0, 0.0, 2.0, 1.0, 0.0, 0.9, Horizon::Infinite);
        assert!((corollary3_bound(&b).unwrap() - 30.0).abs() < 1e-9);
        assert!((corollary3_bound(&b).unwrap() - corollary2_bound(&b).unwrap()).abs() < 1e-12);
        let b2 = BoundInputs { l: 2.0, ..b };
        assert!((corollary3_bound(&b2).unwrap() - 60.0).abs() < 1e-9);
        let finite = inputs(1.0, 0.0, 2.0, 1.0, 0.0, 0.5, Horizon::Finite(2));
        assert!((corollary2_bound(&finite).unwrap() - 3.0 * 1.75).abs() < 1e-12);
    }

    #[test]
    fn corollary_errors() {
        let b = inputs(1.0, 0.0, 2.0, 1.0, 0.0, 1.0, Horizon::Infinite);
        assert!(matches!(corollary2_bound(&b), Err(Error::Divergence(_))));
        assert!(matches!(corollary3_bound(&b), Err(Error::Divergence(_))));
        let neg = BoundInputs {
            l: -1.0,
            ..inputs(1.0, 0.0, 2.0, 1.0, 0.0, 0.5, Horizon::Infinite)
        };
        assert!(matches!(corollary2_bound(&neg), Err(Error::Parameter(_))));
    }

    fn sample(x: &[f64], u: &[f64], r: f64) -> RewardSample {
        RewardSample {
            state: DVector::from_row_slice(x),
            action: DVector::from_row_slice(u),
            reward: r,
        }
    }

    #[test]
    fn lipschitz_cases() {
        let s = vec![sample(&[0.0], &[0.0], 0.0), sample(&[1.0], &[0.0], 2.0)];
        assert!((estimate_lipschitz(&s).unwrap() - 2.0).abs() < 1e-15);
        let c: Vec<RewardSample> = (0..10).map(|i| sample(&[i as f64], &[1.0], 4.0)).collect();
        assert_eq!(estimate_lipschitz(&c).unwrap(), 0.0);
        let same = vec![sample(&[1.0], &[1.0], 0.0), sample(&[1.0], &[1.0], 5.0)];
        assert!(matches!(
            estimate_lipschitz(&same),
            Err(Error::InsufficientData(_))
        ));
        assert!(estimate_lipschitz(&s[..1]).is_err());
    }

    fn scalar_ensemble(runs: &[&[f64]], actions: &[&[f64]]) -> TrajectoryEnsemble {
        use crate::trajectory::Trajectory;
        let trajs = runs
            .iter()
            .zip(actions)
            .enumerate()
            .map(|(i, (xs, us))| {
                Trajectory::new(
                    i as u64,
                    xs.iter().map(|&x| DVector::from_element(1, x)).collect(),
                    us.iter().map(|&u| DVector::from_element(1, u)).collect(),
                    vec![0.0; us.len()],
                    i as u64,
                )
                .unwrap()
            })
            .collect();
        TrajectoryEnsemble::new(trajs).unwrap()
    }

    #[test]
    fn q_and_c_by_hand() {
        use crate::trajectory::ensemble_mean;
        let ens = scalar_ensemble(
            &[&[0.0, 1.0, 1.0], &[0.0, -1.0, -1.0]],
            &[&[0.3, 0.3], &[0.3, 0.3]],
        );
        let mean = ensemble_mean(&ens).unwrap();
        assert!((estimate_q(&ens, &mean).unwrap() - 1.0).abs() < 1e-15);
        assert!((estimate_c(&ens, &mean).unwrap() - 1.0).abs() < 1e-15);
        let ens2 = scalar_ensemble(
            &[&[0.0, 2.0, 2.0], &[0.0, -2.0, -2.0]],
            &[&[0.3, 0.3], &[0.3, 0.3]],
        );
        let mean2 = ensemble_mean(&ens2).unwrap();
        assert!((estimate_q(&ens2, &mean2).unwrap() - 2.0).abs() < 1e-15);
        let same = scalar_ensemble(&[&[1.0, 2.0], &[1.0, 2.0]], &[&[0.0], &[0.0]]);
        assert_eq!(
            estimate_q(&same, &ensemble_mean(&same).unwrap()).unwrap(),
            0.0
        );
        let single = scalar_ensemble(&[&[1.0, 2.0]], &[&[0.0]]);
        assert!(matches!(
            estimate_q(&single, &ensemble_mean(&single).unwrap()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn report_pending_and_json() {
        let model = KoopmanModel::from_operators(
            DMatrix::from_element(1, 1, 0.9),
            DMatrix::from_element(1, 1, 0.5),
        )
        .unwrap();
        let norms = ModelNorms::compute(&model, 4096, 1e-10).unwrap();
        let r =
            BoundReport::from_norms(&norms, 0.5, 0.9, Horizon::Infinite, None, None, None).unwrap();
        assert!((r.t_hinf - 10.0).abs() < 1e-9);
        assert!((r.m - 5.0).abs() < 1e-9);
        assert!((r.n - 2.5).abs() < 1e-9);
        assert!(r.reward_impact_bound.is_none());
        assert!(r.notes.iter().any(|n| n.contains(PENDING)));
        let back = BoundReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);

        let unstable =
            KoopmanModel::from_operators(DMatrix::identity(1, 1), DMatrix::zeros(1, 1)).unwrap();
        let norms = ModelNorms::compute(&unstable, 64, 1e-10).unwrap();
        let r = BoundReport::from_norms(
            &norms,
            1.0,
            0.5,
            Horizon::Infinite,
            Some((1.0, LipschitzSource::Analytic)),
            Some(0.0),
            Some(0.0),
        )
        .unwrap();
        assert!(r.t_hinf.is_infinite() && r.n == 0.0);
        let json = r.to_json().unwrap();
        assert!(json.contains("\"T_hinf\": \"inf\""));
        assert_eq!(BoundReport::from_json(&json).unwrap(), r);
        assert!(matches!(
            BoundReport::from_json("{\"gamma\": 1.0}"),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn violation_threshold() {
        assert!(!violates(1.0, 1.0));
        assert!(!violates(1.0 + 1e-12, 1.0));
        assert!(violates(1.001, 1.0));
        assert!(!violates(1e300, f64::INFINITY));
    }
}
