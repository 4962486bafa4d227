//! Linear closed-loop surrogate with a known transition matrix `A` and policy
//! matrix `F`, used as ground truth for the fitting and bound checks.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// `r = -state_weight * ||x_{k+1}|| - action_weight * ||u_k||`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearReward {
    pub state_weight: f64,
    pub action_weight: f64,
}

impl Default for LinearReward {
    fn default() -> Self {
        Self {
            state_weight: 1.0,
            action_weight: 0.1,
        }
    }
}

impl LinearReward {
    pub fn eval(&self, next_state: &DVector<f64>, action: &DVector<f64>) -> f64 {
        -self.state_weight * next_state.norm() - self.action_weight * action.norm()
    }

    /// Lipschitz constant w.r.t. `||dx|| + ||du||`.
    pub fn lipschitz(&self) -> f64 {
        self.state_weight.abs().max(self.action_weight.abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSurrogateConfig {
    pub a: DMatrix<f64>,
    pub f: DMatrix<f64>,
    /// Per-component std of the i.i.d. Gaussian process noise.
    pub noise_std: f64,
    pub x0_mean: DVector<f64>,
    /// Per-component std of the Gaussian initial-state spread across runs.
    pub x0_std: f64,
    pub horizon: usize,
    pub seed: u64,
    pub reward: LinearReward,
}

impl Default for LinearSurrogateConfig {
    fn default() -> Self {
        Self {
            a: DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.0, 0.5]),
            f: DMatrix::from_row_slice(1, 2, &[1.0, -2.0]),
            noise_std: 0.0,
            x0_mean: DVector::from_vec(vec![1.0, 1.0]),
            x0_std: 0.0,
            horizon: 50,
            seed: 0,
            reward: LinearReward::default(),
        }
    }
}

impl LinearSurrogateConfig {
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn action_dim(&self) -> usize {
        self.f.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        if n == 0 || self.a.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "A must be square and non-empty, got {}x{}",
                self.a.nrows(),
                self.a.ncols()
            )));
        }
        if self.f.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "F has {} columns, state dimension is {n}",
                self.f.ncols()
            )));
        }
        if self.x0_mean.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "x0_mean has dimension {}, expected {n}",
                self.x0_mean.len()
            )));
        }
        if !(self.noise_std >= 0.0) || !(self.x0_std >= 0.0) {
            return Err(Error::Parameter(
                "noise_std and x0_std must be non-negative".into(),
            ));
        }
        let finite = self
            .a
            .iter()
            .chain(self.f.iter())
            .chain(self.x0_mean.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Data(
                "linear surrogate config has non-finite entries".into(),
            ));
        }
        Ok(())
    }
}

/// `x_{k+1} = A x_k + eta_k + w_k`, `u_k = F x_k`, seeded from `config.seed`.
pub fn linear_rollout(
    config: &LinearSurrogateConfig,
    disturbance: Option<&[DVector<f64>]>,
) -> Result<Trajectory> {
    linear_rollout_run(config, 0, config.seed, disturbance)
}

pub fn linear_rollout_run(
    config: &LinearSurrogateConfig,
    run_id: u64,
    seed: u64,
    disturbance: Option<&[DVector<f64>]>,
) -> Result<Trajectory> {
    config.validate()?;
    let n = config.state_dim();
    let k_max = config.horizon;
    if let Some(w) = disturbance {
        if w.len() != k_max {
            return Err(Error::DimensionMismatch(format!(
                "disturbance has {} steps, horizon is {k_max}",
                w.len()
            )));
        }
        if let Some(bad) = w.iter().find(|v| v.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "disturbance vector has dimension {}, state dimension is {n}",
                bad.len()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gaussian = |std: f64| -> DVector<f64> {
        if std > 0.0 {
            DVector::from_fn(n, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                std * z
            })
        } else {
            DVector::zeros(n)
        }
    };

    let mut states = Vec::with_capacity(k_max + 1);
    let mut actions = Vec::with_capacity(k_max);
    let mut rewards = Vec::with_capacity(k_max);
    states.push(&config.x0_mean + gaussian(config.x0_std));
    for k in 0..k_max {
        let x = &states[k];
        let u = &config.f * x;
        let mut next = &config.a * x + gaussian(config.noise_std);
        if let Some(w) = disturbance {
            next += &w[k];
        }
        rewards.push(config.reward.eval(&next, &u));
        actions.push(u);
        states.push(next);
    }
    Trajectory::new(run_id, states, actions, rewards, seed)
}
