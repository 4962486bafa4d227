//! Trajectory generators: a linear surrogate with known operators and the
//! UAV coverage environment.

pub mod linear;
pub mod uav;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::Result;
use crate::trajectory::{Trajectory, TrajectoryEnsemble};

pub use linear::{linear_rollout, linear_rollout_run, LinearReward, LinearSurrogateConfig};
pub use uav::{
    downlink_rate, fairness_index, path_loss, scripted_policy, serve_set, step_gu_motion,
    uav_reward, uav_rollout, uav_rollout_detailed, FairnessMode, GuState, HeadingMode, PolicyKind,
    UavEnvConfig, UavState,
};

#[derive(Debug, Clone, PartialEq)]
pub enum EnvSpec {
    Linear(LinearSurrogateConfig),
    Uav {
        config: UavEnvConfig,
        policy: PolicyKind,
        horizon: usize,
    },
}

impl EnvSpec {
    pub fn state_dim(&self) -> usize {
        match self {
            EnvSpec::Linear(c) => c.state_dim(),
            EnvSpec::Uav { config, .. } => config.state_dim(),
        }
    }

    pub fn action_dim(&self) -> usize {
        match self {
            EnvSpec::Linear(c) => c.action_dim(),
            EnvSpec::Uav { config, .. } => config.action_dim(),
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            EnvSpec::Linear(c) => c.horizon,
            EnvSpec::Uav { horizon, .. } => *horizon,
        }
    }

    pub fn rollout(
        &self,
        run_id: u64,
        seed: u64,
        disturbance: Option<&[DVector<f64>]>,
    ) -> Result<Trajectory> {
        match self {
            EnvSpec::Linear(c) => linear_rollout_run(c, run_id, seed, disturbance),
            EnvSpec::Uav {
                config,
                policy,
                horizon,
            } => Ok(
                uav_rollout_detailed(config, *policy, *horizon, run_id, seed, disturbance)?
                    .trajectory,
            ),
        }
    }

    /// `runs` rollouts in parallel; run `r` is seeded with `master_seed + r`.
    pub fn ensemble(
        &self,
        runs: usize,
        master_seed: u64,
        disturbance: Option<&[DVector<f64>]>,
    ) -> Result<TrajectoryEnsemble> {
        let trajectories = (0..runs as u64)
            .into_par_iter()
            .map(|r| self.rollout(r, master_seed.wrapping_add(r), disturbance))
            .collect::<Result<Vec<_>>>()?;
        TrajectoryEnsemble::new(trajectories)
    }
}
