//! UAV-assisted mmWave downlink coverage environment.
//!
//! A single UAV at fixed altitude serves `J` mobile ground users (GUs). The
//! Koopman state is the concatenation of all GU planar positions followed by
//! the UAV planar position (`n = 2J + 2`); the action is the next UAV waypoint
//! (`m = 2`).

use std::f64::consts::{PI, TAU};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Tolerance on the per-step UAV displacement limit `kappa * V_max`.
pub const SPEED_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FairnessMode {
    /// `(sum s)^2 / (J^2 sum s^2)`, the displayed form.
    AsWritten,
    /// Jain's index `(sum s)^2 / (J sum s^2)`.
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadingMode {
    /// Keep the heading with probability `epsilon`, else draw a uniform one.
    EpsilonGreedy,
    /// `phi' = phi + h2 * phi_bar` with `h2 ~ Bernoulli(1 - epsilon)`.
    Additive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    CentroidGreedy,
    LaggedCentroid,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::CentroidGreedy => "centroid_greedy",
            PolicyKind::LaggedCentroid => "lagged_centroid",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "centroid_greedy" => Ok(PolicyKind::CentroidGreedy),
            "lagged_centroid" => Ok(PolicyKind::LaggedCentroid),
            other => Err(Error::Config(format!(
                "unknown policy `{other}` (expected centroid_greedy or lagged_centroid)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UavEnvConfig {
    /// Service area `(A1, A2)` in metres.
    pub area: (f64, f64),
    pub num_gus: usize,
    pub altitude_m: f64,
    /// Step length `kappa` in seconds.
    pub step_s: f64,
    pub v_max: f64,
    /// Coverage limit `D_max` on the 3-D UAV-GU distance, metres.
    pub coverage_m: f64,
    pub gu_mean_speed: f64,
    pub gu_speed_std: f64,
    /// Probability `epsilon` of keeping the current heading.
    pub gu_keep_prob: f64,
    /// Speed memory `h1` of the GU speed recursion.
    pub gu_speed_memory: f64,
    pub heading_mode: HeadingMode,
    /// Mean steering angle `phi_bar` (additive heading mode only).
    pub gu_mean_steering: f64,
    pub bandwidth_hz: f64,
    pub transmit_power_w: f64,
    pub carrier_hz: f64,
    pub noise_power_w: f64,
    pub min_rate_bps: f64,
    /// Medium absorption `alpha(f)`, 1/m.
    pub absorption_per_m: f64,
    pub gain_uav: f64,
    pub gain_gu: f64,
    /// Weight `a` between coverage and fairness.
    pub reward_weight: f64,
    /// Signed speed-violation weight `beta` (negative = penalty).
    pub violation_weight: f64,
    pub fairness_mode: FairnessMode,
    /// Exponential smoothing factor applied by the lagged policy.
    pub lag_factor: f64,
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

impl Default for UavEnvConfig {
    fn default() -> Self {
        Self {
            area: (100.0, 100.0),
            num_gus: 20,
            altitude_m: 30.0,
            step_s: 0.1,
            v_max: 30.0,
            coverage_m: 50.0,
            gu_mean_speed: 3.0,
            gu_speed_std: 0.65,
            gu_keep_prob: 0.65,
            gu_speed_memory: 0.5,
            heading_mode: HeadingMode::EpsilonGreedy,
            gu_mean_steering: 0.0,
            bandwidth_hz: 400e6,
            transmit_power_w: 0.2512,
            carrier_hz: 30e9,
            noise_power_w: dbm_to_watt(-85.0),
            min_rate_bps: 150e6,
            absorption_per_m: 0.005,
            gain_uav: 1.0,
            gain_gu: 1.0,
            reward_weight: 0.5,
            violation_weight: -1.0,
            fairness_mode: FairnessMode::AsWritten,
            lag_factor: 0.5,
        }
    }
}

impl UavEnvConfig {
    pub fn state_dim(&self) -> usize {
        2 * self.num_gus + 2
    }

    pub fn action_dim(&self) -> usize {
        2
    }

    pub fn max_step(&self) -> f64 {
        self.step_s * self.v_max
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("area.0", self.area.0),
            ("area.1", self.area.1),
            ("altitude_m", self.altitude_m),
            ("step_s", self.step_s),
            ("v_max", self.v_max),
            ("coverage_m", self.coverage_m),
            ("bandwidth_hz", self.bandwidth_hz),
            ("transmit_power_w", self.transmit_power_w),
            ("carrier_hz", self.carrier_hz),
            ("noise_power_w", self.noise_power_w),
            ("min_rate_bps", self.min_rate_bps),
            ("gain_uav", self.gain_uav),
            ("gain_gu", self.gain_gu),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.num_gus == 0 {
            return Err(Error::Config("num_gus must be at least 1".into()));
        }
        let unit = [
            ("reward_weight", self.reward_weight),
            ("gu_keep_prob", self.gu_keep_prob),
            ("gu_speed_memory", self.gu_speed_memory),
            ("lag_factor", self.lag_factor),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(self.gu_mean_speed >= 0.0)
            || !(self.gu_speed_std >= 0.0)
            || !(self.absorption_per_m >= 0.0)
        {
            return Err(Error::Config(
                "gu_mean_speed, gu_speed_std and absorption_per_m must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuState {
    pub position: (f64, f64),
    pub speed: f64,
    pub heading: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UavState {
    pub uav: (f64, f64),
    pub gus: Vec<GuState>,
    pub step: usize,
}

impl UavState {
    pub fn to_vector(&self) -> DVector<f64> {
        let mut v = Vec::with_capacity(2 * self.gus.len() + 2);
        for g in &self.gus {
            v.push(g.position.0);
            v.push(g.position.1);
        }
        v.push(self.uav.0);
        v.push(self.uav.1);
        DVector::from_vec(v)
    }
}

// Reflect a coordinate into [0, limit]; returns the new coordinate and whether
// the motion direction along this axis flipped.
fn reflect(mut x: f64, limit: f64) -> (f64, bool) {
    let mut flipped = false;
    loop {
        if x < 0.0 {
            x = -x;
        } else if x > limit {
            x = 2.0 * limit - x;
        } else {
            return (x, flipped);
        }
        flipped = !flipped;
    }
}

/// One step of the GU mobility model. Always consumes three draws from `rng`
/// so that runs sharing a seed stay synchronised.
pub fn step_gu_motion<R: Rng + ?Sized>(
    gu: &GuState,
    config: &UavEnvConfig,
    rng: &mut R,
) -> GuState {
    let noise: f64 = StandardNormal.sample(rng);
    let keep_draw: f64 = rng.random();
    let heading_draw: f64 = rng.random::<f64>() * TAU;

    let h1 = config.gu_speed_memory;
    let speed =
        (h1 * gu.speed + (1.0 - h1) * config.gu_mean_speed + config.gu_speed_std * noise).max(0.0);
    let keep = keep_draw < config.gu_keep_prob;
    let heading = match config.heading_mode {
        HeadingMode::EpsilonGreedy => {
            if keep {
                gu.heading
            } else {
                heading_draw
            }
        }
        HeadingMode::Additive => {
            if keep {
                gu.heading
            } else {
                gu.heading + config.gu_mean_steering
            }
        }
    };
    let dist = config.step_s * speed;
    let (x, flip_x) = reflect(gu.position.0 + dist * heading.cos(), config.area.0);
    let (y, flip_y) = reflect(gu.position.1 + dist * heading.sin(), config.area.1);
    let mut heading = heading;
    if flip_x {
        heading = PI - heading;
    }
    if flip_y {
        heading = -heading;
    }
    GuState {
        position: (x, y),
        speed,
        heading: heading.rem_euclid(TAU),
    }
}

/// Channel coefficient `h_g = c sqrt(G_uav G_gu) / (4 pi f d) * exp(-alpha d / 2)`.
pub fn path_loss(d: f64, config: &UavEnvConfig) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Parameter(format!(
            "path loss is singular at distance {d}"
        )));
    }
    let spreading = SPEED_OF_LIGHT * (config.gain_uav * config.gain_gu).sqrt()
        / (4.0 * PI * config.carrier_hz * d);
    Ok(spreading * (-0.5 * config.absorption_per_m * d).exp())
}

/// `R = bandwidth * log2(1 + P |h_g|^2 / N0)` in bits per second.
pub fn downlink_rate(bandwidth_hz: f64, h_g: f64, config: &UavEnvConfig) -> f64 {
    bandwidth_hz * (1.0 + config.transmit_power_w * h_g * h_g / config.noise_power_w).log2()
}

fn distance_3d(uav: (f64, f64), gu: (f64, f64), altitude: f64) -> f64 {
    let dx = uav.0 - gu.0;
    let dy = uav.1 - gu.1;
    (dx * dx + dy * dy + altitude * altitude).sqrt()
}

/// Served-user indicators under equal bandwidth sharing: users beyond the
/// coverage limit are excluded, then users below the minimum rate are dropped
/// and bandwidth re-split until no further user drops out.
pub fn serve_set(state: &UavState, config: &UavEnvConfig) -> Vec<bool> {
    let gains: Vec<Option<f64>> = state
        .gus
        .iter()
        .map(|g| {
            let d = distance_3d(state.uav, g.position, config.altitude_m);
            if d <= config.coverage_m {
                path_loss(d, config).ok()
            } else {
                None
            }
        })
        .collect();
    let mut served: Vec<bool> = gains.iter().map(Option::is_some).collect();
    for _ in 0..=state.gus.len() {
        let count = served.iter().filter(|&&s| s).count();
        if count == 0 {
            break;
        }
        let share = config.bandwidth_hz / count as f64;
        let mut dropped = false;
        for (s, g) in served.iter_mut().zip(&gains) {
            if *s {
                let rate = downlink_rate(share, g.expect("served users have a gain"), config);
                if rate < config.min_rate_bps {
                    *s = false;
                    dropped = true;
                }
            }
        }
        if !dropped {
            break;
        }
    }
    served
}

pub fn fairness_index(served: &[bool], mode: FairnessMode) -> f64 {
    let j = served.len() as f64;
    let total = served.iter().filter(|&&s| s).count() as f64;
    if total == 0.0 {
        return 0.0;
    }
    // For binary indicators sum(s^2) = sum(s).
    match mode {
        FairnessMode::AsWritten => total * total / (j * j * total),
        FairnessMode::Standard => total * total / (j * total),
    }
}

pub fn uav_reward(
    served: &[bool],
    fairness: f64,
    speed_violation: bool,
    config: &UavEnvConfig,
) -> f64 {
    let j = served.len().max(1) as f64;
    let coverage = served.iter().filter(|&&s| s).count() as f64 / j;
    let a = config.reward_weight;
    a * coverage
        + (1.0 - a) * fairness
        + if speed_violation {
            config.violation_weight
        } else {
            0.0
        }
}

/// Scripted stand-in for a trained UAV policy.
///
/// Both variants chase the centroid of the currently unserved GUs with steps
/// clipped to `kappa * V_max`. The lagged variant tracks an exponentially
/// smoothed copy of that target, which makes its closed loop more sluggish.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedPolicy {
    pub kind: PolicyKind,
    smoothed_target: Option<(f64, f64)>,
}

impl ScriptedPolicy {
    pub fn new(kind: PolicyKind) -> Self {
        Self {
            kind,
            smoothed_target: None,
        }
    }

    pub fn next_waypoint(&mut self, state: &UavState, config: &UavEnvConfig) -> (f64, f64) {
        let served = serve_set(state, config);
        let target = unserved_centroid(state, &served).unwrap_or(state.uav);
        let target = match self.kind {
            PolicyKind::CentroidGreedy => target,
            PolicyKind::LaggedCentroid => {
                let lag = config.lag_factor;
                let prev = self.smoothed_target.unwrap_or(state.uav);
                let t = (
                    lag * prev.0 + (1.0 - lag) * target.0,
                    lag * prev.1 + (1.0 - lag) * target.1,
                );
                self.smoothed_target = Some(t);
                t
            }
        };
        clip_step(state.uav, target, config.max_step())
    }
}

/// Pure single-step form of [`ScriptedPolicy`] for a policy with no history.
pub fn scripted_policy(state: &UavState, config: &UavEnvConfig, kind: PolicyKind) -> (f64, f64) {
    ScriptedPolicy::new(kind).next_waypoint(state, config)
}

fn unserved_centroid(state: &UavState, served: &[bool]) -> Option<(f64, f64)> {
    let (mut sx, mut sy, mut count) = (0.0, 0.0, 0usize);
    for (g, &s) in state.gus.iter().zip(served) {
        if !s {
            sx += g.position.0;
            sy += g.position.1;
            count += 1;
        }
    }
    (count > 0).then(|| (sx / count as f64, sy / count as f64))
}

fn clip_step(from: (f64, f64), to: (f64, f64), max_step: f64) -> (f64, f64) {
    let dx = to.0 - from.0;
    let dy = to.1 - from.1;
    let dist = (dx * dx + dy * dy).sqrt();
    if dist <= max_step {
        to
    } else {
        let s = max_step / dist;
        (from.0 + s * dx, from.1 + s * dy)
    }
}

pub fn initial_state<R: Rng + ?Sized>(config: &UavEnvConfig, rng: &mut R) -> UavState {
    let gus = (0..config.num_gus)
        .map(|_| {
            let x = rng.random::<f64>() * config.area.0;
            let y = rng.random::<f64>() * config.area.1;
            let heading = rng.random::<f64>() * TAU;
            GuState {
                position: (x, y),
                speed: config.gu_mean_speed,
                heading,
            }
        })
        .collect();
    let uav = (
        rng.random::<f64>() * config.area.0,
        rng.random::<f64>() * config.area.1,
    );
    UavState { uav, gus, step: 0 }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UavRollout {
    pub trajectory: Trajectory,
    /// Disturbance actually applied after clamping to the service area.
    pub realized_disturbance: Vec<DVector<f64>>,
    pub speed_violations: usize,
}

pub fn uav_rollout(
    config: &UavEnvConfig,
    policy: PolicyKind,
    horizon: usize,
    seed: u64,
    disturbance: Option<&[DVector<f64>]>,
) -> Result<Trajectory> {
    Ok(uav_rollout_detailed(config, policy, horizon, 0, seed, disturbance)?.trajectory)
}

pub fn uav_rollout_detailed(
    config: &UavEnvConfig,
    policy: PolicyKind,
    horizon: usize,
    run_id: u64,
    seed: u64,
    disturbance: Option<&[DVector<f64>]>,
) -> Result<UavRollout> {
    config.validate()?;
    let n = config.state_dim();
    if let Some(w) = disturbance {
        if w.len() != horizon {
            return Err(Error::DimensionMismatch(format!(
                "disturbance has {} steps, horizon is {horizon}",
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
    let mut state = initial_state(config, &mut rng);
    let mut pol = ScriptedPolicy::new(policy);

    let mut states = Vec::with_capacity(horizon + 1);
    let mut actions = Vec::with_capacity(horizon);
    let mut rewards = Vec::with_capacity(horizon);
    let mut realized = Vec::new();
    let mut violations = 0;
    states.push(state.to_vector());

    for k in 0..horizon {
        let prev_uav = state.uav;
        let waypoint = pol.next_waypoint(&state, config);
        actions.push(DVector::from_vec(vec![waypoint.0, waypoint.1]));

        let gus = state
            .gus
            .iter()
            .map(|g| step_gu_motion(g, config, &mut rng))
            .collect();
        state = UavState {
            uav: waypoint,
            gus,
            step: k + 1,
        };

        if let Some(w) = disturbance {
            let before = state.to_vector();
            apply_clamped(&mut state, &w[k], config);
            realized.push(state.to_vector() - before);
        }

        let dx = state.uav.0 - prev_uav.0;
        let dy = state.uav.1 - prev_uav.1;
        let violation = (dx * dx + dy * dy).sqrt() > config.max_step() + SPEED_TOL;
        violations += usize::from(violation);
        let served = serve_set(&state, config);
        let fairness = fairness_index(&served, config.fairness_mode);
        rewards.push(uav_reward(&served, fairness, violation, config));
        states.push(state.to_vector());
    }
    Ok(UavRollout {
        trajectory: Trajectory::new(run_id, states, actions, rewards, seed)?,
        realized_disturbance: realized,
        speed_violations: violations,
    })
}

fn apply_clamped(state: &mut UavState, w: &DVector<f64>, config: &UavEnvConfig) {
    let (ax, ay) = config.area;
    for (j, g) in state.gus.iter_mut().enumerate() {
        g.position.0 = (g.position.0 + w[2 * j]).clamp(0.0, ax);
        g.position.1 = (g.position.1 + w[2 * j + 1]).clamp(0.0, ay);
    }
    let j = state.gus.len();
    state.uav.0 = (state.uav.0 + w[2 * j]).clamp(0.0, ax);
    state.uav.1 = (state.uav.1 + w[2 * j + 1]).clamp(0.0, ay);
}
