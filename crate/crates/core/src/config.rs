//! Run configuration loaded from a TOML file with flat dotted keys, e.g.
//!
//! ```toml
//! run.env = "uav"
//! run.runs = 32
//! env.J = 20
//! env.P_watt = 0.2512
//! ```
//!
//! Every accepted key is listed in [`KEYS`]; unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use crate::bounds::{DisturbanceKind, DisturbanceSpec};
use crate::dmd::DEFAULT_RANK_TOL;
use crate::env::uav::dbm_to_watt;
use crate::env::{
    EnvSpec, FairnessMode, HeadingMode, LinearReward, LinearSurrogateConfig, PolicyKind,
    UavEnvConfig,
};
use crate::error::{Error, Result};
use crate::hinf::{DEFAULT_GRID_POINTS, DEFAULT_REFINEMENT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyKind {
    Float,
    Int,
    Str,
    FloatList,
    IntList,
    Matrix,
}

impl KeyKind {
    fn label(self) -> &'static str {
        match self {
            KeyKind::Float => "float",
            KeyKind::Int => "int",
            KeyKind::Str => "string",
            KeyKind::FloatList => "float list",
            KeyKind::IntList => "int list",
            KeyKind::Matrix => "matrix (list of rows)",
        }
    }
}

pub struct KeySpec {
    pub key: &'static str,
    pub kind: KeyKind,
    pub help: &'static str,
}

const fn key(key: &'static str, kind: KeyKind, help: &'static str) -> KeySpec {
    KeySpec { key, kind, help }
}

pub const KEYS: &[KeySpec] = &[
    key(
        "run.env",
        KeyKind::Str,
        "environment: linear | uav (default linear)",
    ),
    key(
        "run.runs",
        KeyKind::Int,
        "number of independent runs R (default 64)",
    ),
    key(
        "run.horizon",
        KeyKind::Int,
        "time steps per run K (default 50)",
    ),
    key(
        "run.seed",
        KeyKind::Int,
        "master seed; run r uses seed + r (default 0)",
    ),
    key("run.out", KeyKind::Str, "default output path"),
    key(
        "run.label",
        KeyKind::Str,
        "label attached to bound reports (default: policy name)",
    ),
    key("fit.input", KeyKind::Str, "trajectory file for fit"),
    key(
        "fit.rank_tol",
        KeyKind::Float,
        "relative singular-value cutoff (default 1e-10)",
    ),
    key(
        "analyze.model",
        KeyKind::Str,
        "model JSON for analyze / verify",
    ),
    key(
        "analyze.gamma",
        KeyKind::Float,
        "disturbance level gamma (default 1)",
    ),
    key(
        "analyze.gamma_d",
        KeyKind::Float,
        "discount factor gamma_d in [0, 1) (default 0.9)",
    ),
    key(
        "analyze.grid_points",
        KeyKind::Int,
        "frequency grid size for H-infinity sweeps (default 4096)",
    ),
    key(
        "analyze.refinement_tol",
        KeyKind::Float,
        "golden-section bracket tolerance (default 1e-10)",
    ),
    key(
        "analyze.lipschitz",
        KeyKind::Float,
        "analytic reward Lipschitz constant L (default: estimated)",
    ),
    key(
        "disturbance.kind",
        KeyKind::Str,
        "impulse | constant_direction | scaled_gaussian_projected | single_tone",
    ),
    key(
        "disturbance.seed",
        KeyKind::Int,
        "disturbance RNG seed (default: run.seed)",
    ),
    key(
        "disturbance.onset",
        KeyKind::Int,
        "impulse step (default 0)",
    ),
    key(
        "disturbance.frequency",
        KeyKind::Float,
        "tone frequency in rad/sample (default: random)",
    ),
    key(
        "disturbance.direction",
        KeyKind::FloatList,
        "direction vector (default e_1)",
    ),
    key(
        "disturbance.support",
        KeyKind::Str,
        "coordinates excited by the Gaussian kind: all | gu | uav",
    ),
    key(
        "disturbance.support_indices",
        KeyKind::IntList,
        "explicit coordinate list (overrides support)",
    ),
    key(
        "linear.A",
        KeyKind::Matrix,
        "transition matrix (default [[0.9, 0.1], [0, 0.5]])",
    ),
    key(
        "linear.F",
        KeyKind::Matrix,
        "policy matrix (default [[1, -2]])",
    ),
    key(
        "linear.noise_std",
        KeyKind::Float,
        "process noise std (default 0)",
    ),
    key(
        "linear.x0_mean",
        KeyKind::FloatList,
        "initial state mean (default ones)",
    ),
    key(
        "linear.x0_std",
        KeyKind::Float,
        "initial state std (default 0)",
    ),
    key(
        "linear.reward_state_weight",
        KeyKind::Float,
        "reward weight on ||x_{k+1}|| (default 1)",
    ),
    key(
        "linear.reward_action_weight",
        KeyKind::Float,
        "reward weight on ||u_k|| (default 0.1)",
    ),
    key(
        "env.area_x",
        KeyKind::Float,
        "service area A1, m (default 100)",
    ),
    key(
        "env.area_y",
        KeyKind::Float,
        "service area A2, m (default 100)",
    ),
    key("env.J", KeyKind::Int, "number of ground users (default 20)"),
    key("env.H", KeyKind::Float, "UAV altitude, m (default 30)"),
    key("env.kappa", KeyKind::Float, "step length, s (default 0.1)"),
    key(
        "env.V_max",
        KeyKind::Float,
        "UAV max speed, m/s (default 30)",
    ),
    key(
        "env.D_max",
        KeyKind::Float,
        "coverage limit on 3-D distance, m (default 50)",
    ),
    key(
        "env.v_bar",
        KeyKind::Float,
        "GU mean speed, m/s (default 3)",
    ),
    key(
        "env.nu_std",
        KeyKind::Float,
        "GU speed noise std (default 0.65)",
    ),
    key(
        "env.epsilon",
        KeyKind::Float,
        "probability of keeping the GU heading (default 0.65)",
    ),
    key("env.h1", KeyKind::Float, "GU speed memory (default 0.5)"),
    key(
        "env.heading_mode",
        KeyKind::Str,
        "epsilon_greedy | additive (default epsilon_greedy)",
    ),
    key(
        "env.phi_bar",
        KeyKind::Float,
        "mean steering angle for additive mode, rad (default 0)",
    ),
    key(
        "env.bandwidth_hz",
        KeyKind::Float,
        "total bandwidth, Hz (default 400e6)",
    ),
    key(
        "env.P_watt",
        KeyKind::Float,
        "transmit power, W (default 0.2512)",
    ),
    key(
        "env.f_hz",
        KeyKind::Float,
        "carrier frequency, Hz (default 30e9)",
    ),
    key(
        "env.N0_dbm",
        KeyKind::Float,
        "noise power, dBm (default -85)",
    ),
    key(
        "env.R_min_bps",
        KeyKind::Float,
        "minimum rate, bit/s (default 150e6)",
    ),
    key(
        "env.alpha",
        KeyKind::Float,
        "medium absorption, 1/m (default 0.005)",
    ),
    key("env.G_uav", KeyKind::Float, "UAV antenna gain (default 1)"),
    key("env.G_gu", KeyKind::Float, "GU antenna gain (default 1)"),
    key(
        "env.a",
        KeyKind::Float,
        "coverage vs fairness weight in [0, 1] (default 0.5)",
    ),
    key(
        "env.beta",
        KeyKind::Float,
        "signed speed-violation weight (default -1)",
    ),
    key(
        "env.fairness",
        KeyKind::Str,
        "as_written | standard (default as_written)",
    ),
    key(
        "env.policy",
        KeyKind::Str,
        "centroid_greedy | lagged_centroid (default centroid_greedy)",
    ),
    key(
        "env.lag_factor",
        KeyKind::Float,
        "target smoothing of the lagged policy (default 0.5)",
    ),
];

/// `--help` text listing every config key.
pub fn keys_help() -> String {
    let width = KEYS.iter().map(|k| k.key.len()).max().unwrap_or(0);
    let mut s = String::from("Config keys (TOML, flat dotted names):\n");
    for k in KEYS {
        s.push_str(&format!(
            "  {:width$}  [{}] {}\n",
            k.key,
            k.kind.label(),
            k.help
        ));
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    Linear,
    Uav,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    All,
    GroundUsers,
    Uav,
    Indices(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceConfig {
    pub kind: DisturbanceKind,
    pub seed: Option<u64>,
    pub onset: usize,
    pub frequency: Option<f64>,
    pub direction: Option<Vec<f64>>,
    pub support: Support,
}

impl Default for DisturbanceConfig {
    fn default() -> Self {
        Self {
            kind: DisturbanceKind::Impulse,
            seed: None,
            onset: 0,
            frequency: None,
            direction: None,
            support: Support::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvKind,
    pub runs: usize,
    pub horizon: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub label: Option<String>,
    pub fit_input: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub rank_tol: f64,
    pub gamma: f64,
    pub gamma_d: f64,
    pub grid_points: usize,
    pub refinement_tol: f64,
    pub lipschitz: Option<f64>,
    pub disturbance: DisturbanceConfig,
    pub linear: LinearSurrogateConfig,
    pub uav: UavEnvConfig,
    pub policy: PolicyKind,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvKind::Linear,
            runs: 64,
            horizon: 50,
            seed: 0,
            out: None,
            label: None,
            fit_input: None,
            model: None,
            rank_tol: DEFAULT_RANK_TOL,
            gamma: 1.0,
            gamma_d: 0.9,
            grid_points: DEFAULT_GRID_POINTS,
            refinement_tol: DEFAULT_REFINEMENT_TOL,
            lipschitz: None,
            disturbance: DisturbanceConfig::default(),
            linear: LinearSurrogateConfig::default(),
            uav: UavEnvConfig::default(),
            policy: PolicyKind::CentroidGreedy,
        }
    }
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, toml::Value>) {
    for (k, v) in table {
        let name = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            toml::Value::Table(t) => flatten(&name, t, out),
            other => {
                out.insert(name, other.clone());
            }
        }
    }
}

struct Values {
    map: BTreeMap<String, toml::Value>,
}

impl Values {
    fn bad(key: &str, kind: KeyKind) -> Error {
        Error::Config(format!("key `{key}`: expected {}", kind.label()))
    }

    fn float(&self, key: &str) -> Result<Option<f64>> {
        self.map
            .get(key)
            .map(|v| match v {
                toml::Value::Float(f) => Ok(*f),
                toml::Value::Integer(i) => Ok(*i as f64),
                _ => Err(Self::bad(key, KeyKind::Float)),
            })
            .transpose()
    }

    fn int(&self, key: &str) -> Result<Option<u64>> {
        self.map
            .get(key)
            .map(|v| match v {
                toml::Value::Integer(i) if *i >= 0 => Ok(*i as u64),
                _ => Err(Self::bad(key, KeyKind::Int)),
            })
            .transpose()
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        Ok(self.int(key)?.map(|v| v as usize))
    }

    fn string(&self, key: &str) -> Result<Option<String>> {
        self.map
            .get(key)
            .map(|v| match v {
                toml::Value::String(s) => Ok(s.clone()),
                _ => Err(Self::bad(key, KeyKind::Str)),
            })
            .transpose()
    }

    fn float_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.map
            .get(key)
            .map(|v| match v {
                toml::Value::Array(items) => items
                    .iter()
                    .map(|x| match x {
                        toml::Value::Float(f) => Ok(*f),
                        toml::Value::Integer(i) => Ok(*i as f64),
                        _ => Err(Self::bad(key, KeyKind::FloatList)),
                    })
                    .collect(),
                _ => Err(Self::bad(key, KeyKind::FloatList)),
            })
            .transpose()
    }

    fn int_list(&self, key: &str) -> Result<Option<Vec<usize>>> {
        self.map
            .get(key)
            .map(|v| match v {
                toml::Value::Array(items) => items
                    .iter()
                    .map(|x| match x {
                        toml::Value::Integer(i) if *i >= 0 => Ok(*i as usize),
                        _ => Err(Self::bad(key, KeyKind::IntList)),
                    })
                    .collect(),
                _ => Err(Self::bad(key, KeyKind::IntList)),
            })
            .transpose()
    }

    fn matrix(&self, key: &str) -> Result<Option<DMatrix<f64>>> {
        let Some(v) = self.map.get(key) else {
            return Ok(None);
        };
        let toml::Value::Array(rows) = v else {
            return Err(Self::bad(key, KeyKind::Matrix));
        };
        let mut data = Vec::new();
        let mut ncols = None;
        for row in rows {
            let toml::Value::Array(items) = row else {
                return Err(Self::bad(key, KeyKind::Matrix));
            };
            if *ncols.get_or_insert(items.len()) != items.len() {
                return Err(Error::Config(format!(
                    "key `{key}`: rows have different lengths"
                )));
            }
            for x in items {
                data.push(match x {
                    toml::Value::Float(f) => *f,
                    toml::Value::Integer(i) => *i as f64,
                    _ => return Err(Self::bad(key, KeyKind::Matrix)),
                });
            }
        }
        let ncols = ncols.unwrap_or(0);
        Ok(Some(DMatrix::from_row_slice(rows.len(), ncols, &data)))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut map = BTreeMap::new();
        flatten("", &table, &mut map);
        for k in map.keys() {
            if !KEYS.iter().any(|s| s.key == k) {
                return Err(Error::Config(format!("unknown config key `{k}`")));
            }
        }
        let v = Values { map };
        let mut c = RunConfig::default();

        if let Some(e) = v.string("run.env")? {
            c.env = match e.as_str() {
                "linear" => EnvKind::Linear,
                "uav" => EnvKind::Uav,
                other => {
                    return Err(Error::Config(format!(
                        "run.env: unknown environment `{other}`"
                    )))
                }
            };
        }
        c.runs = v.usize("run.runs")?.unwrap_or(c.runs);
        c.horizon = v.usize("run.horizon")?.unwrap_or(c.horizon);
        c.seed = v.int("run.seed")?.unwrap_or(c.seed);
        c.out = v.string("run.out")?.map(PathBuf::from);
        c.label = v.string("run.label")?;
        c.fit_input = v.string("fit.input")?.map(PathBuf::from);
        c.model = v.string("analyze.model")?.map(PathBuf::from);
        c.rank_tol = v.float("fit.rank_tol")?.unwrap_or(c.rank_tol);
        c.gamma = v.float("analyze.gamma")?.unwrap_or(c.gamma);
        c.gamma_d = v.float("analyze.gamma_d")?.unwrap_or(c.gamma_d);
        c.grid_points = v.usize("analyze.grid_points")?.unwrap_or(c.grid_points);
        c.refinement_tol = v
            .float("analyze.refinement_tol")?
            .unwrap_or(c.refinement_tol);
        c.lipschitz = v.float("analyze.lipschitz")?;

        let d = &mut c.disturbance;
        if let Some(k) = v.string("disturbance.kind")? {
            d.kind = DisturbanceKind::parse(&k)?;
        }
        d.seed = v.int("disturbance.seed")?;
        d.onset = v.usize("disturbance.onset")?.unwrap_or(0);
        d.frequency = v.float("disturbance.frequency")?;
        d.direction = v.float_list("disturbance.direction")?;
        if let Some(s) = v.string("disturbance.support")? {
            d.support = match s.as_str() {
                "all" => Support::All,
                "gu" => Support::GroundUsers,
                "uav" => Support::Uav,
                other => {
                    return Err(Error::Config(format!(
                        "disturbance.support: unknown value `{other}`"
                    )))
                }
            };
        }
        if let Some(idx) = v.int_list("disturbance.support_indices")? {
            d.support = Support::Indices(idx);
        }

        let l = &mut c.linear;
        if let Some(a) = v.matrix("linear.A")? {
            l.a = a;
        }
        if let Some(f) = v.matrix("linear.F")? {
            l.f = f;
        }
        l.noise_std = v.float("linear.noise_std")?.unwrap_or(l.noise_std);
        l.x0_std = v.float("linear.x0_std")?.unwrap_or(l.x0_std);
        l.x0_mean = match v.float_list("linear.x0_mean")? {
            Some(x) => DVector::from_vec(x),
            None => DVector::from_element(l.a.nrows(), 1.0),
        };
        l.reward = LinearReward {
            state_weight: v.float("linear.reward_state_weight")?.unwrap_or(1.0),
            action_weight: v.float("linear.reward_action_weight")?.unwrap_or(0.1),
        };
        l.horizon = c.horizon;
        l.seed = c.seed;

        let u = &mut c.uav;
        u.area.0 = v.float("env.area_x")?.unwrap_or(u.area.0);
        u.area.1 = v.float("env.area_y")?.unwrap_or(u.area.1);
        u.num_gus = v.usize("env.J")?.unwrap_or(u.num_gus);
        u.altitude_m = v.float("env.H")?.unwrap_or(u.altitude_m);
        u.step_s = v.float("env.kappa")?.unwrap_or(u.step_s);
        u.v_max = v.float("env.V_max")?.unwrap_or(u.v_max);
        u.coverage_m = v.float("env.D_max")?.unwrap_or(u.coverage_m);
        u.gu_mean_speed = v.float("env.v_bar")?.unwrap_or(u.gu_mean_speed);
        u.gu_speed_std = v.float("env.nu_std")?.unwrap_or(u.gu_speed_std);
        u.gu_keep_prob = v.float("env.epsilon")?.unwrap_or(u.gu_keep_prob);
        u.gu_speed_memory = v.float("env.h1")?.unwrap_or(u.gu_speed_memory);
        if let Some(m) = v.string("env.heading_mode")? {
            u.heading_mode = match m.as_str() {
                "epsilon_greedy" => HeadingMode::EpsilonGreedy,
                "additive" => HeadingMode::Additive,
                other => {
                    return Err(Error::Config(format!(
                        "env.heading_mode: unknown value `{other}`"
                    )))
                }
            };
        }
        u.gu_mean_steering = v.float("env.phi_bar")?.unwrap_or(u.gu_mean_steering);
        u.bandwidth_hz = v.float("env.bandwidth_hz")?.unwrap_or(u.bandwidth_hz);
        u.transmit_power_w = v.float("env.P_watt")?.unwrap_or(u.transmit_power_w);
        u.carrier_hz = v.float("env.f_hz")?.unwrap_or(u.carrier_hz);
        if let Some(dbm) = v.float("env.N0_dbm")? {
            u.noise_power_w = dbm_to_watt(dbm);
        }
        u.min_rate_bps = v.float("env.R_min_bps")?.unwrap_or(u.min_rate_bps);
        u.absorption_per_m = v.float("env.alpha")?.unwrap_or(u.absorption_per_m);
        u.gain_uav = v.float("env.G_uav")?.unwrap_or(u.gain_uav);
        u.gain_gu = v.float("env.G_gu")?.unwrap_or(u.gain_gu);
        u.reward_weight = v.float("env.a")?.unwrap_or(u.reward_weight);
        u.violation_weight = v.float("env.beta")?.unwrap_or(u.violation_weight);
        if let Some(f) = v.string("env.fairness")? {
            u.fairness_mode = match f.as_str() {
                "as_written" => FairnessMode::AsWritten,
                "standard" => FairnessMode::Standard,
                other => {
                    return Err(Error::Config(format!(
                        "env.fairness: unknown value `{other}`"
                    )))
                }
            };
        }
        u.lag_factor = v.float("env.lag_factor")?.unwrap_or(u.lag_factor);
        if let Some(p) = v.string("env.policy")? {
            c.policy = PolicyKind::parse(&p)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("run.runs must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("run.horizon must be at least 1".into()));
        }
        if !(self.rank_tol > 0.0 && self.rank_tol < 1.0) {
            return Err(Error::Config(format!(
                "fit.rank_tol must lie in (0, 1), got {}",
                self.rank_tol
            )));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::Config(format!(
                "analyze.gamma must be finite and >= 0, got {}",
                self.gamma
            )));
        }
        if !(0.0..1.0).contains(&self.gamma_d) {
            return Err(Error::Config(format!(
                "analyze.gamma_d must lie in [0, 1), got {}",
                self.gamma_d
            )));
        }
        if let Some(l) = self.lipschitz {
            if !(l >= 0.0) {
                return Err(Error::Config(format!(
                    "analyze.lipschitz must be >= 0, got {l}"
                )));
            }
        }
        match self.env {
            EnvKind::Linear => self
                .linear
                .validate()
                .map_err(|e| Error::Config(e.to_string())),
            EnvKind::Uav => self.uav.validate(),
        }
    }

    pub fn env_spec(&self) -> EnvSpec {
        match self.env {
            EnvKind::Linear => {
                let mut l = self.linear.clone();
                l.horizon = self.horizon;
                l.seed = self.seed;
                EnvSpec::Linear(l)
            }
            EnvKind::Uav => EnvSpec::Uav {
                config: self.uav.clone(),
                policy: self.policy,
                horizon: self.horizon,
            },
        }
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| match self.env {
            EnvKind::Linear => "linear".into(),
            EnvKind::Uav => self.policy.name().into(),
        })
    }

    pub fn disturbance_spec(&self, gamma: f64) -> Result<DisturbanceSpec> {
        let spec_env = self.env_spec();
        let n = spec_env.state_dim();
        let d = &self.disturbance;
        let mut spec =
            DisturbanceSpec::new(d.kind, gamma, self.horizon, n, d.seed.unwrap_or(self.seed));
        spec.onset = d.onset;
        spec.frequency = d.frequency;
        spec.direction = d.direction.clone().map(DVector::from_vec);
        spec.support = match &d.support {
            Support::All => None,
            Support::Indices(i) => Some(i.clone()),
            Support::GroundUsers | Support::Uav if self.env == EnvKind::Linear => {
                return Err(Error::Config(
                    "disturbance.support gu/uav requires run.env = \"uav\"".into(),
                ))
            }
            Support::GroundUsers => Some((0..2 * self.uav.num_gus).collect()),
            Support::Uav => Some(vec![n - 2, n - 1]),
        };
        Ok(spec)
    }

    /// Analytic Lipschitz constant when configured or known for the environment.
    pub fn analytic_lipschitz(&self) -> Option<f64> {
        self.lipschitz.or(match self.env {
            EnvKind::Linear => Some(self.linear.reward.lipschitz()),
            EnvKind::Uav => None,
        })
    }
}
