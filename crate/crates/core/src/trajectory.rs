//! Trajectory ensembles, their ensemble means, and the snapshot matrices that
//! the Koopman fits consume.
//!
//! On disk an ensemble is a comma-separated table with one row per
//! `(run, step)`:
//!
//! ```text
//! #seed,0,42
//! run,k,x0,x1,u0,r
//! 0,0,1,1,0.5,-1.2
//! 0,1,0.9,0.5,0.45,-0.9
//! 0,2,0.86,0.25,,
//! ```
//!
//! The last row of each run carries the terminal state with empty action and
//! reward fields. `#seed` comment lines record each run's RNG seed.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub run_id: u64,
    /// `K + 1` states.
    pub states: Vec<DVector<f64>>,
    /// `K` actions.
    pub actions: Vec<DVector<f64>>,
    /// `K` rewards; `rewards[k]` is the reward for the transition `k -> k + 1`.
    pub rewards: Vec<f64>,
    pub seed: u64,
}

impl Trajectory {
    pub fn new(
        run_id: u64,
        states: Vec<DVector<f64>>,
        actions: Vec<DVector<f64>>,
        rewards: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        let traj = Self {
            run_id,
            states,
            actions,
            rewards,
            seed,
        };
        traj.validate()?;
        Ok(traj)
    }

    fn validate(&self) -> Result<()> {
        if self.states.is_empty() {
            return Err(Error::EmptyInput(format!(
                "run {} has no states",
                self.run_id
            )));
        }
        if self.states.len() != self.actions.len() + 1 || self.actions.len() != self.rewards.len() {
            return Err(Error::DimensionMismatch(format!(
                "run {}: {} states, {} actions, {} rewards (expected K+1, K, K)",
                self.run_id,
                self.states.len(),
                self.actions.len(),
                self.rewards.len()
            )));
        }
        let n = self.states[0].len();
        if let Some(bad) = self.states.iter().position(|s| s.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "run {}: state {bad} has dimension {}, expected {n}",
                self.run_id,
                self.states[bad].len()
            )));
        }
        if let Some(first) = self.actions.first() {
            let m = first.len();
            if let Some(bad) = self.actions.iter().position(|a| a.len() != m) {
                return Err(Error::DimensionMismatch(format!(
                    "run {}: action {bad} has dimension {}, expected {m}",
                    self.run_id,
                    self.actions[bad].len()
                )));
            }
        }
        let finite = self.states.iter().all(|s| s.iter().all(|v| v.is_finite()))
            && self.actions.iter().all(|a| a.iter().all(|v| v.is_finite()))
            && self.rewards.iter().all(|r| r.is_finite());
        if !finite {
            return Err(Error::Data(format!(
                "run {} contains non-finite values",
                self.run_id
            )));
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn state_dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn action_dim(&self) -> usize {
        self.actions.first().map_or(0, |a| a.len())
    }
}

/// `R` independent runs sharing state dimension, action dimension and horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    trajectories: Vec<Trajectory>,
    n: usize,
    m: usize,
    horizon: usize,
}

impl TrajectoryEnsemble {
    pub fn new(trajectories: Vec<Trajectory>) -> Result<Self> {
        let first = trajectories
            .first()
            .ok_or_else(|| Error::EmptyInput("ensemble has no runs".into()))?;
        let (n, m, horizon) = (first.state_dim(), first.action_dim(), first.horizon());
        let mut ids = HashSet::new();
        for t in &trajectories {
            t.validate()?;
            if t.state_dim() != n || t.horizon() != horizon || (horizon > 0 && t.action_dim() != m)
            {
                return Err(Error::DimensionMismatch(format!(
                    "run {} has (n, m, K) = ({}, {}, {}), ensemble has ({n}, {m}, {horizon})",
                    t.run_id,
                    t.state_dim(),
                    t.action_dim(),
                    t.horizon()
                )));
            }
            if !ids.insert(t.run_id) {
                return Err(Error::Data(format!("duplicate run id {}", t.run_id)));
            }
        }
        Ok(Self {
            trajectories,
            n,
            m,
            horizon,
        })
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn runs(&self) -> usize {
        self.trajectories.len()
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn action_dim(&self) -> usize {
        self.m
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn into_trajectories(self) -> Vec<Trajectory> {
        self.trajectories
    }
}

/// Per-step ensemble means of states, actions and rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanTrajectory {
    pub mean_states: Vec<DVector<f64>>,
    pub mean_actions: Vec<DVector<f64>>,
    pub mean_rewards: Vec<f64>,
    pub r_count: usize,
}

impl MeanTrajectory {
    pub fn horizon(&self) -> usize {
        self.mean_actions.len()
    }

    pub fn state_dim(&self) -> usize {
        self.mean_states.first().map_or(0, |s| s.len())
    }

    pub fn action_dim(&self) -> usize {
        self.mean_actions.first().map_or(0, |a| a.len())
    }

    /// A mean trajectory built directly from known sequences, with `r_count = 1`.
    pub fn from_sequences(
        mean_states: Vec<DVector<f64>>,
        mean_actions: Vec<DVector<f64>>,
        mean_rewards: Vec<f64>,
    ) -> Result<Self> {
        let t = Trajectory::new(0, mean_states, mean_actions, mean_rewards, 0)?;
        Ok(Self {
            mean_states: t.states,
            mean_actions: t.actions,
            mean_rewards: t.rewards,
            r_count: 1,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotKind {
    StateShifted,
    StateAction,
}

/// Column-aligned data matrices: `right[:, j]` is the image of `left[:, j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotPair {
    pub left: DMatrix<f64>,
    pub right: DMatrix<f64>,
    pub kind: SnapshotKind,
}

impl SnapshotPair {
    pub fn new(left: DMatrix<f64>, right: DMatrix<f64>, kind: SnapshotKind) -> Result<Self> {
        if left.ncols() != right.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "left has {} columns, right has {}",
                left.ncols(),
                right.ncols()
            )));
        }
        if kind == SnapshotKind::StateShifted && left.nrows() != right.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "state-shifted pair needs equal row counts, got {} and {}",
                left.nrows(),
                right.nrows()
            )));
        }
        Ok(Self { left, right, kind })
    }

    /// Horizontal concatenation of pairs of the same kind and row counts.
    pub fn concat(pairs: &[SnapshotPair]) -> Result<Self> {
        let first = pairs
            .first()
            .ok_or_else(|| Error::EmptyInput("no snapshot pairs to concatenate".into()))?;
        let (lr, rr, kind) = (first.left.nrows(), first.right.nrows(), first.kind);
        if pairs
            .iter()
            .any(|p| p.kind != kind || p.left.nrows() != lr || p.right.nrows() != rr)
        {
            return Err(Error::DimensionMismatch(
                "snapshot pairs disagree in shape or kind".into(),
            ));
        }
        let cols: usize = pairs.iter().map(|p| p.left.ncols()).sum();
        let mut left = DMatrix::zeros(lr, cols);
        let mut right = DMatrix::zeros(rr, cols);
        let mut at = 0;
        for p in pairs {
            let c = p.left.ncols();
            left.columns_mut(at, c).copy_from(&p.left);
            right.columns_mut(at, c).copy_from(&p.right);
            at += c;
        }
        Self::new(left, right, kind)
    }
}

// Pairwise (cascade) summation. Splitting at the midpoint keeps the reduction
// tree a pure function of the length, so results are reproducible.
fn pairwise_sum(items: &[&DVector<f64>]) -> DVector<f64> {
    match items.len() {
        0 => unreachable!("pairwise_sum on empty slice"),
        1 => items[0].clone(),
        2 => items[0] + items[1],
        len => {
            let mid = len / 2;
            pairwise_sum(&items[..mid]) + pairwise_sum(&items[mid..])
        }
    }
}

fn pairwise_sum_scalar(items: &[f64]) -> f64 {
    match items.len() {
        0 => 0.0,
        1 => items[0],
        len => {
            let mid = len / 2;
            pairwise_sum_scalar(&items[..mid]) + pairwise_sum_scalar(&items[mid..])
        }
    }
}

pub fn ensemble_mean(ensemble: &TrajectoryEnsemble) -> Result<MeanTrajectory> {
    let runs = ensemble.trajectories();
    if runs.is_empty() {
        return Err(Error::EmptyInput("ensemble has no runs".into()));
    }
    let r = runs.len() as f64;
    let mean_states = (0..=ensemble.horizon())
        .map(|k| {
            let col: Vec<&DVector<f64>> = runs.iter().map(|t| &t.states[k]).collect();
            pairwise_sum(&col) / r
        })
        .collect();
    let mean_actions = (0..ensemble.horizon())
        .map(|k| {
            let col: Vec<&DVector<f64>> = runs.iter().map(|t| &t.actions[k]).collect();
            pairwise_sum(&col) / r
        })
        .collect();
    let mean_rewards = (0..ensemble.horizon())
        .map(|k| {
            let col: Vec<f64> = runs.iter().map(|t| t.rewards[k]).collect();
            pairwise_sum_scalar(&col) / r
        })
        .collect();
    Ok(MeanTrajectory {
        mean_states,
        mean_actions,
        mean_rewards,
        r_count: runs.len(),
    })
}

fn columns(vectors: &[DVector<f64>]) -> DMatrix<f64> {
    DMatrix::from_columns(vectors)
}

pub fn build_state_snapshots(mean: &MeanTrajectory) -> Result<SnapshotPair> {
    let k = mean.mean_states.len().saturating_sub(1);
    if k < 2 {
        return Err(Error::InsufficientData(format!(
            "state snapshots need K >= 2, got K = {k}"
        )));
    }
    let left = columns(&mean.mean_states[..k]);
    let right = columns(&mean.mean_states[1..]);
    SnapshotPair::new(left, right, SnapshotKind::StateShifted)
}

pub fn build_action_pairs(mean: &MeanTrajectory) -> Result<SnapshotPair> {
    let k = mean.horizon();
    if k < 1 {
        return Err(Error::InsufficientData("action pairs need K >= 1".into()));
    }
    let left = columns(&mean.mean_states[..k]);
    let right = columns(&mean.mean_actions);
    SnapshotPair::new(left, right, SnapshotKind::StateAction)
}

// ---------------------------------------------------------------------------
// File format

pub fn write_trajectories<W: Write>(ensemble: &TrajectoryEnsemble, mut out: W) -> Result<()> {
    let (n, m) = (ensemble.state_dim(), ensemble.action_dim());
    let mut buf = String::new();
    for t in ensemble.trajectories() {
        writeln!(buf, "#seed,{},{}", t.run_id, t.seed).expect("write to string");
    }
    let mut header = vec!["run".to_string(), "k".to_string()];
    header.extend((0..n).map(|i| format!("x{i}")));
    header.extend((0..m).map(|i| format!("u{i}")));
    header.push("r".into());
    buf.push_str(&header.join(","));
    buf.push('\n');
    out.write_all(buf.as_bytes())?;

    for t in ensemble.trajectories() {
        for (k, state) in t.states.iter().enumerate() {
            buf.clear();
            write!(buf, "{},{}", t.run_id, k).expect("write to string");
            for v in state.iter() {
                write!(buf, ",{v:?}").expect("write to string");
            }
            if k < t.horizon() {
                for v in t.actions[k].iter() {
                    write!(buf, ",{v:?}").expect("write to string");
                }
                write!(buf, ",{:?}", t.rewards[k]).expect("write to string");
            } else {
                buf.push_str(&",".repeat(m + 1));
            }
            buf.push('\n');
            out.write_all(buf.as_bytes())?;
        }
    }
    Ok(())
}

pub fn save_trajectories(ensemble: &TrajectoryEnsemble, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_trajectories(ensemble, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_trajectories(
    path: &Path,
    expected_dims: Option<(usize, usize)>,
) -> Result<TrajectoryEnsemble> {
    let file = std::fs::File::open(path)?;
    read_trajectories(std::io::BufReader::new(file), expected_dims)
}

fn parse_header(header: &csv::StringRecord) -> Result<(usize, usize)> {
    let bad = |msg: String| Error::Parse {
        line: 1,
        message: msg,
    };
    let fields: Vec<&str> = header.iter().collect();
    if fields.len() < 3 || fields[0] != "run" || fields[1] != "k" || fields[fields.len() - 1] != "r"
    {
        return Err(bad(format!(
            "header must be `run,k,x0..,u0..,r`, got `{}`",
            fields.join(",")
        )));
    }
    let body = &fields[2..fields.len() - 1];
    let n = body.iter().take_while(|f| f.starts_with('x')).count();
    for (i, f) in body.iter().enumerate() {
        let expected = if i < n {
            format!("x{i}")
        } else {
            format!("u{}", i - n)
        };
        if *f != expected {
            return Err(bad(format!("header column `{f}`, expected `{expected}`")));
        }
    }
    if n == 0 {
        return Err(bad("header declares no state columns".into()));
    }
    Ok((n, body.len() - n))
}

struct PendingRun {
    run_id: u64,
    states: Vec<DVector<f64>>,
    actions: Vec<DVector<f64>>,
    rewards: Vec<f64>,
    closed: bool,
}

pub fn read_trajectories<R: Read>(
    mut input: R,
    expected_dims: Option<(usize, usize)>,
) -> Result<TrajectoryEnsemble> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;

    let mut seeds = std::collections::HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(rest) = line.strip_prefix("#seed,") {
            let mut parts = rest.split(',').map(str::trim);
            let parsed = (parts.next(), parts.next());
            match parsed {
                (Some(run), Some(seed)) => match (run.parse::<u64>(), seed.parse::<u64>()) {
                    (Ok(run), Ok(seed)) => {
                        seeds.insert(run, seed);
                    }
                    _ => {
                        return Err(Error::Parse {
                            line: i as u64 + 1,
                            message: format!("malformed seed line `{line}`"),
                        })
                    }
                },
                _ => {
                    return Err(Error::Parse {
                        line: i as u64 + 1,
                        message: format!("malformed seed line `{line}`"),
                    })
                }
            }
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Parse {
            line: 1,
            message: "missing header row".into(),
        });
    }
    let header_line = reader.position().line().max(1);
    let header = parse_header(&header).map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse {
            line: header_line,
            message,
        },
        other => other,
    })?;
    let (n, m) = header;
    if let Some((en, em)) = expected_dims {
        if (en, em) != (n, m) {
            return Err(Error::DimensionMismatch(format!(
                "file declares (n, m) = ({n}, {m}), expected ({en}, {em})"
            )));
        }
    }
    let width = 2 + n + m + 1;

    let mut runs: Vec<PendingRun> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(Error::DimensionMismatch(format!(
                "line {line}: {} fields, header declares {width} (n = {n}, m = {m})",
                record.len()
            )));
        }
        let parse_int = |s: &str, what: &str| {
            s.parse::<u64>().map_err(|_| Error::Parse {
                line,
                message: format!("invalid {what} `{s}`"),
            })
        };
        let parse_num = |s: &str, col: usize| -> Result<f64> {
            let v = s.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("invalid number `{s}` in column {}", col + 1),
            })?;
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "line {line}: non-finite value `{s}` in column {}",
                    col + 1
                )));
            }
            Ok(v)
        };
        let run_id = parse_int(&record[0], "run id")?;
        let k = parse_int(&record[1], "step index")? as usize;

        let state = (0..n)
            .map(|i| parse_num(&record[2 + i], 2 + i))
            .collect::<Result<Vec<_>>>()?;
        let tail: Vec<&str> = (2 + n..width).map(|i| &record[i]).collect();
        let terminal = tail.iter().all(|s| s.is_empty());
        if !terminal && tail.iter().any(|s| s.is_empty()) {
            return Err(Error::Parse {
                line,
                message: "action/reward fields must be all present or all empty".into(),
            });
        }

        let start_new = runs.last().is_none_or(|r| r.run_id != run_id);
        if start_new {
            if let Some(prev) = runs.last() {
                if !prev.closed {
                    return Err(Error::Parse {
                        line,
                        message: format!("run {} ends without a terminal row", prev.run_id),
                    });
                }
            }
            if runs.iter().any(|r| r.run_id == run_id) {
                return Err(Error::Parse {
                    line,
                    message: format!("rows of run {run_id} are not contiguous"),
                });
            }
            runs.push(PendingRun {
                run_id,
                states: Vec::new(),
                actions: Vec::new(),
                rewards: Vec::new(),
                closed: false,
            });
        }
        let run = runs.last_mut().expect("run pushed above");
        if run.closed {
            return Err(Error::Parse {
                line,
                message: format!("row after terminal state of run {run_id}"),
            });
        }
        if k != run.states.len() {
            return Err(Error::Parse {
                line,
                message: format!(
                    "run {run_id}: step {k} out of order, expected {}",
                    run.states.len()
                ),
            });
        }
        run.states.push(DVector::from_vec(state));
        if terminal {
            run.closed = true;
        } else {
            let action = (0..m)
                .map(|i| parse_num(tail[i], 2 + n + i))
                .collect::<Result<Vec<_>>>()?;
            run.actions.push(DVector::from_vec(action));
            run.rewards.push(parse_num(tail[m], width - 1)?);
        }
    }
    if let Some(last) = runs.last() {
        if !last.closed {
            return Err(Error::Parse {
                line: text.lines().count() as u64,
                message: format!("run {} ends without a terminal row", last.run_id),
            });
        }
    }
    if runs.is_empty() {
        return Err(Error::EmptyInput("trajectory file has no rows".into()));
    }
    let trajectories = runs
        .into_iter()
        .map(|r| {
            let seed = seeds.get(&r.run_id).copied().unwrap_or(0);
            Trajectory::new(r.run_id, r.states, r.actions, r.rewards, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let ens = TrajectoryEnsemble::new(trajectories)?;
    if ens.state_dim() != n || (ens.horizon() > 0 && ens.action_dim() != m) {
        return Err(Error::Internal(
            "parsed dimensions disagree with header".into(),
        ));
    }
    Ok(ens)
}
