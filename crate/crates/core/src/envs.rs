//! Native CartPole-v1 and MountainCar-v0 with the published Gym dynamics.
//!
//! Episodes are capped at 200 steps. Observations handed to networks are
//! normalized to [-1, 1]; the recorded trace holds the normalized
//! observation reached after each step, so the final (possibly terminal)
//! state is part of it.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cgp::ActiveNetwork;
use crate::error::{Error, Result};
use crate::seed::{self, Stream};

pub const MAX_STEPS: usize = 200;
pub const SOLVED_TRIALS: usize = 100;

const CP_GRAVITY: f64 = 9.8;
const CP_MASS_CART: f64 = 1.0;
const CP_MASS_POLE: f64 = 0.1;
const CP_TOTAL_MASS: f64 = CP_MASS_CART + CP_MASS_POLE;
const CP_HALF_LENGTH: f64 = 0.5;
const CP_POLE_MASS_LENGTH: f64 = CP_MASS_POLE * CP_HALF_LENGTH;
const CP_FORCE: f64 = 10.0;
const CP_TAU: f64 = 0.02;
const CP_X_THRESHOLD: f64 = 2.4;
const CP_THETA_THRESHOLD: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;

const MC_MIN_POSITION: f64 = -1.2;
const MC_MAX_POSITION: f64 = 0.6;
const MC_MAX_SPEED: f64 = 0.07;
const MC_GOAL_POSITION: f64 = 0.5;
const MC_FORCE: f64 = 0.001;
const MC_GRAVITY: f64 = 0.0025;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnvKind {
    CartPole,
    MountainCar,
}

impl EnvKind {
    pub fn spec(self) -> EnvSpec {
        match self {
            EnvKind::CartPole => EnvSpec {
                kind: self,
                obs_dim: 4,
                action_count: 2,
                max_steps: MAX_STEPS,
                normalization: vec![(-4.8, 4.8), (-10.0, 10.0), (-0.418, 0.418), (-10.0, 10.0)],
            },
            EnvKind::MountainCar => EnvSpec {
                kind: self,
                obs_dim: 2,
                action_count: 3,
                max_steps: MAX_STEPS,
                normalization: vec![
                    (MC_MIN_POSITION, MC_MAX_POSITION),
                    (-MC_MAX_SPEED, MC_MAX_SPEED),
                ],
            },
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvKind::CartPole => f.write_str("CartPole-v1"),
            EnvKind::MountainCar => f.write_str("MountainCar-v0"),
        }
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "cartpole" | "cartpolev1" | "cpole" => Ok(EnvKind::CartPole),
            "mountaincar" | "mountaincarv0" | "mcar" => Ok(EnvKind::MountainCar),
            _ => Err(Error::Parse {
                what: "environment name",
                detail: s.to_string(),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvSpec {
    pub kind: EnvKind,
    pub obs_dim: usize,
    pub action_count: usize,
    pub max_steps: usize,
    /// Per-dimension raw interval mapped affinely onto [-1, 1].
    pub normalization: Vec<(f64, f64)>,
}

impl EnvSpec {
    pub fn normalize(&self, raw: &[f64], out: &mut [f64]) {
        for ((o, &x), &(lo, hi)) in out.iter_mut().zip(raw).zip(&self.normalization) {
            *o = (2.0 * (x - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0);
        }
    }

    /// Inverse of [`normalize`](Self::normalize) for unclipped values.
    pub fn denormalize(&self, dim: usize, value: f64) -> f64 {
        let (lo, hi) = self.normalization[dim];
        lo + (value + 1.0) * (hi - lo) / 2.0
    }

    pub fn solved_threshold(&self) -> f64 {
        match self.kind {
            EnvKind::CartPole => 195.0,
            EnvKind::MountainCar => -110.0,
        }
    }

    /// CartPole needs a mean of at least 195, MountainCar strictly more
    /// than -110.
    pub fn meets_threshold(&self, mean_reward: f64) -> bool {
        match self.kind {
            EnvKind::CartPole => mean_reward >= 195.0,
            EnvKind::MountainCar => mean_reward > -110.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EnvState {
    CartPole {
        x: f64,
        x_dot: f64,
        theta: f64,
        theta_dot: f64,
    },
    MountainCar {
        position: f64,
        velocity: f64,
    },
}

impl EnvState {
    pub fn raw(&self) -> Vec<f64> {
        match *self {
            EnvState::CartPole {
                x,
                x_dot,
                theta,
                theta_dot,
            } => vec![x, x_dot, theta, theta_dot],
            EnvState::MountainCar { position, velocity } => vec![position, velocity],
        }
    }

    pub fn kind(&self) -> EnvKind {
        match self {
            EnvState::CartPole { .. } => EnvKind::CartPole,
            EnvState::MountainCar { .. } => EnvKind::MountainCar,
        }
    }
}

pub fn reset<R: Rng + ?Sized>(spec: &EnvSpec, rng: &mut R) -> EnvState {
    match spec.kind {
        EnvKind::CartPole => EnvState::CartPole {
            x: rng.random_range(-0.05..0.05),
            x_dot: rng.random_range(-0.05..0.05),
            theta: rng.random_range(-0.05..0.05),
            theta_dot: rng.random_range(-0.05..0.05),
        },
        EnvKind::MountainCar => EnvState::MountainCar {
            position: rng.random_range(-0.6..-0.4),
            velocity: 0.0,
        },
    }
}

/// Advances one time step. Returns the next state, the step reward and
/// whether the episode terminated.
pub fn step(spec: &EnvSpec, state: &EnvState, action: usize) -> Result<(EnvState, f64, bool)> {
    if action >= spec.action_count {
        return Err(Error::InvalidAction {
            action,
            count: spec.action_count,
        });
    }
    match *state {
        EnvState::CartPole {
            x,
            x_dot,
            theta,
            theta_dot,
        } => {
            let force = if action == 1 { CP_FORCE } else { -CP_FORCE };
            let (sin, cos) = theta.sin_cos();
            let temp = (force + CP_POLE_MASS_LENGTH * theta_dot * theta_dot * sin) / CP_TOTAL_MASS;
            let theta_acc = (CP_GRAVITY * sin - cos * temp)
                / (CP_HALF_LENGTH * (4.0 / 3.0 - CP_MASS_POLE * cos * cos / CP_TOTAL_MASS));
            let x_acc = temp - CP_POLE_MASS_LENGTH * theta_acc * cos / CP_TOTAL_MASS;
            // Explicit Euler, position before velocity.
            let x = x + CP_TAU * x_dot;
            let theta = theta + CP_TAU * theta_dot;
            let next = EnvState::CartPole {
                x,
                x_dot: x_dot + CP_TAU * x_acc,
                theta,
                theta_dot: theta_dot + CP_TAU * theta_acc,
            };
            let terminated = !(-CP_X_THRESHOLD..=CP_X_THRESHOLD).contains(&x)
                || !(-CP_THETA_THRESHOLD..=CP_THETA_THRESHOLD).contains(&theta);
            Ok((next, 1.0, terminated))
        }
        EnvState::MountainCar { position, velocity } => {
            let mut velocity = velocity + (action as f64 - 1.0) * MC_FORCE
                + (3.0 * position).cos() * (-MC_GRAVITY);
            velocity = velocity.clamp(-MC_MAX_SPEED, MC_MAX_SPEED);
            let mut position = position + velocity;
            position = position.clamp(MC_MIN_POSITION, MC_MAX_POSITION);
            if position == MC_MIN_POSITION && velocity < 0.0 {
                velocity = 0.0;
            }
            let terminated = position >= MC_GOAL_POSITION && velocity >= 0.0;
            Ok((EnvState::MountainCar { position, velocity }, -1.0, terminated))
        }
    }
}

/// Index of the largest output; the lowest index wins ties.
pub fn select_action(outputs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in outputs.iter().enumerate().skip(1) {
        if v > outputs[best] {
            best = i;
        }
    }
    best
}

/// Height of the MountainCar track at a raw position.
pub fn mountain_height(position: f64) -> f64 {
    (3.0 * position).sin() * 0.45 + 0.55
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub total_reward: f64,
    /// Minimization sense.
    pub fitness: f64,
    pub steps: usize,
    /// Raw state the episode started from.
    pub initial_state: Vec<f64>,
    pub obs_dim: usize,
    /// Row-major normalized observations, `steps` rows of `obs_dim`.
    pub trace: Vec<f64>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub solved_flag: bool,
}

impl EpisodeResult {
    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.trace.chunks_exact(self.obs_dim)
    }

    /// Writes `step,obs_1..obs_d,action,reward` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["step".to_string()];
        header.extend((1..=self.obs_dim).map(|i| format!("obs_{i}")));
        header.push("action".into());
        header.push("reward".into());
        w.write_record(&header).map_err(csv_err)?;
        for (t, state) in self.states().enumerate() {
            let mut row = vec![(t + 1).to_string()];
            row.extend(state.iter().map(|v| v.to_string()));
            row.push(self.actions[t].to_string());
            row.push(self.rewards[t].to_string());
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("<trace csv>", e))?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Parse {
        what: "csv",
        detail: e.to_string(),
    }
}

/// Fitness (to be minimized) of an episode: the negative reward for
/// CartPole, and `-(max height + reward / 100)` for MountainCar with the
/// height taken from the track profile at each visited position.
pub fn fitness_for(spec: &EnvSpec, total_reward: f64, trace: &[f64]) -> f64 {
    debug_assert!(!trace.is_empty());
    match spec.kind {
        EnvKind::CartPole => -total_reward,
        EnvKind::MountainCar => {
            let max_height = trace
                .chunks_exact(spec.obs_dim)
                .map(|s| mountain_height(spec.denormalize(0, s[0])))
                .fold(f64::NEG_INFINITY, f64::max);
            -(max_height + total_reward / 100.0)
        }
    }
}

pub fn run_episode<R: Rng + ?Sized>(
    spec: &EnvSpec,
    net: &ActiveNetwork,
    rng: &mut R,
) -> Result<EpisodeResult> {
    if net.num_inputs() != spec.obs_dim || net.num_outputs() != spec.action_count {
        return Err(Error::InvalidConfig(format!(
            "network shape {}x{} does not fit {} ({} observations, {} actions)",
            net.num_inputs(),
            net.num_outputs(),
            spec.kind,
            spec.obs_dim,
            spec.action_count
        )));
    }
    let mut state = reset(spec, rng);
    let initial_state = state.raw();
    let mut obs = vec![0.0; spec.obs_dim];
    spec.normalize(&state.raw(), &mut obs);
    let mut trace = Vec::with_capacity(spec.max_steps * spec.obs_dim);
    let mut actions = Vec::with_capacity(spec.max_steps);
    let mut rewards = Vec::with_capacity(spec.max_steps);
    let mut total_reward = 0.0;
    for _ in 0..spec.max_steps {
        let action = select_action(&net.forward(&obs)?);
        let (next, reward, terminated) = step(spec, &state, action)?;
        state = next;
        spec.normalize(&state.raw(), &mut obs);
        trace.extend_from_slice(&obs);
        actions.push(action);
        rewards.push(reward);
        total_reward += reward;
        if terminated {
            break;
        }
    }
    let steps = actions.len();
    let fitness = fitness_for(spec, total_reward, &trace);
    Ok(EpisodeResult {
        total_reward,
        fitness,
        steps,
        initial_state,
        obs_dim: spec.obs_dim,
        trace,
        actions,
        rewards,
        solved_flag: spec.meets_threshold(total_reward),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolvedReport {
    pub mean_reward: f64,
    pub trials: usize,
    pub solved: bool,
}

/// Runs 100 fresh episodes, trial `i` seeded from `(seed, i)`, and applies
/// the environment's mean-reward threshold.
pub fn solved_check(spec: &EnvSpec, net: &ActiveNetwork, seed: u64) -> Result<SolvedReport> {
    let rewards: Vec<f64> = (0..SOLVED_TRIALS as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::rng_for(seed, Stream::SolvedCheck, i);
            run_episode(spec, net, &mut rng).map(|e| e.total_reward)
        })
        .collect::<Result<_>>()?;
    Ok(solved_from_rewards(spec, &rewards))
}

pub fn solved_from_rewards(spec: &EnvSpec, rewards: &[f64]) -> SolvedReport {
    let mean_reward = rewards.iter().sum::<f64>() / rewards.len() as f64;
    SolvedReport {
        mean_reward,
        trials: rewards.len(),
        solved: spec.meets_threshold(mean_reward),
    }
}
