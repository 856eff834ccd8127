//! Desk-scale environments, behavior policies and the evaluation protocol.

mod behavior;
mod dataset;
mod gridworld;
mod pointmass;

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;

pub use behavior::{
    generate_dataset, generate_dataset_with_returns, reference_returns, sparse_action_dataset,
    BehaviorComponent, BehaviorPolicy, BehaviorPolicyLevel, SPARSE_ACTION_CENTER, SPARSE_ACTION_WIDTH,
};
pub use dataset::{Batch, DatasetMeta, TransitionDataset};
pub use gridworld::{argmax, GridworldSpec, MOVES};
pub use pointmass::{PointMassSpec, PD_KD, PD_KP};

use crate::error::{Error, Result};
use crate::rng::{self, purpose, StreamRng};

#[derive(Debug, Clone, PartialEq)]
pub enum EnvSpec {
    Gridworld(GridworldSpec),
    PointMass(PointMassSpec),
}

/// Simulator state plus the elapsed step count.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub values: Vec<f64>,
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: EnvState,
    pub reward: f64,
    /// Episode over (goal or horizon).
    pub done: bool,
    /// Goal absorption only; timeouts are not terminal.
    pub terminal: bool,
}

impl EnvSpec {
    pub fn tag(&self) -> &'static str {
        match self {
            EnvSpec::Gridworld(_) => "gridworld",
            EnvSpec::PointMass(_) => "pointmass",
        }
    }

    pub fn by_tag(tag: &str) -> Result<Self> {
        match tag {
            "gridworld" => Ok(EnvSpec::Gridworld(GridworldSpec::default())),
            "pointmass" => Ok(EnvSpec::PointMass(PointMassSpec::default())),
            other => Err(Error::InvalidConfig(alloc::format!("unknown environment `{other}`"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EnvSpec::Gridworld(g) => g.validate(),
            EnvSpec::PointMass(p) => p.validate(),
        }
    }

    pub fn obs_dim(&self) -> usize {
        match self {
            EnvSpec::Gridworld(_) => 2,
            EnvSpec::PointMass(_) => 4,
        }
    }

    /// Gridworld actions are scores over the four moves (argmax is taken).
    pub fn act_dim(&self) -> usize {
        match self {
            EnvSpec::Gridworld(_) => 4,
            EnvSpec::PointMass(_) => 2,
        }
    }

    /// Every action coordinate lives in `[-1, 1]`.
    pub fn action_bounds(&self) -> (f64, f64) {
        (-1.0, 1.0)
    }

    /// Noise of the `medium` level: action-noise std on the point mass,
    /// epsilon on the gridworld.
    pub fn default_noise_std(&self) -> f64 {
        match self {
            EnvSpec::Gridworld(_) => 0.4,
            EnvSpec::PointMass(_) => 1.5,
        }
    }

    pub fn r_max(&self) -> f64 {
        match self {
            EnvSpec::Gridworld(g) => g.r_max(),
            EnvSpec::PointMass(p) => p.r_max(),
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            EnvSpec::Gridworld(g) => g.horizon,
            EnvSpec::PointMass(p) => p.horizon,
        }
    }

    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> EnvState {
        let values = match self {
            EnvSpec::Gridworld(g) => {
                let starts = g.start_cells();
                let (x, y) = starts[rng.random_range(0..starts.len())];
                vec![x as f64, y as f64]
            }
            EnvSpec::PointMass(p) => p.reset(rng).to_vec(),
        };
        EnvState { values, t: 0 }
    }

    /// Out-of-range actions are clipped (point-mass) or argmaxed (gridworld).
    pub fn step<R: Rng + ?Sized>(&self, state: &EnvState, action: &[f64], rng: &mut R) -> Step {
        let (values, reward, terminal) = match self {
            EnvSpec::Gridworld(g) => {
                let cell = (state.values[0] as usize, state.values[1] as usize);
                let (next, reward, at_goal) = g.transition(cell, argmax(action), rng);
                (vec![next.0 as f64, next.1 as f64], reward, at_goal)
            }
            EnvSpec::PointMass(p) => {
                let s = [state.values[0], state.values[1], state.values[2], state.values[3]];
                let (next, reward, at_goal) = p.transition(&s, action);
                (next.to_vec(), reward, at_goal)
            }
        };
        let t = state.t + 1;
        Step { state: EnvState { values, t }, reward, done: terminal || t >= self.horizon(), terminal }
    }

    pub fn observe<R: Rng + ?Sized>(&self, state: &EnvState, rng: &mut R) -> Vec<f64> {
        match self {
            EnvSpec::PointMass(p) if p.obs_noise_std > 0.0 => {
                state.values.iter().map(|v| v + p.obs_noise_std * rng::normal::<f64, _>(rng)).collect()
            }
            _ => state.values.clone(),
        }
    }
}

/// Maps an observation to an action. `deterministic` selects the mode used
/// for evaluation (the mean action for stochastic learners).
pub trait Policy {
    fn act(&self, obs: &[f64], rng: &mut StreamRng, deterministic: bool) -> Vec<f64>;
}

/// Runs one episode, reporting each `(obs, action, reward, next_obs, terminal)`.
/// Returns the undiscounted return.
pub fn run_episode<P: Policy + ?Sized>(
    spec: &EnvSpec,
    policy: &P,
    rng: &mut StreamRng,
    deterministic: bool,
    mut record: impl FnMut(&[f64], &[f64], f64, &[f64], bool),
) -> f64 {
    let r_max = spec.r_max();
    let mut state = spec.reset(rng);
    let mut obs = spec.observe(&state, rng);
    let mut total = 0.0;
    loop {
        let action = policy.act(&obs, rng, deterministic);
        let step = spec.step(&state, &action, rng);
        assert!(step.reward.abs() <= r_max, "reward {} exceeds r_max {r_max}", step.reward);
        let next_obs = spec.observe(&step.state, rng);
        record(&obs, &action, step.reward, &next_obs, step.terminal);
        total += step.reward;
        if step.done {
            return total;
        }
        state = step.state;
        obs = next_obs;
    }
}

/// Mean and population standard deviation of deterministic-mode returns.
pub fn evaluate_policy<P: Policy + ?Sized>(
    spec: &EnvSpec,
    policy: &P,
    n_episodes: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_episodes == 0 {
        return Err(Error::InvalidConfig("n_episodes must be at least 1".into()));
    }
    let returns: Vec<f64> = (0..n_episodes)
        .map(|e| {
            let mut rng = rng::derive(seed, purpose::EVAL, e as u64);
            run_episode(spec, policy, &mut rng, true, |_, _, _, _, _| {})
        })
        .collect();
    Ok(mean_std(&returns))
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, Float::sqrt(var))
}

/// `100 * (learned - random_ref) / (expert_ref - random_ref)`.
pub fn normalized_score(learned: f64, random_ref: f64, expert_ref: f64) -> Result<f64> {
    if expert_ref == random_ref {
        return Err(Error::UndefinedMetric);
    }
    Ok(100.0 * (learned - random_ref) / (expert_ref - random_ref))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalized_score_endpoints() {
        assert_eq!(normalized_score(-10.0, -50.0, -10.0).unwrap(), 100.0);
        assert_eq!(normalized_score(-50.0, -50.0, -10.0).unwrap(), 0.0);
        assert_eq!(normalized_score(-30.0, -50.0, -10.0).unwrap(), 50.0);
        assert_eq!(normalized_score(1.0, 2.0, 2.0), Err(Error::UndefinedMetric));
    }

    #[test]
    fn timeout_is_not_terminal() {
        let spec = EnvSpec::PointMass(PointMassSpec { horizon: 1, ..PointMassSpec::default() });
        let s = EnvState { values: vec![-0.9, -0.9, 0.0, 0.0], t: 0 };
        let step = spec.step(&s, &[0.0, 0.0], &mut rng::derive(0, 0, 0));
        assert!(step.done);
        assert!(!step.terminal);
    }

    #[test]
    fn observation_noise_only_when_configured() {
        let quiet = EnvSpec::PointMass(PointMassSpec::default());
        let noisy = EnvSpec::PointMass(PointMassSpec { obs_noise_std: 0.1, ..PointMassSpec::default() });
        let s = EnvState { values: vec![0.1, 0.2, 0.3, 0.4], t: 0 };
        let mut r = rng::derive(1, 0, 0);
        assert_eq!(quiet.observe(&s, &mut r), s.values);
        assert_ne!(noisy.observe(&s, &mut r), s.values);
    }
}
