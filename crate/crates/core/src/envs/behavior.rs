use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::dataset::{DatasetMeta, TransitionDataset};
use super::{evaluate_policy, run_episode, EnvSpec, PointMassSpec, Policy};
use crate::error::{Error, Result};
use crate::rng::{self, purpose, StreamRng};

/// Dataset quality levels. Mixtures pick one component per episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BehaviorPolicyLevel {
    Random,
    Medium {
        noise_std: f64,
    },
    /// Weights over `(random, medium)`.
    MediumReplay {
        noise_std: f64,
        weights: [f64; 2],
    },
    /// Weights over `(medium, expert)`.
    MediumExpert {
        noise_std: f64,
        weights: [f64; 2],
    },
    /// The noiseless expert alone.
    Expert,
}

impl BehaviorPolicyLevel {
    /// `random`, `medium`, `medium-replay`, `medium-expert` or `expert` with
    /// the environment's default noise and even mixture weights.
    pub fn parse(name: &str, spec: &EnvSpec) -> Result<Self> {
        let noise_std = spec.default_noise_std();
        match name {
            "random" => Ok(Self::Random),
            "medium" => Ok(Self::Medium { noise_std }),
            "medium-replay" => Ok(Self::MediumReplay { noise_std, weights: [0.5, 0.5] }),
            "medium-expert" => Ok(Self::MediumExpert { noise_std, weights: [0.5, 0.5] }),
            "expert" => Ok(Self::Expert),
            other => Err(Error::InvalidConfig(format!("unknown behavior level `{other}`"))),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Self::Random => "random",
            Self::Medium { .. } => "medium",
            Self::MediumReplay { .. } => "medium-replay",
            Self::MediumExpert { .. } => "medium-expert",
            Self::Expert => "expert",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (noise, weights) = match *self {
            Self::Random | Self::Expert => return Ok(()),
            Self::Medium { noise_std } => (noise_std, [1.0, 0.0]),
            Self::MediumReplay { noise_std, weights } | Self::MediumExpert { noise_std, weights } => {
                (noise_std, weights)
            }
        };
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(Error::OutOfRange { what: "noise_std", value: format!("{noise}") });
        }
        if weights.iter().any(|w| !(*w >= 0.0)) || (weights[0] + weights[1] - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!("mixture weights {weights:?}")));
        }
        Ok(())
    }

    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> BehaviorComponent {
        match *self {
            Self::Random => BehaviorComponent::Random,
            Self::Expert => BehaviorComponent::Expert,
            Self::Medium { noise_std } => BehaviorComponent::Noisy { noise_std },
            Self::MediumReplay { noise_std, weights } => {
                if rng.random::<f64>() < weights[0] {
                    BehaviorComponent::Random
                } else {
                    BehaviorComponent::Noisy { noise_std }
                }
            }
            Self::MediumExpert { noise_std, weights } => {
                if rng.random::<f64>() < weights[0] {
                    BehaviorComponent::Noisy { noise_std }
                } else {
                    BehaviorComponent::Expert
                }
            }
        }
    }
}

/// Pure behavior policies the levels are built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BehaviorComponent {
    /// Uniform actions.
    Random,
    /// Expert plus noise: Gaussian action noise on the point mass, epsilon-greedy
    /// with `epsilon = min(noise_std, 1)` on the gridworld.
    Noisy { noise_std: f64 },
    /// PD controller / shortest path.
    Expert,
}

pub struct BehaviorPolicy<'a> {
    spec: &'a EnvSpec,
    component: BehaviorComponent,
    distances: Vec<Option<usize>>,
}

impl<'a> BehaviorPolicy<'a> {
    pub fn new(spec: &'a EnvSpec, component: BehaviorComponent) -> Self {
        let distances = match spec {
            EnvSpec::Gridworld(g) => g.distances(),
            EnvSpec::PointMass(_) => Vec::new(),
        };
        Self { spec, component, distances }
    }

    /// The noiseless expert action at `obs`.
    pub fn expert_action(&self, obs: &[f64]) -> Vec<f64> {
        match self.spec {
            EnvSpec::Gridworld(g) => {
                let cell = (obs[0] as usize, obs[1] as usize);
                one_hot(g.shortest_path_action(cell, &self.distances))
            }
            EnvSpec::PointMass(p) => p.pd_action(obs).to_vec(),
        }
    }

    fn uniform(&self, rng: &mut StreamRng) -> Vec<f64> {
        match self.spec {
            EnvSpec::Gridworld(_) => one_hot(rng.random_range(0..4)),
            EnvSpec::PointMass(_) => (0..2).map(|_| rng.random_range(-1.0..=1.0)).collect(),
        }
    }
}

impl Policy for BehaviorPolicy<'_> {
    fn act(&self, obs: &[f64], rng: &mut StreamRng, _deterministic: bool) -> Vec<f64> {
        match self.component {
            BehaviorComponent::Random => self.uniform(rng),
            BehaviorComponent::Expert => self.expert_action(obs),
            BehaviorComponent::Noisy { noise_std } => match self.spec {
                EnvSpec::Gridworld(_) => {
                    if rng.random::<f64>() < noise_std.min(1.0) {
                        self.uniform(rng)
                    } else {
                        self.expert_action(obs)
                    }
                }
                EnvSpec::PointMass(_) => self
                    .expert_action(obs)
                    .into_iter()
                    .map(|a| (a + noise_std * rng::normal::<f64, _>(rng)).clamp(-1.0, 1.0))
                    .collect(),
            },
        }
    }
}

fn one_hot(a: usize) -> Vec<f64> {
    let mut v = vec![0.0; 4];
    v[a] = 1.0;
    v
}

/// Rolls out the level's policy episode by episode until `n_transitions`
/// are recorded (the last episode is cut short). Episode `e` runs on its own
/// derived stream, so the data depends only on `(spec, level, n, seed)`.
pub fn generate_dataset(
    spec: &EnvSpec,
    level: &BehaviorPolicyLevel,
    n_transitions: usize,
    seed: u64,
) -> Result<TransitionDataset> {
    generate_dataset_with_returns(spec, level, n_transitions, seed).map(|(d, _)| d)
}

/// As [`generate_dataset`], also returning the returns of every episode that
/// finished inside the budget.
pub fn generate_dataset_with_returns(
    spec: &EnvSpec,
    level: &BehaviorPolicyLevel,
    n_transitions: usize,
    seed: u64,
) -> Result<(TransitionDataset, Vec<f64>)> {
    if n_transitions == 0 {
        return Err(Error::InvalidConfig("n_transitions must be positive".into()));
    }
    spec.validate()?;
    level.validate()?;
    let meta = DatasetMeta { env_tag: String::from(spec.tag()), source_tag: String::from(level.tag()), seed };
    let mut data = TransitionDataset::empty(spec.obs_dim(), spec.act_dim(), meta);
    let mut returns = Vec::new();
    let mut episode = 0u64;
    while data.len() < n_transitions {
        let mut rng = rng::derive(seed, purpose::EPISODE, episode);
        let policy = BehaviorPolicy::new(spec, level.pick(&mut rng));
        let ret =
            run_episode(spec, &policy, &mut rng, false, |o, a, r, o2, term| data.push(o, a, r, o2, term));
        if data.len() <= n_transitions {
            returns.push(ret);
        }
        episode += 1;
    }
    data.truncate(n_transitions);
    Ok((data, returns))
}

/// Centre and half-width of the action box in [`sparse_action_dataset`].
pub const SPARSE_ACTION_CENTER: [f64; 2] = [0.2, -0.1];
pub const SPARSE_ACTION_WIDTH: f64 = 2e-4;

/// Point-mass transitions from start states spread over the box, all taken
/// with nearly the same action. State coverage is broad while action
/// coverage is a sliver, so any learned model is extrapolating almost
/// everywhere in action space.
pub fn sparse_action_dataset(
    spec: &PointMassSpec,
    n_transitions: usize,
    seed: u64,
) -> Result<TransitionDataset> {
    if n_transitions == 0 {
        return Err(Error::InvalidConfig("n_transitions must be positive".into()));
    }
    spec.validate()?;
    let meta = DatasetMeta { env_tag: String::from("pointmass"), source_tag: String::from("sparse"), seed };
    let mut data = TransitionDataset::empty(4, 2, meta);
    let mut rng = rng::derive(seed, purpose::EPISODE, 0);
    let w = SPARSE_ACTION_WIDTH;
    for _ in 0..n_transitions {
        let s = spec.reset(&mut rng);
        let a = SPARSE_ACTION_CENTER.map(|c| c + rng.random_range(-w..=w));
        let (next, reward, goal) = spec.transition(&s, &a);
        data.push(&s, &a, reward, &next, goal);
    }
    Ok(data)
}

/// `(random_ref, expert_ref)` mean returns of the uniform and expert policies.
pub fn reference_returns(spec: &EnvSpec, n_episodes: usize, seed: u64) -> Result<(f64, f64)> {
    let random =
        evaluate_policy(spec, &BehaviorPolicy::new(spec, BehaviorComponent::Random), n_episodes, seed)?;
    let expert =
        evaluate_policy(spec, &BehaviorPolicy::new(spec, BehaviorComponent::Expert), n_episodes, seed)?;
    Ok((random.0, expert.0))
}
