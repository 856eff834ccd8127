use alloc::vec;
use alloc::vec::Vec;

use crate::diffusion::{train_behavior, BehaviorTrainConfig, DiffusionBehavior, VarianceSchedule, DEFAULT_K};
use crate::dynamics::{train_dynamics, DynamicsTrainConfig, GaussianDynamics};
use crate::envs::TransitionDataset;
use crate::error::Result;
use crate::real::Real;
use crate::rng::{self, purpose};

/// Settings for the two models trained before the agent.
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainConfig {
    pub dynamics_hidden: Vec<usize>,
    pub penalty_lambda: f64,
    pub dynamics: DynamicsTrainConfig,
    pub behavior_hidden: Vec<usize>,
    pub diffusion_steps: usize,
    pub behavior: BehaviorTrainConfig,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            dynamics_hidden: vec![64, 64],
            penalty_lambda: 0.0,
            dynamics: DynamicsTrainConfig::default(),
            behavior_hidden: vec![64, 64],
            diffusion_steps: DEFAULT_K,
            behavior: BehaviorTrainConfig::default(),
        }
    }
}

/// Trains the dynamics model on `dataset` from streams of `seed` disjoint
/// from the agent's.
pub fn pretrain_dynamics<T: Real>(
    dataset: &TransitionDataset,
    config: &PretrainConfig,
    seed: u64,
) -> Result<GaussianDynamics<T>> {
    let model = GaussianDynamics::new(
        dataset.obs_dim(),
        dataset.act_dim(),
        &config.dynamics_hidden,
        config.penalty_lambda,
        &mut rng::derive(seed, purpose::INIT, 1),
    )?;
    let (model, _) =
        train_dynamics(model, dataset, &config.dynamics, rng::child_seed(seed, purpose::DYNAMICS, 0))?;
    Ok(model)
}

/// Trains the diffusion behavior model on `dataset`.
pub fn pretrain_behavior<T: Real>(
    dataset: &TransitionDataset,
    bounds: (f64, f64),
    config: &PretrainConfig,
    seed: u64,
) -> Result<DiffusionBehavior<T>> {
    let model = DiffusionBehavior::new(
        dataset.obs_dim(),
        dataset.act_dim(),
        &config.behavior_hidden,
        VarianceSchedule::vp(config.diffusion_steps)?,
        bounds,
        &mut rng::derive(seed, purpose::INIT, 2),
    )?;
    let (model, _) =
        train_behavior(model, dataset, &config.behavior, rng::child_seed(seed, purpose::DIFFUSION, 0))?;
    Ok(model)
}

/// Both models from the same seed.
pub fn pretrain_models<T: Real>(
    dataset: &TransitionDataset,
    bounds: (f64, f64),
    config: &PretrainConfig,
    seed: u64,
) -> Result<(GaussianDynamics<T>, DiffusionBehavior<T>)> {
    Ok((pretrain_dynamics(dataset, config, seed)?, pretrain_behavior(dataset, bounds, config, seed)?))
}
