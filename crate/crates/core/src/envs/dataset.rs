use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{ensure_dim, Error, Result};
use crate::nn::Matrix;
use crate::real::Real;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetMeta {
    pub env_tag: String,
    pub source_tag: String,
    pub seed: u64,
}

/// Flat transition storage in `f32`, the on-disk precision.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionDataset {
    obs_dim: usize,
    act_dim: usize,
    observations: Vec<f32>,
    actions: Vec<f32>,
    rewards: Vec<f32>,
    next_observations: Vec<f32>,
    terminals: Vec<bool>,
    pub meta: DatasetMeta,
}

/// Minibatch gathered from a dataset, converted to the training precision.
#[derive(Debug, Clone)]
pub struct Batch<T> {
    pub obs: Matrix<T>,
    pub actions: Matrix<T>,
    pub rewards: Vec<T>,
    pub next_obs: Matrix<T>,
    /// 1 for terminal rows, 0 otherwise.
    pub terminals: Vec<T>,
}

impl<T> Batch<T> {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

impl TransitionDataset {
    pub fn empty(obs_dim: usize, act_dim: usize, meta: DatasetMeta) -> Self {
        Self {
            obs_dim,
            act_dim,
            observations: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_observations: Vec::new(),
            terminals: Vec::new(),
            meta,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        obs_dim: usize,
        act_dim: usize,
        observations: Vec<f32>,
        actions: Vec<f32>,
        rewards: Vec<f32>,
        next_observations: Vec<f32>,
        terminals: Vec<bool>,
        meta: DatasetMeta,
    ) -> Result<Self> {
        let d = Self { obs_dim, act_dim, observations, actions, rewards, next_observations, terminals, meta };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.rewards.len();
        ensure_dim("observations", n * self.obs_dim, self.observations.len())?;
        ensure_dim("actions", n * self.act_dim, self.actions.len())?;
        ensure_dim("next_observations", n * self.obs_dim, self.next_observations.len())?;
        ensure_dim("terminals", n, self.terminals.len())?;
        for (name, data) in [
            ("observations", &self.observations),
            ("actions", &self.actions),
            ("rewards", &self.rewards),
            ("next_observations", &self.next_observations),
        ] {
            if let Some(i) = data.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("dataset {name}[{i}]")));
            }
        }
        Ok(())
    }

    pub fn push(&mut self, obs: &[f64], action: &[f64], reward: f64, next_obs: &[f64], terminal: bool) {
        debug_assert_eq!(obs.len(), self.obs_dim);
        debug_assert_eq!(action.len(), self.act_dim);
        self.observations.extend(obs.iter().map(|&v| v as f32));
        self.actions.extend(action.iter().map(|&v| v as f32));
        self.rewards.push(reward as f32);
        self.next_observations.extend(next_obs.iter().map(|&v| v as f32));
        self.terminals.push(terminal);
    }

    pub fn truncate(&mut self, n: usize) {
        if n >= self.len() {
            return;
        }
        self.observations.truncate(n * self.obs_dim);
        self.actions.truncate(n * self.act_dim);
        self.rewards.truncate(n);
        self.next_observations.truncate(n * self.obs_dim);
        self.terminals.truncate(n);
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    pub fn observations(&self) -> &[f32] {
        &self.observations
    }

    pub fn actions(&self) -> &[f32] {
        &self.actions
    }

    pub fn rewards(&self) -> &[f32] {
        &self.rewards
    }

    pub fn next_observations(&self) -> &[f32] {
        &self.next_observations
    }

    pub fn terminals(&self) -> &[bool] {
        &self.terminals
    }

    pub fn observation(&self, i: usize) -> &[f32] {
        &self.observations[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    pub fn action(&self, i: usize) -> &[f32] {
        &self.actions[i * self.act_dim..(i + 1) * self.act_dim]
    }

    pub fn next_observation(&self, i: usize) -> &[f32] {
        &self.next_observations[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    pub fn batch<T: Real>(&self, idx: &[usize]) -> Batch<T> {
        let gather = |src: &[f32], width: usize| {
            Matrix::from_fn(idx.len(), width, |r, c| T::of(src[idx[r] * width + c] as f64))
        };
        Batch {
            obs: gather(&self.observations, self.obs_dim),
            actions: gather(&self.actions, self.act_dim),
            rewards: idx.iter().map(|&i| T::of(self.rewards[i] as f64)).collect(),
            next_obs: gather(&self.next_observations, self.obs_dim),
            terminals: idx.iter().map(|&i| if self.terminals[i] { T::one() } else { T::zero() }).collect(),
        }
    }

    /// Every row, in order.
    pub fn full_batch<T: Real>(&self) -> Batch<T> {
        let idx: Vec<usize> = (0..self.len()).collect();
        self.batch(&idx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn tiny() -> TransitionDataset {
        let mut d = TransitionDataset::empty(2, 1, DatasetMeta::default());
        d.push(&[0.0, 1.0], &[0.5], 1.0, &[1.0, 1.0], false);
        d.push(&[1.0, 1.0], &[-0.5], 2.0, &[2.0, 1.0], true);
        d
    }

    #[test]
    fn batch_gathers_rows() {
        let d = tiny();
        let b: Batch<f64> = d.batch(&[1, 0]);
        assert_eq!(b.obs.row(0), &[1.0, 1.0]);
        assert_eq!(b.actions.row(1), &[0.5]);
        assert_eq!(b.rewards, vec![2.0, 1.0]);
        assert_eq!(b.terminals, vec![1.0, 0.0]);
    }

    #[test]
    fn validation_catches_shape_and_nan() {
        let bad = TransitionDataset::from_parts(
            2,
            1,
            vec![0.0; 4],
            vec![0.0; 2],
            vec![0.0],
            vec![0.0; 4],
            vec![false; 2],
            DatasetMeta::default(),
        );
        assert!(matches!(bad, Err(Error::Dimension { .. })));
        let nan = TransitionDataset::from_parts(
            1,
            1,
            vec![f32::NAN],
            vec![0.0],
            vec![0.0],
            vec![0.0],
            vec![false],
            DatasetMeta::default(),
        );
        assert!(matches!(nan, Err(Error::NonFinite(_))));
    }

    #[test]
    fn truncate_keeps_prefix() {
        let mut d = tiny();
        d.truncate(1);
        assert_eq!(d.len(), 1);
        assert!(d.validate().is_ok());
        assert_eq!(d.next_observation(0), &[1.0, 1.0]);
    }
}
