use alloc::vec::Vec;

use rand::Rng;

use super::config::Ablation;
use super::networks::{CriticPair, GaussianActor};
use crate::diffusion::{limitation_value, DiffusionBehavior};
use crate::dynamics::{GaussianDynamics, PredictMode};
use crate::error::{ensure_dim, Error, Result};
use crate::nn::{Matrix, Normalizer};
use crate::real::Real;

/// Which rule produced a row's regression target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    InSample,
    Imagination,
    Limitation,
}

/// Pre-trained models consumed by the OOD targets. Either may be absent when
/// the ablation does not need it.
#[derive(Debug, Clone, Copy)]
pub struct WorldModels<'a, T> {
    pub dynamics: Option<&'a GaussianDynamics<T>>,
    pub behavior: Option<&'a DiffusionBehavior<T>>,
}

impl<'a, T: Real> WorldModels<'a, T> {
    pub fn new(dynamics: &'a GaussianDynamics<T>, behavior: &'a DiffusionBehavior<T>) -> Self {
        Self { dynamics: Some(dynamics), behavior: Some(behavior) }
    }

    /// Fails unless every model the ablation reads is present, trained and
    /// dimensionally compatible.
    pub fn check(&self, ablation: Ablation, obs_dim: usize, act_dim: usize) -> Result<()> {
        if ablation.uses_imagination() {
            let d = self
                .dynamics
                .filter(|d| d.is_trained())
                .ok_or_else(|| Error::InvalidConfig("a trained dynamics model is required".into()))?;
            ensure_dim("dynamics obs dim", obs_dim, d.obs_dim())?;
            ensure_dim("dynamics act dim", act_dim, d.act_dim())?;
        }
        if ablation.uses_limitation() {
            let b = self
                .behavior
                .filter(|b| b.is_trained())
                .ok_or_else(|| Error::InvalidConfig("a trained behavior model is required".into()))?;
            ensure_dim("behavior obs dim", obs_dim, b.obs_dim())?;
            ensure_dim("behavior act dim", act_dim, b.act_dim())?;
        }
        Ok(())
    }
}

/// Regression targets for one batch: `n` dataset rows then `n` OOD rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetBundle<T> {
    pub in_sample: Vec<T>,
    /// `min(y_img, y_lmt)` before the offset.
    pub ood_base: Vec<T>,
    pub ood: Vec<T>,
    pub ood_branch: Vec<Branch>,
    pub y_img: Option<Vec<T>>,
    pub y_lmt: Option<Vec<T>>,
    pub delta: T,
}

impl<T: Real> TargetBundle<T> {
    /// Selects per OOD row; ties go to imagination. With one side missing the
    /// other is used alone.
    pub fn assemble(
        in_sample: Vec<T>,
        y_img: Option<Vec<T>>,
        y_lmt: Option<Vec<T>>,
        delta: T,
    ) -> Result<Self> {
        let (ood_base, ood_branch): (Vec<T>, Vec<Branch>) = match (&y_img, &y_lmt) {
            (Some(img), Some(lmt)) => {
                ensure_dim("limitation rows", img.len(), lmt.len())?;
                img.iter()
                    .zip(lmt)
                    .map(|(&i, &l)| if i <= l { (i, Branch::Imagination) } else { (l, Branch::Limitation) })
                    .unzip()
            }
            (Some(img), None) => img.iter().map(|&i| (i, Branch::Imagination)).unzip(),
            (None, Some(lmt)) => lmt.iter().map(|&l| (l, Branch::Limitation)).unzip(),
            (None, None) => {
                return Err(Error::InvalidConfig("OOD target needs imagination or limitation".into()))
            }
        };
        ensure_dim("OOD rows", in_sample.len(), ood_base.len())?;
        let ood = ood_base.iter().map(|&b| b + delta).collect();
        Ok(Self { in_sample, ood_base, ood, ood_branch, y_img, y_lmt, delta })
    }

    pub fn rows(&self) -> usize {
        self.in_sample.len()
    }

    /// Branch of row `i` over the concatenation (dataset rows, OOD rows).
    pub fn branch(&self, i: usize) -> Branch {
        if i < self.rows() {
            Branch::InSample
        } else {
            self.ood_branch[i - self.rows()]
        }
    }

    pub fn fraction(&self, branch: Branch) -> f64 {
        let n = self.ood_branch.len();
        if n == 0 {
            return 0.0;
        }
        self.ood_branch.iter().filter(|b| **b == branch).count() as f64 / n as f64
    }

    /// `base <= y_lmt` and `base <= y_img` on every row that has them.
    pub fn respects_bounds(&self) -> bool {
        [&self.y_img, &self.y_lmt]
            .into_iter()
            .flatten()
            .all(|side| self.ood_base.iter().zip(side).all(|(b, s)| b <= s))
    }
}

/// `r + gamma * (1 - done) * (min_j Q'_j(s', a') - alpha * log pi(a'|s'))`
/// with one actor draw per row.
#[allow(clippy::too_many_arguments)]
pub fn in_sample_target<T: Real, R: Rng + ?Sized>(
    critics: &CriticPair<T>,
    actor: &GaussianActor<T>,
    next_obs_norm: &Matrix<T>,
    rewards: &[T],
    terminals: &[T],
    gamma: T,
    alpha: T,
    rng: &mut R,
) -> Result<Vec<T>> {
    let n = next_obs_norm.rows();
    ensure_dim("reward rows", n, rewards.len())?;
    ensure_dim("terminal rows", n, terminals.len())?;
    let next = actor.sample(next_obs_norm, rng)?;
    let q = critics.min_target(next_obs_norm, &next.actions)?;
    Ok((0..n)
        .map(|i| {
            let soft = if alpha == T::zero() { q[i] } else { q[i] - alpha * next.log_prob[i] };
            rewards[i] + gamma * (T::one() - terminals[i]) * soft
        })
        .collect())
}

/// `r_hat + gamma * min_j Q'_j(s_hat', a')` through the learned model. The
/// model's penalized reward is used and no terminal mask applies.
#[allow(clippy::too_many_arguments)]
pub fn imagination_value<T: Real, R: Rng + ?Sized>(
    critics: &CriticPair<T>,
    actor: &GaussianActor<T>,
    dynamics: &GaussianDynamics<T>,
    obs_norm: &Normalizer<T>,
    obs: &Matrix<T>,
    actions: &Matrix<T>,
    gamma: T,
    mode: PredictMode,
    model_rng: &mut R,
    actor_rng: &mut R,
) -> Result<Vec<T>> {
    let pred = dynamics.predict(obs, actions, mode, model_rng)?;
    let next_norm = obs_norm.normalize(&pred.next_obs);
    let next = actor.sample(&next_norm, actor_rng)?;
    let q = critics.min_target(&next_norm, &next.actions)?;
    Ok(pred.reward.iter().zip(&q).map(|(&r, &v)| r + gamma * v).collect())
}

/// Limitation value over the target critics; `obs` is raw.
pub fn limitation_target<T: Real, R: Rng + ?Sized>(
    critics: &CriticPair<T>,
    behavior: &DiffusionBehavior<T>,
    obs_norm: &Normalizer<T>,
    obs: &Matrix<T>,
    m: usize,
    rng: &mut R,
) -> Result<Vec<T>> {
    let q0 = |o: &Matrix<T>, a: &Matrix<T>| critics.q_target(0, &obs_norm.normalize(o), a);
    let q1 = |o: &Matrix<T>, a: &Matrix<T>| critics.q_target(1, &obs_norm.normalize(o), a);
    let both: [&dyn Fn(&Matrix<T>, &Matrix<T>) -> Result<Vec<T>>; 2] = [&q0, &q1];
    limitation_value(behavior, &both, obs, m, rng)
}

/// Row mean; NaN for an empty slice.
pub(crate) fn mean<T: Real>(values: &[T]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().map(|v| v.f64()).sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive;

    #[test]
    fn min_selection_and_offset() {
        let b =
            TargetBundle::assemble(vec![0.0; 3], Some(vec![3.0, 5.0, 4.0]), Some(vec![5.0, 3.0, 4.0]), -0.5)
                .unwrap();
        assert_eq!(b.ood, vec![2.5, 2.5, 3.5]);
        assert_eq!(b.ood_branch, vec![Branch::Imagination, Branch::Limitation, Branch::Imagination]);
        assert_eq!(b.branch(0), Branch::InSample);
        assert_eq!(b.branch(4), Branch::Limitation);
        assert!((b.fraction(Branch::Imagination) + b.fraction(Branch::Limitation) - 1.0).abs() < 1e-15);
        assert!(b.respects_bounds());

        let d0 = TargetBundle::assemble(vec![0.0], Some(vec![3.0]), Some(vec![5.0]), 0.0).unwrap();
        assert_eq!((d0.ood[0], d0.ood_branch[0]), (3.0, Branch::Imagination));
    }

    #[test]
    fn ablated_sides() {
        let only_lmt = TargetBundle::assemble(vec![0.0; 2], None, Some(vec![1.0, 2.0]), 1.0).unwrap();
        assert_eq!(only_lmt.ood, vec![2.0, 3.0]);
        assert_eq!(only_lmt.fraction(Branch::Limitation), 1.0);
        let only_img = TargetBundle::assemble(vec![0.0; 2], Some(vec![1.0, 2.0]), None, 0.0).unwrap();
        assert_eq!(only_img.fraction(Branch::Imagination), 1.0);
        assert!(TargetBundle::<f64>::assemble(vec![0.0], None, None, 0.0).is_err());
    }

    fn constant_critics(c: f64) -> CriticPair<f64> {
        let mut pair = CriticPair::new(2, 1, &[4], &mut derive(0, 0, 0));
        for net in pair.online.iter_mut().chain(pair.target.iter_mut()) {
            let n = net.num_params();
            let p = net.params_mut();
            p.fill(0.0);
            p[n - 1] = c;
        }
        pair
    }

    #[test]
    fn in_sample_target_special_cases() {
        let critics = constant_critics(4.0);
        let actor = GaussianActor::new(2, 1, &[4], (-1.0, 1.0), &mut derive(1, 0, 0)).unwrap();
        let next = Matrix::from_fn(3, 2, |i, j| (i + j) as f64);
        let r = [1.0, -2.0, 0.5];
        let done = [0.0, 1.0, 0.0];
        let y0 =
            in_sample_target(&critics, &actor, &next, &r, &done, 0.0, 0.3, &mut derive(2, 0, 0)).unwrap();
        assert_eq!(y0, r.to_vec());
        let y = in_sample_target(&critics, &actor, &next, &r, &done, 0.9, 0.0, &mut derive(2, 0, 0)).unwrap();
        assert_eq!(y, vec![1.0 + 0.9 * 4.0, -2.0, 0.5 + 0.9 * 4.0]);
    }
}
