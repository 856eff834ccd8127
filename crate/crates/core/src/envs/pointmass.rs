use alloc::format;

use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};

/// Planar point mass in the box `[-1, 1]^2` driven by bounded acceleration.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMassSpec {
    pub dt: f64,
    pub v_max: f64,
    pub goal: [f64; 2],
    pub goal_radius: f64,
    pub bonus: f64,
    pub horizon: usize,
    pub obs_noise_std: f64,
}

impl Default for PointMassSpec {
    fn default() -> Self {
        Self {
            dt: 0.1,
            v_max: 1.0,
            goal: [0.5, 0.5],
            goal_radius: 0.1,
            bonus: 1.0,
            horizon: 100,
            obs_noise_std: 0.0,
        }
    }
}

/// Gains of the proportional-derivative controller used as the expert.
pub const PD_KP: f64 = 3.0;
pub const PD_KD: f64 = 2.5;

impl PointMassSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.dt, self.v_max, self.goal[0], self.goal[1], self.goal_radius, self.bonus];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("point-mass parameters must be finite".into()));
        }
        if self.dt < 0.0 || self.v_max <= 0.0 || self.goal_radius < 0.0 || self.bonus < 0.0 {
            return Err(Error::InvalidConfig(
                "point-mass dt, v_max, radius and bonus must be non-negative".into(),
            ));
        }
        if self.goal.iter().any(|g| g.abs() > 1.0) {
            return Err(Error::InvalidConfig("goal must lie inside the box".into()));
        }
        if !(self.obs_noise_std >= 0.0 && self.obs_noise_std.is_finite()) {
            return Err(Error::OutOfRange {
                what: "obs_noise_std",
                value: format!("{}", self.obs_noise_std),
            });
        }
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be positive".into()));
        }
        Ok(())
    }

    /// Box diagonal bounds the distance term; the bonus adds on top.
    pub fn r_max(&self) -> f64 {
        2.0 * core::f64::consts::SQRT_2 + self.bonus
    }

    pub fn goal_distance(&self, pos: [f64; 2]) -> f64 {
        let (dx, dy) = (pos[0] - self.goal[0], pos[1] - self.goal[1]);
        Float::sqrt(dx * dx + dy * dy)
    }

    /// Uniform position outside the goal disk, at rest.
    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 4] {
        loop {
            let p = [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)];
            if self.goal_distance(p) > self.goal_radius {
                return [p[0], p[1], 0.0, 0.0];
            }
        }
    }

    /// Semi-implicit Euler step with clipped acceleration, velocity and
    /// position. Returns `(next_state, reward, reached_goal)`.
    pub fn transition(&self, state: &[f64; 4], action: &[f64]) -> ([f64; 4], f64, bool) {
        let mut next = *state;
        for i in 0..2 {
            let a = action[i].clamp(-1.0, 1.0);
            next[2 + i] = (state[2 + i] + a * self.dt).clamp(-self.v_max, self.v_max);
            next[i] = (state[i] + next[2 + i] * self.dt).clamp(-1.0, 1.0);
        }
        let dist = self.goal_distance([next[0], next[1]]);
        let at_goal = dist <= self.goal_radius;
        let reward = -dist + if at_goal { self.bonus } else { 0.0 };
        (next, reward, at_goal)
    }

    /// Expert acceleration toward the goal (clipped to bounds).
    pub fn pd_action(&self, obs: &[f64]) -> [f64; 2] {
        let mut a = [0.0; 2];
        for i in 0..2 {
            a[i] = (PD_KP * (self.goal[i] - obs[i]) - PD_KD * obs[2 + i]).clamp(-1.0, 1.0);
        }
        a
    }
}
