use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{ensure_dim, Error, Result};
use crate::nn::{Activation, AdamState, Matrix, Mlp, MlpCache};
use crate::real::Real;
use crate::rng;
use crate::snapshot::Snapshot;

pub const ACTOR_LOG_STD_MIN: f64 = -5.0;
pub const ACTOR_LOG_STD_MAX: f64 = 2.0;

fn net_widths(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut w = vec![input];
    w.extend_from_slice(hidden);
    w.push(output);
    w
}

/// Row-wise concatenation of normalized observations and actions.
pub fn critic_input<T: Real>(obs: &Matrix<T>, actions: &Matrix<T>) -> Result<Matrix<T>> {
    obs.hcat(actions)
}

/// Two online critics and their Polyak-averaged targets.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticPair<T> {
    pub online: [Mlp<T>; 2],
    pub target: [Mlp<T>; 2],
}

impl<T: Real> CriticPair<T> {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, act_dim: usize, hidden: &[usize], rng: &mut R) -> Self {
        let widths = net_widths(obs_dim + act_dim, hidden, 1);
        let mut make = || {
            let mut net = Mlp::new(&widths, Activation::Relu, Activation::Identity, rng);
            // small initial Q keeps early targets near the reward scale
            net.scale_output_layer(T::of(0.1));
            net
        };
        let online = [make(), make()];
        Self { target: online.clone(), online }
    }

    pub fn q(&self, j: usize, obs: &Matrix<T>, actions: &Matrix<T>) -> Result<Vec<T>> {
        Ok(self.online[j].forward(&critic_input(obs, actions)?)?.into_vec())
    }

    pub fn q_target(&self, j: usize, obs: &Matrix<T>, actions: &Matrix<T>) -> Result<Vec<T>> {
        Ok(self.target[j].forward(&critic_input(obs, actions)?)?.into_vec())
    }

    /// `min_j Q_target_j(s, a)`.
    pub fn min_target(&self, obs: &Matrix<T>, actions: &Matrix<T>) -> Result<Vec<T>> {
        let input = critic_input(obs, actions)?;
        let a = self.target[0].forward(&input)?;
        let b = self.target[1].forward(&input)?;
        Ok(a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x.min(*y)).collect())
    }

    pub fn soft_update(&mut self, tau: T) -> Result<()> {
        for j in 0..2 {
            self.target[j].soft_update_from(&self.online[j], tau)?;
        }
        Ok(())
    }

    pub fn export(&self, snap: &mut Snapshot<T>) {
        for j in 0..2 {
            self.online[j].export(&format!("critic{j}"), snap);
            self.target[j].export(&format!("critic{j}_target"), snap);
        }
    }

    pub fn import(snap: &Snapshot<T>) -> Result<Self> {
        let load = |name: &str| Mlp::import(name, snap);
        let pair = Self {
            online: [load("critic0")?, load("critic1")?],
            target: [load("critic0_target")?, load("critic1_target")?],
        };
        for j in 0..2 {
            if pair.online[j].widths() != pair.target[j].widths() {
                return Err(Error::Snapshot("target critic shape differs from online".into()));
            }
        }
        Ok(pair)
    }
}

/// Tanh-squashed diagonal Gaussian policy.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianActor<T> {
    net: Mlp<T>,
    act_dim: usize,
    center: T,
    scale: T,
}

/// A reparameterized draw `a = c + s * tanh(mu + sigma * eps)` with
/// everything the backward pass needs.
#[derive(Debug, Clone)]
pub struct ActorSample<T> {
    pub actions: Matrix<T>,
    pub log_prob: Vec<T>,
    cache: MlpCache<T>,
    eps: Matrix<T>,
    /// Pre-squash values `u`.
    pre: Matrix<T>,
    sigma: Matrix<T>,
    clamped: Vec<bool>,
}

#[inline]
fn softplus<T: Real>(x: T) -> T {
    // log(1 + e^x) without overflow
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

/// `ln(1 - tanh(u)^2)` evaluated stably.
#[inline]
fn log_one_minus_tanh_sq<T: Real>(u: T) -> T {
    T::of(2.0) * (T::of(core::f64::consts::LN_2) - u - softplus(T::of(-2.0) * u))
}

impl<T: Real> GaussianActor<T> {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        act_dim: usize,
        hidden: &[usize],
        bounds: (f64, f64),
        rng: &mut R,
    ) -> Result<Self> {
        if !(bounds.0 < bounds.1) {
            return Err(Error::InvalidConfig("action bounds must satisfy low < high".into()));
        }
        let widths = net_widths(obs_dim, hidden, 2 * act_dim);
        Ok(Self {
            net: Mlp::new(&widths, Activation::Relu, Activation::Identity, rng),
            act_dim,
            center: T::of(0.5 * (bounds.0 + bounds.1)),
            scale: T::of(0.5 * (bounds.1 - bounds.0)),
        })
    }

    pub fn net(&self) -> &Mlp<T> {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp<T> {
        &mut self.net
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    pub fn bounds(&self) -> (f64, f64) {
        let (c, s) = (self.center.f64(), self.scale.f64());
        (c - s, c + s)
    }

    /// Deterministic action `c + s * tanh(mu)`.
    pub fn mean_action(&self, obs: &Matrix<T>) -> Result<Matrix<T>> {
        let out = self.net.forward(obs)?;
        let d = self.act_dim;
        Ok(Matrix::from_fn(obs.rows(), d, |i, j| self.center + self.scale * out.get(i, j).tanh()))
    }

    pub fn sample<R: Rng + ?Sized>(&self, obs: &Matrix<T>, rng: &mut R) -> Result<ActorSample<T>> {
        let eps = Matrix::from_fn(obs.rows(), self.act_dim, |_, _| rng::normal::<T, _>(rng));
        self.sample_with_noise(obs, eps)
    }

    pub fn sample_with_noise(&self, obs: &Matrix<T>, eps: Matrix<T>) -> Result<ActorSample<T>> {
        let (n, d) = (obs.rows(), self.act_dim);
        ensure_dim("actor noise rows", n, eps.rows())?;
        ensure_dim("actor noise width", d, eps.cols())?;
        let cache = self.net.forward_cached(obs)?;
        let out = cache.output();
        let (lo, hi) = (T::of(ACTOR_LOG_STD_MIN), T::of(ACTOR_LOG_STD_MAX));
        let half_ln_2pi = T::of(0.5) * T::of(2.0 * core::f64::consts::PI).ln();
        let ln_scale = self.scale.ln();
        let mut actions = Matrix::zeros(n, d);
        let mut pre = Matrix::zeros(n, d);
        let mut sigma = Matrix::zeros(n, d);
        let mut clamped = vec![false; n * d];
        let mut log_prob = vec![T::zero(); n];
        for i in 0..n {
            let mut lp = T::zero();
            for j in 0..d {
                let mu = out.get(i, j);
                let raw = out.get(i, d + j);
                let ls = raw.max(lo).min(hi);
                clamped[i * d + j] = raw < lo || raw > hi;
                let sd = ls.exp();
                let e = eps.get(i, j);
                let u = mu + sd * e;
                pre.set(i, j, u);
                sigma.set(i, j, sd);
                actions.set(i, j, self.center + self.scale * u.tanh());
                lp += -T::of(0.5) * e * e - ls - half_ln_2pi - ln_scale - log_one_minus_tanh_sq(u);
            }
            log_prob[i] = lp;
        }
        Ok(ActorSample { actions, log_prob, cache, eps, pre, sigma, clamped })
    }

    /// Parameter gradient of `sum(actions * grad_actions) + sum(log_prob * grad_log_prob)`.
    pub fn backward(
        &self,
        sample: &ActorSample<T>,
        grad_actions: &Matrix<T>,
        grad_log_prob: &[T],
    ) -> Result<Vec<T>> {
        let (n, d) = (sample.actions.rows(), self.act_dim);
        ensure_dim("actor action grad rows", n, grad_actions.rows())?;
        ensure_dim("actor action grad width", d, grad_actions.cols())?;
        ensure_dim("actor log-prob grad", n, grad_log_prob.len())?;
        let mut up = Matrix::zeros(n, 2 * d);
        for i in 0..n {
            let glp = grad_log_prob[i];
            for j in 0..d {
                let th = sample.pre.get(i, j).tanh();
                let du = grad_actions.get(i, j) * self.scale * (T::one() - th * th) + glp * T::of(2.0) * th;
                up.set(i, j, du);
                let dls = if sample.clamped[i * d + j] {
                    T::zero()
                } else {
                    du * sample.sigma.get(i, j) * sample.eps.get(i, j) - glp
                };
                up.set(i, d + j, dls);
            }
        }
        Ok(self.net.backward(&sample.cache, &up)?.0)
    }

    pub fn export(&self, snap: &mut Snapshot<T>) {
        self.net.export("actor", snap);
        let (lo, hi) = self.bounds();
        snap.set_meta("actor.low", lo);
        snap.set_meta("actor.high", hi);
    }

    pub fn import(snap: &Snapshot<T>) -> Result<Self> {
        let net = Mlp::import("actor", snap)?;
        let (lo, hi): (f64, f64) = (snap.meta_parse("actor.low")?, snap.meta_parse("actor.high")?);
        if net.output_dim() % 2 != 0 || !(lo < hi) {
            return Err(Error::Snapshot("malformed actor".into()));
        }
        Ok(Self {
            act_dim: net.output_dim() / 2,
            net,
            center: T::of(0.5 * (lo + hi)),
            scale: T::of(0.5 * (hi - lo)),
        })
    }
}

/// Entropy coefficient, either fixed or tuned towards `-act_dim` entropy.
#[derive(Debug, Clone, PartialEq)]
pub struct Temperature<T> {
    log_alpha: T,
    alpha: T,
    auto: bool,
    target_entropy: T,
    opt: AdamState<T>,
}

impl<T: Real> Temperature<T> {
    pub fn new(init_alpha: f64, auto: bool, act_dim: usize, lr: f64) -> Result<Self> {
        if !(init_alpha >= 0.0 && init_alpha.is_finite()) || (auto && init_alpha == 0.0) {
            return Err(Error::OutOfRange { what: "init_alpha", value: format!("{init_alpha}") });
        }
        Ok(Self {
            log_alpha: T::of(init_alpha).ln(),
            alpha: T::of(init_alpha),
            auto,
            target_entropy: -T::of(act_dim as f64),
            opt: AdamState::new(1, T::of(lr)),
        })
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn is_auto(&self) -> bool {
        self.auto
    }

    pub fn target_entropy(&self) -> T {
        self.target_entropy
    }

    /// Gradient of `-log_alpha * (mean_log_prob + target_entropy)` in `log_alpha`.
    pub fn gradient(&self, mean_log_prob: T) -> T {
        -(mean_log_prob + self.target_entropy)
    }

    pub fn update(&mut self, mean_log_prob: T) -> Result<()> {
        if !self.auto {
            return Ok(());
        }
        let mut p = [self.log_alpha];
        self.opt.step(&mut p, &[self.gradient(mean_log_prob)])?;
        self.log_alpha = p[0];
        self.alpha = p[0].exp();
        Ok(())
    }

    pub fn export(&self, snap: &mut Snapshot<T>) {
        snap.set_meta("alpha.auto", self.auto);
        snap.push("alpha.value", vec![1], vec![self.alpha]);
    }

    pub fn import(snap: &Snapshot<T>, act_dim: usize, lr: f64) -> Result<Self> {
        let auto: bool = snap.meta_parse("alpha.auto")?;
        let t = snap.tensor("alpha.value")?;
        let alpha = t.data.first().copied().ok_or_else(|| Error::Snapshot("empty alpha".into()))?;
        Self::new(alpha.f64(), auto, act_dim, lr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive;

    fn actor(bounds: (f64, f64)) -> GaussianActor<f64> {
        GaussianActor::new(3, 2, &[8], bounds, &mut derive(1, 0, 0)).unwrap()
    }

    #[test]
    fn samples_stay_in_bounds_with_finite_log_prob() {
        let mut a = actor((-2.0, 0.5));
        // push pre-squash values deep into saturation
        for p in a.net_mut().params_mut() {
            *p *= 40.0;
        }
        let obs = Matrix::from_fn(64, 3, |i, j| (i as f64 - 32.0) * 0.3 + j as f64);
        let s = a.sample(&obs, &mut derive(2, 0, 0)).unwrap();
        assert!(s.actions.as_slice().iter().all(|v| (-2.0..=0.5).contains(v)));
        assert!(s.log_prob.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn log_prob_matches_change_of_variables() {
        // one dim, zero network: u ~ N(mu, sigma), a = tanh(u)
        let mut a = GaussianActor::<f64>::new(1, 1, &[2], (-1.0, 1.0), &mut derive(0, 0, 0)).unwrap();
        for p in a.net_mut().params_mut() {
            *p = 0.0;
        }
        let obs = Matrix::from_rows(&[[0.0]]).unwrap();
        let eps = Matrix::from_rows(&[[0.7]]).unwrap();
        let s = a.sample_with_noise(&obs, eps).unwrap();
        let u: f64 = 0.7;
        let normal = (-0.5 * u * u).exp() / (2.0 * core::f64::consts::PI).sqrt();
        let expected = (normal / (1.0 - u.tanh().powi(2))).ln();
        assert!((s.log_prob[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn stable_log_jacobian() {
        for u in [-30.0f64, -3.0, 0.0, 0.5, 4.0, 30.0] {
            let direct = (1.0f64 - u.tanh().powi(2)).ln();
            let stable = log_one_minus_tanh_sq(u);
            if direct.is_finite() {
                assert!((direct - stable).abs() < 1e-9, "{u}");
            }
            assert!(stable.is_finite());
        }
    }

    #[test]
    fn temperature_moves_against_excess_entropy() {
        let mut t = Temperature::<f64>::new(1.0, true, 2, 1e-2).unwrap();
        assert_eq!(t.gradient(2.0), 0.0);
        // entropy 5 > target -2 means log-prob -5
        t.update(-5.0).unwrap();
        assert!(t.alpha() < 1.0);
        let mut fixed = Temperature::<f64>::new(0.2, false, 2, 1e-2).unwrap();
        fixed.update(-5.0).unwrap();
        assert_eq!(fixed.alpha(), 0.2);
        assert!(Temperature::<f64>::new(0.0, true, 2, 1e-2).is_err());
    }

    #[test]
    fn critic_targets_mirror_online() {
        let mut c = CriticPair::<f64>::new(3, 2, &[8, 8], &mut derive(3, 0, 0));
        assert_eq!(c.online, c.target);
        let before = c.target.clone();
        for p in c.online[0].params_mut() {
            *p += 1.0;
        }
        c.soft_update(0.0).unwrap();
        assert_eq!(c.target, before);
        c.soft_update(1.0).unwrap();
        assert_eq!(c.target, c.online);
    }
}
