//! Diagonal-Gaussian dynamics model predicting `(s' - s, r)` from `(s, a)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::envs::TransitionDataset;
use crate::error::{ensure_dim, Error, Result};
use crate::nn::{Activation, AdamState, Matrix, Mlp, Normalizer};
use crate::real::Real;
use crate::rng::{self, purpose};
use crate::snapshot::Snapshot;

pub const LOG_STD_MIN: f64 = -10.0;
pub const LOG_STD_MAX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PredictMode {
    /// The Gaussian mean; deterministic.
    #[default]
    Mean,
    /// A draw from the predicted Gaussian.
    Sample,
}

impl PredictMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Self::Mean),
            "sample" => Ok(Self::Sample),
            other => Err(Error::InvalidConfig(format!("unknown prediction mode `{other}`"))),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Self::Mean => "mean",
            Self::Sample => "sample",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDynamics<T> {
    net: Mlp<T>,
    obs_dim: usize,
    act_dim: usize,
    input_norm: Normalizer<T>,
    target_norm: Normalizer<T>,
    penalty_lambda: T,
    trained: bool,
}

/// De-normalized prediction for a batch.
#[derive(Debug, Clone)]
pub struct Prediction<T> {
    pub next_obs: Matrix<T>,
    /// Reward after the uncertainty penalty.
    pub reward: Vec<T>,
    /// Largest de-normalized predicted std per row.
    pub max_std: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for DynamicsTrainConfig {
    fn default() -> Self {
        Self { epochs: 40, batch_size: 256, lr: 1e-3 }
    }
}

impl<T: Real> GaussianDynamics<T> {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        act_dim: usize,
        hidden: &[usize],
        penalty_lambda: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(penalty_lambda >= 0.0 && penalty_lambda.is_finite()) {
            return Err(Error::OutOfRange { what: "penalty_lambda", value: format!("{penalty_lambda}") });
        }
        let target_dim = obs_dim + 1;
        let mut widths = vec![obs_dim + act_dim];
        widths.extend_from_slice(hidden);
        widths.push(2 * target_dim);
        Ok(Self {
            net: Mlp::new(&widths, Activation::Relu, Activation::Identity, rng),
            obs_dim,
            act_dim,
            input_norm: Normalizer::identity(obs_dim + act_dim),
            target_norm: Normalizer::identity(target_dim),
            penalty_lambda: T::of(penalty_lambda),
            trained: false,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn net(&self) -> &Mlp<T> {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp<T> {
        &mut self.net
    }

    pub fn input_norm(&self) -> &Normalizer<T> {
        &self.input_norm
    }

    pub fn target_norm(&self) -> &Normalizer<T> {
        &self.target_norm
    }

    pub fn penalty_lambda(&self) -> T {
        self.penalty_lambda
    }

    pub fn set_penalty_lambda(&mut self, lambda: T) {
        self.penalty_lambda = lambda;
    }

    /// Installs normalization statistics without training.
    pub fn set_normalizers(&mut self, input: Normalizer<T>, target: Normalizer<T>) -> Result<()> {
        ensure_dim("dynamics input normalizer", self.obs_dim + self.act_dim, input.dim())?;
        ensure_dim("dynamics target normalizer", self.obs_dim + 1, target.dim())?;
        self.input_norm = input;
        self.target_norm = target;
        Ok(())
    }

    pub fn mark_trained(&mut self) {
        self.trained = true;
    }

    /// Raw `(s, a)` inputs and `(s' - s, r)` targets.
    pub fn raw_pairs(
        obs: &Matrix<T>,
        actions: &Matrix<T>,
        rewards: &[T],
        next_obs: &Matrix<T>,
    ) -> Result<(Matrix<T>, Matrix<T>)> {
        ensure_dim("dynamics rewards", obs.rows(), rewards.len())?;
        let inputs = obs.hcat(actions)?;
        let d = obs.cols();
        let targets = Matrix::from_fn(obs.rows(), d + 1, |i, j| {
            if j < d {
                next_obs.get(i, j) - obs.get(i, j)
            } else {
                rewards[i]
            }
        });
        Ok((inputs, targets))
    }

    /// Normalized inputs and targets for a batch.
    pub fn prepare(
        &self,
        obs: &Matrix<T>,
        actions: &Matrix<T>,
        rewards: &[T],
        next_obs: &Matrix<T>,
    ) -> Result<(Matrix<T>, Matrix<T>)> {
        let (x, y) = Self::raw_pairs(obs, actions, rewards, next_obs)?;
        Ok((self.input_norm.normalize(&x), self.target_norm.normalize(&y)))
    }

    /// Mean Gaussian negative log-likelihood over normalized rows, with its
    /// parameter gradient. Clamped log-stds pass no gradient.
    pub fn nll_loss(&self, inputs: &Matrix<T>, targets: &Matrix<T>) -> Result<(T, Vec<T>)> {
        let d = self.obs_dim + 1;
        ensure_dim("dynamics targets", d, targets.cols())?;
        ensure_dim("dynamics target rows", inputs.rows(), targets.rows())?;
        if !inputs.is_finite() || !targets.is_finite() {
            return Err(Error::NonFinite("dynamics batch".into()));
        }
        let n = inputs.rows();
        if n == 0 {
            return Ok((T::zero(), self.net.zero_grads()));
        }
        let cache = self.net.forward_cached(inputs)?;
        let out = cache.output();
        let half_ln_2pi = T::of(0.5) * T::of(2.0 * core::f64::consts::PI).ln();
        let (lo, hi) = (T::of(LOG_STD_MIN), T::of(LOG_STD_MAX));
        let inv_n = T::one() / T::of(n as f64);
        let mut loss = T::zero();
        let mut up = Matrix::zeros(n, 2 * d);
        for i in 0..n {
            let row = out.row(i);
            for j in 0..d {
                let raw = row[d + j];
                let ls = raw.max(lo).min(hi);
                let inv_var = (-(ls + ls)).exp();
                let e = targets.get(i, j) - row[j];
                loss += T::of(0.5) * e * e * inv_var + ls + half_ln_2pi;
                up.set(i, j, -e * inv_var * inv_n);
                if raw > lo && raw < hi {
                    up.set(i, d + j, (T::one() - e * e * inv_var) * inv_n);
                }
            }
        }
        let (grads, _) = self.net.backward(&cache, &up)?;
        Ok((loss * inv_n, grads))
    }

    /// Normalized means and clamped log-stds.
    fn heads(&self, obs: &Matrix<T>, actions: &Matrix<T>) -> Result<(Matrix<T>, Matrix<T>)> {
        ensure_dim("dynamics obs width", self.obs_dim, obs.cols())?;
        ensure_dim("dynamics action width", self.act_dim, actions.cols())?;
        let x = self.input_norm.normalize(&obs.hcat(actions)?);
        let out = self.net.forward(&x)?;
        let d = self.obs_dim + 1;
        let (lo, hi) = (T::of(LOG_STD_MIN), T::of(LOG_STD_MAX));
        Ok((out.columns(0, d), out.columns(d, 2 * d).map(|v| v.max(lo).min(hi))))
    }

    /// Mean-mode prediction; a pure function of the inputs.
    pub fn predict_mean(&self, obs: &Matrix<T>, actions: &Matrix<T>) -> Result<Prediction<T>> {
        if !self.trained {
            return Err(Error::Untrained("dynamics"));
        }
        let (mu, log_std) = self.heads(obs, actions)?;
        Ok(self.assemble(obs, &mu, &log_std))
    }

    pub fn predict<R: Rng + ?Sized>(
        &self,
        obs: &Matrix<T>,
        actions: &Matrix<T>,
        mode: PredictMode,
        rng: &mut R,
    ) -> Result<Prediction<T>> {
        if !self.trained {
            return Err(Error::Untrained("dynamics"));
        }
        let (mut mu, log_std) = self.heads(obs, actions)?;
        if mode == PredictMode::Sample {
            for (m, ls) in mu.as_mut_slice().iter_mut().zip(log_std.as_slice()) {
                *m += ls.exp() * rng::normal::<T, _>(rng);
            }
        }
        Ok(self.assemble(obs, &mu, &log_std))
    }

    fn assemble(&self, obs: &Matrix<T>, y_norm: &Matrix<T>, log_std: &Matrix<T>) -> Prediction<T> {
        let d = self.obs_dim;
        let y = self.target_norm.denormalize(y_norm);
        let scale = self.target_norm.std();
        let n = obs.rows();
        let next_obs = Matrix::from_fn(n, d, |i, j| obs.get(i, j) + y.get(i, j));
        let max_std: Vec<T> = (0..n)
            .map(|i| log_std.row(i).iter().zip(scale).map(|(ls, s)| ls.exp() * *s).fold(T::zero(), T::max))
            .collect();
        let reward = (0..n).map(|i| y.get(i, d) - self.penalty_lambda * max_std[i]).collect();
        Prediction { next_obs, reward, max_std }
    }

    pub fn export(&self) -> Snapshot<T> {
        let mut snap = Snapshot::new("dynamics");
        snap.set_meta("obs_dim", self.obs_dim);
        snap.set_meta("act_dim", self.act_dim);
        snap.set_meta("penalty_lambda", self.penalty_lambda.f64());
        snap.set_meta("trained", self.trained);
        self.net.export("net", &mut snap);
        self.input_norm.export("input_norm", &mut snap);
        self.target_norm.export("target_norm", &mut snap);
        snap
    }

    pub fn import(snap: &Snapshot<T>) -> Result<Self> {
        snap.expect_kind("dynamics")?;
        let obs_dim: usize = snap.meta_parse("obs_dim")?;
        let act_dim: usize = snap.meta_parse("act_dim")?;
        let lambda: f64 = snap.meta_parse("penalty_lambda")?;
        let net = Mlp::import("net", snap)?;
        ensure_dim("dynamics net input", obs_dim + act_dim, net.input_dim())?;
        ensure_dim("dynamics net output", 2 * (obs_dim + 1), net.output_dim())?;
        let mut model = Self {
            net,
            obs_dim,
            act_dim,
            input_norm: Normalizer::identity(obs_dim + act_dim),
            target_norm: Normalizer::identity(obs_dim + 1),
            penalty_lambda: T::of(lambda),
            trained: snap.meta_parse("trained")?,
        };
        model.set_normalizers(
            Normalizer::import("input_norm", snap)?,
            Normalizer::import("target_norm", snap)?,
        )?;
        Ok(model)
    }
}

/// Shuffled minibatch Adam on the NLL. Normalization statistics are fitted
/// from the whole dataset on the first training call. Returns the model and
/// the mean loss of every epoch.
pub fn train_dynamics<T: Real>(
    mut model: GaussianDynamics<T>,
    dataset: &TransitionDataset,
    config: &DynamicsTrainConfig,
    seed: u64,
) -> Result<(GaussianDynamics<T>, Vec<T>)> {
    if config.epochs == 0 {
        return Ok((model, Vec::new()));
    }
    if dataset.is_empty() {
        return Err(Error::InvalidConfig("dynamics training needs a nonempty dataset".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be positive".into()));
    }
    ensure_dim("dataset obs_dim", model.obs_dim, dataset.obs_dim())?;
    ensure_dim("dataset act_dim", model.act_dim, dataset.act_dim())?;
    let all = dataset.full_batch::<T>();
    let (x_raw, y_raw) = GaussianDynamics::raw_pairs(&all.obs, &all.actions, &all.rewards, &all.next_obs)?;
    if !model.trained {
        model.input_norm = Normalizer::fit(&x_raw);
        model.target_norm = Normalizer::fit(&y_raw);
    }
    let x = model.input_norm.normalize(&x_raw);
    let y = model.target_norm.normalize(&y_raw);
    let mut adam = AdamState::new(model.net.num_params(), T::of(config.lr));
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut rng = rng::derive(seed, purpose::SHUFFLE, epoch as u64);
        order.shuffle(&mut rng);
        let mut total = T::zero();
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let (loss, grads) = model.nll_loss(&x.select_rows(chunk), &y.select_rows(chunk))?;
            adam.step(model.net.params_mut(), &grads)?;
            total += loss;
            batches += 1;
        }
        epoch_losses.push(total / T::of(batches as f64));
    }
    model.trained = true;
    Ok((model, epoch_losses))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_net(obs_dim: usize, act_dim: usize, bias: &[f64]) -> GaussianDynamics<f64> {
        let mut m = GaussianDynamics::new(obs_dim, act_dim, &[3], 0.0, &mut rng::derive(0, 0, 0)).unwrap();
        let n = m.net.num_params();
        let p = m.net.params_mut();
        p.iter_mut().for_each(|v| *v = 0.0);
        p[n - bias.len()..].copy_from_slice(bias);
        m.trained = true;
        m
    }

    #[test]
    fn nll_at_the_mean_is_the_log_normalizer() {
        // Output bias: means 0.5, -1 and log-stds 0.
        let m = zero_net(1, 1, &[0.5, -1.0, 0.0, 0.0]);
        let x = Matrix::from_rows(&[[0.3, 0.1], [-2.0, 4.0]]).unwrap();
        let y = Matrix::from_rows(&[[0.5, -1.0], [0.5, -1.0]]).unwrap();
        let (loss, _) = m.nll_loss(&x, &y).unwrap();
        let expected = (2.0 / 2.0) * (2.0 * core::f64::consts::PI).ln();
        assert!((loss - expected).abs() < 1e-12);
    }

    #[test]
    fn doubling_unit_variance_error() {
        let m = zero_net(1, 1, &[0.0; 4]);
        let x = Matrix::from_rows(&[[0.0, 0.0]]).unwrap();
        let (l1, _) = m.nll_loss(&x, &Matrix::from_rows(&[[0.3, 0.0]]).unwrap()).unwrap();
        let (l2, _) = m.nll_loss(&x, &Matrix::from_rows(&[[0.6, 0.0]]).unwrap()).unwrap();
        assert!(((l2 - l1) - (0.36 - 0.09) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn nan_batch_rejected() {
        let m = zero_net(1, 1, &[0.0; 4]);
        let x = Matrix::from_rows(&[[f64::NAN, 0.0]]).unwrap();
        let y = Matrix::from_rows(&[[0.0, 0.0]]).unwrap();
        assert!(matches!(m.nll_loss(&x, &y), Err(Error::NonFinite(_))));
    }

    #[test]
    fn penalty_subtracts_scaled_max_std() {
        // log-stds ln(0.3), ln(0.1) so the max std is 0.3.
        let mut m = zero_net(1, 1, &[0.0, 2.0, 0.3f64.ln(), 0.1f64.ln()]);
        let obs = Matrix::from_rows(&[[1.0]]).unwrap();
        let act = Matrix::from_rows(&[[0.0]]).unwrap();
        let base = m.predict_mean(&obs, &act).unwrap();
        assert_eq!(base.reward[0], 2.0);
        m.set_penalty_lambda(1.0);
        let pen = m.predict_mean(&obs, &act).unwrap();
        assert!((base.reward[0] - pen.reward[0] - 0.3).abs() < 1e-12);
        assert!((pen.max_std[0] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn floor_std_samples_hug_the_mean() {
        let m = zero_net(2, 1, &[0.1, 0.2, 0.3, -50.0, -50.0, -50.0]);
        let obs = Matrix::from_rows(&[[0.0, 0.0]]).unwrap();
        let act = Matrix::from_rows(&[[0.0]]).unwrap();
        let mean = m.predict_mean(&obs, &act).unwrap();
        let mut r = rng::derive(3, 0, 0);
        for _ in 0..100 {
            let s = m.predict(&obs, &act, PredictMode::Sample, &mut r).unwrap();
            for (a, b) in s.next_obs.as_slice().iter().zip(mean.next_obs.as_slice()) {
                assert!((a - b).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn untrained_model_refuses_to_predict() {
        let m = GaussianDynamics::<f64>::new(1, 1, &[4], 0.0, &mut rng::derive(0, 0, 0)).unwrap();
        let x = Matrix::from_rows(&[[0.0]]).unwrap();
        assert_eq!(m.predict_mean(&x, &x).unwrap_err(), Error::Untrained("dynamics"));
    }

    #[test]
    fn snapshot_round_trip() {
        let m = zero_net(2, 1, &[0.1, 0.2, 0.3, -1.0, -1.0, -1.0]);
        let back = GaussianDynamics::import(&m.export()).unwrap();
        assert_eq!(m, back);
    }
}
