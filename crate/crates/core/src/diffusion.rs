//! Conditional denoising diffusion model of the behavior policy and the
//! limitation value built on its samples.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;

use crate::envs::TransitionDataset;
use crate::error::{ensure_dim, Error, Result};
use crate::nn::{Activation, AdamState, Matrix, Mlp, Normalizer};
use crate::real::Real;
use crate::rng::{self, purpose};
use crate::snapshot::{join_usize, split_usize, Snapshot};

pub const DEFAULT_K: usize = 5;
pub const VP_BETA_MIN: f64 = 0.1;
pub const VP_BETA_MAX: f64 = 10.0;
/// Width of the sinusoidal step embedding.
pub const TIME_EMBED_DIM: usize = 8;

/// Per-step noise variances `beta_k`, indexed `k = 1..=K` as `[k - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl VarianceSchedule {
    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::InvalidConfig("schedule needs at least one step".into()));
        }
        if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
            return Err(Error::OutOfRange { what: "beta", value: format!("{b}") });
        }
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bars = Vec::with_capacity(alphas.len());
        let mut prod = 1.0;
        for a in &alphas {
            prod *= a;
            alpha_bars.push(prod);
        }
        Ok(Self { betas, alphas, alpha_bars })
    }

    /// Discretized variance-preserving schedule:
    /// `beta_k = 1 - exp(-b_min/K - (b_max - b_min)(2k - 1) / (2K^2))`.
    pub fn vp(k_steps: usize) -> Result<Self> {
        if k_steps == 0 {
            return Err(Error::InvalidConfig("K must be positive".into()));
        }
        let k = k_steps as f64;
        let betas = (1..=k_steps)
            .map(|i| {
                let i = i as f64;
                1.0 - Float::exp(
                    -VP_BETA_MIN / k - (VP_BETA_MAX - VP_BETA_MIN) * (2.0 * i - 1.0) / (2.0 * k * k),
                )
            })
            .collect();
        Self::from_betas(betas)
    }

    pub fn constant(beta: f64, k_steps: usize) -> Result<Self> {
        Self::from_betas(vec![beta; k_steps])
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn beta(&self, k: usize) -> f64 {
        self.betas[k - 1]
    }

    pub fn alpha(&self, k: usize) -> f64 {
        self.alphas[k - 1]
    }

    pub fn alpha_bar(&self, k: usize) -> f64 {
        self.alpha_bars[k - 1]
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }
}

/// `a_k = sqrt(alpha_bar_k) a0 + sqrt(1 - alpha_bar_k) xi`.
pub fn forward_noise<T: Real>(a0: &[T], k: usize, xi: &[T], schedule: &VarianceSchedule) -> Result<Vec<T>> {
    if k == 0 || k > schedule.steps() {
        return Err(Error::OutOfRange {
            what: "diffusion step",
            value: format!("{k} not in [1, {}]", schedule.steps()),
        });
    }
    ensure_dim("forward noise", a0.len(), xi.len())?;
    let ab = schedule.alpha_bar(k);
    let (s, n) = (T::of(Float::sqrt(ab)), T::of(Float::sqrt(1.0 - ab)));
    Ok(a0.iter().zip(xi).map(|(&a, &x)| s * a + n * x).collect())
}

/// Sinusoidal embedding of the step index.
pub fn time_embedding<T: Real>(k: usize) -> [T; TIME_EMBED_DIM] {
    let half = TIME_EMBED_DIM / 2;
    let mut e = [T::zero(); TIME_EMBED_DIM];
    for i in 0..half {
        let freq = Float::exp(-Float::ln(1000.0) * i as f64 / half as f64);
        let angle = k as f64 * freq;
        e[i] = T::of(Float::sin(angle));
        e[half + i] = T::of(Float::cos(angle));
    }
    e
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionBehavior<T> {
    /// `(a_k, s_normalized, embed(k)) -> predicted noise`.
    net: Mlp<T>,
    schedule: VarianceSchedule,
    obs_dim: usize,
    act_dim: usize,
    bounds: (f64, f64),
    obs_norm: Normalizer<T>,
    trained: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BehaviorTrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for BehaviorTrainConfig {
    fn default() -> Self {
        Self { steps: 30_000, batch_size: 256, lr: 3e-4 }
    }
}

impl<T: Real> DiffusionBehavior<T> {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        act_dim: usize,
        hidden: &[usize],
        schedule: VarianceSchedule,
        bounds: (f64, f64),
        rng: &mut R,
    ) -> Result<Self> {
        if !(bounds.0 < bounds.1) {
            return Err(Error::InvalidConfig("action bounds must satisfy low < high".into()));
        }
        let mut widths = vec![act_dim + obs_dim + TIME_EMBED_DIM];
        widths.extend_from_slice(hidden);
        widths.push(act_dim);
        Ok(Self {
            net: Mlp::new(&widths, Activation::Relu, Activation::Identity, rng),
            schedule,
            obs_dim,
            act_dim,
            bounds,
            obs_norm: Normalizer::identity(obs_dim),
            trained: false,
        })
    }

    pub fn schedule(&self) -> &VarianceSchedule {
        &self.schedule
    }

    pub fn net(&self) -> &Mlp<T> {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp<T> {
        &mut self.net
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    pub fn bounds(&self) -> (f64, f64) {
        self.bounds
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn mark_trained(&mut self) {
        self.trained = true;
    }

    pub fn set_obs_norm(&mut self, norm: Normalizer<T>) -> Result<()> {
        ensure_dim("behavior obs normalizer", self.obs_dim, norm.dim())?;
        self.obs_norm = norm;
        Ok(())
    }

    fn net_input(&self, noisy: &Matrix<T>, obs_norm: &Matrix<T>, ks: &[usize]) -> Matrix<T> {
        let (a, d) = (self.act_dim, self.obs_dim);
        let table: Vec<[T; TIME_EMBED_DIM]> = (0..=self.schedule.steps()).map(time_embedding).collect();
        let mut input = Matrix::zeros(noisy.rows(), a + d + TIME_EMBED_DIM);
        for i in 0..noisy.rows() {
            let row = input.row_mut(i);
            row[..a].copy_from_slice(noisy.row(i));
            row[a..a + d].copy_from_slice(obs_norm.row(i));
            row[a + d..].copy_from_slice(&table[ks[i]]);
        }
        input
    }

    /// Noise-prediction loss `mean_i ||xi_i - net(a_{k_i}, s_i, k_i)||^2` for
    /// given steps and noise, with its parameter gradient.
    pub fn loss_with_noise(
        &self,
        obs: &Matrix<T>,
        actions: &Matrix<T>,
        ks: &[usize],
        xi: &Matrix<T>,
    ) -> Result<(T, Vec<T>)> {
        ensure_dim("behavior obs width", self.obs_dim, obs.cols())?;
        ensure_dim("behavior action width", self.act_dim, actions.cols())?;
        ensure_dim("behavior steps", obs.rows(), ks.len())?;
        ensure_dim("behavior noise rows", obs.rows(), xi.rows())?;
        let n = obs.rows();
        if n == 0 {
            return Ok((T::zero(), self.net.zero_grads()));
        }
        let mut noisy = Matrix::zeros(n, self.act_dim);
        for i in 0..n {
            let row = forward_noise(actions.row(i), ks[i], xi.row(i), &self.schedule)?;
            noisy.row_mut(i).copy_from_slice(&row);
        }
        let input = self.net_input(&noisy, &self.obs_norm.normalize(obs), ks);
        let cache = self.net.forward_cached(&input)?;
        let pred = cache.output();
        let inv_n = T::one() / T::of(n as f64);
        let mut loss = T::zero();
        let mut up = Matrix::zeros(n, self.act_dim);
        for (u, (p, x)) in up.as_mut_slice().iter_mut().zip(pred.as_slice().iter().zip(xi.as_slice())) {
            let e = *p - *x;
            loss += e * e;
            *u = T::of(2.0) * e * inv_n;
        }
        let (grads, _) = self.net.backward(&cache, &up)?;
        Ok((loss * inv_n, grads))
    }

    /// Draws `k ~ U{1..K}` and `xi ~ N(0, I)` per row, then evaluates the loss.
    pub fn diffusion_loss<R: Rng + ?Sized>(
        &self,
        obs: &Matrix<T>,
        actions: &Matrix<T>,
        rng: &mut R,
    ) -> Result<(T, Vec<T>)> {
        let n = obs.rows();
        let big_k = self.schedule.steps();
        let ks: Vec<usize> = (0..n).map(|_| rng.random_range(1..=big_k)).collect();
        let xi = Matrix::from_fn(n, self.act_dim, |_, _| rng::normal::<T, _>(rng));
        self.loss_with_noise(obs, actions, &ks, &xi)
    }

    /// Reverse chain from `a_K ~ N(0, I)`; no noise on the final step and the
    /// result is clipped to the action bounds. One row per observation row.
    pub fn sample<R: Rng + ?Sized>(&self, obs: &Matrix<T>, rng: &mut R) -> Result<Matrix<T>> {
        ensure_dim("behavior obs width", self.obs_dim, obs.cols())?;
        let n = obs.rows();
        let obs_norm = self.obs_norm.normalize(obs);
        let mut a = Matrix::from_fn(n, self.act_dim, |_, _| rng::normal::<T, _>(rng));
        let mut ks = vec![0; n];
        for k in (1..=self.schedule.steps()).rev() {
            ks.fill(k);
            let eps = self.net.forward(&self.net_input(&a, &obs_norm, &ks))?;
            let beta = self.schedule.beta(k);
            let inv_sqrt_alpha = T::of(1.0 / Float::sqrt(self.schedule.alpha(k)));
            let coef = T::of(beta / Float::sqrt(1.0 - self.schedule.alpha_bar(k)));
            let sigma = T::of(Float::sqrt(beta));
            for (v, e) in a.as_mut_slice().iter_mut().zip(eps.as_slice()) {
                *v = inv_sqrt_alpha * (*v - coef * *e);
            }
            if k > 1 {
                for v in a.as_mut_slice() {
                    *v += sigma * rng::normal::<T, _>(rng);
                }
            }
        }
        let (lo, hi) = (T::of(self.bounds.0), T::of(self.bounds.1));
        Ok(a.map(|v| v.max(lo).min(hi)))
    }

    pub fn export(&self) -> Snapshot<T> {
        let mut snap = Snapshot::new("behavior");
        snap.set_meta("obs_dim", self.obs_dim);
        snap.set_meta("act_dim", self.act_dim);
        snap.set_meta("bounds", alloc::format!("{},{}", self.bounds.0, self.bounds.1));
        snap.set_meta("trained", self.trained);
        snap.set_meta("k_steps", join_usize(&[self.schedule.steps()]));
        snap.push(
            "schedule.betas",
            vec![self.schedule.steps()],
            self.schedule.betas.iter().map(|&b| T::of(b)).collect(),
        );
        self.net.export("net", &mut snap);
        self.obs_norm.export("obs_norm", &mut snap);
        snap
    }

    pub fn import(snap: &Snapshot<T>) -> Result<Self> {
        snap.expect_kind("behavior")?;
        let obs_dim: usize = snap.meta_parse("obs_dim")?;
        let act_dim: usize = snap.meta_parse("act_dim")?;
        let bounds: Vec<f64> = snap
            .meta("bounds")?
            .split(',')
            .map(|v| v.parse::<f64>().map_err(|_| Error::Snapshot("bad bounds".into())))
            .collect::<Result<_>>()?;
        if bounds.len() != 2 || !(bounds[0] < bounds[1]) {
            return Err(Error::Snapshot("bad bounds".into()));
        }
        let k = split_usize(snap.meta("k_steps")?)?;
        let betas = snap.tensor("schedule.betas")?;
        if k.len() != 1 || betas.data.len() != k[0] {
            return Err(Error::Snapshot("schedule length mismatch".into()));
        }
        let schedule = VarianceSchedule::from_betas(betas.data.iter().map(|b| b.f64()).collect())?;
        let net = Mlp::import("net", snap)?;
        ensure_dim("behavior net input", act_dim + obs_dim + TIME_EMBED_DIM, net.input_dim())?;
        ensure_dim("behavior net output", act_dim, net.output_dim())?;
        let mut model = Self {
            net,
            schedule,
            obs_dim,
            act_dim,
            bounds: (bounds[0], bounds[1]),
            obs_norm: Normalizer::identity(obs_dim),
            trained: snap.meta_parse("trained")?,
        };
        model.set_obs_norm(Normalizer::import("obs_norm", snap)?)?;
        Ok(model)
    }
}

/// Minibatch Adam on the noise-prediction loss. Observation statistics are
/// fitted on the first training call. Returns the model and per-step losses.
pub fn train_behavior<T: Real>(
    mut model: DiffusionBehavior<T>,
    dataset: &TransitionDataset,
    config: &BehaviorTrainConfig,
    seed: u64,
) -> Result<(DiffusionBehavior<T>, Vec<T>)> {
    if config.steps == 0 {
        return Ok((model, Vec::new()));
    }
    if dataset.is_empty() {
        return Err(Error::InvalidConfig("behavior training needs a nonempty dataset".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be positive".into()));
    }
    ensure_dim("dataset obs_dim", model.obs_dim, dataset.obs_dim())?;
    ensure_dim("dataset act_dim", model.act_dim, dataset.act_dim())?;
    let all = dataset.full_batch::<T>();
    if !model.trained {
        model.obs_norm = Normalizer::fit(&all.obs);
    }
    let mut adam = AdamState::new(model.net.num_params(), T::of(config.lr));
    let mut losses = Vec::with_capacity(config.steps);
    let mut idx = vec![0usize; config.batch_size];
    for step in 0..config.steps {
        let mut rng = rng::derive(seed, purpose::DIFFUSION, step as u64);
        for i in idx.iter_mut() {
            *i = rng.random_range(0..dataset.len());
        }
        let (loss, grads) =
            model.diffusion_loss(&all.obs.select_rows(&idx), &all.actions.select_rows(&idx), &mut rng)?;
        adam.step(model.net.params_mut(), &grads)?;
        losses.push(loss);
    }
    model.trained = true;
    Ok((model, losses))
}

/// `min_j max_m Q_j(s, a_m)` with `a_1..a_M` drawn from the behavior model;
/// the same samples feed every critic. `critics` map `(obs, actions)` batches
/// to one value per row.
pub fn limitation_value<T, R, Q>(
    model: &DiffusionBehavior<T>,
    critics: &[Q],
    obs: &Matrix<T>,
    m: usize,
    rng: &mut R,
) -> Result<Vec<T>>
where
    T: Real,
    R: Rng + ?Sized,
    Q: Fn(&Matrix<T>, &Matrix<T>) -> Result<Vec<T>>,
{
    if m == 0 {
        return Err(Error::InvalidConfig("M must be at least 1".into()));
    }
    if critics.is_empty() {
        return Err(Error::InvalidConfig("limitation value needs a critic".into()));
    }
    if !model.trained {
        return Err(Error::Untrained("behavior"));
    }
    let n = obs.rows();
    let repeated = obs.repeat_rows(m);
    let actions = model.sample(&repeated, rng)?;
    let mut out = vec![T::infinity(); n];
    for q in critics {
        let values = q(&repeated, &actions)?;
        ensure_dim("critic output", n * m, values.len())?;
        for (i, o) in out.iter_mut().enumerate() {
            let best = values[i * m..(i + 1) * m].iter().copied().fold(T::neg_infinity(), T::max);
            *o = o.min(best);
        }
    }
    Ok(out)
}
