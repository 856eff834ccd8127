//! The deep learner: twin critics regressed on dataset targets and on
//! bounded OOD targets, a squashed-Gaussian actor and an entropy coefficient.

mod config;
mod losses;
mod networks;
mod pretrain;
mod targets;

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

pub use config::{task_preset, Ablation, IlqConfig, TaskPreset, TASK_PRESETS};
pub use losses::{actor_loss, critic_loss, ActorLoss, CriticLoss};
pub use networks::{
    critic_input, ActorSample, CriticPair, GaussianActor, Temperature, ACTOR_LOG_STD_MAX, ACTOR_LOG_STD_MIN,
};
pub use pretrain::{pretrain_behavior, pretrain_dynamics, pretrain_models, PretrainConfig};
pub use targets::{
    imagination_value, in_sample_target, limitation_target, Branch, TargetBundle, WorldModels,
};

use crate::dynamics::PredictMode;
use crate::envs::{evaluate_policy, normalized_score, EnvSpec, Policy, TransitionDataset};
use crate::error::{ensure_dim, Error, Result};
use crate::nn::{AdamState, Matrix, Normalizer};
use crate::real::Real;
use crate::rng::{self, purpose, StreamRng};
use crate::snapshot::{join_usize, split_usize, Snapshot};
use targets::mean;

/// Diagnostics of one gradient step. Means are over the batch and both
/// critics; NaN marks a quantity the ablation does not compute.
#[derive(Debug, Clone, PartialEq)]
pub struct StepMetrics {
    /// Number of completed steps, starting at 1.
    pub step: usize,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub alpha: f64,
    pub q_in_mean: f64,
    pub q_ood_mean: f64,
    pub y_in_mean: f64,
    pub y_img_mean: f64,
    pub y_lmt_mean: f64,
    /// Mean of `min(y_img, y_lmt)` over OOD rows, before the offset.
    pub ood_base_mean: f64,
    pub target_ood_mean: f64,
    pub frac_img: f64,
    pub frac_lmt: f64,
    /// Largest critic output on the batch, dataset and OOD rows.
    pub q_max: f64,
    pub q_abs_max: f64,
    /// Every OOD row satisfied `base <= y_img` and `base <= y_lmt`.
    pub bounds_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub step: usize,
    pub mean_return: f64,
    pub std_return: f64,
    pub normalized_score: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct EvalSettings<'a> {
    pub env: &'a EnvSpec,
    pub episodes: usize,
    /// Same seed at every evaluation, so successive scores share start states.
    pub seed: u64,
    /// `(random, expert)` returns for the normalized score.
    pub references: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    /// Metrics of the steps that were followed by an evaluation.
    pub eval_steps: Vec<StepMetrics>,
    pub evals: Vec<EvalRecord>,
    pub last: Option<StepMetrics>,
    pub steps_run: usize,
    pub max_q: f64,
    pub max_abs_q: f64,
    pub bound_violations: usize,
    pub stopped_early: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IlqAgent<T> {
    config: IlqConfig,
    obs_norm: Normalizer<T>,
    critics: CriticPair<T>,
    actor: GaussianActor<T>,
    temperature: Temperature<T>,
    critic_opt: [AdamState<T>; 2],
    actor_opt: AdamState<T>,
    steps_done: usize,
}

impl<T: Real> IlqAgent<T> {
    pub fn new(
        config: IlqConfig,
        obs_norm: Normalizer<T>,
        act_dim: usize,
        bounds: (f64, f64),
    ) -> Result<Self> {
        config.validate()?;
        let obs_dim = obs_norm.dim();
        let mut r = rng::derive(config.seed, purpose::INIT, 0);
        let critics = CriticPair::new(obs_dim, act_dim, &config.hidden, &mut r);
        let actor = GaussianActor::new(obs_dim, act_dim, &config.hidden, bounds, &mut r)?;
        let temperature = Temperature::new(config.init_alpha, config.entropy_auto, act_dim, config.alpha_lr)?;
        Ok(Self::assemble(config, obs_norm, critics, actor, temperature, 0))
    }

    /// Fits the observation normalizer on `dataset`.
    pub fn for_dataset(config: IlqConfig, dataset: &TransitionDataset, bounds: (f64, f64)) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::InvalidConfig("dataset is empty".into()));
        }
        let obs = dataset.full_batch::<T>().obs;
        Self::new(config, Normalizer::fit(&obs), dataset.act_dim(), bounds)
    }

    fn assemble(
        config: IlqConfig,
        obs_norm: Normalizer<T>,
        critics: CriticPair<T>,
        actor: GaussianActor<T>,
        temperature: Temperature<T>,
        steps_done: usize,
    ) -> Self {
        let critic_opt = [
            AdamState::new(critics.online[0].num_params(), T::of(config.critic_lr)),
            AdamState::new(critics.online[1].num_params(), T::of(config.critic_lr)),
        ];
        let actor_opt = AdamState::new(actor.net().num_params(), T::of(config.actor_lr));
        Self { config, obs_norm, critics, actor, temperature, critic_opt, actor_opt, steps_done }
    }

    pub fn config(&self) -> &IlqConfig {
        &self.config
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_norm.dim()
    }

    pub fn act_dim(&self) -> usize {
        self.actor.act_dim()
    }

    pub fn obs_norm(&self) -> &Normalizer<T> {
        &self.obs_norm
    }

    pub fn critics(&self) -> &CriticPair<T> {
        &self.critics
    }

    pub fn critics_mut(&mut self) -> &mut CriticPair<T> {
        &mut self.critics
    }

    pub fn actor(&self) -> &GaussianActor<T> {
        &self.actor
    }

    pub fn alpha(&self) -> T {
        self.temperature.alpha()
    }

    pub fn steps_done(&self) -> usize {
        self.steps_done
    }

    /// `min_j Q_j(s, a)` of the online critics on raw observations.
    pub fn q_values(&self, obs: &Matrix<T>, actions: &Matrix<T>) -> Result<Vec<T>> {
        let o = self.obs_norm.normalize(obs);
        let a = self.critics.q(0, &o, actions)?;
        let b = self.critics.q(1, &o, actions)?;
        Ok(a.iter().zip(&b).map(|(x, y)| x.min(*y)).collect())
    }

    /// Computes every target of the step without touching parameters.
    /// `t` selects the per-step random streams.
    pub fn compute_targets(
        &self,
        dataset: &TransitionDataset,
        models: &WorldModels<'_, T>,
        t: u64,
    ) -> Result<(Vec<usize>, Matrix<T>, TargetBundle<T>, StreamRng)> {
        let cfg = &self.config;
        if dataset.is_empty() {
            return Err(Error::InvalidConfig("dataset is empty".into()));
        }
        let mut batch_rng = rng::derive(cfg.seed, purpose::BATCH, t);
        let idx: Vec<usize> = (0..cfg.batch_size).map(|_| batch_rng.random_range(0..dataset.len())).collect();
        let batch = dataset.batch::<T>(&idx);
        let obs_n = self.obs_norm.normalize(&batch.obs);
        let next_n = self.obs_norm.normalize(&batch.next_obs);
        let gamma = T::of(cfg.gamma);

        let mut actor_rng = rng::derive(cfg.seed, purpose::ACTOR, t);
        let y_in = in_sample_target(
            &self.critics,
            &self.actor,
            &next_n,
            &batch.rewards,
            &batch.terminals,
            gamma,
            self.temperature.alpha(),
            &mut actor_rng,
        )?;

        let ood_actions = self.actor.sample(&obs_n, &mut rng::derive(cfg.seed, purpose::OOD, t))?.actions;
        let y_img = match (cfg.ablation.uses_imagination(), models.dynamics) {
            (true, Some(dynamics)) => Some(imagination_value(
                &self.critics,
                &self.actor,
                dynamics,
                &self.obs_norm,
                &batch.obs,
                &ood_actions,
                gamma,
                cfg.imagination,
                &mut rng::derive(cfg.seed, purpose::DYNAMICS, t),
                &mut rng::derive(cfg.seed, purpose::IMAGINE, t),
            )?),
            (true, None) => return Err(Error::InvalidConfig("a trained dynamics model is required".into())),
            (false, _) => None,
        };
        let y_lmt = match (cfg.ablation.uses_limitation(), models.behavior) {
            (true, Some(behavior)) => Some(limitation_target(
                &self.critics,
                behavior,
                &self.obs_norm,
                &batch.obs,
                cfg.m_samples,
                &mut rng::derive(cfg.seed, purpose::DIFFUSION, t),
            )?),
            (true, None) => return Err(Error::InvalidConfig("a trained behavior model is required".into())),
            (false, _) => None,
        };
        let bundle = TargetBundle::assemble(y_in, y_img, y_lmt, T::of(cfg.delta))?;
        Ok((idx, ood_actions, bundle, actor_rng))
    }

    /// One iteration: targets, critic step, actor step, temperature step and
    /// Polyak update. On a non-finite loss or gradient nothing is mutated.
    pub fn train_step(
        &mut self,
        dataset: &TransitionDataset,
        models: &WorldModels<'_, T>,
    ) -> Result<StepMetrics> {
        ensure_dim("dataset obs_dim", self.obs_dim(), dataset.obs_dim())?;
        ensure_dim("dataset act_dim", self.act_dim(), dataset.act_dim())?;
        let t = self.steps_done as u64;
        let step = self.steps_done + 1;
        let abort = |reason: &str| Error::TrainingAborted { step, reason: reason.to_string() };
        let (idx, ood_actions, bundle, mut actor_rng) = self.compute_targets(dataset, models, t)?;
        let batch = dataset.batch::<T>(&idx);
        let obs_n = self.obs_norm.normalize(&batch.obs);
        let cfg = &self.config;

        let closs = critic_loss(
            &self.critics,
            &obs_n,
            &batch.actions,
            &bundle.in_sample,
            &ood_actions,
            &bundle.ood,
            T::of(cfg.eta),
        )?;
        if !closs.loss.is_finite() {
            return Err(abort(&format!("critic loss is {}", closs.loss)));
        }
        let mut critics = self.critics.clone();
        let mut critic_opt = self.critic_opt.clone();
        for j in 0..2 {
            critic_opt[j]
                .step(critics.online[j].params_mut(), &closs.grads[j])
                .map_err(|e| abort(&format!("critic {j}: {e}")))?;
        }

        let eps = Matrix::from_fn(obs_n.rows(), self.act_dim(), |_, _| rng::normal::<T, _>(&mut actor_rng));
        let alpha = self.temperature.alpha();
        let aloss = actor_loss(&critics, &self.actor, &obs_n, eps, alpha)?;
        if !aloss.loss.is_finite() {
            return Err(abort(&format!("actor loss is {}", aloss.loss)));
        }
        let mut actor = self.actor.clone();
        let mut actor_opt = self.actor_opt.clone();
        actor_opt
            .step(actor.net_mut().params_mut(), &aloss.grads)
            .map_err(|e| abort(&format!("actor: {e}")))?;
        let mut temperature = self.temperature.clone();
        temperature.update(aloss.mean_log_prob).map_err(|e| abort(&format!("temperature: {e}")))?;
        critics.soft_update(T::of(cfg.tau))?;

        self.critics = critics;
        self.critic_opt = critic_opt;
        self.actor = actor;
        self.actor_opt = actor_opt;
        self.temperature = temperature;
        self.steps_done = step;

        let all_q = closs.q_in.iter().chain(&closs.q_ood).flatten();
        let (q_max, q_abs_max) =
            all_q.fold((f64::NEG_INFINITY, 0.0f64), |(m, a), q| (m.max(q.f64()), a.max(q.f64().abs())));
        let pair_mean = |v: &[Vec<T>; 2]| 0.5 * (mean(&v[0]) + mean(&v[1]));
        Ok(StepMetrics {
            step,
            critic_loss: closs.loss.f64(),
            actor_loss: aloss.loss.f64(),
            alpha: alpha.f64(),
            q_in_mean: pair_mean(&closs.q_in),
            q_ood_mean: pair_mean(&closs.q_ood),
            y_in_mean: mean(&bundle.in_sample),
            y_img_mean: bundle.y_img.as_deref().map_or(f64::NAN, mean),
            y_lmt_mean: bundle.y_lmt.as_deref().map_or(f64::NAN, mean),
            ood_base_mean: mean(&bundle.ood_base),
            target_ood_mean: mean(&bundle.ood),
            frac_img: bundle.fraction(Branch::Imagination),
            frac_lmt: bundle.fraction(Branch::Limitation),
            q_max,
            q_abs_max,
            bounds_ok: bundle.respects_bounds(),
        })
    }

    pub fn evaluate(&self, settings: &EvalSettings<'_>) -> Result<EvalRecord> {
        ensure_dim("env obs_dim", self.obs_dim(), settings.env.obs_dim())?;
        ensure_dim("env act_dim", self.act_dim(), settings.env.act_dim())?;
        let (mean_return, std_return) =
            evaluate_policy(settings.env, self, settings.episodes, settings.seed)?;
        let normalized_score = match settings.references {
            Some((random, expert)) => Some(normalized_score(mean_return, random, expert)?),
            None => None,
        };
        Ok(EvalRecord { step: self.steps_done, mean_return, std_return, normalized_score })
    }

    /// Runs the configured number of steps, evaluating every
    /// `eval_interval` steps when `eval` is given. The observer sees every
    /// step and may stop the run.
    pub fn train(
        &mut self,
        dataset: &TransitionDataset,
        models: &WorldModels<'_, T>,
        eval: Option<&EvalSettings<'_>>,
        mut observer: impl FnMut(&StepMetrics, Option<&EvalRecord>) -> Control,
    ) -> Result<TrainLog> {
        let mut log = TrainLog { max_q: f64::NEG_INFINITY, ..TrainLog::default() };
        if self.config.train_steps == 0 {
            return Ok(log);
        }
        models.check(self.config.ablation, self.obs_dim(), self.act_dim())?;
        for _ in 0..self.config.train_steps {
            let metrics = self.train_step(dataset, models)?;
            log.steps_run += 1;
            log.max_q = log.max_q.max(metrics.q_max);
            log.max_abs_q = log.max_abs_q.max(metrics.q_abs_max);
            log.bound_violations += usize::from(!metrics.bounds_ok);
            let record = match eval {
                Some(settings) if metrics.step % self.config.eval_interval == 0 => {
                    Some(self.evaluate(settings)?)
                }
                _ => None,
            };
            let control = observer(&metrics, record.as_ref());
            if let Some(r) = record {
                log.eval_steps.push(metrics.clone());
                log.evals.push(r);
            }
            log.last = Some(metrics);
            if control == Control::Stop {
                log.stopped_early = log.steps_run < self.config.train_steps;
                break;
            }
        }
        Ok(log)
    }

    /// Networks, normalizer, temperature and configuration. Optimizer
    /// moments are not kept; a restored agent restarts Adam.
    pub fn export(&self) -> Snapshot<T> {
        let mut snap = Snapshot::new("agent");
        let c = &self.config;
        snap.set_meta("eta", c.eta);
        snap.set_meta("delta", c.delta);
        snap.set_meta("m_samples", c.m_samples);
        snap.set_meta("gamma", c.gamma);
        snap.set_meta("tau", c.tau);
        snap.set_meta("batch_size", c.batch_size);
        snap.set_meta("critic_lr", c.critic_lr);
        snap.set_meta("actor_lr", c.actor_lr);
        snap.set_meta("alpha_lr", c.alpha_lr);
        snap.set_meta("entropy_auto", c.entropy_auto);
        snap.set_meta("init_alpha", c.init_alpha);
        snap.set_meta("hidden", join_usize(&c.hidden));
        snap.set_meta("train_steps", c.train_steps);
        snap.set_meta("eval_interval", c.eval_interval);
        snap.set_meta("eval_episodes", c.eval_episodes);
        snap.set_meta("seed", c.seed);
        snap.set_meta("ablation", c.ablation.tag());
        snap.set_meta("imagination", c.imagination.tag());
        snap.set_meta("steps_done", self.steps_done);
        self.obs_norm.export("obs_norm", &mut snap);
        self.critics.export(&mut snap);
        self.actor.export(&mut snap);
        self.temperature.export(&mut snap);
        snap
    }

    pub fn import(snap: &Snapshot<T>) -> Result<Self> {
        snap.expect_kind("agent")?;
        let hidden_text = snap.meta("hidden")?;
        let config = IlqConfig {
            eta: snap.meta_parse("eta")?,
            delta: snap.meta_parse("delta")?,
            m_samples: snap.meta_parse("m_samples")?,
            gamma: snap.meta_parse("gamma")?,
            tau: snap.meta_parse("tau")?,
            batch_size: snap.meta_parse("batch_size")?,
            critic_lr: snap.meta_parse("critic_lr")?,
            actor_lr: snap.meta_parse("actor_lr")?,
            alpha_lr: snap.meta_parse("alpha_lr")?,
            entropy_auto: snap.meta_parse("entropy_auto")?,
            init_alpha: snap.meta_parse("init_alpha")?,
            hidden: if hidden_text.is_empty() { vec![] } else { split_usize(hidden_text)? },
            train_steps: snap.meta_parse("train_steps")?,
            eval_interval: snap.meta_parse("eval_interval")?,
            eval_episodes: snap.meta_parse("eval_episodes")?,
            seed: snap.meta_parse("seed")?,
            ablation: Ablation::parse(snap.meta("ablation")?).map_err(|e| Error::Snapshot(e.to_string()))?,
            imagination: PredictMode::parse(snap.meta("imagination")?)?,
        };
        config.validate().map_err(|e| Error::Snapshot(e.to_string()))?;
        let obs_norm = Normalizer::import("obs_norm", snap)?;
        let critics = CriticPair::import(snap)?;
        let actor = GaussianActor::import(snap)?;
        let (obs_dim, act_dim) = (obs_norm.dim(), actor.act_dim());
        if actor.net().input_dim() != obs_dim || critics.online[0].input_dim() != obs_dim + act_dim {
            return Err(Error::Snapshot("agent network widths disagree".into()));
        }
        let temperature = Temperature::import(snap, act_dim, config.alpha_lr)?;
        let steps_done = snap.meta_parse("steps_done")?;
        Ok(Self::assemble(config, obs_norm, critics, actor, temperature, steps_done))
    }
}

impl<T: Real> Policy for IlqAgent<T> {
    fn act(&self, obs: &[f64], rng: &mut StreamRng, deterministic: bool) -> Vec<f64> {
        let row = Matrix::from_fn(1, obs.len(), |_, j| T::of(obs[j]));
        let o = self.obs_norm.normalize(&row);
        let a = if deterministic {
            self.actor.mean_action(&o)
        } else {
            self.actor.sample(&o, rng).map(|s| s.actions)
        }
        .expect("observation width matches the agent");
        a.as_slice().iter().map(|v| v.f64()).collect()
    }
}
