use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dynamics::PredictMode;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ablation {
    #[default]
    None,
    /// OOD target is `y_lmt + delta`.
    NoImagination,
    /// OOD target is `y_img + delta`.
    NoLimitation,
}

impl Ablation {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "no-imagination" => Ok(Self::NoImagination),
            "no-limitation" => Ok(Self::NoLimitation),
            other => Err(Error::InvalidConfig(format!("unknown ablation `{other}`"))),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::NoImagination => "no-imagination",
            Self::NoLimitation => "no-limitation",
        }
    }

    pub fn uses_imagination(self) -> bool {
        self != Self::NoImagination
    }

    pub fn uses_limitation(self) -> bool {
        self != Self::NoLimitation
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IlqConfig {
    /// Weight of the in-sample loss term.
    pub eta: f64,
    /// Offset added to OOD targets.
    pub delta: f64,
    /// Behavior samples per limitation value.
    pub m_samples: usize,
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub critic_lr: f64,
    pub actor_lr: f64,
    pub alpha_lr: f64,
    pub entropy_auto: bool,
    /// Starting (or fixed) entropy coefficient; zero disables the entropy
    /// terms when tuning is off.
    pub init_alpha: f64,
    pub hidden: Vec<usize>,
    pub train_steps: usize,
    pub eval_interval: usize,
    pub eval_episodes: usize,
    pub seed: u64,
    pub ablation: Ablation,
    pub imagination: PredictMode,
}

impl Default for IlqConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl IlqConfig {
    /// Small networks and 5e4 steps for the in-repo tasks.
    pub fn desk() -> Self {
        Self {
            eta: 0.9,
            delta: 0.0,
            m_samples: 10,
            gamma: 0.99,
            tau: 0.005,
            batch_size: 256,
            critic_lr: 5e-4,
            actor_lr: 3e-4,
            alpha_lr: 3e-4,
            entropy_auto: true,
            init_alpha: 1.0,
            hidden: vec![64, 64],
            train_steps: 50_000,
            eval_interval: 1_000,
            eval_episodes: 10,
            seed: 0,
            ablation: Ablation::None,
            imagination: PredictMode::Mean,
        }
    }

    /// Full-scale settings: three 256-unit layers and 1e6 steps.
    pub fn paper() -> Self {
        Self { hidden: vec![256, 256, 256], train_steps: 1_000_000, eval_interval: 5_000, ..Self::desk() }
    }

    pub fn profile(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "paper" => Ok(Self::paper()),
            other => Err(Error::InvalidConfig(format!("unknown profile `{other}`"))),
        }
    }

    /// Overrides `eta`, `delta`, learning rates and entropy from a named
    /// benchmark preset. Presets without entropy run with `alpha = 0`.
    pub fn with_preset(mut self, preset: &TaskPreset) -> Self {
        self.eta = preset.eta;
        self.delta = preset.delta;
        self.critic_lr = preset.critic_lr;
        self.actor_lr = preset.actor_lr;
        if !preset.entropy {
            self.entropy_auto = false;
            self.init_alpha = 0.0;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let range = |what: &'static str, v: f64, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(Error::OutOfRange { what, value: format!("{v}") })
            }
        };
        range("eta", self.eta, (0.0..=1.0).contains(&self.eta))?;
        range("gamma", self.gamma, (0.0..1.0).contains(&self.gamma))?;
        range("tau", self.tau, self.tau > 0.0 && self.tau <= 1.0)?;
        range("delta", self.delta, self.delta.is_finite())?;
        for (what, lr) in
            [("critic_lr", self.critic_lr), ("actor_lr", self.actor_lr), ("alpha_lr", self.alpha_lr)]
        {
            range(what, lr, lr > 0.0 && lr.is_finite())?;
        }
        let alpha_ok = self.init_alpha.is_finite()
            && (self.init_alpha > 0.0 || (!self.entropy_auto && self.init_alpha == 0.0));
        range("init_alpha", self.init_alpha, alpha_ok)?;
        if self.m_samples == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("m_samples and batch_size must be positive".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::InvalidConfig("hidden widths must be positive".into()));
        }
        if self.eval_interval == 0 || self.eval_episodes == 0 {
            return Err(Error::InvalidConfig("eval_interval and eval_episodes must be positive".into()));
        }
        Ok(())
    }
}

/// Per-task settings of the published benchmark runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskPreset {
    pub name: &'static str,
    pub eta: f64,
    pub delta: f64,
    pub critic_lr: f64,
    pub actor_lr: f64,
    pub entropy: bool,
}

const fn preset(name: &'static str, eta: f64, delta: f64, slow: bool, entropy: bool) -> TaskPreset {
    let (critic_lr, actor_lr) = if slow { (3e-4, 1e-4) } else { (5e-4, 3e-4) };
    TaskPreset { name, eta, delta, critic_lr, actor_lr, entropy }
}

pub const TASK_PRESETS: &[TaskPreset] = &[
    preset("halfcheetah-r", 0.95, 2.0, false, true),
    preset("hopper-r", 0.9, 1.0, true, true),
    preset("walker2d-r", 0.7, 1.0, false, true),
    preset("halfcheetah-m", 0.95, 1.0, false, true),
    preset("hopper-m", 0.95, -2.0, false, true),
    preset("walker2d-m", 0.9, 0.5, false, true),
    preset("halfcheetah-mr", 0.95, 2.0, false, true),
    preset("hopper-mr", 0.8, -0.5, true, true),
    preset("walker2d-mr", 0.9, 1.0, true, true),
    preset("halfcheetah-me", 0.6, 1.0, false, true),
    preset("hopper-me", 0.4, -0.5, false, true),
    preset("walker2d-me", 0.8, 1.0, false, true),
    preset("maze2d-u", 0.95, -0.5, false, true),
    preset("maze2d-ud", 0.95, 0.0, false, true),
    preset("maze2d-m", 0.95, 0.0, false, true),
    preset("maze2d-md", 0.95, 0.0, false, true),
    preset("maze2d-l", 0.95, 0.0, false, true),
    preset("maze2d-ld", 0.95, 0.0, false, true),
    preset("pen-human", 0.8, -1.0, true, false),
    preset("pen-cloned", 0.8, 0.0, true, false),
];

pub fn task_preset(name: &str) -> Option<&'static TaskPreset> {
    TASK_PRESETS.iter().find(|p| p.name == name)
}
