//! TOML run configuration.
//!
//! ```toml
//! profile = "desk"            # desk | paper, the base every other key overrides
//! preset = "hopper-m"         # optional per-task eta/delta/learning rates
//!
//! [paths]
//! data = "medium.ilqd"
//! dynamics = "dyn.ilqc"       # optional; trained in-process when absent
//! behavior = "beh.ilqc"
//! out_dir = "runs/medium"
//!
//! [agent]                     # any agent field
//! eta = 0.9
//! ablation = "no-limitation"
//!
//! [models]
//! dynamics_epochs = 40
//! behavior_steps = 30000
//! ```

use std::path::{Path, PathBuf};

use ilq_core::agent::{task_preset, Ablation, IlqConfig, PretrainConfig};
use ilq_core::dynamics::PredictMode;
use serde::Deserialize;

use crate::error::{IoError, Result};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub data: Option<PathBuf>,
    pub dynamics: Option<PathBuf>,
    pub behavior: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    pub eta: Option<f64>,
    pub delta: Option<f64>,
    pub m_samples: Option<usize>,
    pub gamma: Option<f64>,
    pub tau: Option<f64>,
    pub batch_size: Option<usize>,
    pub critic_lr: Option<f64>,
    pub actor_lr: Option<f64>,
    pub alpha_lr: Option<f64>,
    pub entropy_auto: Option<bool>,
    pub init_alpha: Option<f64>,
    pub hidden: Option<Vec<usize>>,
    pub train_steps: Option<usize>,
    pub eval_interval: Option<usize>,
    pub eval_episodes: Option<usize>,
    pub seed: Option<u64>,
    pub ablation: Option<String>,
    pub imagination: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelsSection {
    pub dynamics_hidden: Option<Vec<usize>>,
    pub dynamics_epochs: Option<usize>,
    pub dynamics_lr: Option<f64>,
    pub penalty_lambda: Option<f64>,
    pub behavior_hidden: Option<Vec<usize>>,
    pub behavior_steps: Option<usize>,
    pub behavior_lr: Option<f64>,
    pub k_steps: Option<usize>,
}

/// The file as written; every field optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub profile: Option<String>,
    pub preset: Option<String>,
    #[serde(default)]
    pub paths: PathsSection,
    #[serde(default)]
    pub agent: AgentSection,
    #[serde(default)]
    pub models: ModelsSection,
}

/// A resolved, validated run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub profile: String,
    pub data: PathBuf,
    pub dynamics: Option<PathBuf>,
    pub behavior: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub agent: IlqConfig,
    pub pretrain: PretrainConfig,
}

fn set<V>(slot: &mut V, value: Option<V>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl RunConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| IoError::Config(e.message().to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
        Self::parse(&text)
    }

    /// Applies profile, preset and overrides in that order, then checks
    /// ranges and that every referenced input exists.
    pub fn resolve(&self) -> Result<RunConfig> {
        let profile = self.profile.clone().unwrap_or_else(|| "desk".into());
        let mut agent = IlqConfig::profile(&profile)?;
        if let Some(name) = &self.preset {
            let p = task_preset(name).ok_or_else(|| IoError::Config(format!("unknown preset `{name}`")))?;
            agent = agent.with_preset(p);
        }
        let a = &self.agent;
        set(&mut agent.eta, a.eta);
        set(&mut agent.delta, a.delta);
        set(&mut agent.m_samples, a.m_samples);
        set(&mut agent.gamma, a.gamma);
        set(&mut agent.tau, a.tau);
        set(&mut agent.batch_size, a.batch_size);
        set(&mut agent.critic_lr, a.critic_lr);
        set(&mut agent.actor_lr, a.actor_lr);
        set(&mut agent.alpha_lr, a.alpha_lr);
        set(&mut agent.entropy_auto, a.entropy_auto);
        set(&mut agent.init_alpha, a.init_alpha);
        set(&mut agent.hidden, a.hidden.clone());
        set(&mut agent.train_steps, a.train_steps);
        set(&mut agent.eval_interval, a.eval_interval);
        set(&mut agent.eval_episodes, a.eval_episodes);
        set(&mut agent.seed, a.seed);
        if let Some(s) = &a.ablation {
            agent.ablation = Ablation::parse(s)?;
        }
        if let Some(s) = &a.imagination {
            agent.imagination = PredictMode::parse(s)?;
        }
        agent.validate()?;

        let mut pretrain = PretrainConfig::default();
        let m = &self.models;
        set(&mut pretrain.dynamics_hidden, m.dynamics_hidden.clone());
        set(&mut pretrain.dynamics.epochs, m.dynamics_epochs);
        set(&mut pretrain.dynamics.lr, m.dynamics_lr);
        set(&mut pretrain.penalty_lambda, m.penalty_lambda);
        set(&mut pretrain.behavior_hidden, m.behavior_hidden.clone());
        set(&mut pretrain.behavior.steps, m.behavior_steps);
        set(&mut pretrain.behavior.lr, m.behavior_lr);
        set(&mut pretrain.diffusion_steps, m.k_steps);
        if pretrain.diffusion_steps == 0 {
            return Err(IoError::Config("models.k_steps must be positive".into()));
        }

        let p = &self.paths;
        let data = p.data.clone().ok_or_else(|| IoError::Config("missing field `data`".into()))?;
        let out_dir = p.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
        for (field, path) in
            [("data", Some(&data)), ("dynamics", p.dynamics.as_ref()), ("behavior", p.behavior.as_ref())]
        {
            if let Some(path) = path {
                if !path.exists() {
                    return Err(IoError::Config(format!("`{field}` path {} does not exist", path.display())));
                }
            }
        }
        Ok(RunConfig {
            profile,
            data,
            dynamics: p.dynamics.clone(),
            behavior: p.behavior.clone(),
            out_dir,
            agent,
            pretrain,
        })
    }
}
