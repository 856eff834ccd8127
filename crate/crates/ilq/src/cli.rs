//! Command-line surface. [`run`] maps every failure to one `error kind=...`
//! line on stderr; clap handles usage errors (exit 2).

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ilq_core::agent::{
    pretrain_behavior, pretrain_dynamics, Control, EvalSettings, IlqAgent, PretrainConfig, WorldModels,
};
use ilq_core::diffusion::DiffusionBehavior;
use ilq_core::dynamics::GaussianDynamics;
use ilq_core::envs::{
    generate_dataset, reference_returns, sparse_action_dataset, BehaviorPolicyLevel, EnvSpec,
    TransitionDataset,
};
use ilq_core::tabular::SuiteSpec;

use crate::checkpoint::{read_snapshot, write_snapshot};
use crate::config::RunConfigFile;
use crate::error::{IoError, Result};
use crate::ilqd::{read_dataset, write_dataset};
use crate::jsonl::{import_jsonl, require_dims};
use crate::metrics::MetricsWriter;
use crate::tabular_report::{audit_row, write_report};

#[derive(Debug, Parser)]
#[command(name = "ilq", version, about = "Imagination-limited Q-learning at desk scale")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Roll out a behavior policy and write an ILQD dataset.
    GenData(GenData),
    /// Convert a JSON-lines transition file to ILQD.
    ImportJsonl(ImportJsonl),
    /// Fit the Gaussian dynamics model.
    TrainDynamics(TrainDynamics),
    /// Fit the diffusion behavior model.
    TrainBehavior(TrainBehavior),
    /// Train the agent, writing metrics.csv and checkpoints to --out-dir.
    Train(Train),
    /// Evaluate a saved agent.
    Eval(Eval),
    /// Audit the tabular operators on random MDPs.
    VerifyTabular(VerifyTabular),
}

#[derive(Debug, Args)]
pub struct GenData {
    #[arg(long, value_parser = ["gridworld", "pointmass"])]
    pub env: String,
    /// random, medium, medium-replay, medium-expert, expert or sparse (pointmass only)
    #[arg(long)]
    pub level: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ImportJsonl {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Environment tag recorded in the header.
    #[arg(long)]
    pub env: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainDynamics {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub penalty_lambda: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainBehavior {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub k_steps: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Train {
    /// TOML run configuration; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub dynamics: Option<PathBuf>,
    #[arg(long)]
    pub behavior: Option<PathBuf>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = ["desk", "paper"])]
    pub profile: Option<String>,
    #[arg(long, value_parser = ["none", "no-imagination", "no-limitation"])]
    pub ablate: Option<String>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Eval {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_parser = ["gridworld", "pointmass"])]
    pub env: String,
    #[arg(long, default_value_t = 10)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct VerifyTabular {
    #[arg(long, default_value_t = 100)]
    pub n_mdps: usize,
    #[arg(long, default_value_t = 20)]
    pub max_states: usize,
    #[arg(long, default_value_t = 8)]
    pub max_actions: usize,
    /// Comma-separated discounts, cycled over instances.
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.9, 0.99])]
    pub gamma: Vec<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub delta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub report: PathBuf,
}

/// Dataset from ILQD, or JSON lines when the extension is `.jsonl`.
pub fn load_dataset(path: &Path) -> Result<TransitionDataset> {
    let data = if path.extension().is_some_and(|e| e == "jsonl") {
        import_jsonl(path)?
    } else {
        read_dataset(path)?
    };
    require_dims(&data)?;
    Ok(data)
}

fn env_of(data: &TransitionDataset) -> Result<EnvSpec> {
    EnvSpec::by_tag(&data.meta.env_tag).map_err(|_| {
        IoError::Config(format!(
            "dataset environment `{}` is unknown; action bounds and evaluation need one",
            data.meta.env_tag
        ))
    })
}

fn gen_data(a: &GenData) -> Result<()> {
    let spec = EnvSpec::by_tag(&a.env)?;
    let data = if a.level == "sparse" {
        match &spec {
            EnvSpec::PointMass(pm) => sparse_action_dataset(pm, a.n, a.seed)?,
            _ => return Err(IoError::Config("level `sparse` exists for pointmass only".into())),
        }
    } else {
        generate_dataset(&spec, &BehaviorPolicyLevel::parse(&a.level, &spec)?, a.n, a.seed)?
    };
    write_dataset(&data, &a.out)?;
    println!("wrote n={} env={} level={} out={}", data.len(), a.env, a.level, a.out.display());
    Ok(())
}

fn import(a: &ImportJsonl) -> Result<()> {
    let mut data = import_jsonl(&a.input)?;
    require_dims(&data)?;
    if let Some(env) = &a.env {
        data.meta.env_tag = env.clone();
    }
    write_dataset(&data, &a.out)?;
    println!("wrote n={} out={}", data.len(), a.out.display());
    Ok(())
}

fn train_dynamics_cmd(a: &TrainDynamics) -> Result<()> {
    let data = load_dataset(&a.data)?;
    let mut cfg = PretrainConfig::default();
    if let Some(v) = a.epochs {
        cfg.dynamics.epochs = v;
    }
    if let Some(v) = a.lr {
        cfg.dynamics.lr = v;
    }
    if let Some(v) = a.penalty_lambda {
        cfg.penalty_lambda = v;
    }
    let model = pretrain_dynamics::<f32>(&data, &cfg, a.seed)?;
    write_snapshot(&model.export(), &a.out)?;
    println!("wrote dynamics out={}", a.out.display());
    Ok(())
}

fn train_behavior_cmd(a: &TrainBehavior) -> Result<()> {
    let data = load_dataset(&a.data)?;
    let spec = env_of(&data)?;
    let mut cfg = PretrainConfig::default();
    if let Some(v) = a.steps {
        cfg.behavior.steps = v;
    }
    if let Some(v) = a.k_steps {
        cfg.diffusion_steps = v;
    }
    if let Some(v) = a.lr {
        cfg.behavior.lr = v;
    }
    let model = pretrain_behavior::<f32>(&data, spec.action_bounds(), &cfg, a.seed)?;
    write_snapshot(&model.export(), &a.out)?;
    println!("wrote behavior out={}", a.out.display());
    Ok(())
}

/// Merges the optional TOML file with command-line overrides.
pub fn train_config(a: &Train) -> Result<crate::config::RunConfig> {
    let mut file = match &a.config {
        Some(p) => RunConfigFile::load(p)?,
        None => RunConfigFile::default(),
    };
    let paths = &mut file.paths;
    for (slot, flag) in [
        (&mut paths.data, &a.data),
        (&mut paths.dynamics, &a.dynamics),
        (&mut paths.behavior, &a.behavior),
        (&mut paths.out_dir, &a.out_dir),
    ] {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    let agent = &mut file.agent;
    agent.eta = a.eta.or(agent.eta);
    agent.delta = a.delta.or(agent.delta);
    agent.m_samples = a.m.or(agent.m_samples);
    agent.train_steps = a.steps.or(agent.train_steps);
    agent.seed = a.seed.or(agent.seed);
    if a.ablate.is_some() {
        agent.ablation.clone_from(&a.ablate);
    }
    if a.profile.is_some() {
        file.profile.clone_from(&a.profile);
    }
    file.resolve()
}

fn train(a: &Train) -> Result<()> {
    let run = train_config(a)?;
    let data = load_dataset(&run.data)?;
    let spec = env_of(&data)?;
    std::fs::create_dir_all(&run.out_dir).map_err(|e| IoError::io(&run.out_dir, e))?;
    let seed = run.agent.seed;
    let started = Instant::now();

    let dynamics: GaussianDynamics<f32> = match &run.dynamics {
        Some(p) => GaussianDynamics::import(&read_snapshot(p)?)?,
        None => {
            let m = pretrain_dynamics(&data, &run.pretrain, seed)?;
            write_snapshot(&m.export(), run.out_dir.join("dynamics.ilqc"))?;
            m
        }
    };
    let behavior: DiffusionBehavior<f32> = match &run.behavior {
        Some(p) => DiffusionBehavior::import(&read_snapshot(p)?)?,
        None => {
            let m = pretrain_behavior(&data, spec.action_bounds(), &run.pretrain, seed)?;
            write_snapshot(&m.export(), run.out_dir.join("behavior.ilqc"))?;
            m
        }
    };

    let mut agent = IlqAgent::<f32>::for_dataset(run.agent.clone(), &data, spec.action_bounds())?;
    let references = reference_returns(&spec, run.agent.eval_episodes, seed)?;
    let settings =
        EvalSettings { env: &spec, episodes: run.agent.eval_episodes, seed, references: Some(references) };
    let mut metrics = MetricsWriter::create(run.out_dir.join("metrics.csv"))?;
    let mut write_err = None;
    let log = agent.train(&data, &WorldModels::new(&dynamics, &behavior), Some(&settings), |m, eval| {
        if let Some(e) = eval {
            if let Err(err) = metrics.append(m, e) {
                write_err = Some(err);
                return Control::Stop;
            }
        }
        Control::Continue
    })?;
    if let Some(err) = write_err {
        return Err(err);
    }
    write_snapshot(&agent.export(), run.out_dir.join("agent.ilqc"))?;
    let last = log.evals.last();
    println!(
        "steps={} evals={} final_return={} final_score={} max_q={} seconds={:.1} out_dir={}",
        log.steps_run,
        metrics.rows(),
        last.map_or(f64::NAN, |e| e.mean_return),
        last.and_then(|e| e.normalized_score).unwrap_or(f64::NAN),
        log.max_q,
        started.elapsed().as_secs_f64(),
        run.out_dir.display()
    );
    Ok(())
}

fn eval(a: &Eval) -> Result<()> {
    let agent = IlqAgent::<f32>::import(&read_snapshot(&a.checkpoint)?)?;
    let spec = EnvSpec::by_tag(&a.env)?;
    let references = reference_returns(&spec, a.episodes, a.seed)?;
    let rec = agent.evaluate(&EvalSettings {
        env: &spec,
        episodes: a.episodes,
        seed: a.seed,
        references: Some(references),
    })?;
    println!(
        "mean_return={} std_return={} normalized_score={} episodes={}",
        rec.mean_return,
        rec.std_return,
        rec.normalized_score.unwrap_or(f64::NAN),
        a.episodes
    );
    Ok(())
}

fn verify_tabular(a: &VerifyTabular) -> Result<()> {
    let spec = SuiteSpec {
        max_states: a.max_states,
        max_actions: a.max_actions,
        gammas: a.gamma.clone(),
        ..SuiteSpec::default()
    };
    let rows = (0..a.n_mdps).map(|i| audit_row(&spec, a.seed, i, a.delta)).collect::<Result<Vec<_>>>()?;
    write_report(&rows, &a.report)?;
    let failed = rows.iter().filter(|r| !r.passed()).count();
    println!("mdps={} failed={} report={}", rows.len(), failed, a.report.display());
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::GenData(a) => gen_data(a),
        Command::ImportJsonl(a) => import(a),
        Command::TrainDynamics(a) => train_dynamics_cmd(a),
        Command::TrainBehavior(a) => train_behavior_cmd(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::VerifyTabular(a) => verify_tabular(a),
    }
}

/// Full dispatch: parse, execute, report. Returns the process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error kind={}: {msg}", e.kind());
            1
        }
    }
}
