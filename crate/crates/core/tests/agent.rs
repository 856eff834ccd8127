use std::sync::OnceLock;

use ilq_core::agent::{
    actor_loss, critic_loss, pretrain_models, Ablation, Control, CriticPair, IlqAgent, IlqConfig,
    PretrainConfig, StepMetrics, WorldModels,
};
use ilq_core::diffusion::{BehaviorTrainConfig, DiffusionBehavior};
use ilq_core::dynamics::{DynamicsTrainConfig, GaussianDynamics};
use ilq_core::envs::{generate_dataset, BehaviorPolicyLevel, EnvSpec, PointMassSpec, TransitionDataset};
use ilq_core::nn::{Activation, AdamState, Matrix, Mlp};
use ilq_core::rng::{derive, normal};
use ilq_core::Error;

struct Fixture {
    spec: EnvSpec,
    data: TransitionDataset,
    dynamics: GaussianDynamics<f32>,
    behavior: DiffusionBehavior<f32>,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let spec = EnvSpec::PointMass(PointMassSpec::default());
        let level = BehaviorPolicyLevel::parse("medium", &spec).unwrap();
        let data = generate_dataset(&spec, &level, 2_000, 1).unwrap();
        let cfg = PretrainConfig {
            dynamics_hidden: vec![32, 32],
            dynamics: DynamicsTrainConfig { epochs: 5, ..DynamicsTrainConfig::default() },
            behavior_hidden: vec![32, 32],
            behavior: BehaviorTrainConfig { steps: 300, batch_size: 128, lr: 1e-3 },
            ..PretrainConfig::default()
        };
        let (dynamics, behavior) = pretrain_models(&data, spec.action_bounds(), &cfg, 2).unwrap();
        Fixture { spec, data, dynamics, behavior }
    })
}

fn small_config() -> IlqConfig {
    IlqConfig {
        hidden: vec![32, 32],
        batch_size: 64,
        m_samples: 4,
        train_steps: 40,
        eval_interval: 20,
        eval_episodes: 2,
        seed: 3,
        ..IlqConfig::desk()
    }
}

fn agent(cfg: IlqConfig) -> IlqAgent<f32> {
    let f = fixture();
    IlqAgent::for_dataset(cfg, &f.data, f.spec.action_bounds()).unwrap()
}

fn models() -> WorldModels<'static, f32> {
    let f = fixture();
    WorldModels::new(&f.dynamics, &f.behavior)
}

fn run(cfg: IlqConfig) -> (IlqAgent<f32>, Vec<StepMetrics>) {
    let mut a = agent(cfg);
    let mut trace = Vec::new();
    a.train(&fixture().data, &models(), None, |m, _| {
        trace.push(m.clone());
        Control::Continue
    })
    .unwrap();
    (a, trace)
}

#[test]
fn same_seed_same_trajectory() {
    let cfg = IlqConfig { train_steps: 100, ..small_config() };
    let (a, ta) = run(cfg.clone());
    let (b, tb) = run(cfg.clone());
    assert_eq!(ta, tb);
    assert_eq!(a, b);
    let (_, tc) = run(IlqConfig { seed: 4, ..cfg });
    assert_ne!(ta, tc);
}

#[test]
fn eta_one_ignores_every_ood_setting() {
    let base = IlqConfig { eta: 1.0, train_steps: 30, ..small_config() };
    let (reference, _) = run(base.clone());
    for cfg in [
        IlqConfig { delta: 5.0, ..base.clone() },
        IlqConfig { m_samples: 9, ..base.clone() },
        IlqConfig { ablation: Ablation::NoLimitation, ..base.clone() },
        IlqConfig { ablation: Ablation::NoImagination, delta: -3.0, ..base.clone() },
    ] {
        let (a, _) = run(cfg);
        assert_eq!(a.critics(), reference.critics());
        assert_eq!(a.actor(), reference.actor());
    }
}

#[test]
fn ood_targets_respect_both_bounds_every_step() {
    for delta in [0.0, -0.5, 0.5] {
        let (_, trace) = run(IlqConfig { delta, ..small_config() });
        for m in &trace {
            assert!(m.bounds_ok);
            assert!((m.frac_img + m.frac_lmt - 1.0).abs() < 1e-12);
            assert!(m.ood_base_mean <= m.y_lmt_mean && m.ood_base_mean <= m.y_img_mean);
        }
    }
}

#[test]
fn zero_steps_leaves_agent_untouched() {
    let cfg = IlqConfig { train_steps: 0, ..small_config() };
    let mut a = agent(cfg.clone());
    let log = a.train(&fixture().data, &models(), None, |_, _| panic!("no step expected")).unwrap();
    assert_eq!(log.steps_run, 0);
    assert!(log.evals.is_empty() && log.last.is_none());
    assert_eq!(a, agent(cfg));
}

#[test]
fn evaluations_follow_the_interval_and_observer_can_stop() {
    let f = fixture();
    let settings = ilq_core::agent::EvalSettings {
        env: &f.spec,
        episodes: 2,
        seed: 1,
        references: Some((-120.0, -8.0)),
    };
    let mut a = agent(small_config());
    let log = a.train(&f.data, &models(), Some(&settings), |_, _| Control::Continue).unwrap();
    assert_eq!(log.evals.iter().map(|e| e.step).collect::<Vec<_>>(), vec![20, 40]);
    assert!(log.evals.iter().all(|e| e.normalized_score.is_some()));

    let mut b = agent(small_config());
    let log = b
        .train(&f.data, &models(), None, |m, _| if m.step == 7 { Control::Stop } else { Control::Continue })
        .unwrap();
    assert!(log.stopped_early);
    assert_eq!((log.steps_run, b.steps_done()), (7, 7));
}

#[test]
fn missing_or_untrained_models_are_configuration_errors() {
    let f = fixture();
    let untrained = DiffusionBehavior::<f32>::new(
        4,
        2,
        &[8],
        ilq_core::diffusion::VarianceSchedule::vp(5).unwrap(),
        (-1.0, 1.0),
        &mut derive(0, 0, 0),
    )
    .unwrap();
    let bad = WorldModels::new(&f.dynamics, &untrained);
    let mut a = agent(small_config());
    assert!(matches!(a.train(&f.data, &bad, None, |_, _| Control::Continue), Err(Error::InvalidConfig(_))));

    // the limitation-only ablation never reads the dynamics model
    let only_behavior = WorldModels { dynamics: None, behavior: Some(&f.behavior) };
    let mut b = agent(IlqConfig { ablation: Ablation::NoImagination, train_steps: 3, ..small_config() });
    b.train(&f.data, &only_behavior, None, |_, _| Control::Continue).unwrap();
    let mut c = agent(small_config());
    assert!(matches!(
        c.train(&f.data, &only_behavior, None, |_, _| Control::Continue),
        Err(Error::InvalidConfig(_))
    ));
}

#[test]
fn non_finite_loss_aborts_without_mutation() {
    let mut a = agent(small_config());
    let last = a.critics().online[0].num_params() - 1;
    a.critics_mut().online[0].params_mut()[last] = f32::NAN;
    let before = a.clone();
    let err = a.train_step(&fixture().data, &models()).unwrap_err();
    assert!(matches!(err, Error::TrainingAborted { step: 1, .. }), "{err}");
    assert_eq!(a.critics().online[1], before.critics().online[1]);
    assert_eq!(a.actor(), before.actor());
    assert_eq!(a.steps_done(), 0);
}

#[test]
fn fixed_temperature_stays_constant() {
    let (a, trace) = run(IlqConfig { entropy_auto: false, init_alpha: 0.2, ..small_config() });
    assert!(trace.iter().all(|m| m.alpha == 0.2f32 as f64));
    assert_eq!(a.alpha(), 0.2);
}

#[test]
fn snapshot_round_trip() {
    let (a, _) = run(small_config());
    let restored = IlqAgent::<f32>::import(&a.export()).unwrap();
    assert_eq!(restored.critics(), a.critics());
    assert_eq!(restored.actor(), a.actor());
    assert_eq!(restored.obs_norm(), a.obs_norm());
    assert_eq!(restored.config(), a.config());
    assert_eq!(restored.alpha(), a.alpha());
    assert_eq!(restored.steps_done(), a.steps_done());
    assert_eq!(restored.export(), a.export());
}

#[test]
fn target_side_carries_no_gradient() {
    let critics = CriticPair::<f64>::new(3, 2, &[8], &mut derive(5, 0, 0));
    let mut r = derive(6, 0, 0);
    let obs = Matrix::from_fn(10, 3, |_, _| normal::<f64, _>(&mut r));
    let a = Matrix::from_fn(10, 2, |_, _| normal::<f64, _>(&mut r));
    let b = Matrix::from_fn(10, 2, |_, _| normal::<f64, _>(&mut r));
    let y: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
    let base = critic_loss(&critics, &obs, &a, &y, &b, &y, 0.8).unwrap();
    let mut moved = critics.clone();
    for net in moved.target.iter_mut() {
        for p in net.params_mut() {
            *p += 0.5;
        }
    }
    let again = critic_loss(&moved, &obs, &a, &y, &b, &y, 0.8).unwrap();
    assert_eq!(base.grads, again.grads);
    assert_eq!(base.loss, again.loss);
}

#[test]
fn actor_follows_a_linear_critic() {
    // Q(s, a) = 2 * a_0 for both critics
    let mut critics = CriticPair::<f64>::new(3, 2, &[], &mut derive(7, 0, 0));
    for net in critics.online.iter_mut() {
        let mut w = vec![0.0; net.num_params()];
        w[3] = 2.0;
        *net = Mlp::from_params(&[5, 1], vec![Activation::Identity], w).unwrap();
    }
    let mut actor =
        ilq_core::agent::GaussianActor::<f64>::new(3, 2, &[16], (-1.0, 1.0), &mut derive(8, 0, 0)).unwrap();
    let mut opt = AdamState::new(actor.net().num_params(), 1e-3);
    let mut r = derive(9, 0, 0);
    let obs = Matrix::from_fn(64, 3, |_, _| normal::<f64, _>(&mut r));
    let mean0 = |a: &ilq_core::agent::GaussianActor<f64>| {
        let m = a.mean_action(&obs).unwrap();
        (0..64).map(|i| m.get(i, 0)).sum::<f64>() / 64.0
    };
    let mean1 = |a: &ilq_core::agent::GaussianActor<f64>| {
        let m = a.mean_action(&obs).unwrap();
        (0..64).map(|i| m.get(i, 1)).sum::<f64>() / 64.0
    };
    let (start0, start1) = (mean0(&actor), mean1(&actor));
    for step in 0..100 {
        let mut er = derive(10, 0, step);
        let eps = Matrix::from_fn(64, 2, |_, _| normal::<f64, _>(&mut er));
        let l = actor_loss(&critics, &actor, &obs, eps, 0.05).unwrap();
        opt.step(actor.net_mut().params_mut(), &l.grads).unwrap();
    }
    let (end0, end1) = (mean0(&actor), mean1(&actor));
    eprintln!("dim0 {start0} -> {end0}, dim1 {start1} -> {end1}");
    assert!(end0 > start0 + 0.1);
    assert!((end1 - start1).abs() < (end0 - start0));
}
