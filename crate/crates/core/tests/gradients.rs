//! Central finite differences against the hand-written reverse passes.
//! Networks use tanh hidden units so that no probe straddles a kink.

use ilq_core::agent::{actor_loss, critic_loss, CriticPair, GaussianActor};
use ilq_core::diffusion::{DiffusionBehavior, VarianceSchedule};
use ilq_core::dynamics::GaussianDynamics;
use ilq_core::nn::{Activation, Matrix, Mlp};
use ilq_core::rng::{derive, normal};

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn random(rows: usize, cols: usize, seed: u64) -> Matrix<f64> {
    let mut r = derive(seed, 0, 0);
    Matrix::from_fn(rows, cols, |_, _| normal::<f64, _>(&mut r))
}

fn tanh_net(widths: &[usize], seed: u64) -> Mlp<f64> {
    Mlp::new(widths, Activation::Tanh, Activation::Identity, &mut derive(seed, 1, 0))
}

/// Largest `|analytic - numeric| / max(|analytic|, |numeric|, 1e-6)` over all
/// coordinates; `loss(k, h)` evaluates the loss with parameter `k` shifted by `h`.
fn max_rel_error(analytic: &[f64], mut loss: impl FnMut(usize, f64) -> f64) -> f64 {
    let mut worst = 0.0f64;
    for (k, &a) in analytic.iter().enumerate() {
        let numeric = (loss(k, STEP) - loss(k, -STEP)) / (2.0 * STEP);
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(err);
    }
    worst
}

#[test]
fn critic_loss_gradient() {
    let (obs_dim, act_dim, n) = (3, 2, 7);
    let mut critics = CriticPair::<f64>::new(obs_dim, act_dim, &[6, 5], &mut derive(1, 0, 0));
    critics.online = [tanh_net(&[5, 6, 5, 1], 2), tanh_net(&[5, 6, 5, 1], 3)];
    let obs = random(n, obs_dim, 4);
    let a = random(n, act_dim, 5);
    let b = random(n, act_dim, 6);
    let y_in = random(n, 1, 7).into_vec();
    let y_ood = random(n, 1, 8).into_vec();
    let eta = 0.7;
    let base = critic_loss(&critics, &obs, &a, &y_in, &b, &y_ood, eta).unwrap();
    for j in 0..2 {
        let err = max_rel_error(&base.grads[j], |k, h| {
            let mut c = critics.clone();
            c.online[j].params_mut()[k] += h;
            critic_loss(&c, &obs, &a, &y_in, &b, &y_ood, eta).unwrap().loss
        });
        eprintln!("critic {j}: {err:e}");
        assert!(err < TOL, "critic {j}: {err}");
    }
}

#[test]
fn gaussian_nll_gradient() {
    let mut model = GaussianDynamics::<f64>::new(3, 2, &[8, 8], 0.0, &mut derive(9, 0, 0)).unwrap();
    *model.net_mut() = tanh_net(&[5, 8, 8, 8], 10);
    let inputs = random(11, 5, 11);
    let targets = random(11, 4, 12);
    let (_, grads) = model.nll_loss(&inputs, &targets).unwrap();
    let err = max_rel_error(&grads, |k, h| {
        let mut m = model.clone();
        m.net_mut().params_mut()[k] += h;
        m.nll_loss(&inputs, &targets).unwrap().0
    });
    eprintln!("nll: {err:e}");
    assert!(err < TOL, "{err}");
}

#[test]
fn diffusion_loss_gradient() {
    let mut model = DiffusionBehavior::<f64>::new(
        3,
        2,
        &[8],
        VarianceSchedule::vp(5).unwrap(),
        (-1.0, 1.0),
        &mut derive(13, 0, 0),
    )
    .unwrap();
    *model.net_mut() = tanh_net(&[2 + 3 + 8, 8, 2], 14);
    let obs = random(9, 3, 15);
    let actions = random(9, 2, 16).map(|v| v.tanh());
    let ks: Vec<usize> = (0..9).map(|i| 1 + i % 5).collect();
    let xi = random(9, 2, 17);
    let (_, grads) = model.loss_with_noise(&obs, &actions, &ks, &xi).unwrap();
    let err = max_rel_error(&grads, |k, h| {
        let mut m = model.clone();
        m.net_mut().params_mut()[k] += h;
        m.loss_with_noise(&obs, &actions, &ks, &xi).unwrap().0
    });
    eprintln!("diffusion: {err:e}");
    assert!(err < TOL, "{err}");
}

#[test]
fn actor_loss_gradient() {
    let mut critics = CriticPair::<f64>::new(3, 2, &[6], &mut derive(18, 0, 0));
    critics.online = [tanh_net(&[5, 6, 1], 19), tanh_net(&[5, 6, 1], 20)];
    let mut actor = GaussianActor::<f64>::new(3, 2, &[7], (-1.0, 2.0), &mut derive(21, 0, 0)).unwrap();
    *actor.net_mut() = tanh_net(&[3, 7, 4], 22);
    let obs = random(8, 3, 23);
    let eps = random(8, 2, 24);
    for alpha in [0.0, 0.3] {
        let base = actor_loss(&critics, &actor, &obs, eps.clone(), alpha).unwrap();
        let err = max_rel_error(&base.grads, |k, h| {
            let mut a = actor.clone();
            a.net_mut().params_mut()[k] += h;
            actor_loss(&critics, &a, &obs, eps.clone(), alpha).unwrap().loss
        });
        eprintln!("actor alpha={alpha}: {err:e}");
        assert!(err < TOL, "alpha {alpha}: {err}");
    }
}
