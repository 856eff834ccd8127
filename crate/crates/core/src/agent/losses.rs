use alloc::vec::Vec;

use super::networks::{critic_input, ActorSample, CriticPair, GaussianActor};
use crate::error::{ensure_dim, Result};
use crate::nn::Matrix;
use crate::real::Real;

#[derive(Debug, Clone)]
pub struct CriticLoss<T> {
    /// `eta * mse_in + (1 - eta) * mse_ood`, summed over both critics.
    pub loss: T,
    pub mse_in: [T; 2],
    pub mse_ood: [T; 2],
    pub grads: [Vec<T>; 2],
    pub q_in: [Vec<T>; 2],
    pub q_ood: [Vec<T>; 2],
}

/// Residual pass for one row block: fills `upstream` with
/// `weight * 2 (q - y) / n` and returns the mean squared error.
fn mse_upstream<T: Real>(q: &[T], y: &[T], weight: T, upstream: &mut Matrix<T>) -> T {
    let n = T::of(q.len().max(1) as f64);
    let mut total = T::zero();
    for ((u, &qv), &yv) in upstream.as_mut_slice().iter_mut().zip(q).zip(y) {
        let e = qv - yv;
        total += e * e;
        *u = weight * T::of(2.0) * e / n;
    }
    total / n
}

/// Weighted in-sample/OOD regression for both online critics. Targets are
/// constants; only online parameters receive gradient. With `eta == 1` the
/// OOD rows are evaluated for diagnostics but never backpropagated.
pub fn critic_loss<T: Real>(
    critics: &CriticPair<T>,
    obs_norm: &Matrix<T>,
    actions: &Matrix<T>,
    y_in: &[T],
    ood_actions: &Matrix<T>,
    y_ood: &[T],
    eta: T,
) -> Result<CriticLoss<T>> {
    let n = obs_norm.rows();
    ensure_dim("in-sample targets", n, y_in.len())?;
    ensure_dim("OOD targets", n, y_ood.len())?;
    let input_in = critic_input(obs_norm, actions)?;
    let input_ood = critic_input(obs_norm, ood_actions)?;
    let w_ood = T::one() - eta;
    let mut out = CriticLoss {
        loss: T::zero(),
        mse_in: [T::zero(); 2],
        mse_ood: [T::zero(); 2],
        grads: [Vec::new(), Vec::new()],
        q_in: [Vec::new(), Vec::new()],
        q_ood: [Vec::new(), Vec::new()],
    };
    for j in 0..2 {
        let net = &critics.online[j];
        let mut grads = net.zero_grads();
        let mut up = Matrix::zeros(n, 1);

        let cache = net.forward_cached(&input_in)?;
        let q_in = cache.output().as_slice().to_vec();
        out.mse_in[j] = mse_upstream(&q_in, y_in, eta, &mut up);
        net.backward_into(&cache, &up, &mut grads)?;

        let cache = net.forward_cached(&input_ood)?;
        let q_ood = cache.output().as_slice().to_vec();
        out.mse_ood[j] = mse_upstream(&q_ood, y_ood, w_ood, &mut up);
        if w_ood != T::zero() {
            net.backward_into(&cache, &up, &mut grads)?;
        }

        out.loss += eta * out.mse_in[j] + w_ood * out.mse_ood[j];
        out.grads[j] = grads;
        out.q_in[j] = q_in;
        out.q_ood[j] = q_ood;
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ActorLoss<T> {
    /// `mean(alpha * log pi(a|s) - min_j Q_j(s, a))`.
    pub loss: T,
    pub grads: Vec<T>,
    pub mean_log_prob: T,
}

/// Reparameterized policy loss against the online critics. The gradient
/// reaches the actor through the action; critic parameters are untouched.
pub fn actor_loss<T: Real>(
    critics: &CriticPair<T>,
    actor: &GaussianActor<T>,
    obs_norm: &Matrix<T>,
    eps: Matrix<T>,
    alpha: T,
) -> Result<ActorLoss<T>> {
    let sample: ActorSample<T> = actor.sample_with_noise(obs_norm, eps)?;
    let n = obs_norm.rows();
    let d = actor.act_dim();
    let inv_n = T::one() / T::of(n.max(1) as f64);
    let input = critic_input(obs_norm, &sample.actions)?;
    let caches = [critics.online[0].forward_cached(&input)?, critics.online[1].forward_cached(&input)?];
    let q0 = caches[0].output().as_slice();
    let q1 = caches[1].output().as_slice();
    // ties go to the first critic
    let pick: Vec<usize> = q0.iter().zip(q1).map(|(a, b)| usize::from(b < a)).collect();

    let mut loss = T::zero();
    let mut lp_sum = T::zero();
    for i in 0..n {
        let q = if pick[i] == 0 { q0[i] } else { q1[i] };
        loss += alpha * sample.log_prob[i] - q;
        lp_sum += sample.log_prob[i];
    }

    let obs_cols = obs_norm.cols();
    let mut grad_a = Matrix::zeros(n, d);
    for j in 0..2 {
        if !pick.contains(&j) {
            continue;
        }
        let up = Matrix::from_fn(n, 1, |i, _| if pick[i] == j { -inv_n } else { T::zero() });
        let g = critics.online[j].input_gradient(&caches[j], &up)?;
        for i in 0..n {
            for (dst, &src) in grad_a.row_mut(i).iter_mut().zip(&g.row(i)[obs_cols..]) {
                *dst += src;
            }
        }
    }
    let grad_lp = alloc::vec![alpha * inv_n; n];
    let grads = actor.backward(&sample, &grad_a, &grad_lp)?;
    Ok(ActorLoss { loss: loss * inv_n, grads, mean_log_prob: lp_sum * inv_n })
}
