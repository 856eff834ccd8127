use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::mdp::{SupportMask, TabularMdp};
use crate::error::{ensure_dim, Error, Result};

/// One observed tabular transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
}

/// Empirical kernel `P_hat` and reward `r_hat` with their measured errors.
///
/// Pairs never observed fall back to a uniform successor row and zero reward.
/// The two error terms are measured against the true MDP over supported pairs
/// only: `zeta_r = max |r_hat - r|`, `zeta_p = max ||P_hat - P||_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalModel {
    n_states: usize,
    n_actions: usize,
    p_hat: Vec<f64>,
    r_hat: Vec<f64>,
    counts: Vec<u64>,
    zeta_r: f64,
    zeta_p: f64,
}

impl EmpiricalModel {
    /// The true kernel and reward. Carries no visit counts.
    pub fn exact(mdp: &TabularMdp, support: &SupportMask) -> Result<Self> {
        Self::from_parts(
            mdp,
            support,
            mdp.transitions().to_vec(),
            mdp.rewards().to_vec(),
            vec![0; mdp.n_states() * mdp.n_actions()],
        )
    }

    /// Maximum-likelihood estimate from observed transitions.
    pub fn from_transitions(mdp: &TabularMdp, support: &SupportMask, data: &[Transition]) -> Result<Self> {
        let (ns, na) = (mdp.n_states(), mdp.n_actions());
        let mut counts = vec![0u64; ns * na];
        let mut next = vec![0u64; ns * na * ns];
        let mut reward_sum = vec![0.0; ns * na];
        for (i, t) in data.iter().enumerate() {
            if t.state >= ns || t.next_state >= ns || t.action >= na || !t.reward.is_finite() {
                return Err(Error::InvalidConfig(format!("transition {i} is outside the MDP")));
            }
            let sa = t.state * na + t.action;
            counts[sa] += 1;
            next[sa * ns + t.next_state] += 1;
            reward_sum[sa] += t.reward;
        }
        let mut p_hat = vec![0.0; ns * na * ns];
        let mut r_hat = vec![0.0; ns * na];
        for sa in 0..ns * na {
            let row = &mut p_hat[sa * ns..(sa + 1) * ns];
            if counts[sa] == 0 {
                row.fill(1.0 / ns as f64);
            } else {
                let n = counts[sa] as f64;
                for (p, &c) in row.iter_mut().zip(&next[sa * ns..(sa + 1) * ns]) {
                    *p = c as f64 / n;
                }
                r_hat[sa] = reward_sum[sa] / n;
            }
        }
        Self::from_parts(mdp, support, p_hat, r_hat, counts)
    }

    /// Arbitrary estimates; rows must be distributions.
    pub fn from_parts(
        mdp: &TabularMdp,
        support: &SupportMask,
        p_hat: Vec<f64>,
        r_hat: Vec<f64>,
        counts: Vec<u64>,
    ) -> Result<Self> {
        let (ns, na) = (mdp.n_states(), mdp.n_actions());
        ensure_dim("support states", ns, support.n_states())?;
        ensure_dim("support actions", na, support.n_actions())?;
        ensure_dim("p_hat", ns * na * ns, p_hat.len())?;
        ensure_dim("r_hat", ns * na, r_hat.len())?;
        ensure_dim("counts", ns * na, counts.len())?;
        for (sa, row) in p_hat.chunks(ns).enumerate() {
            let total: f64 = row.iter().sum();
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidDistribution(format!("p_hat[{}][{}]", sa / na, sa % na)));
            }
        }
        if r_hat.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite("r_hat".into()));
        }
        let mut zeta_r: f64 = 0.0;
        let mut zeta_p: f64 = 0.0;
        for s in 0..ns {
            for a in 0..na {
                if !support.contains(s, a) {
                    continue;
                }
                let sa = s * na + a;
                zeta_r = zeta_r.max((r_hat[sa] - mdp.reward(s, a)).abs());
                let l1: f64 = p_hat[sa * ns..(sa + 1) * ns]
                    .iter()
                    .zip(mdp.transition_row(s, a))
                    .map(|(p, q)| (p - q).abs())
                    .sum();
                zeta_p = zeta_p.max(l1);
            }
        }
        Ok(Self { n_states: ns, n_actions: na, p_hat, r_hat, counts, zeta_r, zeta_p })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.p_hat[start..start + self.n_states]
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.r_hat[s * self.n_actions + a]
    }

    pub fn count(&self, s: usize, a: usize) -> u64 {
        self.counts[s * self.n_actions + a]
    }

    /// Measured `zeta_r / sqrt(D)`.
    pub fn zeta_r(&self) -> f64 {
        self.zeta_r
    }

    /// Measured `zeta_P / sqrt(D)`.
    pub fn zeta_p(&self) -> f64 {
        self.zeta_p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> (TabularMdp, SupportMask) {
        // s0 --a0--> s1 with prob 0.5, else stays; a1 always goes to s1.
        let p = vec![0.5, 0.5, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let r = vec![0.2, -0.4, 1.0, 1.0];
        let mdp = TabularMdp::with_defaults(2, 2, p, r, 1.0, 0.9).unwrap();
        let support = SupportMask::new(2, 2, vec![true, false, true, true]).unwrap();
        (mdp, support)
    }

    #[test]
    fn exact_model_has_zero_error() {
        let (mdp, support) = two_state();
        let m = EmpiricalModel::exact(&mdp, &support).unwrap();
        assert_eq!(m.zeta_r(), 0.0);
        assert_eq!(m.zeta_p(), 0.0);
    }

    #[test]
    fn counts_and_priors() {
        let (mdp, support) = two_state();
        let data = [
            Transition { state: 0, action: 0, reward: 0.2, next_state: 0 },
            Transition { state: 0, action: 0, reward: 0.2, next_state: 0 },
            Transition { state: 0, action: 0, reward: 0.2, next_state: 1 },
            Transition { state: 1, action: 0, reward: 1.0, next_state: 1 },
        ];
        let m = EmpiricalModel::from_transitions(&mdp, &support, &data).unwrap();
        assert_eq!(m.count(0, 0), 3);
        assert!((m.transition_row(0, 0)[0] - 2.0 / 3.0).abs() < 1e-15);
        // unseen pairs: uniform row, zero reward
        assert_eq!(m.transition_row(0, 1), &[0.5, 0.5]);
        assert_eq!(m.reward(0, 1), 0.0);
        // supported (1,1) is unseen, so its prior row enters zeta_p: |0.5-0| + |0.5-1| = 1
        assert!((m.zeta_p() - 1.0).abs() < 1e-15);
        assert!((m.zeta_r() - 1.0).abs() < 1e-15);
        assert!(m.zeta_r() >= 0.0 && m.zeta_p() >= 0.0);
    }
}
