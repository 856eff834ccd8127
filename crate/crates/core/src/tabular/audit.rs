//! Numerical audits of the operator theory: measured Lipschitz and policy
//! divergence terms, value-gap bounds, and contraction checks.

use alloc::vec::Vec;

use super::mdp::{QTable, SupportMask, TabularMdp};
use super::model::EmpiricalModel;
use super::operators::{ilb_backup, imagination_values, value_iterate, Backup};
use crate::error::{ensure_dim, Error, Result};

/// Tolerance used for fixed points inside audits. Much tighter than the
/// default so that degenerate instances measure gaps at rounding level.
pub const AUDIT_TOL: f64 = 1e-12;
pub const AUDIT_MAX_ITER: usize = 2_000_000;
/// Slack allowed when comparing a measured gap with its bound.
pub const BOUND_SLACK: f64 = 1e-9;

fn inf_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

/// Reward Lipschitz constant with respect to the action embedding (sup norm).
pub fn lipschitz_constant(mdp: &TabularMdp) -> Result<f64> {
    let na = mdp.n_actions();
    let mut ell: f64 = 0.0;
    for a1 in 0..na {
        for a2 in a1 + 1..na {
            let dist = inf_distance(mdp.embedding(a1), mdp.embedding(a2));
            if dist == 0.0 {
                return Err(Error::InvalidEmbedding { first: a1, second: a2 });
            }
            for s in 0..mdp.n_states() {
                ell = ell.max((mdp.reward(s, a1) - mdp.reward(s, a2)).abs() / dist);
            }
        }
    }
    Ok(ell)
}

/// `(eps_pi, eps_P)` for two deterministic policies.
///
/// `eps_pi = max_s ||embed(pi(s)) - embed(beta(s))||_inf` and `eps_P` is the
/// max absolute row sum of `P^pi - P^beta`.
pub fn policy_divergences(mdp: &TabularMdp, pi: &[usize], beta: &[usize]) -> Result<(f64, f64)> {
    ensure_dim("pi map", mdp.n_states(), pi.len())?;
    ensure_dim("beta map", mdp.n_states(), beta.len())?;
    for &a in pi.iter().chain(beta) {
        if a >= mdp.n_actions() {
            return Err(Error::Dimension {
                context: "policy action index",
                expected: mdp.n_actions(),
                found: a,
            });
        }
    }
    let mut eps_pi: f64 = 0.0;
    let mut eps_p: f64 = 0.0;
    for s in 0..mdp.n_states() {
        eps_pi = eps_pi.max(inf_distance(mdp.embedding(pi[s]), mdp.embedding(beta[s])));
        let row_sum: f64 = mdp
            .transition_row(s, pi[s])
            .iter()
            .zip(mdp.transition_row(s, beta[s]))
            .map(|(p, q)| (p - q).abs())
            .sum();
        eps_p = eps_p.max(row_sum);
    }
    Ok((eps_pi, eps_p))
}

/// Measured left-hand sides and computed right-hand sides of the three gap bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    /// `max_s |Q*(s, pi(s)) - Q*(s, beta(s))|`.
    pub lhs_thm2: f64,
    pub rhs_thm2: f64,
    /// `max_{(s,a) unsupported} |y_img^{Q*}(s, a) - Q*(s, a)|`.
    pub lhs_thm3: f64,
    pub rhs_thm3: f64,
    /// `||Q_ILB - Q*||_inf`.
    pub lhs_thm4: f64,
    pub rhs_thm4: f64,
    pub epsilon_pi: f64,
    pub epsilon_p: f64,
    pub lipschitz_l: f64,
    pub zeta_r: f64,
    pub zeta_p: f64,
    pub delta: f64,
    pub satisfied: [bool; 3],
}

impl BoundReport {
    pub fn all_satisfied(&self) -> bool {
        self.satisfied.iter().all(|&b| b)
    }
}

/// Fixed points and greedy maps an audit is built from.
#[derive(Debug, Clone)]
pub struct AuditFixedPoints {
    /// Fixed point of the support-constrained optimality backup.
    pub q_support: QTable,
    /// Fixed point of the imagination-limited backup.
    pub q_ilb: QTable,
    /// Unrestricted greedy map w.r.t. `q_support`.
    pub pi: Vec<usize>,
    /// Support-restricted greedy map w.r.t. `q_support`.
    pub beta: Vec<usize>,
}

pub fn audit_fixed_points(
    mdp: &TabularMdp,
    model: &EmpiricalModel,
    support: &SupportMask,
    delta: f64,
) -> Result<AuditFixedPoints> {
    let zeros = QTable::zeros(mdp.n_states(), mdp.n_actions());
    let q_support = converged(value_iterate(
        &Backup::SupportBellman { mdp, support },
        &zeros,
        AUDIT_TOL,
        AUDIT_MAX_ITER,
    )?)?;
    // Starting from the support fixed point keeps degenerate gaps at rounding level.
    let q_ilb = converged(value_iterate(
        &Backup::Ilb { mdp, model, support, delta },
        &q_support,
        AUDIT_TOL,
        AUDIT_MAX_ITER,
    )?)?;
    let pi = (0..mdp.n_states()).map(|s| q_support.argmax(s)).collect();
    let beta = (0..mdp.n_states())
        .map(|s| q_support.argmax_supported(s, support).expect("validated support"))
        .collect();
    Ok(AuditFixedPoints { q_support, q_ilb, pi, beta })
}

fn converged(res: super::operators::FixedPointResult) -> Result<QTable> {
    if res.converged {
        Ok(res.q)
    } else {
        Err(Error::Divergence { iteration: res.iterations })
    }
}

/// Measures both sides of the value-gap bounds on one instance.
pub fn audit_theorems(
    mdp: &TabularMdp,
    model: &EmpiricalModel,
    support: &SupportMask,
    delta: f64,
) -> Result<BoundReport> {
    let fp = audit_fixed_points(mdp, model, support, delta)?;
    let q_star = &fp.q_support;
    let ell = lipschitz_constant(mdp)?;
    let (eps_pi, eps_p) = policy_divergences(mdp, &fp.pi, &fp.beta)?;

    let gamma = mdp.gamma();
    let r_max = mdp.r_max();
    let n_states = mdp.n_states() as f64;
    let horizon = 1.0 / (1.0 - gamma);
    let (zeta_r, zeta_p) = (model.zeta_r(), model.zeta_p());

    let lhs_thm2 = (0..mdp.n_states())
        .map(|s| (q_star.get(s, fp.pi[s]) - q_star.get(s, fp.beta[s])).abs())
        .fold(0.0, f64::max);
    let rhs_thm2 = ell * eps_pi + gamma * n_states * r_max * horizon * eps_p;

    let y_img = imagination_values(q_star, mdp, model)?;
    let mut lhs_thm3: f64 = 0.0;
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            if !support.contains(s, a) {
                lhs_thm3 = lhs_thm3.max((y_img.get(s, a) - q_star.get(s, a)).abs());
            }
        }
    }
    let rhs_thm3 = zeta_r
        + gamma * ell * eps_pi
        + gamma * gamma * n_states * r_max * horizon * eps_p
        + gamma * zeta_p * r_max * horizon;

    let lhs_thm4 = fp.q_ilb.distance(q_star);
    let rhs_thm4 = horizon * zeta_r
        + horizon * ell * eps_pi
        + gamma * n_states * r_max * horizon * horizon * eps_p
        + gamma * r_max * horizon * horizon * zeta_p
        + horizon * delta.abs();

    Ok(BoundReport {
        lhs_thm2,
        rhs_thm2,
        lhs_thm3,
        rhs_thm3,
        lhs_thm4,
        rhs_thm4,
        epsilon_pi: eps_pi,
        epsilon_p: eps_p,
        lipschitz_l: ell,
        zeta_r,
        zeta_p,
        delta,
        satisfied: [
            lhs_thm2 <= rhs_thm2 + BOUND_SLACK,
            lhs_thm3 <= rhs_thm3 + BOUND_SLACK,
            lhs_thm4 <= rhs_thm4 + BOUND_SLACK,
        ],
    })
}

/// Distances measured when the ILB backup is applied to a pair of tables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionCheck {
    pub input_distance: f64,
    pub one_step_distance: f64,
    pub two_step_distance: f64,
    /// One-step distance restricted to supported pairs.
    pub supported_distance: f64,
    pub gamma: f64,
}

impl ContractionCheck {
    /// `||T q1 - T q2|| <= ||q1 - q2||`, compared without slack.
    pub fn nonexpansive(&self) -> bool {
        self.one_step_distance <= self.input_distance
    }

    pub fn two_step_contracts(&self) -> bool {
        self.two_step_distance <= self.gamma * self.input_distance + BOUND_SLACK
    }

    pub fn supported_contracts(&self) -> bool {
        self.supported_distance <= self.gamma * self.input_distance + BOUND_SLACK
    }

    pub fn one_step_ratio(&self) -> f64 {
        if self.input_distance == 0.0 {
            0.0
        } else {
            self.one_step_distance / self.input_distance
        }
    }
}

pub fn ilb_contraction_check(
    mdp: &TabularMdp,
    model: &EmpiricalModel,
    support: &SupportMask,
    delta: f64,
    q1: &QTable,
    q2: &QTable,
) -> Result<ContractionCheck> {
    let t1 = ilb_backup(q1, mdp, model, support, delta)?;
    let t2 = ilb_backup(q2, mdp, model, support, delta)?;
    let tt1 = ilb_backup(&t1, mdp, model, support, delta)?;
    let tt2 = ilb_backup(&t2, mdp, model, support, delta)?;
    Ok(ContractionCheck {
        input_distance: q1.distance(q2),
        one_step_distance: t1.distance(&t2),
        two_step_distance: tt1.distance(&tt2),
        supported_distance: t1.distance_on(&t2, support),
        gamma: mdp.gamma(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lipschitz_examples() {
        let flat = TabularMdp::with_defaults(2, 3, [0.5; 12].to_vec(), vec![0.3; 6], 1.0, 0.5).unwrap();
        assert_eq!(lipschitz_constant(&flat).unwrap(), 0.0);
        let two = TabularMdp::with_defaults(1, 2, vec![1.0, 1.0], vec![0.0, 1.0], 1.0, 0.5).unwrap();
        assert_eq!(lipschitz_constant(&two).unwrap(), 1.0);
    }

    #[test]
    fn duplicate_embedding_is_rejected() {
        let mdp =
            TabularMdp::new(1, 2, vec![1.0, 1.0], vec![0.0, 1.0], 1.0, 0.5, vec![1.0], vec![0.4, 0.4], 1)
                .unwrap();
        assert_eq!(lipschitz_constant(&mdp), Err(Error::InvalidEmbedding { first: 0, second: 1 }));
    }

    #[test]
    fn lipschitz_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let ns = rng.random_range(1..6);
            let na = rng.random_range(2..6);
            let mdp = TabularMdp::random(&mut rng, ns, na, 0.9);
            let mut brute: f64 = 0.0;
            for s in 0..ns {
                for a1 in 0..na {
                    for a2 in 0..na {
                        if a1 != a2 {
                            let d = (a1 as f64 - a2 as f64).abs() / (na - 1) as f64;
                            brute = brute.max((mdp.reward(s, a1) - mdp.reward(s, a2)).abs() / d);
                        }
                    }
                }
            }
            assert!((lipschitz_constant(&mdp).unwrap() - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn divergences_of_identical_maps_vanish() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mdp = TabularMdp::random(&mut rng, 4, 3, 0.9);
        let pi = [0, 2, 1, 1];
        assert_eq!(policy_divergences(&mdp, &pi, &pi).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn equal_dynamics_give_zero_eps_p() {
        // a0 and a1 share the transition row at every state.
        let p = vec![0.2, 0.8, 0.2, 0.8, 1.0, 0.0, 1.0, 0.0];
        let mdp = TabularMdp::with_defaults(2, 2, p, vec![0.0, 1.0, 0.0, 0.0], 1.0, 0.5).unwrap();
        let (eps_pi, eps_p) = policy_divergences(&mdp, &[1, 0], &[0, 0]).unwrap();
        assert_eq!(eps_pi, 1.0);
        assert_eq!(eps_p, 0.0);
    }

    #[test]
    fn divergences_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let (ns, na) = (rng.random_range(1..7), rng.random_range(1..5));
            let mdp = TabularMdp::random(&mut rng, ns, na, 0.5);
            let pi: Vec<usize> = (0..ns).map(|_| rng.random_range(0..na)).collect();
            let beta: Vec<usize> = (0..ns).map(|_| rng.random_range(0..na)).collect();
            // Build P^pi and P^beta as explicit matrices.
            let mut eps_p: f64 = 0.0;
            let mut eps_pi: f64 = 0.0;
            for s in 0..ns {
                let mut row = 0.0;
                for t in 0..ns {
                    let ppi = mdp.transition_row(s, pi[s])[t];
                    let pb = mdp.transition_row(s, beta[s])[t];
                    row += (ppi - pb).abs();
                }
                eps_p = eps_p.max(row);
                eps_pi = eps_pi.max((mdp.embedding(pi[s])[0] - mdp.embedding(beta[s])[0]).abs());
            }
            let (a, b) = policy_divergences(&mdp, &pi, &beta).unwrap();
            assert!((a - eps_pi).abs() < 1e-15 && (b - eps_p).abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_audit_is_tight() {
        // Single supported action everywhere and the greedy policy also picks it.
        let p = vec![0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0];
        let r = vec![1.0, -1.0, 0.5, -0.5];
        let mdp = TabularMdp::with_defaults(2, 2, p, r, 1.0, 0.9).unwrap();
        let support = SupportMask::from_actions(2, &[0, 0]).unwrap();
        let model = EmpiricalModel::exact(&mdp, &support).unwrap();
        let report = audit_theorems(&mdp, &model, &support, 0.0).unwrap();
        assert_eq!(report.lhs_thm2, 0.0);
        assert!(report.lhs_thm3 < 1e-10);
        assert!(report.lhs_thm4 < 1e-10);
        assert_eq!(report.rhs_thm2, 0.0);
        assert!(report.all_satisfied());
    }

    #[test]
    fn micro_mdp_audit() {
        let mdp = TabularMdp::with_defaults(1, 2, vec![1.0, 1.0], vec![1.0, 0.0], 1.0, 0.5).unwrap();
        let support = SupportMask::new(1, 2, vec![true, false]).unwrap();
        let model = EmpiricalModel::exact(&mdp, &support).unwrap();
        let report = audit_theorems(&mdp, &model, &support, 0.0).unwrap();
        // Q*(a0) = 2 and Q*(a1) = 0 + 0.5 * 2 = 1; Q_ILB = (2, 1).
        assert!(report.lhs_thm4.abs() < 1e-10);
        assert_eq!(report.epsilon_pi, 0.0);
        assert!(report.all_satisfied());
    }

    #[test]
    fn one_step_ratio_can_reach_one() {
        // a1 is unsupported and limited by the supported a0 at the same state;
        // moving only Q(a0) moves T Q(a1) one-for-one with no discount.
        let p = vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let mdp = TabularMdp::with_defaults(2, 2, p, vec![0.0, 1.0, 0.0, 0.0], 1.0, 0.5).unwrap();
        let support = SupportMask::new(2, 2, vec![true, false, true, true]).unwrap();
        let model = EmpiricalModel::exact(&mdp, &support).unwrap();
        let q1 = QTable::from_vec(2, 2, vec![0.0, 0.0, 100.0, 100.0]).unwrap();
        let q2 = QTable::from_vec(2, 2, vec![-1.0, 0.0, 100.0, 100.0]).unwrap();
        let check = ilb_contraction_check(&mdp, &model, &support, 0.0, &q1, &q2).unwrap();
        assert_eq!(check.one_step_ratio(), 1.0);
        assert!(check.nonexpansive());
        assert!(check.two_step_contracts());
    }
}
