//! The three Bellman-style backups and value iteration over them.

use alloc::vec::Vec;

use super::mdp::{QTable, SupportMask, TabularMdp};
use super::model::EmpiricalModel;
use crate::error::{ensure_dim, Error, Result};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 100_000;

fn check_q(q: &QTable, mdp: &TabularMdp) -> Result<()> {
    ensure_dim("Q table states", mdp.n_states(), q.n_states())?;
    ensure_dim("Q table actions", mdp.n_actions(), q.n_actions())
}

fn check_support(support: &SupportMask, mdp: &TabularMdp) -> Result<()> {
    ensure_dim("support states", mdp.n_states(), support.n_states())?;
    ensure_dim("support actions", mdp.n_actions(), support.n_actions())?;
    support.validate()
}

fn check_model(model: &EmpiricalModel, mdp: &TabularMdp) -> Result<()> {
    ensure_dim("model states", mdp.n_states(), model.n_states())?;
    ensure_dim("model actions", mdp.n_actions(), model.n_actions())
}

/// `max_a q[s][a]` for every state.
fn greedy_values(q: &QTable) -> Vec<f64> {
    (0..q.n_states()).map(|s| q.max(s)).collect()
}

/// `max_{a in Supp(s)} q[s][a]` for every state.
fn supported_values(q: &QTable, support: &SupportMask) -> Vec<f64> {
    (0..q.n_states())
        .map(|s| {
            let a = q.argmax_supported(s, support).expect("validated support");
            q.get(s, a)
        })
        .collect()
}

#[inline]
fn expectation(row: &[f64], values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (p, v) in row.iter().zip(values) {
        acc += p * v;
    }
    acc
}

fn backup_with(q: &QTable, mdp: &TabularMdp, next_values: &[f64]) -> QTable {
    let mut out = QTable::zeros(mdp.n_states(), mdp.n_actions());
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let v = mdp.reward(s, a) + mdp.gamma() * expectation(mdp.transition_row(s, a), next_values);
            out.set(s, a, v);
        }
    }
    debug_assert_eq!(out.n_states(), q.n_states());
    out
}

/// Bellman optimality backup `r + gamma * E_{s'} max_{a'} q(s', a')`.
pub fn bellman_backup(q: &QTable, mdp: &TabularMdp) -> Result<QTable> {
    check_q(q, mdp)?;
    Ok(backup_with(q, mdp, &greedy_values(q)))
}

/// Bellman optimality backup with the bootstrap max restricted to the support.
pub fn support_bellman_backup(q: &QTable, mdp: &TabularMdp, support: &SupportMask) -> Result<QTable> {
    check_q(q, mdp)?;
    check_support(support, mdp)?;
    Ok(backup_with(q, mdp, &supported_values(q, support)))
}

/// Imagination values `r_hat + gamma * E_{s' ~ P_hat} max_{a'} q(s', a')` for every pair.
pub fn imagination_values(q: &QTable, mdp: &TabularMdp, model: &EmpiricalModel) -> Result<QTable> {
    check_q(q, mdp)?;
    check_model(model, mdp)?;
    let v = greedy_values(q);
    let mut out = QTable::zeros(mdp.n_states(), mdp.n_actions());
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            out.set(s, a, model.reward(s, a) + mdp.gamma() * expectation(model.transition_row(s, a), &v));
        }
    }
    Ok(out)
}

/// Imagination-limited backup.
///
/// Supported pairs receive the ordinary optimality backup. Unsupported pairs
/// receive `min(y_img, y_lmt) + delta`, where `y_img` bootstraps through the
/// empirical model and `y_lmt` is the best supported value at the same state.
pub fn ilb_backup(
    q: &QTable,
    mdp: &TabularMdp,
    model: &EmpiricalModel,
    support: &SupportMask,
    delta: f64,
) -> Result<QTable> {
    check_q(q, mdp)?;
    check_support(support, mdp)?;
    check_model(model, mdp)?;
    let v = greedy_values(q);
    let v_supp = supported_values(q, support);
    let gamma = mdp.gamma();
    let mut out = QTable::zeros(mdp.n_states(), mdp.n_actions());
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let value = if support.contains(s, a) {
                mdp.reward(s, a) + gamma * expectation(mdp.transition_row(s, a), &v)
            } else {
                let y_img = model.reward(s, a) + gamma * expectation(model.transition_row(s, a), &v);
                let y_lmt = v_supp[s];
                y_img.min(y_lmt) + delta
            };
            out.set(s, a, value);
        }
    }
    Ok(out)
}

/// A backup together with the context it needs.
#[derive(Debug, Clone, Copy)]
pub enum Backup<'a> {
    Bellman { mdp: &'a TabularMdp },
    SupportBellman { mdp: &'a TabularMdp, support: &'a SupportMask },
    Ilb { mdp: &'a TabularMdp, model: &'a EmpiricalModel, support: &'a SupportMask, delta: f64 },
}

impl Backup<'_> {
    pub fn apply(&self, q: &QTable) -> Result<QTable> {
        match *self {
            Backup::Bellman { mdp } => bellman_backup(q, mdp),
            Backup::SupportBellman { mdp, support } => support_bellman_backup(q, mdp, support),
            Backup::Ilb { mdp, model, support, delta } => ilb_backup(q, mdp, model, support, delta),
        }
    }

    pub fn mdp(&self) -> &TabularMdp {
        match *self {
            Backup::Bellman { mdp } | Backup::SupportBellman { mdp, .. } | Backup::Ilb { mdp, .. } => mdp,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Backup::Bellman { .. } => "bellman",
            Backup::SupportBellman { .. } => "support_bellman",
            Backup::Ilb { .. } => "ilb",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointResult {
    pub q: QTable,
    pub iterations: usize,
    /// Sup-norm of the last update.
    pub final_residual: f64,
    pub converged: bool,
}

/// Iterates `q <- backup(q)` until the update's sup-norm is at most `tol`.
pub fn value_iterate(
    backup: &Backup<'_>,
    q0: &QTable,
    tol: f64,
    max_iter: usize,
) -> Result<FixedPointResult> {
    if !(tol > 0.0) {
        return Err(Error::OutOfRange { what: "tolerance", value: alloc::format!("{tol}") });
    }
    let mut q = q0.clone();
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let next = backup.apply(&q)?;
        if !next.is_finite() {
            return Err(Error::Divergence { iteration: it });
        }
        residual = next.distance(&q);
        q = next;
        if residual <= tol {
            return Ok(FixedPointResult { q, iterations: it, final_residual: residual, converged: true });
        }
    }
    Ok(FixedPointResult { q, iterations: max_iter, final_residual: residual, converged: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn self_loop(r: f64, gamma: f64) -> TabularMdp {
        TabularMdp::with_defaults(1, 1, vec![1.0], vec![r], 1.0, gamma).unwrap()
    }

    /// One state, a0 supported with r=1, a1 unsupported with r=0, both self-loops.
    fn micro() -> (TabularMdp, SupportMask, EmpiricalModel) {
        let mdp = TabularMdp::with_defaults(1, 2, vec![1.0, 1.0], vec![1.0, 0.0], 1.0, 0.5).unwrap();
        let support = SupportMask::new(1, 2, vec![true, false]).unwrap();
        let model = EmpiricalModel::exact(&mdp, &support).unwrap();
        (mdp, support, model)
    }

    #[test]
    fn bellman_self_loop() {
        let mdp = self_loop(1.0, 0.5);
        assert_eq!(bellman_backup(&QTable::zeros(1, 1), &mdp).unwrap().get(0, 0), 1.0);
        assert_eq!(bellman_backup(&QTable::filled(1, 1, 2.0), &mdp).unwrap().get(0, 0), 2.0);
    }

    #[test]
    fn two_state_chain_fixed_point() {
        // s0 -> s1 deterministically; s1 absorbing; r(s0)=0, r(s1)=1.
        let p = vec![0.0, 1.0, 0.0, 1.0];
        let mdp = TabularMdp::with_defaults(2, 1, p, vec![0.0, 1.0], 1.0, 0.5).unwrap();
        let res = value_iterate(&Backup::Bellman { mdp: &mdp }, &QTable::zeros(2, 1), 1e-12, 1000).unwrap();
        assert!(res.converged);
        assert!((res.q.get(1, 0) - 2.0).abs() < 1e-10);
        assert!((res.q.get(0, 0) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn full_support_matches_bellman_exactly() {
        let mdp = TabularMdp::with_defaults(
            2,
            2,
            vec![0.3, 0.7, 1.0, 0.0, 0.5, 0.5, 0.0, 1.0],
            vec![0.1, -0.2, 0.9, 0.4],
            1.0,
            0.9,
        )
        .unwrap();
        let q = QTable::from_vec(2, 2, vec![1.0, -3.0, 0.5, 2.0]).unwrap();
        let full = SupportMask::full(2, 2);
        assert_eq!(support_bellman_backup(&q, &mdp, &full).unwrap(), bellman_backup(&q, &mdp).unwrap());
    }

    #[test]
    fn restricted_support_example() {
        let mdp = TabularMdp::with_defaults(1, 2, vec![1.0, 1.0], vec![1.0, 5.0], 5.0, 0.5).unwrap();
        let support = SupportMask::new(1, 2, vec![true, false]).unwrap();
        let first = support_bellman_backup(&QTable::zeros(1, 2), &mdp, &support).unwrap();
        assert_eq!(first.values(), &[1.0, 5.0]);
        let fp = value_iterate(
            &Backup::SupportBellman { mdp: &mdp, support: &support },
            &QTable::zeros(1, 2),
            1e-12,
            1000,
        )
        .unwrap();
        assert!((fp.q.get(0, 0) - 2.0).abs() < 1e-10);
        assert!((fp.q.get(0, 1) - 6.0).abs() < 1e-10);
    }

    #[test]
    fn singleton_support_uses_that_action() {
        let mdp = TabularMdp::with_defaults(
            2,
            2,
            vec![0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0],
            vec![0.0; 4],
            1.0,
            0.5,
        )
        .unwrap();
        let support = SupportMask::from_actions(2, &[0, 1]).unwrap();
        let q = QTable::from_vec(2, 2, vec![10.0, -1.0, 7.0, 3.0]).unwrap();
        let out = support_bellman_backup(&q, &mdp, &support).unwrap();
        // Both actions at s0 lead to s1 whose only supported action is a1 (value 3).
        assert_eq!(out.get(0, 0), 1.5);
        // Both actions at s1 lead to s0 whose only supported action is a0 (value 10).
        assert_eq!(out.get(1, 1), 5.0);
    }

    #[test]
    fn empty_support_is_rejected() {
        let mdp = self_loop(0.0, 0.5);
        let support = SupportMask::unchecked(1, 1, vec![false]).unwrap();
        assert_eq!(
            support_bellman_backup(&QTable::zeros(1, 1), &mdp, &support),
            Err(Error::InvalidSupport { state: 0 })
        );
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mdp = self_loop(0.0, 0.5);
        assert!(matches!(bellman_backup(&QTable::zeros(2, 1), &mdp), Err(Error::Dimension { .. })));
    }

    #[test]
    fn micro_mdp_fixed_points() {
        let (mdp, support, model) = micro();
        for (delta, expected) in [(0.0, 1.0), (0.5, 1.5)] {
            let op = Backup::Ilb { mdp: &mdp, model: &model, support: &support, delta };
            let res = value_iterate(&op, &QTable::zeros(1, 2), 1e-12, 10_000).unwrap();
            assert!(res.converged);
            assert!((res.q.get(0, 0) - 2.0).abs() < 1e-8);
            assert!((res.q.get(0, 1) - expected).abs() < 1e-8);
        }
    }

    #[test]
    fn micro_mdp_initialization_independent() {
        let (mdp, support, model) = micro();
        let op = Backup::Ilb { mdp: &mdp, model: &model, support: &support, delta: 0.0 };
        let low = value_iterate(&op, &QTable::zeros(1, 2), 1e-12, 10_000).unwrap();
        let high = value_iterate(&op, &QTable::filled(1, 2, mdp.value_bound()), 1e-12, 10_000).unwrap();
        assert!(low.q.distance(&high.q) < 1e-8);
    }

    #[test]
    fn imagination_branch_shifts_by_gamma_c() {
        // y_img is selected (it is below y_lmt) for both tables.
        let (mdp, support, model) = micro();
        let q1 = QTable::from_vec(1, 2, vec![4.0, 0.0]).unwrap();
        let q2 = q1.shifted(0.75);
        let o1 = ilb_backup(&q1, &mdp, &model, &support, 0.0).unwrap();
        let o2 = ilb_backup(&q2, &mdp, &model, &support, 0.0).unwrap();
        assert!((o2.get(0, 1) - o1.get(0, 1) - 0.5 * 0.75).abs() < 1e-15);
    }

    #[test]
    fn value_iteration_reports_residual() {
        let mdp = self_loop(1.0, 0.5);
        let res = value_iterate(&Backup::Bellman { mdp: &mdp }, &QTable::zeros(1, 1), 1e-10, 1000).unwrap();
        assert!(res.converged && res.final_residual <= 1e-10);
        assert!((res.q.get(0, 0) - 2.0).abs() < 1e-9);
        let capped = value_iterate(&Backup::Bellman { mdp: &mdp }, &QTable::zeros(1, 1), 1e-10, 3).unwrap();
        assert!(!capped.converged);
        assert_eq!(capped.iterations, 3);
        assert!(value_iterate(&Backup::Bellman { mdp: &mdp }, &QTable::zeros(1, 1), 0.0, 3).is_err());
    }

    #[test]
    fn non_finite_iterate_is_divergence() {
        let mdp = self_loop(1.0, 0.5);
        let q0 = QTable::filled(1, 1, f64::INFINITY);
        assert_eq!(
            value_iterate(&Backup::Bellman { mdp: &mdp }, &q0, 1e-8, 10),
            Err(Error::Divergence { iteration: 1 })
        );
    }
}
