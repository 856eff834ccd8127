use ilq_core::rng::derive;
use ilq_core::tabular::{
    bellman_backup, ilb_backup, support_bellman_backup, value_iterate, Backup, EmpiricalModel, QTable,
    SupportMask, TabularMdp,
};
use proptest::prelude::*;

struct Case {
    mdp: TabularMdp,
    support: SupportMask,
    model: EmpiricalModel,
    q1: QTable,
    q2: QTable,
}

fn case(seed: u64, ns: usize, na: usize, gamma: f64) -> Case {
    let mut r = derive(seed, 0, 0);
    let mdp = TabularMdp::random(&mut r, ns, na, gamma);
    let support = SupportMask::random(&mut r, ns, na, 0.5);
    let model = EmpiricalModel::exact(&mdp, &support).unwrap();
    let scale = mdp.value_bound();
    let q1 = QTable::random(&mut r, ns, na, scale);
    let q2 = QTable::random(&mut r, ns, na, scale);
    Case { mdp, support, model, q1, q2 }
}

fn pointwise_le(a: &QTable, b: &QTable) -> bool {
    a.values().iter().zip(b.values()).all(|(x, y)| x <= y)
}

/// `q` raised by a nonnegative random amount per entry.
fn raised(q: &QTable, seed: u64) -> QTable {
    let bump = QTable::random(&mut derive(seed, 1, 0), q.n_states(), q.n_actions(), 1.0);
    let values = q.values().iter().zip(bump.values()).map(|(v, b)| v + b.abs()).collect();
    QTable::from_vec(q.n_states(), q.n_actions(), values).unwrap()
}

fn params() -> impl Strategy<Value = (u64, usize, usize, f64, f64)> {
    (any::<u64>(), 1usize..9, 2usize..6, prop::sample::select(vec![0.5, 0.9, 0.99]), -1.0f64..1.0)
}

proptest! {
    #[test]
    fn backups_are_monotone((seed, ns, na, gamma, delta) in params()) {
        let c = case(seed, ns, na, gamma);
        let hi = raised(&c.q1, seed);
        prop_assert!(pointwise_le(&bellman_backup(&c.q1, &c.mdp).unwrap(), &bellman_backup(&hi, &c.mdp).unwrap()));
        prop_assert!(pointwise_le(
            &support_bellman_backup(&c.q1, &c.mdp, &c.support).unwrap(),
            &support_bellman_backup(&hi, &c.mdp, &c.support).unwrap()
        ));
        prop_assert!(pointwise_le(
            &ilb_backup(&c.q1, &c.mdp, &c.model, &c.support, delta).unwrap(),
            &ilb_backup(&hi, &c.mdp, &c.model, &c.support, delta).unwrap()
        ));
    }

    #[test]
    fn bellman_contracts_by_gamma((seed, ns, na, gamma, _d) in params()) {
        let c = case(seed, ns, na, gamma);
        let d = c.q1.distance(&c.q2);
        let t = bellman_backup(&c.q1, &c.mdp).unwrap().distance(&bellman_backup(&c.q2, &c.mdp).unwrap());
        let ts = support_bellman_backup(&c.q1, &c.mdp, &c.support)
            .unwrap()
            .distance(&support_bellman_backup(&c.q2, &c.mdp, &c.support).unwrap());
        prop_assert!(t <= gamma * d + 1e-9);
        prop_assert!(ts <= gamma * d + 1e-9);
    }

    #[test]
    fn ilb_is_nonexpansive_and_contracts_in_two_steps((seed, ns, na, gamma, delta) in params()) {
        let c = case(seed, ns, na, gamma);
        let t = |q: &QTable| ilb_backup(q, &c.mdp, &c.model, &c.support, delta).unwrap();
        let d = c.q1.distance(&c.q2);
        let (a1, b1) = (t(&c.q1), t(&c.q2));
        prop_assert!(a1.distance(&b1) <= d);
        prop_assert!(t(&a1).distance(&t(&b1)) <= gamma * d + 1e-9);
    }

    #[test]
    fn bellman_shifts_by_gamma_c((seed, ns, na, gamma, _d) in params(), shift in -50.0f64..50.0) {
        let c = case(seed, ns, na, gamma);
        let lhs = bellman_backup(&c.q1.shifted(shift), &c.mdp).unwrap();
        let rhs = bellman_backup(&c.q1, &c.mdp).unwrap().shifted(gamma * shift);
        prop_assert!(lhs.distance(&rhs) <= 1e-9 * (1.0 + shift.abs() + c.mdp.value_bound()));
    }

    #[test]
    fn full_support_ilb_is_bellman((seed, ns, na, gamma, delta) in params()) {
        let c = case(seed, ns, na, gamma);
        let full = SupportMask::full(ns, na);
        let model = EmpiricalModel::exact(&c.mdp, &full).unwrap();
        prop_assert_eq!(
            ilb_backup(&c.q1, &c.mdp, &model, &full, delta).unwrap(),
            bellman_backup(&c.q1, &c.mdp).unwrap()
        );
    }

    #[test]
    fn unsupported_entries_respect_the_limitation((seed, ns, na, gamma, delta) in params()) {
        let c = case(seed, ns, na, gamma);
        let out = ilb_backup(&c.q1, &c.mdp, &c.model, &c.support, delta).unwrap();
        for s in 0..ns {
            let cap = c.q1.get(s, c.q1.argmax_supported(s, &c.support).unwrap()) + delta;
            for a in (0..na).filter(|&a| !c.support.contains(s, a)) {
                prop_assert!(out.get(s, a) <= cap + 1e-12);
            }
        }
    }

    #[test]
    fn fixed_point_is_a_fixed_point((seed, ns, na, gamma, delta) in params()) {
        let c = case(seed, ns, na, gamma);
        let op = Backup::Ilb { mdp: &c.mdp, model: &c.model, support: &c.support, delta };
        let fp = value_iterate(&op, &c.q1, 1e-10, 200_000).unwrap();
        prop_assert!(fp.converged);
        prop_assert!(op.apply(&fp.q).unwrap().distance(&fp.q) <= 1e-10);
    }
}
