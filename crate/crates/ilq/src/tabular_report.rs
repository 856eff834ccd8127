//! Batch audit of the tabular engine, one CSV row per random MDP.

use std::path::Path;

use ilq_core::rng::{self, purpose};
use ilq_core::tabular::{audit_theorems, ilb_contraction_check, suite_case, QTable, SuiteSpec};

use crate::error::{IoError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AuditRow {
    pub index: usize,
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    pub delta: f64,
    pub lhs_thm2: f64,
    pub rhs_thm2: f64,
    pub lhs_thm3: f64,
    pub rhs_thm3: f64,
    pub lhs_thm4: f64,
    pub rhs_thm4: f64,
    pub epsilon_pi: f64,
    pub epsilon_p: f64,
    pub lipschitz_l: f64,
    pub zeta_r: f64,
    pub zeta_p: f64,
    pub satisfied: [bool; 3],
    pub nonexpansive: bool,
    pub two_step_contracts: bool,
    pub one_step_ratio: f64,
}

impl AuditRow {
    pub fn passed(&self) -> bool {
        self.satisfied.iter().all(|&b| b) && self.nonexpansive && self.two_step_contracts
    }
}

pub const HEADER: [&str; 22] = [
    "index",
    "n_states",
    "n_actions",
    "gamma",
    "delta",
    "lhs_thm2",
    "rhs_thm2",
    "lhs_thm3",
    "rhs_thm3",
    "lhs_thm4",
    "rhs_thm4",
    "epsilon_pi",
    "epsilon_p",
    "lipschitz_l",
    "zeta_r",
    "zeta_p",
    "satisfied_thm2",
    "satisfied_thm3",
    "satisfied_thm4",
    "nonexpansive",
    "two_step_contracts",
    "one_step_ratio",
];

/// Audits instance `index`: value-gap bounds plus one contraction check on
/// a random pair of tables scaled to the value range.
pub fn audit_row(spec: &SuiteSpec, seed: u64, index: usize, delta: f64) -> Result<AuditRow> {
    let case = suite_case(spec, seed, index)?;
    let (mdp, support, model) = (&case.mdp, &case.support, &case.model);
    let report = audit_theorems(mdp, model, support, delta)?;
    let mut r = rng::derive(rng::child_seed(seed, purpose::TABULAR, index as u64), purpose::TABULAR, 0);
    let scale = mdp.value_bound();
    let q1 = QTable::random(&mut r, mdp.n_states(), mdp.n_actions(), scale);
    let q2 = QTable::random(&mut r, mdp.n_states(), mdp.n_actions(), scale);
    let check = ilb_contraction_check(mdp, model, support, delta, &q1, &q2)?;
    Ok(AuditRow {
        index,
        n_states: mdp.n_states(),
        n_actions: mdp.n_actions(),
        gamma: mdp.gamma(),
        delta,
        lhs_thm2: report.lhs_thm2,
        rhs_thm2: report.rhs_thm2,
        lhs_thm3: report.lhs_thm3,
        rhs_thm3: report.rhs_thm3,
        lhs_thm4: report.lhs_thm4,
        rhs_thm4: report.rhs_thm4,
        epsilon_pi: report.epsilon_pi,
        epsilon_p: report.epsilon_p,
        lipschitz_l: report.lipschitz_l,
        zeta_r: report.zeta_r,
        zeta_p: report.zeta_p,
        satisfied: report.satisfied,
        nonexpansive: check.nonexpansive(),
        two_step_contracts: check.two_step_contracts(),
        one_step_ratio: check.one_step_ratio(),
    })
}

pub fn write_report(rows: &[AuditRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| IoError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(HEADER)?;
    for row in rows {
        let f = |v: f64| format!("{v:e}");
        w.write_record([
            row.index.to_string(),
            row.n_states.to_string(),
            row.n_actions.to_string(),
            row.gamma.to_string(),
            row.delta.to_string(),
            f(row.lhs_thm2),
            f(row.rhs_thm2),
            f(row.lhs_thm3),
            f(row.rhs_thm3),
            f(row.lhs_thm4),
            f(row.rhs_thm4),
            f(row.epsilon_pi),
            f(row.epsilon_p),
            f(row.lipschitz_l),
            f(row.zeta_r),
            f(row.zeta_p),
            row.satisfied[0].to_string(),
            row.satisfied[1].to_string(),
            row.satisfied[2].to_string(),
            row.nonexpansive.to_string(),
            row.two_step_contracts.to_string(),
            f(row.one_step_ratio),
        ])?;
    }
    w.flush().map_err(|e| IoError::io(path, e))
}
