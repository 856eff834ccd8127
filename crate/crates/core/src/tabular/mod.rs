//! Exact finite-MDP engine.
//!
//! Everything here is a pure function of immutable inputs: the backups write
//! into fresh tables and evaluate each `(s, a)` cell with a fixed summation
//! order, so results are bit-reproducible.

mod audit;
mod mdp;
mod model;
mod operators;
mod suite;

pub use audit::{
    audit_fixed_points, audit_theorems, ilb_contraction_check, lipschitz_constant, policy_divergences,
    AuditFixedPoints, BoundReport, ContractionCheck, AUDIT_MAX_ITER, AUDIT_TOL, BOUND_SLACK,
};
pub use mdp::{even_embedding, QTable, SupportMask, TabularMdp};
pub use model::{EmpiricalModel, Transition};
pub use operators::{
    bellman_backup, ilb_backup, imagination_values, support_bellman_backup, value_iterate, Backup,
    FixedPointResult, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
pub use suite::{suite_case, SuiteCase, SuiteSpec};
