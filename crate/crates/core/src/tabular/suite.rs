//! Reproducible random instances for batch audits.

use super::mdp::{SupportMask, TabularMdp};
use super::model::EmpiricalModel;
use crate::error::{Error, Result};
use crate::rng::{self, purpose};
use rand::Rng;

/// Shape of a random audit suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteSpec {
    pub max_states: usize,
    pub max_actions: usize,
    /// Instance `i` uses `gammas[i % gammas.len()]`.
    pub gammas: alloc::vec::Vec<f64>,
    /// Probability that a pair is in the behavior support.
    pub support_p: f64,
}

impl Default for SuiteSpec {
    fn default() -> Self {
        Self { max_states: 20, max_actions: 8, gammas: alloc::vec![0.5, 0.9, 0.99], support_p: 0.5 }
    }
}

impl SuiteSpec {
    pub fn validate(&self) -> Result<()> {
        if self.max_states == 0 || self.max_actions < 2 {
            return Err(Error::InvalidConfig("suite needs max_states >= 1 and max_actions >= 2".into()));
        }
        if self.gammas.is_empty() || self.gammas.iter().any(|g| !(0.0..1.0).contains(g)) {
            return Err(Error::InvalidConfig("suite gammas must lie in [0, 1)".into()));
        }
        if !(self.support_p > 0.0 && self.support_p <= 1.0) {
            return Err(Error::OutOfRange { what: "support_p", value: alloc::format!("{}", self.support_p) });
        }
        Ok(())
    }
}

/// One audit instance with its exact model.
#[derive(Debug, Clone)]
pub struct SuiteCase {
    pub index: usize,
    pub mdp: TabularMdp,
    pub support: SupportMask,
    pub model: EmpiricalModel,
}

/// Instance `index` of the suite seeded by `seed`. Each instance draws from
/// its own stream, so cases can be generated in any order.
pub fn suite_case(spec: &SuiteSpec, seed: u64, index: usize) -> Result<SuiteCase> {
    spec.validate()?;
    let mut r = rng::derive(seed, purpose::TABULAR, index as u64);
    let n_states = r.random_range(1..=spec.max_states);
    let n_actions = r.random_range(2..=spec.max_actions);
    let gamma = spec.gammas[index % spec.gammas.len()];
    let mdp = TabularMdp::random(&mut r, n_states, n_actions, gamma);
    let support = SupportMask::random(&mut r, n_states, n_actions, spec.support_p);
    let model = EmpiricalModel::exact(&mdp, &support)?;
    Ok(SuiteCase { index, mdp, support, model })
}
