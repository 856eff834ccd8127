use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{ensure_dim, Error, Result};

const PROB_TOL: f64 = 1e-12;

/// Finite MDP `(S, A, P, r, rho0, gamma)` with an action embedding in `[0,1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    /// `P[s][a][s']`, flattened.
    transition: Vec<f64>,
    /// `r[s][a]`, flattened.
    reward: Vec<f64>,
    r_max: f64,
    gamma: f64,
    initial_dist: Vec<f64>,
    /// One row of `embed_dim` coordinates per action.
    action_embedding: Vec<f64>,
    embed_dim: usize,
}

impl TabularMdp {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        r_max: f64,
        gamma: f64,
        initial_dist: Vec<f64>,
        action_embedding: Vec<f64>,
        embed_dim: usize,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 || embed_dim == 0 {
            return Err(Error::InvalidConfig("MDP dimensions must be positive".into()));
        }
        ensure_dim("transition tensor", n_states * n_actions * n_states, transition.len())?;
        ensure_dim("reward table", n_states * n_actions, reward.len())?;
        ensure_dim("initial distribution", n_states, initial_dist.len())?;
        ensure_dim("action embedding", n_actions * embed_dim, action_embedding.len())?;
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::OutOfRange { what: "gamma", value: format!("{gamma}") });
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::OutOfRange { what: "r_max", value: format!("{r_max}") });
        }
        for (i, row) in transition.chunks(n_states).enumerate() {
            check_distribution(row).map_err(|why| {
                Error::InvalidDistribution(format!("P[{}][{}]: {why}", i / n_actions, i % n_actions))
            })?;
        }
        if let Some(i) = reward.iter().position(|r| !(r.abs() <= r_max)) {
            return Err(Error::OutOfRange {
                what: "reward",
                value: format!(
                    "r[{}][{}] = {} exceeds r_max {r_max}",
                    i / n_actions,
                    i % n_actions,
                    reward[i]
                ),
            });
        }
        check_distribution(&initial_dist)
            .map_err(|why| Error::InvalidDistribution(format!("initial distribution: {why}")))?;
        if !action_embedding.iter().all(|x| (0.0..=1.0).contains(x)) {
            return Err(Error::OutOfRange {
                what: "action embedding",
                value: "coordinates must lie in [0, 1]".into(),
            });
        }
        Ok(Self {
            n_states,
            n_actions,
            transition,
            reward,
            r_max,
            gamma,
            initial_dist,
            action_embedding,
            embed_dim,
        })
    }

    /// Uniform initial distribution and actions evenly spaced on `[0, 1]`.
    pub fn with_defaults(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        r_max: f64,
        gamma: f64,
    ) -> Result<Self> {
        let initial = vec![1.0 / n_states.max(1) as f64; n_states];
        Self::new(
            n_states,
            n_actions,
            transition,
            reward,
            r_max,
            gamma,
            initial,
            even_embedding(n_actions),
            1,
        )
    }

    /// Random instance: each `(s, a)` row has a random number of successors
    /// with random weights, rewards are uniform in `[-1, 1]`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n_states: usize, n_actions: usize, gamma: f64) -> Self {
        let mut transition = vec![0.0; n_states * n_actions * n_states];
        for row in transition.chunks_mut(n_states) {
            let successors = rng.random_range(1..=n_states);
            for _ in 0..successors {
                row[rng.random_range(0..n_states)] += rng.random_range(0.05..1.0);
            }
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= total);
        }
        let reward = (0..n_states * n_actions).map(|_| rng.random_range(-1.0..=1.0)).collect();
        Self::with_defaults(n_states, n_actions, transition, reward, 1.0, gamma)
            .expect("random MDP is valid by construction")
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    #[inline]
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transition
    }

    pub fn rewards(&self) -> &[f64] {
        &self.reward
    }

    #[inline]
    pub fn embedding(&self, a: usize) -> &[f64] {
        &self.action_embedding[a * self.embed_dim..(a + 1) * self.embed_dim]
    }

    /// Largest fixed-point magnitude any backup can produce with zero offset.
    pub fn value_bound(&self) -> f64 {
        self.r_max / (1.0 - self.gamma)
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        let mut out = self.clone();
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::OutOfRange { what: "gamma", value: format!("{gamma}") });
        }
        out.gamma = gamma;
        Ok(out)
    }
}

pub fn even_embedding(n_actions: usize) -> Vec<f64> {
    if n_actions == 1 {
        return vec![0.0];
    }
    (0..n_actions).map(|a| a as f64 / (n_actions - 1) as f64).collect()
}

fn check_distribution(row: &[f64]) -> core::result::Result<(), &'static str> {
    if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err("negative or non-finite entry");
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err("does not sum to one");
    }
    Ok(())
}

/// Behavior support `Supp(beta(.|s))` as a boolean table over `(s, a)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportMask {
    n_states: usize,
    n_actions: usize,
    mask: Vec<bool>,
}

impl SupportMask {
    pub fn new(n_states: usize, n_actions: usize, mask: Vec<bool>) -> Result<Self> {
        ensure_dim("support mask", n_states * n_actions, mask.len())?;
        let out = Self { n_states, n_actions, mask };
        out.validate()?;
        Ok(out)
    }

    pub fn full(n_states: usize, n_actions: usize) -> Self {
        Self { n_states, n_actions, mask: vec![true; n_states * n_actions] }
    }

    /// Exactly one supported action per state.
    pub fn from_actions(n_actions: usize, actions: &[usize]) -> Result<Self> {
        let mut mask = vec![false; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(Error::Dimension {
                    context: "support action index",
                    expected: n_actions,
                    found: a,
                });
            }
            mask[s * n_actions + a] = true;
        }
        Self::new(actions.len(), n_actions, mask)
    }

    /// Each pair is supported with probability `p`; every state keeps at least one action.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n_states: usize, n_actions: usize, p: f64) -> Self {
        let mut mask: Vec<bool> = (0..n_states * n_actions).map(|_| rng.random_bool(p)).collect();
        for s in 0..n_states {
            let row = &mut mask[s * n_actions..(s + 1) * n_actions];
            if !row.iter().any(|&b| b) {
                row[rng.random_range(0..n_actions)] = true;
            }
        }
        Self { n_states, n_actions, mask }
    }

    /// Builds a mask without the non-empty check; backups reject it later.
    pub fn unchecked(n_states: usize, n_actions: usize, mask: Vec<bool>) -> Result<Self> {
        ensure_dim("support mask", n_states * n_actions, mask.len())?;
        Ok(Self { n_states, n_actions, mask })
    }

    pub fn validate(&self) -> Result<()> {
        for s in 0..self.n_states {
            if !self.row(s).iter().any(|&b| b) {
                return Err(Error::InvalidSupport { state: s });
            }
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn contains(&self, s: usize, a: usize) -> bool {
        self.mask[s * self.n_actions + a]
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[bool] {
        &self.mask[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }
}

/// Dense action-value table `Q[s][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self::filled(n_states, n_actions, 0.0)
    }

    pub fn filled(n_states: usize, n_actions: usize, v: f64) -> Self {
        Self { n_states, n_actions, values: vec![v; n_states * n_actions] }
    }

    pub fn from_vec(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        ensure_dim("Q table", n_states * n_actions, values.len())?;
        Ok(Self { n_states, n_actions, values })
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, n_states: usize, n_actions: usize, scale: f64) -> Self {
        Self {
            n_states,
            n_actions,
            values: (0..n_states * n_actions).map(|_| rng.random_range(-scale..=scale)).collect(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    #[inline]
    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.n_actions + a] = v;
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    /// Greedy action over all actions; ties go to the lowest index.
    pub fn argmax(&self, s: usize) -> usize {
        argmax_where(self.row(s), |_| true).expect("at least one action")
    }

    /// Greedy action restricted to the support; ties go to the lowest index.
    pub fn argmax_supported(&self, s: usize, support: &SupportMask) -> Option<usize> {
        let allowed = support.row(s);
        argmax_where(self.row(s), |a| allowed[a])
    }

    pub fn max(&self, s: usize) -> f64 {
        self.get(s, self.argmax(s))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `||self - other||_inf`.
    pub fn distance(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `||self - other||_inf` over supported pairs only.
    pub fn distance_on(&self, other: &Self, support: &SupportMask) -> f64 {
        let mut m: f64 = 0.0;
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                if support.contains(s, a) {
                    m = m.max((self.get(s, a) - other.get(s, a)).abs());
                }
            }
        }
        m
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self {
            n_states: self.n_states,
            n_actions: self.n_actions,
            values: self.values.iter().map(|v| v + c).collect(),
        }
    }
}

fn argmax_where(row: &[f64], allowed: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (a, &v) in row.iter().enumerate() {
        if !allowed(a) {
            continue;
        }
        match best {
            Some(b) if row[b] >= v => {}
            _ => best = Some(a),
        }
    }
    best
}
