use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tabular::{SupportMask, TabularMdp, Transition};

use super::dataset::TransitionDataset;

/// Moves in action order: up (+y), right (+x), down (-y), left (-x).
pub const MOVES: [(i64, i64); 4] = [(0, 1), (1, 0), (0, -1), (-1, 0)];

#[derive(Debug, Clone, PartialEq)]
pub struct GridworldSpec {
    pub width: usize,
    pub height: usize,
    pub walls: Vec<(usize, usize)>,
    pub goal: (usize, usize),
    pub step_reward: f64,
    pub goal_reward: f64,
    pub slip_prob: f64,
    pub horizon: usize,
}

impl Default for GridworldSpec {
    /// 6x6 room with a partial wall between start region and goal.
    fn default() -> Self {
        Self {
            width: 6,
            height: 6,
            walls: vec![(2, 1), (2, 2), (2, 3), (2, 4), (4, 4)],
            goal: (5, 5),
            step_reward: -0.1,
            goal_reward: 1.0,
            slip_prob: 0.1,
            horizon: 50,
        }
    }
}

impl GridworldSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.horizon == 0 {
            return Err(Error::InvalidConfig("gridworld dimensions and horizon must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.slip_prob) {
            return Err(Error::OutOfRange { what: "slip_prob", value: format!("{}", self.slip_prob) });
        }
        if !self.in_bounds(self.goal) || self.is_wall(self.goal) {
            return Err(Error::InvalidConfig("goal must be an open cell".into()));
        }
        if let Some(w) = self.walls.iter().find(|&&w| !self.in_bounds(w)) {
            return Err(Error::InvalidConfig(format!("wall {w:?} outside the grid")));
        }
        if !(self.step_reward.is_finite() && self.goal_reward.is_finite()) || self.r_max() == 0.0 {
            return Err(Error::InvalidConfig("rewards must be finite and not all zero".into()));
        }
        Ok(())
    }

    pub fn r_max(&self) -> f64 {
        self.step_reward.abs().max(self.goal_reward.abs())
    }

    fn in_bounds(&self, (x, y): (usize, usize)) -> bool {
        x < self.width && y < self.height
    }

    pub fn is_wall(&self, cell: (usize, usize)) -> bool {
        self.walls.contains(&cell)
    }

    pub fn is_open(&self, cell: (usize, usize)) -> bool {
        self.in_bounds(cell) && !self.is_wall(cell)
    }

    /// Cell reached by `action` ignoring slip; blocked moves stay put.
    pub fn target(&self, (x, y): (usize, usize), action: usize) -> (usize, usize) {
        let (dx, dy) = MOVES[action];
        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
        if nx < 0 || ny < 0 {
            return (x, y);
        }
        let next = (nx as usize, ny as usize);
        if self.is_open(next) {
            next
        } else {
            (x, y)
        }
    }

    /// One slip-perturbed move. Returns `(next_cell, reward, reached_goal)`.
    pub fn transition<R: Rng + ?Sized>(
        &self,
        cell: (usize, usize),
        action: usize,
        rng: &mut R,
    ) -> ((usize, usize), f64, bool) {
        let slipped = rng.random::<f64>() < self.slip_prob;
        let action = if slipped { rng.random_range(0..4) } else { action };
        let next = self.target(cell, action);
        if next == self.goal {
            (next, self.goal_reward, true)
        } else {
            (next, self.step_reward, false)
        }
    }

    pub fn open_cells(&self) -> Vec<(usize, usize)> {
        let mut cells = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if self.is_open((x, y)) {
                    cells.push((x, y));
                }
            }
        }
        cells
    }

    /// Valid start cells: open and not the goal.
    pub fn start_cells(&self) -> Vec<(usize, usize)> {
        self.open_cells().into_iter().filter(|&c| c != self.goal).collect()
    }

    /// BFS step counts to the goal, `None` where unreachable. Indexed `y * width + x`.
    pub fn distances(&self) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.width * self.height];
        let idx = |(x, y): (usize, usize)| y * self.width + x;
        let mut queue = VecDeque::new();
        dist[idx(self.goal)] = Some(0);
        queue.push_back(self.goal);
        while let Some(cell) = queue.pop_front() {
            let d = dist[idx(cell)].unwrap();
            for a in 0..4 {
                let n = self.target(cell, a);
                if n != cell && dist[idx(n)].is_none() {
                    dist[idx(n)] = Some(d + 1);
                    queue.push_back(n);
                }
            }
        }
        dist
    }

    /// Lowest-index action that shortens the path to the goal (0 when none does).
    pub fn shortest_path_action(&self, cell: (usize, usize), dist: &[Option<usize>]) -> usize {
        let here = dist[cell.1 * self.width + cell.0];
        let Some(d) = here else { return 0 };
        (0..4)
            .find(|&a| {
                let (x, y) = self.target(cell, a);
                d > 0 && dist[y * self.width + x] == Some(d - 1)
            })
            .unwrap_or(0)
    }

    pub fn state_index(&self, cell: (usize, usize)) -> Option<usize> {
        self.open_cells().iter().position(|&c| c == cell)
    }

    /// Exact tabular form over open cells (in row-major order). The goal is
    /// absorbing with zero reward, matching episode termination. Actions are
    /// embedded at the midpoints of the unit square's edges.
    pub fn to_tabular(&self, gamma: f64) -> Result<TabularMdp> {
        self.validate()?;
        let cells = self.open_cells();
        let ns = cells.len();
        let index = |c: (usize, usize)| cells.iter().position(|&o| o == c).unwrap();
        let mut p = vec![0.0; ns * 4 * ns];
        let mut r = vec![0.0; ns * 4];
        for (s, &cell) in cells.iter().enumerate() {
            for a in 0..4 {
                let row = &mut p[(s * 4 + a) * ns..(s * 4 + a + 1) * ns];
                if cell == self.goal {
                    row[s] = 1.0;
                    continue;
                }
                row[index(self.target(cell, a))] += 1.0 - self.slip_prob;
                for b in 0..4 {
                    row[index(self.target(cell, b))] += self.slip_prob / 4.0;
                }
                let g = index(self.goal);
                r[s * 4 + a] = row[g] * self.goal_reward + (1.0 - row[g]) * self.step_reward;
            }
        }
        let embedding = vec![0.5, 1.0, 1.0, 0.5, 0.5, 0.0, 0.0, 0.5];
        let mut rho = vec![0.0; ns];
        let starts = self.start_cells();
        for &c in &starts {
            rho[index(c)] = 1.0 / starts.len() as f64;
        }
        TabularMdp::new(ns, 4, p, r, self.r_max(), gamma, rho, embedding, 2)
    }

    /// Tabular transitions and the observed support of a gridworld dataset.
    ///
    /// States never visited get their shortest-path action as support so the
    /// mask stays valid.
    pub fn tabular_view(&self, data: &TransitionDataset) -> Result<(Vec<Transition>, SupportMask)> {
        let cells = self.open_cells();
        let locate = |o: &[f32]| -> Result<usize> {
            let cell = (o[0] as usize, o[1] as usize);
            cells
                .iter()
                .position(|&c| c == cell && o[0] >= 0.0 && o[1] >= 0.0)
                .ok_or_else(|| Error::InvalidConfig(format!("observation {o:?} is not an open cell")))
        };
        let mut mask = vec![false; cells.len() * 4];
        let mut out = Vec::with_capacity(data.len());
        for i in 0..data.len() {
            let s = locate(data.observation(i))?;
            let a = argmax(data.action(i));
            let next_state = locate(data.next_observation(i))?;
            mask[s * 4 + a] = true;
            out.push(Transition { state: s, action: a, reward: data.rewards()[i] as f64, next_state });
        }
        let dist = self.distances();
        for (s, &cell) in cells.iter().enumerate() {
            if !mask[s * 4..s * 4 + 4].iter().any(|&m| m) {
                mask[s * 4 + self.shortest_path_action(cell, &dist)] = true;
            }
        }
        Ok((out, SupportMask::new(cells.len(), 4, mask)?))
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
