//! Small gridworlds that come with their exact `TabularMdp`.
//!
//! Cells are indexed `y * width + x`. Acting in the goal cell pays
//! `goal_reward` and moves to an extra absorbing exit state, so the value
//! of a cell at shortest distance `k` from the goal is `gamma^k * R`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EnvId, EnvSpec, Environment, Phase, StepResult};
use crate::error::{Error, Result};
use crate::mdp::{TabularMdp, MAX_STATES};

pub const MAX_SIDE: usize = 8;
const MOVES: [(i64, i64); 4] = [(0, 1), (0, -1), (-1, 0), (1, 0)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridEncoding {
    OneHot,
    Xy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub start: (usize, usize),
    pub goal: (usize, usize),
    pub goal_reward: f64,
    /// Probability that a move is replaced by a uniformly random direction.
    pub slip: f64,
    pub gamma: f64,
    pub horizon: usize,
    pub encoding: GridEncoding,
}

impl GridSpec {
    /// `1 x n` corridor, start on the left, goal on the right.
    pub fn corridor(length: usize) -> Self {
        Self {
            width: length,
            height: 1,
            start: (0, 0),
            goal: (length - 1, 0),
            goal_reward: 1.0,
            slip: 0.0,
            gamma: 0.9,
            horizon: 200,
            encoding: GridEncoding::Xy,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.width * self.height
    }

    /// Index of the absorbing exit state.
    pub fn exit_state(&self) -> usize {
        self.n_cells()
    }

    pub fn validate(&self) -> Result<()> {
        let fits = |(x, y): (usize, usize)| x < self.width && y < self.height;
        if self.width == 0 || self.height == 0 || self.width > MAX_SIDE || self.height > MAX_SIDE {
            return Err(Error::Config(format!("grid sides must be in 1..={MAX_SIDE}")));
        }
        if self.n_cells() + 1 > MAX_STATES {
            return Err(Error::Config(format!(
                "grid has {} cells; at most {} fit with the exit state",
                self.n_cells(),
                MAX_STATES - 1
            )));
        }
        if !fits(self.start) || !fits(self.goal) {
            return Err(Error::Config("start/goal outside the grid".into()));
        }
        if !(0.0..=1.0).contains(&self.slip) || !(0.0..1.0).contains(&self.gamma) || self.horizon == 0 {
            return Err(Error::Config("slip in [0,1], gamma in [0,1), horizon >= 1 required".into()));
        }
        Ok(())
    }

    fn cell(&self, (x, y): (usize, usize)) -> usize {
        y * self.width + x
    }

    fn moved(&self, cell: usize, dir: usize) -> usize {
        let (x, y) = ((cell % self.width) as i64, (cell / self.width) as i64);
        let (dx, dy) = MOVES[dir];
        let nx = (x + dx).clamp(0, self.width as i64 - 1) as usize;
        let ny = (y + dy).clamp(0, self.height as i64 - 1) as usize;
        self.cell((nx, ny))
    }

    pub fn decoder(&self) -> StateDecoder {
        match self.encoding {
            GridEncoding::OneHot => StateDecoder::OneHot { n_cells: self.n_cells() },
            GridEncoding::Xy => StateDecoder::Xy { width: self.width },
        }
    }

    /// The exact MDP: 4 moves (up, down, left, right), slip noise, goal exit.
    pub fn to_mdp(&self) -> Result<TabularMdp> {
        self.validate()?;
        let n = self.n_cells() + 1;
        let exit = self.exit_state();
        let goal = self.cell(self.goal);
        let mut transition = vec![vec![vec![0.0; n]; 4]; n];
        let mut reward = vec![vec![0.0; 4]; n];
        for s in 0..n {
            for a in 0..4 {
                let row = &mut transition[s][a];
                if s == exit || s == goal {
                    row[exit] = 1.0;
                    if s == goal {
                        reward[s][a] = self.goal_reward;
                    }
                    continue;
                }
                row[self.moved(s, a)] += 1.0 - self.slip;
                for dir in 0..4 {
                    row[self.moved(s, dir)] += self.slip / 4.0;
                }
            }
        }
        let mut start = vec![0.0; n];
        start[self.cell(self.start)] = 1.0;
        TabularMdp::new(self.gamma, start, transition, reward)
    }
}

/// Recovers the cell index from gridworld features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateDecoder {
    OneHot { n_cells: usize },
    Xy { width: usize },
}

impl StateDecoder {
    pub fn decode(&self, features: &[f64]) -> usize {
        match *self {
            StateDecoder::OneHot { n_cells } => crate::mdp::argmax(&features[..n_cells]),
            StateDecoder::Xy { width } => {
                features[1].round() as usize * width + features[0].round() as usize
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridWorld {
    grid: GridSpec,
    spec: EnvSpec,
    mdp: TabularMdp,
    rng: ChaCha8Rng,
    state: usize,
    t: usize,
    phase: Phase,
}

impl GridWorld {
    pub fn new(grid: GridSpec, seed: u64) -> Result<Self> {
        let mdp = grid.to_mdp()?;
        let obs_dim = match grid.encoding {
            GridEncoding::OneHot => grid.n_cells(),
            GridEncoding::Xy => 2,
        };
        Ok(Self {
            spec: EnvSpec { id: EnvId::Gridworld, n_actions: 4, obs_dim, horizon: grid.horizon, gamma: grid.gamma },
            mdp,
            grid,
            rng: ChaCha8Rng::seed_from_u64(seed),
            state: 0,
            t: 0,
            phase: Phase::NeedsReset,
        })
    }

    pub fn mdp(&self) -> &TabularMdp {
        &self.mdp
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn state_index(&self) -> usize {
        self.state
    }

    pub fn features(&self, cell: usize) -> Vec<f64> {
        match self.grid.encoding {
            GridEncoding::OneHot => {
                let mut f = vec![0.0; self.grid.n_cells()];
                if cell < f.len() {
                    f[cell] = 1.0;
                }
                f
            }
            GridEncoding::Xy => vec![(cell % self.grid.width) as f64, (cell / self.grid.width) as f64],
        }
    }

    fn sample_next(&mut self, row: &[f64]) -> usize {
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        for (t, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return t;
            }
        }
        // Rounding: fall back to the last state with mass.
        row.iter().rposition(|p| *p > 0.0).unwrap_or(0)
    }
}

impl Environment for GridWorld {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self) -> Vec<f64> {
        let start = self.mdp.start_dist().to_vec();
        self.state = self.sample_next(&start);
        self.t = 0;
        self.phase = Phase::Running;
        self.features(self.state)
    }

    fn reset_exploring(&mut self) -> Vec<f64> {
        self.state = self.rng.random_range(0..self.grid.n_cells());
        self.t = 0;
        self.phase = Phase::Running;
        self.features(self.state)
    }

    fn reset_to(&mut self, obs: &[f64]) -> Result<Vec<f64>> {
        if obs.len() != self.spec.obs_dim {
            return Err(Error::Env("gridworld features have the wrong length".into()));
        }
        let cell = self.grid.decoder().decode(obs);
        if cell >= self.grid.n_cells() {
            return Err(Error::Env(format!("cell {cell} outside the grid")));
        }
        self.state = cell;
        self.t = 0;
        self.phase = Phase::Running;
        Ok(self.features(cell))
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        self.phase.check_step(action, self.spec.n_actions)?;
        let reward = self.mdp.reward(self.state, action);
        let row = self.mdp.transition(self.state, action).to_vec();
        self.state = self.sample_next(&row);
        self.t += 1;
        let terminated = self.state == self.grid.exit_state();
        let truncated = !terminated && self.t >= self.spec.horizon;
        if terminated || truncated {
            self.phase = Phase::Done;
        }
        Ok(StepResult { next_obs: self.features(self.state), reward, terminated, truncated })
    }

    fn feature_names(&self) -> Vec<String> {
        match self.grid.encoding {
            GridEncoding::OneHot => (0..self.grid.n_cells()).map(|c| format!("cell_{c}")).collect(),
            GridEncoding::Xy => vec!["x".into(), "y".into()],
        }
    }
}
