//! Deterministic tabular gridworlds.
//!
//! States are the non-wall cells of a grid, indexed row-major with row 0 at
//! the top. Moving into a wall or off the grid leaves the agent in place. The
//! reward of a transition is the ground-truth reward of the state it enters.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Grid cell as `(row, col)`.
pub type Cell = (usize, usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    fn offset(self) -> (isize, isize) {
        match self {
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub next_state: usize,
}

impl Transition {
    pub fn new(state: usize, action: usize, next_state: usize) -> Self {
        Self {
            state,
            action,
            next_state,
        }
    }
}

/// The environment names accepted on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EnvName {
    StayInside,
    TinyRoom,
}

impl EnvName {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvName::StayInside => "stay_inside",
            EnvName::TinyRoom => "tiny_room",
        }
    }

    pub fn build(self) -> TabularMdp {
        match self {
            EnvName::StayInside => build_stay_inside(),
            EnvName::TinyRoom => build_tiny_room(),
        }
    }
}

impl fmt::Display for EnvName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stay_inside" => Ok(EnvName::StayInside),
            "tiny_room" => Ok(EnvName::TinyRoom),
            other => Err(Error::InvalidArgument(format!(
                "unknown environment `{other}` (expected stay_inside or tiny_room)"
            ))),
        }
    }
}

/// Everything an agent may observe about an MDP: the dynamics without the
/// ground-truth reward. Learners only ever receive this half.
#[derive(Clone, Debug)]
pub struct Dynamics {
    num_states: usize,
    num_actions: usize,
    next: Vec<usize>,
    initial: Vec<f64>,
    initial_sampler: WeightedIndex<f64>,
    horizon: usize,
}

impl Dynamics {
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn initial_distribution(&self) -> &[f64] {
        &self.initial
    }

    /// Successor of `(state, action)`. Panics on out-of-range indices.
    #[inline]
    pub fn next_state(&self, state: usize, action: usize) -> usize {
        assert!(state < self.num_states && action < self.num_actions);
        self.next[state * self.num_actions + action]
    }

    pub fn try_next_state(&self, state: usize, action: usize) -> Result<usize> {
        self.check(state, action)?;
        Ok(self.next[state * self.num_actions + action])
    }

    pub fn transition(&self, state: usize, action: usize) -> Transition {
        Transition::new(state, action, self.next_state(state, action))
    }

    /// All `(s, a, s')` triples the dynamics can produce, state-major.
    pub fn feasible_transitions(&self) -> impl Iterator<Item = Transition> + '_ {
        (0..self.num_states)
            .flat_map(move |s| (0..self.num_actions).map(move |a| self.transition(s, a)))
    }

    pub fn sample_initial(&self, rng: &mut Rng) -> usize {
        self.initial_sampler.sample(rng)
    }

    fn check(&self, state: usize, action: usize) -> Result<()> {
        if state >= self.num_states {
            return Err(Error::IndexOutOfRange {
                what: "state",
                index: state,
                bound: self.num_states,
            });
        }
        if action >= self.num_actions {
            return Err(Error::IndexOutOfRange {
                what: "action",
                index: action,
                bound: self.num_actions,
            });
        }
        Ok(())
    }
}

/// Cell geometry retained for grid-based MDPs.
#[derive(Clone, Debug)]
pub struct GridGeometry {
    pub width: usize,
    pub height: usize,
    cells: Vec<Cell>,
    index: BTreeMap<Cell, usize>,
}

impl GridGeometry {
    pub fn cell_of(&self, state: usize) -> Cell {
        self.cells[state]
    }

    pub fn state_of(&self, cell: Cell) -> Option<usize> {
        self.index.get(&cell).copied()
    }
}

#[derive(Clone, Debug)]
pub struct TabularMdp {
    name: String,
    dynamics: Dynamics,
    gt_reward: Vec<f64>,
    discount: f64,
    grid: Option<GridGeometry>,
}

impl TabularMdp {
    /// Build an MDP from a flat transition table indexed `state * num_actions + action`.
    pub fn new(
        name: impl Into<String>,
        num_actions: usize,
        transitions: Vec<usize>,
        gt_reward: Vec<f64>,
        discount: f64,
        initial: Vec<f64>,
        horizon: usize,
    ) -> Result<Self> {
        let num_states = gt_reward.len();
        if num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidMdp("state and action spaces must be non-empty".into()));
        }
        if transitions.len() != num_states * num_actions {
            return Err(Error::InvalidMdp(format!(
                "transition table has {} entries, expected {}",
                transitions.len(),
                num_states * num_actions
            )));
        }
        if let Some(&bad) = transitions.iter().find(|&&s| s >= num_states) {
            return Err(Error::InvalidMdp(format!("transition to invalid state {bad}")));
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::InvalidMdp(format!("discount {discount} outside (0, 1)")));
        }
        if gt_reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidMdp("ground-truth reward must be finite".into()));
        }
        if initial.len() != num_states || initial.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidMdp("initial distribution malformed".into()));
        }
        let total: f64 = initial.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMdp(format!("initial distribution sums to {total}")));
        }
        if horizon == 0 {
            return Err(Error::InvalidMdp("horizon must be positive".into()));
        }
        let initial_sampler = WeightedIndex::new(&initial)
            .map_err(|e| Error::InvalidMdp(format!("initial distribution: {e}")))?;
        Ok(Self {
            name: name.into(),
            dynamics: Dynamics {
                num_states,
                num_actions,
                next: transitions,
                initial,
                initial_sampler,
                horizon,
            },
            gt_reward,
            discount,
            grid: None,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn num_states(&self) -> usize {
        self.dynamics.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.dynamics.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.dynamics.horizon
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn gt_reward(&self) -> &[f64] {
        &self.gt_reward
    }

    pub fn grid(&self) -> Option<&GridGeometry> {
        self.grid.as_ref()
    }

    /// Ground-truth reward of a transition: the reward of the entered state.
    pub fn gt_transition_reward(&self, t: &Transition) -> f64 {
        self.gt_reward[t.next_state]
    }

    pub fn step(&self, state: usize, action: usize) -> Result<(usize, f64)> {
        let next = self.dynamics.try_next_state(state, action)?;
        Ok((next, self.gt_reward[next]))
    }

    /// Same MDP with a different initial-state distribution.
    pub fn with_initial(self, initial: Vec<f64>) -> Result<Self> {
        let TabularMdp { name, dynamics, gt_reward, discount, grid } = self;
        let mut mdp = TabularMdp::new(name, dynamics.num_actions, dynamics.next, gt_reward, discount, initial, dynamics.horizon)?;
        mdp.grid = grid;
        Ok(mdp)
    }

    /// Same MDP with a different episode length.
    pub fn with_horizon(mut self, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidMdp("horizon must be positive".into()));
        }
        self.dynamics.horizon = horizon;
        Ok(self)
    }

    /// Reward map as CSV, one grid row per line. Wall cells are left empty.
    pub fn reward_map_csv(&self) -> Option<String> {
        self.grid.as_ref().map(|g| grid_csv(g, |s| self.gt_reward[s]))
    }
}

/// Render a per-state quantity as a row-major CSV grid; walls are empty fields.
pub fn grid_csv(grid: &GridGeometry, value: impl Fn(usize) -> f64) -> String {
    let mut out = String::new();
    for row in 0..grid.height {
        let fields: Vec<String> = (0..grid.width)
            .map(|col| match grid.state_of((row, col)) {
                Some(s) => format!("{}", value(s)),
                None => String::new(),
            })
            .collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub walls: BTreeSet<Cell>,
    /// Cells absent from the map carry reward 0.
    pub reward_map: BTreeMap<Cell, f64>,
    pub start_cells: BTreeSet<Cell>,
}

impl GridSpec {
    pub fn build(&self, name: &str, discount: f64, horizon: usize) -> Result<TabularMdp> {
        let in_grid = |&(r, c): &Cell| r < self.height && c < self.width;
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidMdp("grid must be non-empty".into()));
        }
        if let Some(c) = self.start_cells.iter().find(|c| self.walls.contains(c) || !in_grid(c)) {
            return Err(Error::InvalidMdp(format!("start cell {c:?} is a wall or off-grid")));
        }
        if let Some((c, _)) = self
            .reward_map
            .iter()
            .find(|(c, r)| **r != 0.0 && (self.walls.contains(c) || !in_grid(c)))
        {
            return Err(Error::InvalidMdp(format!("reward cell {c:?} is a wall or off-grid")));
        }
        if self.start_cells.is_empty() {
            return Err(Error::InvalidMdp("no start cells".into()));
        }

        let mut cells = Vec::new();
        let mut index = BTreeMap::new();
        for row in 0..self.height {
            for col in 0..self.width {
                if !self.walls.contains(&(row, col)) {
                    index.insert((row, col), cells.len());
                    cells.push((row, col));
                }
            }
        }

        let num_actions = Action::ALL.len();
        let mut transitions = Vec::with_capacity(cells.len() * num_actions);
        for &(row, col) in &cells {
            for action in Action::ALL {
                let (dr, dc) = action.offset();
                let target = row
                    .checked_add_signed(dr)
                    .zip(col.checked_add_signed(dc))
                    .filter(|&(r, c)| r < self.height && c < self.width)
                    .and_then(|cell| index.get(&cell).copied());
                transitions.push(target.unwrap_or(index[&(row, col)]));
            }
        }

        let gt_reward = cells
            .iter()
            .map(|c| self.reward_map.get(c).copied().unwrap_or(0.0))
            .collect();
        let p = 1.0 / self.start_cells.len() as f64;
        let mut initial = vec![0.0; cells.len()];
        for c in &self.start_cells {
            initial[index[c]] = p;
        }
        // Re-normalize so the sum is exactly 1 for any start-set size.
        let total: f64 = initial.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            initial.iter_mut().for_each(|x| *x /= total);
        }

        let mut mdp = TabularMdp::new(name, num_actions, transitions, gt_reward, discount, initial, horizon)?;
        mdp.grid = Some(GridGeometry {
            width: self.width,
            height: self.height,
            cells,
            index,
        });
        Ok(mdp)
    }
}

pub const DEFAULT_DISCOUNT: f64 = 0.99;
pub const DEFAULT_HORIZON: usize = 100;

pub const STAY_INSIDE_SIZE: usize = 20;
/// Row holding the dividing wall; rows above are outside, rows below inside.
pub const STAY_INSIDE_WALL_ROW: usize = 9;
pub const STAY_INSIDE_GAP: [usize; 2] = [9, 10];
pub const INSIDE_REWARD: f64 = 10.0;
pub const OUTSIDE_REWARD: f64 = -1.0;

pub fn stay_inside_spec() -> GridSpec {
    let n = STAY_INSIDE_SIZE;
    let walls: BTreeSet<Cell> = (0..n)
        .filter(|c| !STAY_INSIDE_GAP.contains(c))
        .map(|c| (STAY_INSIDE_WALL_ROW, c))
        .collect();
    let mut reward_map = BTreeMap::new();
    for row in 0..n {
        for col in 0..n {
            let r = match row.cmp(&STAY_INSIDE_WALL_ROW) {
                std::cmp::Ordering::Less => OUTSIDE_REWARD,
                std::cmp::Ordering::Greater => INSIDE_REWARD,
                std::cmp::Ordering::Equal => continue,
            };
            reward_map.insert((row, col), r);
        }
    }
    let start_cells = (0..n)
        .flat_map(|r| (0..n).map(move |c| (r, c)))
        .filter(|c| !walls.contains(c))
        .collect();
    GridSpec {
        width: n,
        height: n,
        walls,
        reward_map,
        start_cells,
    }
}

/// 20x20 grid split by a wall row with a two-cell gap. The bottom half
/// ("inside") pays +10 per step, the top half ("outside") -1, gap cells 0.
pub fn build_stay_inside() -> TabularMdp {
    stay_inside_spec()
        .build(EnvName::StayInside.as_str(), DEFAULT_DISCOUNT, DEFAULT_HORIZON)
        .expect("stay-inside layout is valid")
}

pub const TINY_ROOM_SIZE: usize = 10;
pub const TINY_ROOM_GOAL_REWARD: f64 = 10.0;

pub fn tiny_room_spec() -> GridSpec {
    let n = TINY_ROOM_SIZE;
    GridSpec {
        width: n,
        height: n,
        walls: BTreeSet::new(),
        reward_map: BTreeMap::from([((n - 1, n - 1), TINY_ROOM_GOAL_REWARD)]),
        start_cells: BTreeSet::from([(n - 1, 0)]),
    }
}

/// 10x10 open room; start in the lower-left cell, reward 10 in the lower-right.
pub fn build_tiny_room() -> TabularMdp {
    tiny_room_spec()
        .build(EnvName::TinyRoom.as_str(), DEFAULT_DISCOUNT, DEFAULT_HORIZON)
        .expect("tiny-room layout is valid")
}

pub fn one_hot(state: usize, num_states: usize) -> Result<Vec<f64>> {
    if state >= num_states {
        return Err(Error::IndexOutOfRange {
            what: "state",
            index: state,
            bound: num_states,
        });
    }
    let mut v = vec![0.0; num_states];
    v[state] = 1.0;
    Ok(v)
}

/// A stochastic policy over a finite action set.
pub trait Policy {
    fn num_actions(&self) -> usize;

    /// Write the action distribution at `state` into `out` (length `num_actions`).
    fn action_probabilities(&self, state: usize, out: &mut [f64]);

    fn sample_action(&self, state: usize, rng: &mut Rng) -> usize {
        let mut probs = [0.0; 8];
        let n = self.num_actions();
        if n <= probs.len() {
            self.action_probabilities(state, &mut probs[..n]);
            rng::categorical(rng, &probs[..n])
        } else {
            let mut probs = vec![0.0; n];
            self.action_probabilities(state, &mut probs);
            rng::categorical(rng, &probs)
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct UniformPolicy {
    pub num_actions: usize,
}

impl Policy for UniformPolicy {
    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn action_probabilities(&self, _state: usize, out: &mut [f64]) {
        out.fill(1.0 / self.num_actions as f64);
    }

    fn sample_action(&self, _state: usize, rng: &mut Rng) -> usize {
        rng::index(rng, self.num_actions)
    }
}

/// One episode of exactly `horizon` transitions from an initial-state draw.
pub fn rollout(
    dynamics: &Dynamics,
    policy: &impl Policy,
    horizon: usize,
    rng: &mut Rng,
) -> Result<Vec<Transition>> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("rollout horizon must be positive".into()));
    }
    let mut state = dynamics.sample_initial(rng);
    let mut episode = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let action = policy.sample_action(state, rng);
        let t = dynamics.transition(state, action);
        state = t.next_state;
        episode.push(t);
    }
    Ok(episode)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Greedy(Vec<usize>);

    impl Policy for Greedy {
        fn num_actions(&self) -> usize {
            4
        }
        fn action_probabilities(&self, state: usize, out: &mut [f64]) {
            out.fill(0.0);
            out[self.0[state]] = 1.0;
        }
    }

    #[test]
    fn stay_inside_shape_and_rewards() {
        let mdp = build_stay_inside();
        assert_eq!(mdp.num_actions(), 4);
        // 400 cells minus 18 wall cells.
        assert_eq!(mdp.num_states(), 400 - 18);
        let min = mdp.gt_reward().iter().cloned().fold(f64::INFINITY, f64::min);
        let max = mdp.gt_reward().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!((min, max), (-1.0, 10.0));
        assert_eq!(mdp.discount(), 0.99);
        let total: f64 = mdp.dynamics().initial_distribution().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stay_inside_wall_blocks_up_move() {
        let mdp = build_stay_inside();
        let grid = mdp.grid().unwrap();
        let below_wall = grid.state_of((STAY_INSIDE_WALL_ROW + 1, 3)).unwrap();
        let (next, r) = mdp.step(below_wall, Action::Up.index()).unwrap();
        assert_eq!(next, below_wall);
        assert_eq!(r, INSIDE_REWARD);
        let gap_below = grid.state_of((STAY_INSIDE_WALL_ROW + 1, 9)).unwrap();
        let (next, r) = mdp.step(gap_below, Action::Up.index()).unwrap();
        assert_eq!(grid.cell_of(next), (STAY_INSIDE_WALL_ROW, 9));
        assert_eq!(r, 0.0);
    }

    #[test]
    fn stay_inside_halves_only_connect_through_gap() {
        let mdp = build_stay_inside();
        let grid = mdp.grid().unwrap();
        for t in mdp.dynamics().feasible_transitions() {
            let (r0, c0) = grid.cell_of(t.state);
            let (r1, _) = grid.cell_of(t.next_state);
            let crosses = (r0 < STAY_INSIDE_WALL_ROW) != (r1 < STAY_INSIDE_WALL_ROW)
                || (r0 > STAY_INSIDE_WALL_ROW) != (r1 > STAY_INSIDE_WALL_ROW);
            if crosses {
                assert!(STAY_INSIDE_GAP.contains(&c0), "{t:?} crosses the wall");
            }
        }
    }

    #[test]
    fn stay_inside_move_left_inside() {
        let mdp = build_stay_inside();
        let grid = mdp.grid().unwrap();
        let s = grid.state_of((15, 5)).unwrap();
        let (next, r) = mdp.step(s, Action::Left.index()).unwrap();
        assert_eq!(grid.cell_of(next), (15, 4));
        assert_eq!(r, 10.0);
    }

    #[test]
    fn tiny_room_layout() {
        let mdp = build_tiny_room();
        let grid = mdp.grid().unwrap();
        assert_eq!(mdp.num_states(), 100);
        let goal = grid.state_of((9, 9)).unwrap();
        let start = grid.state_of((9, 0)).unwrap();
        assert_eq!(mdp.gt_reward()[goal], 10.0);
        assert_eq!(mdp.gt_reward()[start], 0.0);
        assert_eq!(mdp.gt_reward().iter().filter(|&&r| r != 0.0).count(), 1);
        assert_eq!(mdp.dynamics().initial_distribution()[start], 1.0);
        let left_of_goal = grid.state_of((9, 8)).unwrap();
        assert_eq!(mdp.step(left_of_goal, Action::Right.index()).unwrap(), (goal, 10.0));
        // Bumping the corner wall keeps the agent (and its reward) in place.
        assert_eq!(mdp.step(start, Action::Down.index()).unwrap(), (start, 0.0));
    }

    #[test]
    fn transitions_stay_in_range() {
        for mdp in [build_stay_inside(), build_tiny_room()] {
            for t in mdp.dynamics().feasible_transitions() {
                assert!(t.next_state < mdp.num_states());
            }
        }
    }

    #[test]
    fn step_rejects_bad_indices() {
        let mdp = build_tiny_room();
        assert!(matches!(mdp.step(100, 0), Err(Error::IndexOutOfRange { what: "state", .. })));
        assert!(matches!(mdp.step(0, 4), Err(Error::IndexOutOfRange { what: "action", .. })));
    }

    #[test]
    fn one_hot_examples() {
        assert_eq!(one_hot(2, 4).unwrap(), vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(one_hot(0, 1).unwrap(), vec![1.0]);
        assert!(one_hot(4, 4).is_err());
        for s in 0..7 {
            assert_eq!(one_hot(s, 7).unwrap().iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn greedy_rollout_reaches_goal_in_nine_steps() {
        let mdp = build_tiny_room();
        let policy = Greedy(vec![Action::Right.index(); mdp.num_states()]);
        let mut rng = rng::seeded(0);
        let episode = rollout(mdp.dynamics(), &policy, 30, &mut rng).unwrap();
        assert_eq!(episode.len(), 30);
        let goal = mdp.grid().unwrap().state_of((9, 9)).unwrap();
        let first = episode.iter().position(|t| t.next_state == goal).unwrap();
        assert_eq!(first + 1, 9);
        for w in episode.windows(2) {
            assert_eq!(w[0].next_state, w[1].state);
        }
    }

    #[test]
    fn rollout_is_deterministic_under_seed() {
        let mdp = build_stay_inside();
        let policy = UniformPolicy { num_actions: 4 };
        let a = rollout(mdp.dynamics(), &policy, 100, &mut rng::seeded(5)).unwrap();
        let b = rollout(mdp.dynamics(), &policy, 100, &mut rng::seeded(5)).unwrap();
        assert_eq!(a, b);
        assert!(rollout(mdp.dynamics(), &policy, 0, &mut rng::seeded(5)).is_err());
    }

    #[test]
    fn grid_spec_rejects_walled_start() {
        let mut spec = tiny_room_spec();
        spec.walls.insert((9, 0));
        assert!(spec.build("x", 0.99, 10).is_err());
    }

    #[test]
    fn reward_map_csv_marks_walls() {
        let csv = build_stay_inside().reward_map_csv().unwrap();
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows.len(), 20);
        assert_eq!(rows[0].split(',').next(), Some("-1"));
        let wall: Vec<&str> = rows[STAY_INSIDE_WALL_ROW].split(',').collect();
        assert_eq!(wall[0], "");
        assert_eq!(wall[9], "0");
        assert_eq!(rows[19].split(',').last(), Some("10"));
    }
}
