//! Relearning evaluation and EPIC reward distance.

use crate::env::{rollout, Policy, TabularMdp, Transition};
use crate::error::{Error, Result};
use crate::reward::{GroundTruth, RewardSource};
use crate::rng::Rng;
use crate::solver::{
    evaluate_return, expected_return, reward_table, soft_value_iteration, SoftQPolicy, SOFT_VI_TOLERANCE,
};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

/// A reward over every `(s, a, s')` triple, feasible or not.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardTable {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
}

impl RewardTable {
    pub fn from_fn(num_states: usize, num_actions: usize, f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(num_states * num_actions * num_states);
        for s in 0..num_states {
            for a in 0..num_actions {
                for s2 in 0..num_states {
                    values.push(f(s, a, s2));
                }
            }
        }
        Self { num_states, num_actions, values }
    }

    pub fn from_source(num_states: usize, num_actions: usize, source: &impl RewardSource) -> Self {
        Self::from_fn(num_states, num_actions, |s, a, s2| source.reward(&Transition::new(s, a, s2)))
    }

    /// Reward credited on arrival: `R(s, a, s') = r(s')`.
    pub fn from_state_reward(num_actions: usize, reward: &[f64]) -> Self {
        Self::from_fn(reward.len(), num_actions, |_, _, s2| reward[s2])
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn idx(&self, s: usize, a: usize, s2: usize) -> usize {
        (s * self.num_actions + a) * self.num_states + s2
    }

    pub fn get(&self, s: usize, a: usize, s2: usize) -> f64 {
        self.values[self.idx(s, a, s2)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mean of `R(x, ·, ·)` for each `x`.
    fn outgoing_means(&self) -> Vec<f64> {
        let block = self.num_actions * self.num_states;
        self.values
            .chunks(block)
            .map(|c| c.iter().sum::<f64>() / block as f64)
            .collect()
    }
}

/// Potential-shaping-invariant form of a reward, with auxiliary states and
/// actions drawn independently and uniformly:
/// `C(R)(s,a,s') = R(s,a,s') + γ·g(s') − g(s) − γ·mean(g)` where `g(x)` is
/// the mean reward leaving `x`.
pub fn canonicalize(table: &RewardTable, discount: f64) -> RewardTable {
    let shift = Shift::new(table, discount);
    RewardTable::from_fn(table.num_states, table.num_actions, |s, a, s2| shift.apply(table, s, a, s2))
}

struct Shift {
    g: Vec<f64>,
    c: f64,
    discount: f64,
}

impl Shift {
    fn new(table: &RewardTable, discount: f64) -> Self {
        let g = table.outgoing_means();
        let c = g.iter().sum::<f64>() / g.len() as f64;
        Self { g, c, discount }
    }

    fn apply(&self, table: &RewardTable, s: usize, a: usize, s2: usize) -> f64 {
        table.get(s, a, s2) + self.discount * self.g[s2] - self.g[s] - self.discount * self.c
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CoverageKind {
    Uniform,
    Expert,
}

impl CoverageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CoverageKind::Uniform => "uniform",
            CoverageKind::Expert => "expert",
        }
    }
}

impl fmt::Display for CoverageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CoverageKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(CoverageKind::Uniform),
            "expert" => Ok(CoverageKind::Expert),
            other => Err(Error::InvalidArgument(format!("unknown coverage kind {other:?}"))),
        }
    }
}

/// Weighted transitions over which rewards are compared.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverageDistribution {
    pub kind: CoverageKind,
    pub samples: Vec<(Transition, f64)>,
}

impl CoverageDistribution {
    pub fn total_weight(&self) -> f64 {
        self.samples.iter().map(|(_, w)| w).sum()
    }
}

/// Every `(s, a)` with its successor, equally weighted.
pub fn uniform_coverage(mdp: &TabularMdp) -> CoverageDistribution {
    let w = 1.0 / (mdp.num_states() * mdp.num_actions()) as f64;
    CoverageDistribution {
        kind: CoverageKind::Uniform,
        samples: mdp.dynamics().feasible_transitions().map(|t| (t, w)).collect(),
    }
}

pub const EXPERT_TEMPERATURE: f64 = 10.0;
pub const EXPERT_ROLLOUTS: usize = 200;

/// Empirical transition distribution of the true soft-optimal policy at
/// `temperature`.
pub fn expert_coverage(
    mdp: &TabularMdp,
    temperature: f64,
    num_rollouts: usize,
    horizon: usize,
    rng: &mut Rng,
) -> Result<CoverageDistribution> {
    if num_rollouts == 0 {
        return Err(Error::InvalidArgument("expert coverage needs at least one rollout".into()));
    }
    let policy = soft_optimal_policy(mdp, temperature)?;
    let mut counts: BTreeMap<Transition, usize> = BTreeMap::new();
    for _ in 0..num_rollouts {
        for t in rollout(mdp.dynamics(), &policy, horizon, rng)? {
            *counts.entry(t).or_default() += 1;
        }
    }
    let total = (num_rollouts * horizon) as f64;
    Ok(CoverageDistribution {
        kind: CoverageKind::Expert,
        samples: counts.into_iter().map(|(t, n)| (t, n as f64 / total)).collect(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpicConfig {
    pub coverage: CoverageDistribution,
    pub discount: f64,
}

/// Weighted centered and normalized values; `None` if the variance vanishes.
fn standardize(values: &[f64], weights: &[f64], scale: f64) -> Option<Vec<f64>> {
    let total: f64 = weights.iter().sum();
    let mean = values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total;
    let var = values.iter().zip(weights).map(|(v, w)| w * (v - mean).powi(2)).sum::<f64>() / total;
    let std = var.sqrt();
    if !(std > 1e-12 * scale) {
        return None;
    }
    Some(values.iter().map(|v| (v - mean) / std).collect())
}

/// `‖â − b̂‖_w / 2` for the canonicalized, standardized rewards over the
/// coverage distribution. Equal to `√((1 − ρ_w)/2)`, a value in `[0, 1]`.
pub fn epic_distance(a: &RewardTable, b: &RewardTable, config: &EpicConfig) -> Result<f64> {
    if (a.num_states, a.num_actions) != (b.num_states, b.num_actions) {
        return Err(Error::InvalidArgument("reward tables have different shapes".into()));
    }
    if config.coverage.samples.is_empty() {
        return Err(Error::InvalidArgument("empty coverage distribution".into()));
    }
    for t in a.values.iter().chain(&b.values) {
        if !t.is_finite() {
            return Err(Error::NonFiniteReward("EPIC input".into()));
        }
    }
    let weights: Vec<f64> = config.coverage.samples.iter().map(|(_, w)| *w).collect();
    let canonical = |table: &RewardTable| -> Result<Vec<f64>> {
        for (t, _) in &config.coverage.samples {
            if t.state >= table.num_states || t.next_state >= table.num_states || t.action >= table.num_actions {
                return Err(Error::IndexOutOfRange { what: "coverage transition", index: t.state.max(t.next_state), bound: table.num_states });
            }
        }
        let shift = Shift::new(table, config.discount);
        Ok(config
            .coverage
            .samples
            .iter()
            .map(|(t, _)| shift.apply(table, t.state, t.action, t.next_state))
            .collect())
    };
    let scale = |t: &RewardTable| t.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let ha = standardize(&canonical(a)?, &weights, scale(a)).ok_or(Error::DegenerateReward)?;
    let hb = standardize(&canonical(b)?, &weights, scale(b)).ok_or(Error::DegenerateReward)?;
    let total: f64 = weights.iter().sum();
    let sq: f64 = ha.iter().zip(&hb).zip(&weights).map(|((x, y), w)| w * (x - y).powi(2)).sum::<f64>() / total;
    Ok((sq.sqrt() / 2.0).clamp(0.0, 1.0))
}

/// Soft-optimal policy for the true reward.
pub fn soft_optimal_policy(mdp: &TabularMdp, temperature: f64) -> Result<SoftQPolicy> {
    let table = reward_table(mdp.dynamics(), &GroundTruth(mdp));
    Ok(soft_value_iteration(mdp.dynamics(), &table, mdp.discount(), temperature, SOFT_VI_TOLERANCE)?.policy)
}

/// Exact expected true return of the true soft-optimal policy.
pub fn soft_optimal_return(mdp: &TabularMdp, temperature: f64) -> Result<f64> {
    Ok(expected_return(mdp, &soft_optimal_policy(mdp, temperature)?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelearnConfig {
    pub temperature: f64,
    pub discount: f64,
    pub eval_episodes: usize,
}

impl Default for RelearnConfig {
    fn default() -> Self {
        Self {
            temperature: 0.1,
            discount: 0.99,
            eval_episodes: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Relearned {
    pub policy: SoftQPolicy,
    /// Monte Carlo true return.
    pub gt_return: f64,
}

/// Train a fresh policy against a frozen reward and score it on the truth.
pub fn relearn(mdp: &TabularMdp, source: &impl RewardSource, config: &RelearnConfig, rng: &mut Rng) -> Result<Relearned> {
    let table = reward_table(mdp.dynamics(), source);
    if let Some(i) = table.iter().position(|r| !r.is_finite()) {
        return Err(Error::NonFiniteReward(format!("learned reward of state-action {i}")));
    }
    let policy = soft_value_iteration(mdp.dynamics(), &table, config.discount, config.temperature, SOFT_VI_TOLERANCE)?.policy;
    let gt_return = evaluate_return(mdp, &policy, config.eval_episodes, rng)?;
    Ok(Relearned { policy, gt_return })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelearnReport {
    pub env: String,
    pub run_id: String,
    pub sampler_return: f64,
    pub relearner_return: f64,
}

impl RelearnReport {
    /// Relearner within `fraction` of the sampler's magnitude, or better.
    pub fn relearner_keeps_up(&self, fraction: f64) -> bool {
        self.relearner_return >= self.sampler_return - fraction * self.sampler_return.abs()
    }
}

pub const RELEARN_CSV_HEADER: &str = "run_id,sampler_return,relearner_return";
pub const EPIC_CSV_HEADER: &str = "run_id,budget,coverage,distance";

pub fn relearn_csv_row(r: &RelearnReport) -> String {
    format!("{},{},{}", r.run_id, r.sampler_return, r.relearner_return)
}

pub fn epic_csv_row(run_id: &str, budget: usize, kind: CoverageKind, distance: f64) -> String {
    format!("{run_id},{budget},{kind},{distance}")
}

/// Everything needed to score a finished run.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalSettings {
    pub relearn: RelearnConfig,
    pub expert_temperature: f64,
    pub expert_rollouts: usize,
    pub expert_horizon: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            relearn: RelearnConfig::default(),
            expert_temperature: EXPERT_TEMPERATURE,
            expert_rollouts: EXPERT_ROLLOUTS,
            expert_horizon: 100,
        }
    }
}

/// Exact state-action occupancy of `policy` over the horizon, normalized.
pub fn occupancy(mdp: &TabularMdp, policy: &impl Policy) -> BTreeMap<Transition, f64> {
    let d = mdp.dynamics();
    let mut dist = d.initial_distribution().to_vec();
    let mut next = vec![0.0; d.num_states()];
    let mut probs = vec![0.0; d.num_actions()];
    let mut occ = BTreeMap::new();
    let h = d.horizon() as f64;
    for _ in 0..d.horizon() {
        next.fill(0.0);
        for s in 0..d.num_states() {
            if dist[s] == 0.0 {
                continue;
            }
            policy.action_probabilities(s, &mut probs);
            for (a, p) in probs.iter().enumerate() {
                let t = d.transition(s, a);
                *occ.entry(t).or_insert(0.0) += dist[s] * p / h;
                next[t.next_state] += dist[s] * p;
            }
        }
        std::mem::swap(&mut dist, &mut next);
    }
    occ
}
