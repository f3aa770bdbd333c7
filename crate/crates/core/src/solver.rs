//! Tabular soft Q-learning, exact soft value iteration and replay relabeling.

use serde::{Deserialize, Serialize};

use crate::env::{rollout, Dynamics, Policy, TabularMdp, Transition};
use crate::error::{Error, Result};
use crate::reward::RewardSource;
use crate::rng::{self, Rng};

/// `α · logsumexp(row / α)`, computed with the max shifted out.
#[inline]
pub fn soft_value(row: &[f64], temperature: f64) -> f64 {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = row.iter().map(|q| ((q - max) / temperature).exp()).sum();
    max + temperature * sum.ln()
}

/// Softmax of `row / temperature` into `out`.
#[inline]
pub fn softmax_into(row: &[f64], temperature: f64, out: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, q) in out.iter_mut().zip(row) {
        *o = ((q - max) / temperature).exp();
        sum += *o;
    }
    out.iter_mut().for_each(|o| *o /= sum);
}

/// Q-table with a temperature; acts by softmax over `q / temperature`.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftQPolicy {
    num_actions: usize,
    q: Vec<f64>,
    temperature: f64,
}

impl SoftQPolicy {
    pub fn new(num_states: usize, num_actions: usize, temperature: f64, initial_q: f64) -> Self {
        assert!(temperature > 0.0, "temperature must be positive");
        Self {
            num_actions,
            q: vec![initial_q; num_states * num_actions],
            temperature,
        }
    }

    /// Build from a flat state-major table.
    pub fn from_table(q: Vec<f64>, num_actions: usize, temperature: f64) -> Result<Self> {
        if num_actions == 0 || q.is_empty() || q.len() % num_actions != 0 {
            return Err(Error::InvalidArgument("Q-table shape mismatch".into()));
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidArgument(format!("temperature {temperature} must be positive")));
        }
        Ok(Self {
            num_actions,
            q,
            temperature,
        })
    }

    pub fn num_states(&self) -> usize {
        self.q.len() / self.num_actions
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn table(&self) -> &[f64] {
        &self.q
    }

    #[inline]
    pub fn q_row(&self, state: usize) -> &[f64] {
        &self.q[state * self.num_actions..(state + 1) * self.num_actions]
    }

    #[inline]
    pub fn q_value(&self, state: usize, action: usize) -> f64 {
        self.q[state * self.num_actions + action]
    }

    pub fn state_value(&self, state: usize) -> f64 {
        soft_value(self.q_row(state), self.temperature)
    }

    /// Lowest-index argmax of the Q-row.
    pub fn greedy_action(&self, state: usize) -> usize {
        let row = self.q_row(state);
        let mut best = 0;
        for (a, &q) in row.iter().enumerate() {
            if q > row[best] {
                best = a;
            }
        }
        best
    }

    /// Same Q-table acting at a different temperature.
    pub fn with_temperature(&self, temperature: f64) -> Self {
        assert!(temperature > 0.0);
        Self {
            temperature,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&PolicyJson::from(self)).expect("finite policy serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: PolicyJson = serde_json::from_str(s)?;
        raw.try_into()
    }
}

impl Policy for SoftQPolicy {
    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn action_probabilities(&self, state: usize, out: &mut [f64]) {
        softmax_into(self.q_row(state), self.temperature, out);
    }
}

/// On-disk form of a policy: state-major rows of action values.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyJson {
    temperature: f64,
    q_values: Vec<Vec<f64>>,
}

impl From<&SoftQPolicy> for PolicyJson {
    fn from(p: &SoftQPolicy) -> Self {
        Self {
            temperature: p.temperature,
            q_values: p.q.chunks(p.num_actions).map(<[f64]>::to_vec).collect(),
        }
    }
}

impl TryFrom<PolicyJson> for SoftQPolicy {
    type Error = Error;

    fn try_from(raw: PolicyJson) -> Result<Self> {
        let fmt = |msg: &str| Error::Format {
            what: "policy",
            msg: msg.to_string(),
        };
        let num_actions = raw.q_values.first().map(Vec::len).unwrap_or(0);
        if num_actions == 0 {
            return Err(fmt("empty Q-table"));
        }
        if raw.q_values.iter().any(|row| row.len() != num_actions) {
            return Err(fmt("ragged Q-table rows"));
        }
        if raw.q_values.iter().flatten().any(|q| !q.is_finite()) {
            return Err(fmt("non-finite Q-value"));
        }
        let q = raw.q_values.into_iter().flatten().collect();
        SoftQPolicy::from_table(q, num_actions, raw.temperature)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SoftQConfig {
    pub discount: f64,
    pub learning_rate: f64,
    pub temperature: f64,
    /// `None` keeps every transition.
    pub replay_capacity: Option<usize>,
    pub grad_steps_per_env_step: usize,
    pub initial_q: f64,
}

impl Default for SoftQConfig {
    fn default() -> Self {
        Self {
            discount: 0.99,
            learning_rate: 5e-2,
            temperature: 0.1,
            replay_capacity: None,
            grad_steps_per_env_step: 10,
            initial_q: 200.0,
        }
    }
}

impl SoftQConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("solver {what}")));
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return bad("discount must lie in (0, 1)");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be non-negative");
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be positive");
        }
        if self.replay_capacity == Some(0) {
            return bad("replay capacity must be positive");
        }
        if !self.initial_q.is_finite() {
            return bad("initial Q must be finite");
        }
        Ok(())
    }
}

/// Transitions with the reward they were last labeled with.
#[derive(Clone, Debug, Default)]
pub struct ReplayBuffer {
    transitions: Vec<Transition>,
    rewards: Vec<f64>,
    capacity: Option<usize>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: Option<usize>) -> Self {
        Self {
            capacity,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn push(&mut self, transition: Transition, reward: f64) {
        match self.capacity {
            Some(cap) if self.transitions.len() >= cap => {
                self.transitions[self.cursor] = transition;
                self.rewards[self.cursor] = reward;
                self.cursor = (self.cursor + 1) % cap;
            }
            _ => {
                self.transitions.push(transition);
                self.rewards.push(reward);
            }
        }
    }
}

/// Overwrite every stored reward with a fresh evaluation of `source`.
pub fn relabel_buffer(buffer: &mut ReplayBuffer, source: &impl RewardSource) {
    for (t, r) in buffer.transitions.iter().zip(buffer.rewards.iter_mut()) {
        *r = source.reward(t);
    }
}

/// `q[s,a] += lr · (r + γ·V(s') − q[s,a])` with the soft state value `V`.
#[inline]
pub fn soft_bellman_backup(policy: &mut SoftQPolicy, t: &Transition, reward: f64, config: &SoftQConfig) {
    let next_value = soft_value(policy.q_row(t.next_state), config.temperature);
    let idx = t.state * policy.num_actions + t.action;
    let q = &mut policy.q[idx];
    *q += config.learning_rate * (reward + config.discount * next_value - *q);
}

/// Online soft Q-learning agent that keeps its episode and replay buffer
/// across calls to [`SoftQSampler::train`].
#[derive(Clone, Debug)]
pub struct SoftQSampler {
    policy: SoftQPolicy,
    config: SoftQConfig,
    buffer: ReplayBuffer,
    state: Option<usize>,
    episode: Vec<Transition>,
    env_steps: usize,
}

impl SoftQSampler {
    pub fn new(dynamics: &Dynamics, config: SoftQConfig) -> Self {
        let policy = SoftQPolicy::new(
            dynamics.num_states(),
            dynamics.num_actions(),
            config.temperature,
            config.initial_q,
        );
        Self {
            policy,
            buffer: ReplayBuffer::new(config.replay_capacity),
            config,
            state: None,
            episode: Vec::new(),
            env_steps: 0,
        }
    }

    pub fn policy(&self) -> &SoftQPolicy {
        &self.policy
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn config(&self) -> &SoftQConfig {
        &self.config
    }

    pub fn env_steps(&self) -> usize {
        self.env_steps
    }

    /// Run `env_steps` environment steps, each followed by
    /// `grad_steps_per_env_step` backups on uniformly sampled replay entries.
    /// Rewards come only from `reward`; the agent never sees the ground truth.
    ///
    /// Returns the episodes that completed during this call.
    pub fn train(
        &mut self,
        dynamics: &Dynamics,
        reward: &mut impl FnMut(&Transition) -> f64,
        env_steps: usize,
        rng: &mut Rng,
    ) -> Vec<Vec<Transition>> {
        let horizon = dynamics.horizon();
        let mut completed = Vec::new();
        for _ in 0..env_steps {
            let state = match self.state {
                Some(s) => s,
                None => dynamics.sample_initial(rng),
            };
            let action = self.policy.sample_action(state, rng);
            let t = dynamics.transition(state, action);
            let r = reward(&t);
            self.buffer.push(t, r);
            self.episode.push(t);
            self.env_steps += 1;
            if self.episode.len() >= horizon {
                completed.push(std::mem::take(&mut self.episode));
                self.state = None;
            } else {
                self.state = Some(t.next_state);
            }

            let n = self.buffer.len();
            for _ in 0..self.config.grad_steps_per_env_step {
                let i = rng::index(rng, n);
                let (t, r) = (self.buffer.transitions[i], self.buffer.rewards[i]);
                soft_bellman_backup(&mut self.policy, &t, r, &self.config);
            }
        }
        completed
    }

    pub fn relabel(&mut self, source: &impl RewardSource) {
        relabel_buffer(&mut self.buffer, source);
    }
}

/// Result of [`soft_value_iteration`].
#[derive(Clone, Debug)]
pub struct SoftSolution {
    pub policy: SoftQPolicy,
    pub sweeps: usize,
    /// Max-norm change of the final sweep.
    pub residual: f64,
    /// Max-norm change of every sweep, in order.
    pub residuals: Vec<f64>,
}

pub const SOFT_VI_TOLERANCE: f64 = 1e-10;
pub const SOFT_VI_MAX_SWEEPS: usize = 100_000;

/// Synchronous soft value iteration on a deterministic MDP.
///
/// `reward` is indexed `state * num_actions + action`. Stops once the
/// max-norm change of a sweep drops below `tol`, or below the rounding floor
/// `16·ε·‖Q‖∞` when the values are too large for `tol` to be representable.
pub fn soft_value_iteration(
    dynamics: &Dynamics,
    reward: &[f64],
    discount: f64,
    temperature: f64,
    tol: f64,
) -> Result<SoftSolution> {
    let (ns, na) = (dynamics.num_states(), dynamics.num_actions());
    if reward.len() != ns * na {
        return Err(Error::InvalidArgument(format!(
            "reward table has {} entries, expected {}",
            reward.len(),
            ns * na
        )));
    }
    if let Some(r) = reward.iter().find(|r| !r.is_finite()) {
        return Err(Error::NonFiniteReward(format!("reward table entry {r}")));
    }
    if !(discount > 0.0 && discount < 1.0) || !(temperature > 0.0) || !(tol > 0.0) {
        return Err(Error::InvalidArgument(
            "soft value iteration needs discount in (0,1), positive temperature and tolerance".into(),
        ));
    }

    let mut q = vec![0.0; ns * na];
    let mut values = vec![0.0; ns];
    let mut residuals = Vec::new();
    for sweep in 1..=SOFT_VI_MAX_SWEEPS {
        for (s, v) in values.iter_mut().enumerate() {
            *v = soft_value(&q[s * na..(s + 1) * na], temperature);
        }
        let mut residual = 0.0f64;
        let mut scale = 0.0f64;
        for s in 0..ns {
            for a in 0..na {
                let i = s * na + a;
                let updated = reward[i] + discount * values[dynamics.next_state(s, a)];
                residual = residual.max((updated - q[i]).abs());
                scale = scale.max(updated.abs());
                q[i] = updated;
            }
        }
        if !residual.is_finite() {
            return Err(Error::NonConvergence { sweeps: sweep, residual });
        }
        residuals.push(residual);
        if residual < tol || residual <= 16.0 * f64::EPSILON * scale {
            return Ok(SoftSolution {
                policy: SoftQPolicy::from_table(q, na, temperature)?,
                sweeps: sweep,
                residual,
                residuals,
            });
        }
    }
    Err(Error::NonConvergence {
        sweeps: SOFT_VI_MAX_SWEEPS,
        residual: residuals.last().copied().unwrap_or(f64::NAN),
    })
}

/// Max-norm Bellman residual `‖T(Q) − Q‖∞` of a policy's Q-table.
pub fn bellman_residual(dynamics: &Dynamics, reward: &[f64], discount: f64, policy: &SoftQPolicy) -> f64 {
    let na = dynamics.num_actions();
    let mut worst = 0.0f64;
    for s in 0..dynamics.num_states() {
        for a in 0..na {
            let target = reward[s * na + a] + discount * policy.state_value(dynamics.next_state(s, a));
            worst = worst.max((target - policy.q_value(s, a)).abs());
        }
    }
    worst
}

/// Mean undiscounted ground-truth return over `num_episodes` rollouts.
pub fn evaluate_return(mdp: &TabularMdp, policy: &impl Policy, num_episodes: usize, rng: &mut Rng) -> Result<f64> {
    if num_episodes == 0 {
        return Err(Error::InvalidArgument("need at least one evaluation episode".into()));
    }
    let mut total = 0.0;
    for _ in 0..num_episodes {
        let episode = rollout(mdp.dynamics(), policy, mdp.horizon(), rng)?;
        total += episode.iter().map(|t| mdp.gt_transition_reward(t)).sum::<f64>();
    }
    Ok(total / num_episodes as f64)
}

/// Exact expected undiscounted return over the horizon, by propagating the
/// state distribution forward.
pub fn expected_return(mdp: &TabularMdp, policy: &impl Policy) -> f64 {
    let d = mdp.dynamics();
    let (ns, na) = (d.num_states(), d.num_actions());
    let mut dist = d.initial_distribution().to_vec();
    let mut next = vec![0.0; ns];
    let mut probs = vec![0.0; na];
    let mut total = 0.0;
    for _ in 0..d.horizon() {
        next.fill(0.0);
        for s in 0..ns {
            if dist[s] == 0.0 {
                continue;
            }
            policy.action_probabilities(s, &mut probs);
            for (a, p) in probs.iter().enumerate() {
                let mass = dist[s] * p;
                let s2 = d.next_state(s, a);
                total += mass * mdp.gt_reward()[s2];
                next[s2] += mass;
            }
        }
        std::mem::swap(&mut dist, &mut next);
    }
    total
}

/// Per-`(s, a)` reward table of a reward source under deterministic dynamics.
pub fn reward_table(dynamics: &Dynamics, source: &impl RewardSource) -> Vec<f64> {
    dynamics.feasible_transitions().map(|t| source.reward(&t)).collect()
}
