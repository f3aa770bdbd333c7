//! The iterated reward-learning loop: collect segments, label pairs, fit the
//! reward model, relabel the replay buffer and keep training the sampler.

use crate::env::{rollout, TabularMdp, Transition, UniformPolicy};
use crate::error::{Error, Result};
use crate::preference::{
    extract_fragments, select_pairs, synthetic_label, train_reward_epoch, PreferenceRecord, SegmentBuffer,
};
use crate::reward::{AdamConfig, FrozenReward, RewardEnsemble};
use crate::rng;
use crate::eval::{epic_distance, relearn, CoverageDistribution, EpicConfig, EvalSettings, RewardTable};
use crate::solver::{evaluate_return, ReplayBuffer, SoftQConfig, SoftQPolicy, SoftQSampler};

#[derive(Clone, Debug, PartialEq)]
pub struct LoopConfig {
    pub total_comparisons: usize,
    pub num_iterations: usize,
    pub rl_budget: usize,
    pub fragment_length: usize,
    pub fragments_per_episode: usize,
    pub initial_random_fraction: f64,
    pub ensemble_size: usize,
    pub reward_epochs: usize,
    pub reward_batch_size: usize,
    pub reward_learning_rate: f64,
    pub hidden_sizes: Vec<usize>,
    pub solver: SoftQConfig,
    /// Episodes used to score the final sampler.
    pub eval_episodes: usize,
    pub seed: u64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            total_comparisons: 2500,
            num_iterations: 100,
            rl_budget: 500_000,
            fragment_length: 30,
            fragments_per_episode: 2,
            initial_random_fraction: 0.1,
            ensemble_size: 1,
            reward_epochs: 1,
            reward_batch_size: 32,
            reward_learning_rate: 1e-3,
            hidden_sizes: vec![32, 32],
            solver: SoftQConfig::default(),
            eval_episodes: 100,
            seed: 0,
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.num_iterations == 0 {
            return fail("num_iterations must be positive");
        }
        if !(0.0..=1.0).contains(&self.initial_random_fraction) {
            return fail("initial_random_fraction must lie in [0, 1]");
        }
        if self.fragment_length == 0 || self.fragments_per_episode == 0 {
            return fail("fragment_length and fragments_per_episode must be positive");
        }
        if self.ensemble_size == 0 || self.reward_batch_size == 0 {
            return fail("ensemble_size and reward_batch_size must be positive");
        }
        if !(self.reward_learning_rate.is_finite() && self.reward_learning_rate >= 0.0) {
            return fail("reward_learning_rate must be finite and non-negative");
        }
        if self.hidden_sizes.contains(&0) {
            return fail("hidden layer sizes must be positive");
        }
        self.solver.validate()
    }
}

/// Spread `total` over `n` slots so adjacent slots differ by at most one.
fn spread(total: usize, n: usize) -> impl Iterator<Item = usize> {
    (1..=n).map(move |i| i * total / n - (i - 1) * total / n)
}

/// Comparisons labeled per iteration; index 0 is the random-policy phase.
pub fn query_schedule(config: &LoopConfig) -> Vec<usize> {
    let initial = ((config.initial_random_fraction * config.total_comparisons as f64).round() as usize)
        .min(config.total_comparisons);
    std::iter::once(initial)
        .chain(spread(config.total_comparisons - initial, config.num_iterations))
        .collect()
}

/// Sampler environment steps for iterations `1..=num_iterations`.
pub fn env_step_schedule(config: &LoopConfig) -> Vec<usize> {
    spread(config.rl_budget, config.num_iterations).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationStats {
    pub iteration: usize,
    pub env_steps: usize,
    pub comparisons: usize,
    pub segments: usize,
    /// Mean minibatch loss over all members, if the model was trained.
    pub mean_loss: Option<f64>,
    /// Mean true return of the sampler episodes finished this iteration.
    pub sampler_gt_return: Option<f64>,
}

pub const STATS_CSV_HEADER: &str = "iteration,env_steps,comparisons,mean_loss,sampler_gt_return";

impl IterationStats {
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        format!(
            "{},{},{},{},{}",
            self.iteration,
            self.env_steps,
            self.comparisons,
            opt(self.mean_loss),
            opt(self.sampler_gt_return)
        )
    }
}

pub fn stats_csv(stats: &[IterationStats]) -> String {
    let mut out = format!("{STATS_CSV_HEADER}\n");
    for s in stats {
        out.push_str(&s.csv_row());
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub reward: FrozenReward,
    pub sampler: SoftQPolicy,
    /// Monte Carlo true return of the final sampler.
    pub sampler_return: f64,
    pub segments: SegmentBuffer,
    pub dataset: Vec<PreferenceRecord>,
    pub stats: Vec<IterationStats>,
}

/// Hooks into the loop, for diagnostics and tests.
pub trait LoopObserver {
    /// Called right after the replay buffer has been relabeled with `reward`.
    fn after_relabel(&mut self, _iteration: usize, _buffer: &ReplayBuffer, _reward: &FrozenReward) {}
    fn after_iteration(&mut self, _stats: &IterationStats) {}
}

impl LoopObserver for () {}

pub fn run_reward_learning(mdp: &TabularMdp, config: &LoopConfig) -> Result<RunArtifacts> {
    run_reward_learning_observed(mdp, config, &mut ())
}

struct Collector<'a> {
    gt: &'a [f64],
    config: &'a LoopConfig,
    segments: SegmentBuffer,
    dataset: Vec<PreferenceRecord>,
}

impl Collector<'_> {
    fn bank(&mut self, episode: &[Transition], iteration: usize, rng: &mut rng::Rng) -> Result<()> {
        let frags = extract_fragments(
            episode,
            self.config.fragment_length,
            self.config.fragments_per_episode,
            self.gt,
            rng,
        )?;
        for f in frags {
            self.segments.push(f, iteration);
        }
        Ok(())
    }

    fn label(&mut self, count: usize, rng: &mut rng::Rng) -> Result<()> {
        for (i, j) in select_pairs(&self.segments, count, rng)? {
            let record = synthetic_label(self.segments.get(i), self.segments.get(j), rng);
            self.dataset.push(record);
        }
        Ok(())
    }
}

pub fn run_reward_learning_observed(
    mdp: &TabularMdp,
    config: &LoopConfig,
    observer: &mut impl LoopObserver,
) -> Result<RunArtifacts> {
    config.validate()?;
    let dynamics = mdp.dynamics();
    let queries = query_schedule(config);
    let steps = env_step_schedule(config);
    let mut rng = rng::substream(config.seed, 0);
    let adam = AdamConfig {
        learning_rate: config.reward_learning_rate,
        ..AdamConfig::default()
    };
    let mut ensemble = RewardEnsemble::new(
        mdp.num_states(),
        &config.hidden_sizes,
        config.ensemble_size,
        adam,
        &mut rng,
    )?;
    let mut sampler = SoftQSampler::new(dynamics, config.solver.clone());
    let mut collect = Collector {
        gt: mdp.gt_reward(),
        config,
        segments: SegmentBuffer::new(),
        dataset: Vec::new(),
    };
    let mut stats = Vec::with_capacity(config.num_iterations + 1);

    let random_episodes = (2 * queries[0]).div_ceil(config.fragments_per_episode).max(1);
    let uniform = UniformPolicy { num_actions: mdp.num_actions() };
    for _ in 0..random_episodes {
        let episode = rollout(dynamics, &uniform, mdp.horizon(), &mut rng)?;
        collect.bank(&episode, 0, &mut rng)?;
    }

    for iteration in 0..=config.num_iterations {
        let mut sampler_gt_return = None;
        if iteration > 0 {
            let raw = ensemble.raw_tables();
            let mut learned = |t: &Transition| ensemble.observe(&raw, t.next_state);
            let episodes = sampler.train(dynamics, &mut learned, steps[iteration - 1], &mut rng);
            if !episodes.is_empty() {
                let total: f64 = episodes
                    .iter()
                    .map(|ep| ep.iter().map(|t| mdp.gt_transition_reward(t)).sum::<f64>())
                    .sum();
                sampler_gt_return = Some(total / episodes.len() as f64);
            }
            for ep in &episodes {
                collect.bank(ep, iteration, &mut rng)?;
            }
        }

        collect.label(queries[iteration], &mut rng)?;

        let mut mean_loss = None;
        if !collect.dataset.is_empty() {
            let traces = train_reward_epoch(
                &mut ensemble,
                &collect.dataset,
                config.reward_epochs,
                config.reward_batch_size,
                &mut rng,
            )?;
            let losses: Vec<f64> = traces.into_iter().flatten().collect();
            if !losses.is_empty() {
                mean_loss = Some(losses.iter().sum::<f64>() / losses.len() as f64);
            }
        }
        if !ensemble.is_finite() {
            return Err(Error::NonFiniteReward(format!(
                "reward model diverged at iteration {iteration} (seed {})",
                config.seed
            )));
        }

        let frozen = ensemble.freeze();
        if let Some(bad) = frozen.state_table().iter().position(|r| !r.is_finite()) {
            return Err(Error::NonFiniteReward(format!(
                "reward of state {bad} is not finite at iteration {iteration} (seed {})",
                config.seed
            )));
        }
        sampler.relabel(&frozen);
        observer.after_relabel(iteration, sampler.buffer(), &frozen);

        let s = IterationStats {
            iteration,
            env_steps: sampler.env_steps(),
            comparisons: collect.dataset.len(),
            segments: collect.segments.len(),
            mean_loss,
            sampler_gt_return,
        };
        observer.after_iteration(&s);
        stats.push(s);
    }

    let sampler_policy = sampler.policy().clone();
    let sampler_return = evaluate_return(
        mdp,
        &sampler_policy,
        config.eval_episodes,
        &mut rng::substream(config.seed, 1),
    )?;
    Ok(RunArtifacts {
        reward: ensemble.freeze(),
        sampler: sampler_policy,
        sampler_return,
        segments: collect.segments,
        dataset: collect.dataset,
        stats,
    })
}

/// A finished run scored by relearning and EPIC against the true reward.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub artifacts: RunArtifacts,
    pub relearner: SoftQPolicy,
    pub relearner_return: f64,
    /// `None` when the learned reward is constant over the coverage.
    pub epic_uniform: Option<f64>,
    pub epic_expert: Option<f64>,
}

fn epic_or_none(a: &RewardTable, b: &RewardTable, coverage: &CoverageDistribution, discount: f64) -> Result<Option<f64>> {
    let config = EpicConfig { coverage: coverage.clone(), discount };
    match epic_distance(a, b, &config) {
        Ok(d) => Ok(Some(d)),
        Err(Error::DegenerateReward) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Train, then relearn from the frozen reward and compare it to the truth
/// under both coverage distributions.
pub fn evaluate_run(
    mdp: &TabularMdp,
    config: &LoopConfig,
    settings: &EvalSettings,
    uniform: &CoverageDistribution,
    expert: &CoverageDistribution,
) -> Result<RunOutcome> {
    let artifacts = run_reward_learning(mdp, config)?;
    let relearned = relearn(mdp, &artifacts.reward, &settings.relearn, &mut rng::substream(config.seed, 2))?;
    let learned = RewardTable::from_state_reward(mdp.num_actions(), artifacts.reward.state_table());
    let truth = RewardTable::from_state_reward(mdp.num_actions(), mdp.gt_reward());
    let discount = mdp.discount();
    Ok(RunOutcome {
        epic_uniform: epic_or_none(&learned, &truth, uniform, discount)?,
        epic_expert: epic_or_none(&learned, &truth, expert, discount)?,
        relearner: relearned.policy,
        relearner_return: relearned.gt_return,
        artifacts,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub budget: usize,
    pub seed: u64,
    pub sampler_return: f64,
    pub relearner_return: f64,
    pub epic_uniform: Option<f64>,
    pub epic_expert: Option<f64>,
}

/// One scored run per `(budget, seed)`, budgets outermost. `seeds` are used
/// as run seeds directly.
pub fn rl_budget_sweep(
    mdp: &TabularMdp,
    base: &LoopConfig,
    budgets: &[usize],
    seeds: &[u64],
    settings: &EvalSettings,
    expert_seed: u64,
) -> Result<Vec<SweepRow>> {
    if budgets.is_empty() {
        return Err(Error::InvalidArgument("budget sweep needs at least one budget".into()));
    }
    let uniform = crate::eval::uniform_coverage(mdp);
    let expert = crate::eval::expert_coverage(
        mdp,
        settings.expert_temperature,
        settings.expert_rollouts,
        settings.expert_horizon,
        &mut rng::seeded(expert_seed),
    )?;
    let mut rows = Vec::with_capacity(budgets.len() * seeds.len());
    for &budget in budgets {
        for &seed in seeds {
            let config = LoopConfig { rl_budget: budget, seed, ..base.clone() };
            let out = evaluate_run(mdp, &config, settings, &uniform, &expert)?;
            rows.push(SweepRow {
                budget,
                seed,
                sampler_return: out.artifacts.sampler_return,
                relearner_return: out.relearner_return,
                epic_uniform: out.epic_uniform,
                epic_expert: out.epic_expert,
            });
        }
    }
    Ok(rows)
}
