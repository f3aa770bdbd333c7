use super::{adam_step, nll_gradient, AdamConfig, AdamState, LabeledPair, MlpParams, RewardSource, RunningNorm};
use crate::env::Transition;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use rand::seq::SliceRandom;

/// One trainable network with its optimizer and output normalizer.
#[derive(Clone, Debug)]
pub struct RewardMember {
    pub params: MlpParams,
    pub adam: AdamState,
    pub norm: RunningNorm,
}

/// `K` independently initialized members whose normalized outputs are averaged.
#[derive(Clone, Debug)]
pub struct RewardEnsemble {
    members: Vec<RewardMember>,
}

impl RewardEnsemble {
    pub fn new(num_states: usize, hidden: &[usize], size: usize, adam: AdamConfig, rng: &mut Rng) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidArgument("ensemble size must be at least 1".into()));
        }
        let members = (0..size)
            .map(|_| {
                let params = MlpParams::init(num_states, hidden, rng)?;
                let adam = AdamState::new(params.as_slice().len(), adam);
                Ok(RewardMember { params, adam, norm: RunningNorm::new() })
            })
            .collect::<Result<_>>()?;
        Ok(Self { members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn num_states(&self) -> usize {
        self.members[0].params.num_states()
    }

    pub fn members(&self) -> &[RewardMember] {
        &self.members
    }

    pub fn members_mut(&mut self) -> &mut [RewardMember] {
        &mut self.members
    }

    /// Raw outputs of each member for every state.
    pub fn raw_tables(&self) -> Vec<Vec<f64>> {
        self.members.iter().map(|m| m.params.forward_all()).collect()
    }

    /// Normalized reward for `state` given precomputed raw tables, feeding
    /// each member's running statistics first.
    pub fn observe(&mut self, raw: &[Vec<f64>], state: usize) -> f64 {
        let sum: f64 = self
            .members
            .iter_mut()
            .zip(raw)
            .map(|(m, table)| m.norm.update_apply(table[state]))
            .sum();
        sum / self.members.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.members.iter().all(|m| m.params.is_finite() && m.norm.is_finite())
    }

    /// Train every member on `pairs`. Single members use the full set; larger
    /// ensembles draw a fresh bootstrap resample per member. Returns the
    /// minibatch losses of each member in order.
    pub fn train(&mut self, pairs: &[LabeledPair], epochs: usize, batch_size: usize, rng: &mut Rng) -> Result<Vec<Vec<f64>>> {
        if pairs.is_empty() {
            return Err(Error::InvalidArgument("no labeled comparisons to train on".into()));
        }
        if batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        let samples = if self.members.len() == 1 {
            vec![(0..pairs.len()).collect()]
        } else {
            bootstrap_indices(pairs.len(), self.members.len(), rng)
        };
        let mut traces = Vec::with_capacity(self.members.len());
        for (member, mut indices) in self.members.iter_mut().zip(samples) {
            let mut trace = Vec::new();
            for _ in 0..epochs {
                indices.shuffle(rng);
                for chunk in indices.chunks(batch_size) {
                    let batch: Vec<&LabeledPair> = chunk.iter().map(|&i| &pairs[i]).collect();
                    let (loss, grad) = nll_gradient(&member.params, &batch);
                    adam_step(&mut member.params, &grad, &mut member.adam);
                    trace.push(loss);
                }
            }
            traces.push(trace);
        }
        Ok(traces)
    }

    /// Snapshot with frozen normalizers.
    pub fn freeze(&self) -> FrozenReward {
        FrozenReward::new(
            self.members
                .iter()
                .map(|m| {
                    let mut norm = m.norm.clone();
                    norm.freeze();
                    (m.params.clone(), norm)
                })
                .collect(),
        )
    }
}

/// Ensemble reward using current statistics without updating them.
pub fn ensemble_reward(ensemble: &RewardEnsemble, t: &Transition) -> f64 {
    let sum: f64 = ensemble
        .members
        .iter()
        .map(|m| m.norm.apply(m.params.forward(t.next_state)))
        .sum();
    sum / ensemble.members.len() as f64
}

/// `k` resamples of `0..n` with replacement, each of size `n`.
pub fn bootstrap_indices(n: usize, k: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    (0..k).map(|_| (0..n).map(|_| rng::index(rng, n)).collect()).collect()
}

/// An immutable reward: members with frozen normalizers.
#[derive(Clone, Debug, PartialEq)]
pub struct FrozenReward {
    members: Vec<(MlpParams, RunningNorm)>,
    table: Vec<f64>,
}

impl FrozenReward {
    pub(crate) fn new(members: Vec<(MlpParams, RunningNorm)>) -> Self {
        assert!(!members.is_empty());
        let raw: Vec<Vec<f64>> = members.iter().map(|(p, _)| p.forward_all()).collect();
        let k = members.len() as f64;
        let table = (0..members[0].0.num_states())
            .map(|s| members.iter().zip(&raw).map(|((_, norm), r)| norm.apply(r[s])).sum::<f64>() / k)
            .collect();
        Self { members, table }
    }

    pub fn members(&self) -> &[(MlpParams, RunningNorm)] {
        &self.members
    }

    pub fn num_states(&self) -> usize {
        self.table.len()
    }

    /// Reward credited on arrival at each state.
    pub fn state_table(&self) -> &[f64] {
        &self.table
    }
}

impl RewardSource for FrozenReward {
    fn reward(&self, t: &Transition) -> f64 {
        self.table[t.next_state]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preference::Preference;

    fn ensemble(k: usize, seed: u64) -> RewardEnsemble {
        RewardEnsemble::new(5, &[8, 8], k, AdamConfig::default(), &mut rng::seeded(seed)).unwrap()
    }

    #[test]
    fn members_are_independently_initialized() {
        let e = ensemble(3, 1);
        assert_ne!(e.members()[0].params, e.members()[1].params);
        assert_ne!(e.members()[1].params, e.members()[2].params);
    }

    #[test]
    fn frozen_table_matches_live_evaluation() {
        let mut e = ensemble(2, 2);
        let raw = e.raw_tables();
        for s in [0, 1, 2, 3, 4, 2, 1] {
            e.observe(&raw, s);
        }
        let frozen = e.freeze();
        for s in 0..5 {
            let t = Transition::new(0, 0, s);
            assert_eq!(frozen.reward(&t).to_bits(), ensemble_reward(&e, &t).to_bits());
        }
    }

    #[test]
    fn single_member_trains_on_all_pairs_without_resampling() {
        let pairs: Vec<LabeledPair> = (0..10)
            .map(|i| LabeledPair { first: vec![i % 5], second: vec![(i + 1) % 5], label: Preference::First })
            .collect();
        let mut e = ensemble(1, 3);
        let mut r = rng::seeded(0);
        let traces = e.train(&pairs, 2, 4, &mut r).unwrap();
        assert_eq!(traces.len(), 1);
        assert_eq!(traces[0].len(), 6);
    }

    #[test]
    fn bootstrap_shape() {
        let b = bootstrap_indices(7, 3, &mut rng::seeded(5));
        assert_eq!(b.len(), 3);
        assert!(b.iter().all(|v| v.len() == 7 && v.iter().all(|&i| i < 7)));
    }
}
