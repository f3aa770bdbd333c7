//! Trajectory segments, pair selection, the synthetic Bradley-Terry labeler
//! and the preference dataset.

use crate::env::Transition;
use crate::error::{Error, Result};
use crate::reward::{logistic, LabeledPair, RewardEnsemble};
use crate::rng::{self, Rng};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

/// A contiguous window of a rollout.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySegment {
    transitions: Vec<Transition>,
    gt_return: f64,
}

impl TrajectorySegment {
    pub fn new(transitions: Vec<Transition>, gt_return: f64) -> Result<Self> {
        if transitions.is_empty() {
            return Err(Error::InvalidArgument("segment must hold at least one transition".into()));
        }
        if let Some(i) = transitions.windows(2).position(|w| w[0].next_state != w[1].state) {
            return Err(Error::InvalidArgument(format!("segment breaks between steps {i} and {}", i + 1)));
        }
        if !gt_return.is_finite() {
            return Err(Error::InvalidArgument("segment return must be finite".into()));
        }
        Ok(Self { transitions, gt_return })
    }

    /// Window scored with a per-state reward credited on arrival.
    pub fn scored(transitions: Vec<Transition>, gt_reward: &[f64]) -> Result<Self> {
        let gt_return = transitions.iter().map(|t| gt_reward[t.next_state]).sum();
        Self::new(transitions, gt_return)
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Labeler-only return under the true reward.
    pub fn gt_return(&self) -> f64 {
        self.gt_return
    }

    /// States the reward model is evaluated on, one per transition.
    pub fn credited_states(&self) -> Vec<usize> {
        self.transitions.iter().map(|t| t.next_state).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preference {
    First,
    Second,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreferenceRecord {
    pub first: TrajectorySegment,
    pub second: TrajectorySegment,
    pub label: Preference,
}

impl PreferenceRecord {
    /// The view handed to the reward model.
    pub fn labeled_pair(&self) -> LabeledPair {
        LabeledPair {
            first: self.first.credited_states(),
            second: self.second.credited_states(),
            label: self.label,
        }
    }
}

/// Append-only store of segments tagged with their collection iteration.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SegmentBuffer {
    segments: Vec<TrajectorySegment>,
    iterations: Vec<usize>,
}

impl SegmentBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, segment: TrajectorySegment, iteration: usize) {
        self.segments.push(segment);
        self.iterations.push(iteration);
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn segments(&self) -> &[TrajectorySegment] {
        &self.segments
    }

    pub fn get(&self, i: usize) -> &TrajectorySegment {
        &self.segments[i]
    }

    pub fn iteration_of(&self, i: usize) -> usize {
        self.iterations[i]
    }
}

/// `count` windows of `fragment_length` with uniform random start offsets.
pub fn extract_fragments(
    episode: &[Transition],
    fragment_length: usize,
    count: usize,
    gt_reward: &[f64],
    rng: &mut Rng,
) -> Result<Vec<TrajectorySegment>> {
    if fragment_length == 0 {
        return Err(Error::InvalidArgument("fragment length must be positive".into()));
    }
    if episode.len() < fragment_length {
        return Err(Error::EpisodeTooShort { len: episode.len(), fragment_length });
    }
    let starts = episode.len() - fragment_length + 1;
    (0..count)
        .map(|_| {
            let start = rng::index(rng, starts);
            TrajectorySegment::scored(episode[start..start + fragment_length].to_vec(), gt_reward)
        })
        .collect()
}

/// Independent pairs of distinct buffer indices, each uniform.
pub fn select_pairs(buffer: &SegmentBuffer, num_pairs: usize, rng: &mut Rng) -> Result<Vec<(usize, usize)>> {
    let n = buffer.len();
    if num_pairs == 0 {
        return Ok(Vec::new());
    }
    if n < 2 {
        return Err(Error::BufferTooSmall { len: n });
    }
    Ok((0..num_pairs)
        .map(|_| {
            let i = rng::index(rng, n);
            let mut j = rng::index(rng, n - 1);
            if j >= i {
                j += 1;
            }
            (i, j)
        })
        .collect())
}

/// Probability the first of two segments is preferred.
pub fn bt_probability(return_1: f64, return_2: f64) -> f64 {
    logistic(return_1 - return_2)
}

/// Label a pair by a Bernoulli draw from the Bradley-Terry model on true returns.
pub fn synthetic_label(first: &TrajectorySegment, second: &TrajectorySegment, rng: &mut Rng) -> PreferenceRecord {
    let p = bt_probability(first.gt_return, second.gt_return);
    let label = if rng.gen::<f64>() < p { Preference::First } else { Preference::Second };
    PreferenceRecord {
        first: first.clone(),
        second: second.clone(),
        label,
    }
}

/// Shuffled minibatch passes over `dataset` for every ensemble member.
/// Returns per-member minibatch losses.
pub fn train_reward_epoch(
    ensemble: &mut RewardEnsemble,
    dataset: &[PreferenceRecord],
    epochs: usize,
    batch_size: usize,
    rng: &mut Rng,
) -> Result<Vec<Vec<f64>>> {
    let pairs: Vec<LabeledPair> = dataset.iter().map(PreferenceRecord::labeled_pair).collect();
    ensemble.train(&pairs, epochs, batch_size, rng)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentJson {
    states: Vec<usize>,
    actions: Vec<usize>,
    gt_return: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordJson {
    first: SegmentJson,
    second: SegmentJson,
    label: Preference,
}

impl From<&TrajectorySegment> for SegmentJson {
    fn from(seg: &TrajectorySegment) -> Self {
        let mut states: Vec<usize> = seg.transitions.iter().map(|t| t.state).collect();
        states.push(seg.transitions.last().map_or(0, |t| t.next_state));
        Self {
            states,
            actions: seg.transitions.iter().map(|t| t.action).collect(),
            gt_return: seg.gt_return,
        }
    }
}

impl TryFrom<SegmentJson> for TrajectorySegment {
    type Error = Error;

    fn try_from(j: SegmentJson) -> Result<Self> {
        if j.states.len() != j.actions.len() + 1 {
            return Err(Error::Format {
                what: "preference record",
                msg: format!("{} states for {} actions", j.states.len(), j.actions.len()),
            });
        }
        let transitions = j
            .actions
            .iter()
            .enumerate()
            .map(|(i, &a)| Transition::new(j.states[i], a, j.states[i + 1]))
            .collect();
        TrajectorySegment::new(transitions, j.gt_return)
    }
}

/// One JSON object per record, newline-terminated.
pub fn to_jsonl(records: &[PreferenceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let j = RecordJson {
            first: (&r.first).into(),
            second: (&r.second).into(),
            label: r.label,
        };
        out.push_str(&serde_json::to_string(&j).expect("record serialization cannot fail"));
        out.push('\n');
    }
    out
}

/// Parse records, skipping blank lines.
pub fn parse_jsonl(text: &str) -> Result<Vec<PreferenceRecord>> {
    let mut records = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let at = |msg: String| Error::Format { what: "preference record", msg: format!("line {}: {msg}", n + 1) };
        let j: RecordJson = serde_json::from_str(line).map_err(|e| at(e.to_string()))?;
        let first = TrajectorySegment::try_from(j.first).map_err(|e| at(e.to_string()))?;
        let second = TrajectorySegment::try_from(j.second).map_err(|e| at(e.to_string()))?;
        records.push(PreferenceRecord { first, second, label: j.label });
    }
    Ok(records)
}
