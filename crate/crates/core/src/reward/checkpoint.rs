use super::{FrozenReward, MlpParams, RunningNorm};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const CHECKPOINT_FORMAT: &str = "drlhp-reward";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialized form of a [`FrozenReward`]. Floats round-trip bit-exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardCheckpoint {
    pub format: String,
    pub version: u32,
    pub env: String,
    pub seed: u64,
    pub num_states: usize,
    pub hidden: Vec<usize>,
    pub members: Vec<MemberCheckpoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberCheckpoint {
    pub layers: Vec<LayerCheckpoint>,
    pub norm: RunningNorm,
}

/// Row-major `[outputs × inputs]` weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerCheckpoint {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Format { what: "reward checkpoint", msg: msg.into() }
}

impl RewardCheckpoint {
    pub fn from_reward(reward: &FrozenReward, env: &str, seed: u64) -> Self {
        let dims = reward.members()[0].0.dims();
        let members = reward
            .members()
            .iter()
            .map(|(params, norm)| MemberCheckpoint {
                layers: (0..params.num_layers())
                    .map(|l| {
                        let (w, b) = params.layer(l);
                        LayerCheckpoint {
                            inputs: params.dims()[l],
                            outputs: params.dims()[l + 1],
                            weights: w.to_vec(),
                            bias: b.to_vec(),
                        }
                    })
                    .collect(),
                norm: norm.clone(),
            })
            .collect();
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            env: env.into(),
            seed,
            num_states: dims[0],
            hidden: dims[1..dims.len() - 1].to_vec(),
            members,
        }
    }

    pub fn to_reward(&self) -> Result<FrozenReward> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(bad(format!("unknown format {:?}", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported version {}", self.version)));
        }
        if self.members.is_empty() {
            return Err(bad("no ensemble members"));
        }
        let mut dims = vec![self.num_states];
        dims.extend_from_slice(&self.hidden);
        dims.push(1);
        let mut members = Vec::with_capacity(self.members.len());
        for (k, m) in self.members.iter().enumerate() {
            for (l, layer) in m.layers.iter().enumerate() {
                if dims.get(l) != Some(&layer.inputs) || dims.get(l + 1) != Some(&layer.outputs) {
                    return Err(bad(format!("member {k} layer {l} does not match the architecture")));
                }
                if !layer.weights.iter().chain(&layer.bias).all(|x| x.is_finite()) {
                    return Err(bad(format!("member {k} layer {l} has non-finite values")));
                }
            }
            let n = &m.norm;
            if !n.is_finite() || n.m2 < 0.0 {
                return Err(bad(format!("member {k} has invalid normalizer statistics")));
            }
            let layers: Vec<(Vec<f64>, Vec<f64>)> = m.layers.iter().map(|l| (l.weights.clone(), l.bias.clone())).collect();
            let params = MlpParams::from_layers(&dims, &layers).map_err(|e| bad(e.to_string()))?;
            let mut norm = n.clone();
            norm.freeze();
            members.push((params, norm));
        }
        Ok(FrozenReward::new(members))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward::{AdamConfig, RewardEnsemble};
    use crate::rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut e = RewardEnsemble::new(9, &[32, 32], 3, AdamConfig::default(), &mut rng::seeded(11)).unwrap();
        let raw = e.raw_tables();
        for s in 0..9 {
            e.observe(&raw, s);
        }
        let frozen = e.freeze();
        let ckpt = RewardCheckpoint::from_reward(&frozen, "tiny_room", 42);
        let back = RewardCheckpoint::from_json(&ckpt.to_json()).unwrap();
        assert_eq!(back, ckpt);
        let restored = back.to_reward().unwrap();
        assert_eq!(restored, frozen);
        for (a, b) in restored.state_table().iter().zip(frozen.state_table()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_mismatched_shapes() {
        let e = RewardEnsemble::new(4, &[3], 1, AdamConfig::default(), &mut rng::seeded(0)).unwrap();
        let mut ckpt = RewardCheckpoint::from_reward(&e.freeze(), "tiny_room", 0);
        ckpt.members[0].layers[0].weights.pop();
        assert!(ckpt.to_reward().is_err());
        let mut ckpt = RewardCheckpoint::from_reward(&e.freeze(), "tiny_room", 0);
        ckpt.hidden = vec![4];
        assert!(ckpt.to_reward().is_err());
        assert!(RewardCheckpoint::from_json("{\"format\":1}").is_err());
    }
}
