#![no_main]
use drlhp::reward::RewardCheckpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(ckpt) = RewardCheckpoint::from_json(text) else { return };
    if let Ok(reward) = ckpt.to_reward() {
        let back = RewardCheckpoint::from_reward(&reward, &ckpt.env, ckpt.seed);
        let again = RewardCheckpoint::from_json(&back.to_json()).unwrap().to_reward().unwrap();
        for (a, b) in reward.state_table().iter().zip(again.state_table()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
});
