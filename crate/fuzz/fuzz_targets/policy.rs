#![no_main]
use drlhp::solver::SoftQPolicy;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(policy) = SoftQPolicy::from_json(text) {
        let again = SoftQPolicy::from_json(&policy.to_json()).unwrap();
        assert_eq!(again, policy);
    }
});
