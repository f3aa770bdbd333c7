#![no_main]
use drlhp::harness::config::serialize_config;
use drlhp::harness::parse_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = parse_config(text) {
        let again = parse_config(&serialize_config(&config)).expect("serialized config must parse");
        assert_eq!(again, config);
    }
});
