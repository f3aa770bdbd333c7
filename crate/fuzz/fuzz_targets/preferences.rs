#![no_main]
use drlhp::preference::{parse_jsonl, to_jsonl};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(records) = parse_jsonl(text) {
        assert_eq!(parse_jsonl(&to_jsonl(&records)).unwrap(), records);
    }
});
