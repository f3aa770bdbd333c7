#![no_main]
use drlhp::harness::{parse_results, summarize, RESULTS_HEADER, RESULTS_VERSION_LINE};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rows) = parse_results(text) {
        let mut out = format!("{RESULTS_VERSION_LINE}\n{RESULTS_HEADER}\n");
        for r in &rows {
            out.push_str(&r.to_csv());
            out.push('\n');
        }
        assert_eq!(parse_results(&out).unwrap(), rows);
        let _ = summarize(&rows);
    }
});
