#![no_main]
use libfuzzer_sys::fuzz_target;
use skillbench_core::bench::{parse_raw_csv, parse_summary_csv};

fuzz_target!(|text: &str| {
    let _ = parse_summary_csv(text);
    let _ = parse_raw_csv(text);
});
