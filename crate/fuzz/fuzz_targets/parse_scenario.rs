#![no_main]
use libfuzzer_sys::fuzz_target;
use skillbench_core::bench::{parse_scenario, render_scenario};

fuzz_target!(|text: &str| {
    if let Ok(cfg) = parse_scenario(text) {
        let again = parse_scenario(&render_scenario(&cfg)).expect("rendered scenario parses");
        assert_eq!(again, cfg);
    }
});
