#![no_main]

use libfuzzer_sys::fuzz_target;
use uda_core::harness::experiment::parse_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = parse_config(text) {
        let echo = serde_json_roundtrip(&cfg);
        assert_eq!(parse_config(&echo).expect("echo parses"), cfg);
    }
});

fn serde_json_roundtrip(cfg: &uda_core::harness::ExperimentConfig) -> String {
    cfg.echo().to_string()
}
