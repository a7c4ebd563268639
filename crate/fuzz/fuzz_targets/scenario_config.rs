#![no_main]

use std::path::Path;

use decohere::cli::{self, InitialConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = cli::parse_config(text, "fuzz.json") else {
        return;
    };
    // custom grids would read from disk
    if matches!(cfg.initial, InitialConfig::CustomGrid { .. }) {
        return;
    }
    if let Ok(s) = cli::build_scenario(&cfg, Path::new("/nonexistent")) {
        assert!(!s.times.is_empty());
        assert!(s.times.windows(2).all(|w| w[1] > w[0]));
    }
});
