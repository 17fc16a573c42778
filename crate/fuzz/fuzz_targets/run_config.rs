#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use textmatch_cli::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = RunConfig::from_json(text, Path::new("/base")) {
        assert!(config.data.raw.starts_with("/base") || config.data.raw.is_absolute());
        assert!(config.metrics().is_ok());
    }
});
