#![no_main]

use libfuzzer_sys::fuzz_target;
use textmatch::models::ModelConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = ModelConfig::from_json(text) {
        let _ = config.validate();
        assert_eq!(ModelConfig::from_json(&config.to_json()).unwrap(), config);
    }
});
