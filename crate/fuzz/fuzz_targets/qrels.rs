#![no_main]

use libfuzzer_sys::fuzz_target;
use textmatch::evaluation::QrelSet;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(qrels) = QrelSet::parse(text) {
        assert_eq!(QrelSet::parse(&qrels.to_text()).unwrap(), qrels);
    }
});
