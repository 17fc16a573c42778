#![no_main]

use libfuzzer_sys::fuzz_target;
use textmatch::dataprep::{parse_relations, write_relations};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(relations) = parse_relations(text) {
        let written = write_relations(&relations);
        assert_eq!(parse_relations(&written).unwrap(), relations);
    }
});
