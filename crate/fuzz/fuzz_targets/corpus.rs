#![no_main]

use libfuzzer_sys::fuzz_target;
use textmatch::dataprep::{Corpus, PAD};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(corpus) = Corpus::parse(text) {
        for entry in corpus.entries() {
            assert!(entry.original_length <= entry.wids.len());
            assert!(entry.wids[entry.original_length..].iter().all(|&w| w == PAD));
        }
        assert_eq!(Corpus::parse(&corpus.to_text()).unwrap(), corpus);
    }
});
