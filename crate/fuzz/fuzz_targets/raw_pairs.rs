#![no_main]

use libfuzzer_sys::fuzz_target;
use textmatch::dataprep::{parse_raw_pairs, prepare, PrepareOptions, VocabFilter};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(pairs) = parse_raw_pairs(text) else { return };
    let options = PrepareOptions { left_length: 4, right_length: 6, filter: VocabFilter::default() };
    if let Ok(prepared) = prepare(&pairs, &options) {
        assert_eq!(prepared.relations.len(), pairs.len());
        for r in &prepared.relations {
            assert_eq!(prepared.corpus.lookup(&r.left).unwrap().wids.len(), 4);
            assert_eq!(prepared.corpus.lookup(&r.right).unwrap().wids.len(), 6);
        }
    }
});
