#![no_main]

use libfuzzer_sys::fuzz_target;
use textmatch::evaluation::{format_trec_run, parse_trec_run};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(run) = parse_trec_run(text) {
        let written = format_trec_run(&run, "fuzz");
        assert!(written.lines().all(|l| l.split(' ').count() == 6));
        let again = parse_trec_run(&written).unwrap();
        assert_eq!(again.queries().len(), run.queries().len());
        for (a, b) in again.queries().iter().zip(run.queries()) {
            assert_eq!(a.qid, b.qid);
            assert_eq!(a.docs.len(), b.docs.len());
        }
    }
});
