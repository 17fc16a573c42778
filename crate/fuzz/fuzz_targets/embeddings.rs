#![no_main]

use libfuzzer_sys::fuzz_target;
use textmatch::dataprep::{build_vocabulary, load_embeddings, VocabFilter};

fuzz_target!(|data: &[u8]| {
    let Some((&dim, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    let docs = vec![vec!["the".to_string(), "cat".to_string(), "sat".to_string()]];
    let vocab = build_vocabulary(&docs, &VocabFilter::default()).unwrap();
    let dim = usize::from(dim % 8);
    if let Ok(table) = load_embeddings(text, &vocab, dim, 0) {
        assert_eq!(table.vocab_size(), vocab.size());
        assert_eq!(table.dim(), dim);
    }
});
