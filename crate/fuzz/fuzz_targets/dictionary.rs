#![no_main]

use libfuzzer_sys::fuzz_target;
use textmatch::dataprep::Vocabulary;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(vocab) = Vocabulary::parse_dictionary(text) {
        for (word, wid) in vocab.iter() {
            assert_eq!(vocab.wid(word), Some(wid));
            assert_eq!(vocab.word(wid), Some(word));
        }
        let again = Vocabulary::parse_dictionary(&vocab.to_dictionary()).unwrap();
        assert_eq!(again.to_dictionary(), vocab.to_dictionary());
    }
});
