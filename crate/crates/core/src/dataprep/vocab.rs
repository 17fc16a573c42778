use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use super::OOV;
use crate::error::{Error, Result};

/// Word filtering rules applied while building a vocabulary.
#[derive(Clone, Debug)]
pub struct VocabFilter {
    pub min_count: u64,
    /// Words appearing in more than this fraction of documents are dropped.
    pub max_doc_fraction: f64,
    pub stopwords: HashSet<String>,
}

impl Default for VocabFilter {
    fn default() -> Self {
        VocabFilter {
            min_count: 1,
            max_doc_fraction: 1.0,
            stopwords: HashSet::new(),
        }
    }
}

impl VocabFilter {
    fn validate(&self) -> Result<()> {
        if self.min_count < 1 {
            return Err(Error::Config("min_count must be at least 1".into()));
        }
        if !(self.max_doc_fraction > 0.0 && self.max_doc_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "max_doc_fraction must be in (0, 1], got {}",
                self.max_doc_fraction
            )));
        }
        Ok(())
    }
}

/// Word ↔ wid mapping. Ids 0 and 1 are reserved for padding and unknown words;
/// words occupy the contiguous range starting at 2.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    frequencies: Vec<u64>,
    index: HashMap<String, usize>,
}

const FIRST_WID: usize = 2;

/// Builds a vocabulary from tokenized documents.
///
/// Retained words are ordered by descending corpus frequency, ties broken
/// lexicographically.
pub fn build_vocabulary<S: AsRef<str>>(docs: &[Vec<S>], filter: &VocabFilter) -> Result<Vocabulary> {
    filter.validate()?;
    if docs.is_empty() || docs.iter().all(Vec::is_empty) {
        return Err(Error::Data("cannot build a vocabulary from empty input".into()));
    }
    let mut counts: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for doc in docs {
        let mut seen = HashSet::new();
        for tok in doc {
            let tok = tok.as_ref();
            let entry = counts.entry(tok).or_default();
            entry.0 += 1;
            if seen.insert(tok) {
                entry.1 += 1;
            }
        }
    }
    let n_docs = docs.len() as f64;
    let mut kept: Vec<(&str, u64)> = counts
        .into_iter()
        .filter(|(w, (freq, df))| {
            *freq >= filter.min_count
                && (*df as f64) / n_docs <= filter.max_doc_fraction
                && !filter.stopwords.contains(*w)
        })
        .map(|(w, (freq, _))| (w, freq))
        .collect();
    if kept.is_empty() {
        return Err(Error::Data("every word was removed by the vocabulary filters".into()));
    }
    // BTreeMap order is lexicographic, so a stable sort keeps the tie-break.
    kept.sort_by_key(|&(_, f)| std::cmp::Reverse(f));
    Vocabulary::from_words(kept.into_iter().map(|(w, f)| (w.to_string(), f)))
}

impl Vocabulary {
    fn from_words(words: impl IntoIterator<Item = (String, u64)>) -> Result<Self> {
        let mut vocab = Vocabulary {
            words: Vec::new(),
            frequencies: Vec::new(),
            index: HashMap::new(),
        };
        for (word, freq) in words {
            if vocab.index.contains_key(&word) {
                return Err(Error::Data(format!("duplicate word `{word}`")));
            }
            vocab.index.insert(word.clone(), vocab.words.len() + FIRST_WID);
            vocab.words.push(word);
            vocab.frequencies.push(freq);
        }
        Ok(vocab)
    }

    /// Number of ids including the two reserved ones.
    pub fn size(&self) -> usize {
        self.words.len() + FIRST_WID
    }

    pub fn num_words(&self) -> usize {
        self.words.len()
    }

    pub fn wid(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// The id of `word`, or [`OOV`] if it is not in the vocabulary.
    pub fn encode(&self, word: &str) -> usize {
        self.wid(word).unwrap_or(OOV)
    }

    pub fn word(&self, wid: usize) -> Option<&str> {
        wid.checked_sub(FIRST_WID).and_then(|i| self.words.get(i)).map(String::as_str)
    }

    pub fn frequency(&self, wid: usize) -> Option<u64> {
        wid.checked_sub(FIRST_WID).and_then(|i| self.frequencies.get(i)).copied()
    }

    /// `(word, wid)` pairs in wid order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.words.iter().enumerate().map(|(i, w)| (w.as_str(), i + FIRST_WID))
    }

    /// Dictionary file: `word<TAB>wid<TAB>frequency` per line, in wid order.
    pub fn to_dictionary(&self) -> String {
        let mut out = String::new();
        for (i, (w, f)) in self.words.iter().zip(&self.frequencies).enumerate() {
            let _ = writeln!(out, "{w}\t{}\t{f}", i + FIRST_WID);
        }
        out
    }

    pub fn parse_dictionary(text: &str) -> Result<Self> {
        let mut words = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let fields: Vec<&str> = line.split('\t').collect();
            let [word, wid, freq] = fields[..] else {
                return Err(Error::parse(line_no, format!("expected 3 tab-separated fields, got {}", fields.len())));
            };
            if word.is_empty() || word.chars().any(|c| c.is_ascii_whitespace()) {
                return Err(Error::parse(line_no, format!("invalid word `{word}`")));
            }
            let wid: usize = wid.parse().map_err(|_| Error::parse(line_no, format!("invalid wid `{wid}`")))?;
            let expected = words.len() + FIRST_WID;
            if wid != expected {
                return Err(Error::parse(line_no, format!("wid {wid} out of sequence, expected {expected}")));
            }
            let freq: u64 = freq
                .parse()
                .map_err(|_| Error::parse(line_no, format!("invalid frequency `{freq}`")))?;
            words.push((word.to_string(), freq));
        }
        if words.is_empty() {
            return Err(Error::Data("dictionary is empty".into()));
        }
        Vocabulary::from_words(words).map_err(|e| match e {
            Error::Data(m) => Error::parse(0, m),
            other => other,
        })
    }
}
