use std::collections::HashMap;
use std::fmt::Write as _;

use super::{Vocabulary, PAD};
use crate::error::{Error, Result};

/// A text encoded as a fixed-length wid sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusEntry {
    pub tid: String,
    pub wids: Vec<usize>,
    /// Number of leading non-padding positions.
    pub original_length: usize,
}

/// Encodes one tokenized text: unknown words map to OOV, the tail is
/// truncated or padded with PAD to exactly `fixed_length` ids.
pub fn encode_text<S: AsRef<str>>(tid: &str, tokens: &[S], vocab: &Vocabulary, fixed_length: usize) -> CorpusEntry {
    let mut wids: Vec<usize> = tokens.iter().take(fixed_length).map(|t| vocab.encode(t.as_ref())).collect();
    let original_length = wids.len();
    wids.resize(fixed_length, PAD);
    CorpusEntry {
        tid: tid.to_string(),
        wids,
        original_length,
    }
}

pub fn encode_corpus<S: AsRef<str>>(
    texts: &[(String, Vec<S>)],
    vocab: &Vocabulary,
    fixed_length: usize,
) -> Result<Vec<CorpusEntry>> {
    if fixed_length == 0 {
        return Err(Error::Config("fixed length must be at least 1".into()));
    }
    Ok(texts
        .iter()
        .map(|(tid, tokens)| encode_text(tid, tokens, vocab, fixed_length))
        .collect())
}

/// Tid-addressable collection of encoded texts, kept in insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corpus {
    entries: Vec<CorpusEntry>,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn from_entries(entries: impl IntoIterator<Item = CorpusEntry>) -> Result<Self> {
        let mut corpus = Corpus::default();
        for e in entries {
            corpus.insert(e)?;
        }
        Ok(corpus)
    }

    pub fn insert(&mut self, entry: CorpusEntry) -> Result<()> {
        if self.index.contains_key(&entry.tid) {
            return Err(Error::Data(format!("duplicate tid `{}`", entry.tid)));
        }
        self.index.insert(entry.tid.clone(), self.entries.len());
        self.entries.push(entry);
        Ok(())
    }

    pub fn get(&self, tid: &str) -> Option<&CorpusEntry> {
        self.index.get(tid).map(|&i| &self.entries[i])
    }

    /// Like [`Corpus::get`] but reports unknown tids as an error.
    pub fn lookup(&self, tid: &str) -> Result<&CorpusEntry> {
        self.get(tid).ok_or_else(|| Error::Data(format!("unknown tid `{tid}`")))
    }

    pub fn entries(&self) -> &[CorpusEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest wid in the corpus.
    pub fn max_wid(&self) -> usize {
        self.entries.iter().flat_map(|e| e.wids.iter().copied()).max().unwrap_or(PAD)
    }

    /// Corpus file: `tid<TAB>original_length<TAB>wid wid ...` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = write!(out, "{}\t{}\t", e.tid, e.original_length);
            for (i, w) in e.wids.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{w}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut corpus = Corpus::default();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let fields: Vec<&str> = line.split('\t').collect();
            let [tid, len, wids] = fields[..] else {
                return Err(Error::parse(line_no, format!("expected 3 tab-separated fields, got {}", fields.len())));
            };
            if tid.is_empty() || tid.chars().any(char::is_whitespace) {
                return Err(Error::parse(line_no, format!("invalid tid `{tid}`")));
            }
            let original_length: usize = len
                .parse()
                .map_err(|_| Error::parse(line_no, format!("invalid original length `{len}`")))?;
            let wids = wids
                .split(' ')
                .map(|w| w.parse::<usize>().map_err(|_| Error::parse(line_no, format!("invalid wid `{w}`"))))
                .collect::<Result<Vec<_>>>()?;
            if original_length > wids.len() {
                return Err(Error::parse(line_no, "original length exceeds the number of wids"));
            }
            let pads_ok = wids.iter().enumerate().all(|(i, &w)| (w == PAD) == (i >= original_length));
            if !pads_ok {
                return Err(Error::parse(line_no, "padding must fill exactly the positions after the original length"));
            }
            corpus
                .insert(CorpusEntry {
                    tid: tid.to_string(),
                    wids,
                    original_length,
                })
                .map_err(|e| Error::parse(line_no, e.to_string()))?;
        }
        Ok(corpus)
    }
}
