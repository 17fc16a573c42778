//! A small separable ranking dataset for smoke tests and convergence checks.
//!
//! Each query holds distinct words. Exactly one candidate is relevant: it
//! repeats some of the query words and pads with other words. The remaining
//! candidates share no word with their query.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataprep::RawPair;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub queries: usize,
    pub candidates: usize,
    pub vocab_size: usize,
    pub query_length: usize,
    pub doc_length: usize,
    /// Query words repeated in the relevant candidate.
    pub shared: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            queries: 50,
            candidates: 5,
            vocab_size: 100,
            query_length: 5,
            doc_length: 8,
            shared: 3,
            seed: 7,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let free = self.vocab_size.saturating_sub(self.query_length);
        if self.queries == 0 || self.candidates < 2 {
            return Err(Error::Config("need at least one query and two candidates".into()));
        }
        if self.query_length == 0 || self.query_length > self.vocab_size {
            return Err(Error::Config("query_length must lie in 1..=vocab_size".into()));
        }
        if self.shared == 0 || self.shared > self.query_length || self.shared > self.doc_length {
            return Err(Error::Config("shared must lie in 1..=min(query_length, doc_length)".into()));
        }
        if self.doc_length > free {
            return Err(Error::Config("doc_length exceeds the words left over after the query".into()));
        }
        Ok(())
    }
}

pub fn word(i: usize) -> String {
    format!("w{i:03}")
}

fn text(words: &[usize]) -> String {
    words.iter().map(|&w| word(w)).collect::<Vec<_>>().join(" ")
}

/// Draws `len` distinct words, none of them in `exclude`, as a text not yet in `seen`.
fn fresh_text(
    rng: &mut impl Rng,
    vocab: usize,
    len: usize,
    exclude: &HashSet<usize>,
    seen: &mut HashSet<String>,
) -> Result<String> {
    let pool: Vec<usize> = (0..vocab).filter(|w| !exclude.contains(w)).collect();
    for _ in 0..1000 {
        let words: Vec<usize> = index::sample(rng, pool.len(), len).into_iter().map(|i| pool[i]).collect();
        let t = text(&words);
        if seen.insert(t.clone()) {
            return Ok(t);
        }
    }
    Err(Error::Config("vocabulary too small to draw distinct texts".into()))
}

/// Generates `queries * candidates` labelled pairs, one relevant candidate per query.
pub fn generate(config: &SyntheticConfig) -> Result<Vec<RawPair>> {
    config.validate()?;
    let mut rng = crate::seeded_rng(config.seed);
    let mut seen_queries = HashSet::new();
    let mut seen_docs = HashSet::new();
    let mut pairs = Vec::with_capacity(config.queries * config.candidates);
    for _ in 0..config.queries {
        let query = loop {
            let words: Vec<usize> = index::sample(&mut rng, config.vocab_size, config.query_length).into_vec();
            if seen_queries.insert(text(&words)) {
                break words;
            }
        };
        let qset: HashSet<usize> = query.iter().copied().collect();

        let pool: Vec<usize> = (0..config.vocab_size).filter(|w| !qset.contains(w)).collect();
        let relevant = loop {
            let mut words: Vec<usize> = query.choose_multiple(&mut rng, config.shared).copied().collect();
            words.extend(
                index::sample(&mut rng, pool.len(), config.doc_length - config.shared).into_iter().map(|i| pool[i]),
            );
            words.shuffle(&mut rng);
            let t = text(&words);
            if seen_docs.insert(t.clone()) {
                break t;
            }
        };
        let mut docs = vec![(1, relevant)];
        for _ in 1..config.candidates {
            docs.push((0, fresh_text(&mut rng, config.vocab_size, config.doc_length, &qset, &mut seen_docs)?));
        }
        docs.shuffle(&mut rng);
        let left = text(&query);
        pairs.extend(docs.into_iter().map(|(label, right)| RawPair { label, left: left.clone(), right }));
    }
    Ok(pairs)
}

/// Raw `label<TAB>left<TAB>right` lines.
pub fn to_raw_text(pairs: &[RawPair]) -> String {
    let mut out = String::new();
    for p in pairs {
        let _ = writeln!(out, "{}\t{}\t{}", p.label, p.left, p.right);
    }
    out
}
