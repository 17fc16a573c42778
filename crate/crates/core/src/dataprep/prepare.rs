use std::collections::HashMap;

use super::{build_vocabulary, encode_text, tokenize, Corpus, RelationRecord, VocabFilter, Vocabulary};
use crate::error::{Error, Result};

/// One line of raw input: `label<TAB>text_left<TAB>text_right`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawPair {
    pub label: u32,
    pub left: String,
    pub right: String,
}

pub fn parse_raw_pairs(text: &str) -> Result<Vec<RawPair>> {
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        let [label, left, right] = fields[..] else {
            return Err(Error::parse(line_no, format!("expected 3 tab-separated fields, got {}", fields.len())));
        };
        let label = label
            .trim()
            .parse::<u32>()
            .map_err(|_| Error::parse(line_no, format!("invalid label `{label}`")))?;
        pairs.push(RawPair {
            label,
            left: left.to_string(),
            right: right.to_string(),
        });
    }
    if pairs.is_empty() {
        return Err(Error::Data("raw input contains no pairs".into()));
    }
    Ok(pairs)
}

#[derive(Clone, Debug)]
pub struct PrepareOptions {
    pub left_length: usize,
    pub right_length: usize,
    pub filter: VocabFilter,
}

/// The unified representation of a dataset.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub vocab: Vocabulary,
    pub corpus: Corpus,
    pub relations: Vec<RelationRecord>,
    pub num_left: usize,
    pub num_right: usize,
}

/// Assigns tids `L<n>` / `R<n>` to distinct left and right texts (exact
/// string match, first appearance order), builds the vocabulary over the
/// distinct texts and encodes each side at its own fixed length.
pub fn prepare(pairs: &[RawPair], options: &PrepareOptions) -> Result<Prepared> {
    if options.left_length == 0 || options.right_length == 0 {
        return Err(Error::Config("fixed lengths must be at least 1".into()));
    }
    let mut left_ids: HashMap<&str, usize> = HashMap::new();
    let mut right_ids: HashMap<&str, usize> = HashMap::new();
    let (mut lefts, mut rights) = (Vec::new(), Vec::new());
    let mut relations = Vec::with_capacity(pairs.len());
    for p in pairs {
        let l = *left_ids.entry(&p.left).or_insert_with(|| {
            lefts.push(p.left.as_str());
            lefts.len() - 1
        });
        let r = *right_ids.entry(&p.right).or_insert_with(|| {
            rights.push(p.right.as_str());
            rights.len() - 1
        });
        relations.push(RelationRecord::new(p.label, format!("L{l}"), format!("R{r}")));
    }
    let left_tokens: Vec<Vec<String>> = lefts.iter().map(|t| tokenize(t)).collect();
    let right_tokens: Vec<Vec<String>> = rights.iter().map(|t| tokenize(t)).collect();
    let docs: Vec<Vec<String>> = left_tokens.iter().chain(&right_tokens).cloned().collect();
    let vocab = build_vocabulary(&docs, &options.filter)?;
    let left_entries = left_tokens
        .iter()
        .enumerate()
        .map(|(i, toks)| encode_text(&format!("L{i}"), toks, &vocab, options.left_length));
    let right_entries = right_tokens
        .iter()
        .enumerate()
        .map(|(i, toks)| encode_text(&format!("R{i}"), toks, &vocab, options.right_length));
    let corpus = Corpus::from_entries(left_entries.chain(right_entries))?;
    Ok(Prepared {
        vocab,
        corpus,
        relations,
        num_left: lefts.len(),
        num_right: rights.len(),
    })
}
