use std::collections::HashMap;
use std::ops::Range;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Corpus, RelationRecord};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BatchMode {
    Pointwise,
    Pairwise,
    Listwise,
}

/// One training batch of wid rows.
#[derive(Clone, Debug, PartialEq)]
pub enum Batch {
    Pointwise {
        left: Vec<Vec<usize>>,
        right: Vec<Vec<usize>>,
        labels: Vec<u32>,
    },
    /// Row `i` prefers `right_pos[i]` over `right_neg[i]` for query `left[i]`.
    Pairwise {
        left: Vec<Vec<usize>>,
        right_pos: Vec<Vec<usize>>,
        right_neg: Vec<Vec<usize>>,
    },
    /// Rows grouped by query; `groups` partitions `0..left.len()`.
    Listwise {
        left: Vec<Vec<usize>>,
        right: Vec<Vec<usize>>,
        labels: Vec<u32>,
        groups: Vec<Range<usize>>,
    },
}

impl Batch {
    pub fn mode(&self) -> BatchMode {
        match self {
            Batch::Pointwise { .. } => BatchMode::Pointwise,
            Batch::Pairwise { .. } => BatchMode::Pairwise,
            Batch::Listwise { .. } => BatchMode::Listwise,
        }
    }

    /// Number of rows (pairs for pairwise batches).
    pub fn len(&self) -> usize {
        match self {
            Batch::Pointwise { left, .. } | Batch::Pairwise { left, .. } | Batch::Listwise { left, .. } => left.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every wid matrix in the batch.
    pub fn matrices(&self) -> Vec<&[Vec<usize>]> {
        match self {
            Batch::Pointwise { left, right, .. } | Batch::Listwise { left, right, .. } => vec![left, right],
            Batch::Pairwise { left, right_pos, right_neg } => vec![left, right_pos, right_neg],
        }
    }
}

fn wids<'c>(corpus: &'c Corpus, tid: &str) -> Result<&'c Vec<usize>> {
    Ok(&corpus.lookup(tid)?.wids)
}

fn check_tids(relations: &[RelationRecord], corpus: &Corpus) -> Result<()> {
    for r in relations {
        corpus.lookup(&r.left)?;
        corpus.lookup(&r.right)?;
    }
    Ok(())
}

/// Groups relation indices by left tid, in order of first appearance.
fn group_by_left(relations: &[RelationRecord]) -> Vec<Vec<usize>> {
    let mut order: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, r) in relations.iter().enumerate() {
        let g = *order.entry(r.left.as_str()).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    groups
}

pub fn batches_pointwise(
    relations: &[RelationRecord],
    corpus: &Corpus,
    batch_size: usize,
    seed: u64,
) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    check_tids(relations, corpus)?;
    let mut order: Vec<usize> = (0..relations.len()).collect();
    order.shuffle(&mut crate::seeded_rng(seed));
    order
        .chunks(batch_size)
        .map(|chunk| {
            let mut batch = (Vec::new(), Vec::new(), Vec::new());
            for &i in chunk {
                let r = &relations[i];
                batch.0.push(wids(corpus, &r.left)?.clone());
                batch.1.push(wids(corpus, &r.right)?.clone());
                batch.2.push(r.label);
            }
            Ok(Batch::Pointwise {
                left: batch.0,
                right: batch.1,
                labels: batch.2,
            })
        })
        .collect()
}

/// Preference triples `(left, positive, negative)` as relation indices.
pub(crate) fn pairwise_triples(relations: &[RelationRecord], num_neg: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = crate::seeded_rng(seed);
    let mut pairs = Vec::new();
    for group in group_by_left(relations) {
        for &pos in &group {
            let label = relations[pos].label;
            if label == 0 {
                continue;
            }
            let mut lower: Vec<usize> = group.iter().copied().filter(|&j| relations[j].label < label).collect();
            lower.shuffle(&mut rng);
            lower.truncate(num_neg);
            pairs.extend(lower.into_iter().map(|neg| (pos, neg)));
        }
    }
    pairs.shuffle(&mut rng);
    pairs
}

pub fn batches_pairwise(
    relations: &[RelationRecord],
    corpus: &Corpus,
    batch_size: usize,
    num_neg: usize,
    seed: u64,
) -> Result<Vec<Batch>> {
    if batch_size == 0 || num_neg == 0 {
        return Err(Error::Config("batch size and number of negatives must be at least 1".into()));
    }
    check_tids(relations, corpus)?;
    let pairs = pairwise_triples(relations, num_neg, seed);
    if pairs.is_empty() {
        return Err(Error::Data("no preference pairs: no query has a document with a lower label".into()));
    }
    pairs
        .chunks(batch_size)
        .map(|chunk| {
            let (mut left, mut right_pos, mut right_neg) = (Vec::new(), Vec::new(), Vec::new());
            for &(pos, neg) in chunk {
                left.push(wids(corpus, &relations[pos].left)?.clone());
                right_pos.push(wids(corpus, &relations[pos].right)?.clone());
                right_neg.push(wids(corpus, &relations[neg].right)?.clone());
            }
            Ok(Batch::Pairwise { left, right_pos, right_neg })
        })
        .collect()
}

/// One batch per left tid, groups in seeded order, rows in file order.
pub fn batches_listwise(relations: &[RelationRecord], corpus: &Corpus, seed: u64) -> Result<Vec<Batch>> {
    check_tids(relations, corpus)?;
    let mut groups = group_by_left(relations);
    groups.shuffle(&mut crate::seeded_rng(seed));
    groups
        .into_iter()
        .map(|group| {
            let (mut left, mut right, mut labels) = (Vec::new(), Vec::new(), Vec::new());
            for &i in &group {
                left.push(wids(corpus, &relations[i].left)?.clone());
                right.push(wids(corpus, &relations[i].right)?.clone());
                labels.push(relations[i].label);
            }
            let n = left.len();
            Ok(Batch::Listwise {
                left,
                right,
                labels,
                groups: vec![0..n],
            })
        })
        .collect()
}

pub fn generate_batches(
    mode: BatchMode,
    relations: &[RelationRecord],
    corpus: &Corpus,
    batch_size: usize,
    num_neg: usize,
    seed: u64,
) -> Result<Vec<Batch>> {
    match mode {
        BatchMode::Pointwise => batches_pointwise(relations, corpus, batch_size, seed),
        BatchMode::Pairwise => batches_pairwise(relations, corpus, batch_size, num_neg, seed),
        BatchMode::Listwise => batches_listwise(relations, corpus, seed),
    }
}
