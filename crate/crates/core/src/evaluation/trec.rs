//! TREC run files: `qid Q0 docid rank score runname`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::run::{QueryRanking, RankedRun};
use crate::error::{Error, Result};

/// Formats a run with 1-based ranks and scores to 6 decimal places.
pub fn format_trec_run(run: &RankedRun, run_name: &str) -> String {
    let mut out = String::new();
    for q in run.queries() {
        for (rank, (doc, score)) in q.docs.iter().enumerate() {
            let _ = writeln!(out, "{} Q0 {} {} {:.6} {}", q.qid, doc, rank + 1, score, run_name);
        }
    }
    out
}

pub fn write_trec_run(run: &RankedRun, run_name: &str, path: impl AsRef<Path>) -> Result<()> {
    if run_name.is_empty() || run_name.chars().any(char::is_whitespace) {
        return Err(Error::Config(format!("invalid run name `{run_name}`")));
    }
    std::fs::write(path, format_trec_run(run, run_name))?;
    Ok(())
}

/// `(rank, docid, score)` of one run line.
type RunLine = (usize, String, f64);

/// Parses a run file; each query's documents are ordered by the rank column.
pub fn parse_trec_run(text: &str) -> Result<RankedRun> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut queries: Vec<(String, Vec<RunLine>)> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let fields: Vec<&str> = line.split_ascii_whitespace().collect();
        let [qid, _, docid, rank, score, _] = fields[..] else {
            return Err(Error::parse(line_no, format!("expected 6 fields, got {}", fields.len())));
        };
        let rank: usize = rank
            .parse()
            .map_err(|_| Error::parse(line_no, format!("invalid rank `{rank}`")))?;
        let score: f64 = score
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| Error::parse(line_no, format!("invalid score `{score}`")))?;
        let i = *index.entry(qid).or_insert_with(|| {
            queries.push((qid.to_string(), Vec::new()));
            queries.len() - 1
        });
        queries[i].1.push((rank, docid.to_string(), score));
    }
    let rankings = queries
        .into_iter()
        .map(|(qid, mut docs)| {
            docs.sort_by_key(|(rank, _, _)| *rank);
            QueryRanking {
                qid,
                docs: docs.into_iter().map(|(_, d, s)| (d, s)).collect(),
            }
        })
        .collect();
    RankedRun::from_rankings(rankings)
}
