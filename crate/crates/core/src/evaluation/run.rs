use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use crate::dataprep::RelationRecord;
use crate::error::{Error, Result};

/// Ranked documents for one query.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryRanking {
    pub qid: String,
    pub docs: Vec<(String, f64)>,
}

/// Per-query ranked lists, queries in first-appearance order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RankedRun {
    queries: Vec<QueryRanking>,
}

/// Descending score, ties by ascending doc id.
pub fn ranking_order(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then_with(|| a.0.cmp(&b.0))
}

impl RankedRun {
    /// Groups `(qid, docid, score)` triples by query and sorts each list.
    pub fn from_scores<Q, D>(scores: impl IntoIterator<Item = (Q, D, f64)>) -> Result<Self>
    where
        Q: Into<String>,
        D: Into<String>,
    {
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut queries: Vec<QueryRanking> = Vec::new();
        for (q, d, s) in scores {
            if !s.is_finite() {
                return Err(Error::Data("ranking scores must be finite".into()));
            }
            let q = q.into();
            let i = *index.entry(q.clone()).or_insert_with(|| {
                queries.push(QueryRanking { qid: q, docs: Vec::new() });
                queries.len() - 1
            });
            queries[i].docs.push((d.into(), s));
        }
        for q in &mut queries {
            q.docs.sort_by(ranking_order);
        }
        Self::from_rankings(queries)
    }

    /// Takes lists that are already in rank order.
    pub fn from_rankings(queries: Vec<QueryRanking>) -> Result<Self> {
        let mut seen_q = HashSet::new();
        for q in &queries {
            if !seen_q.insert(q.qid.as_str()) {
                return Err(Error::Data(format!("query `{}` listed twice", q.qid)));
            }
            let mut seen = HashSet::new();
            for (d, _) in &q.docs {
                if !seen.insert(d.as_str()) {
                    return Err(Error::Data(format!("document `{d}` ranked twice for query `{}`", q.qid)));
                }
            }
        }
        Ok(RankedRun { queries })
    }

    pub fn queries(&self) -> &[QueryRanking] {
        &self.queries
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

/// Relevance judgements; unjudged pairs have grade 0.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct QrelSet {
    grades: HashMap<String, HashMap<String, u32>>,
    order: Vec<(String, String)>,
}

impl QrelSet {
    pub fn insert(&mut self, qid: &str, docid: &str, grade: u32) {
        let per_query = self.grades.entry(qid.to_string()).or_default();
        if per_query.insert(docid.to_string(), grade).is_none() {
            self.order.push((qid.to_string(), docid.to_string()));
        }
    }

    pub fn from_relations(relations: &[RelationRecord]) -> Self {
        let mut q = QrelSet::default();
        for r in relations {
            q.insert(&r.left, &r.right, r.label);
        }
        q
    }

    pub fn grade(&self, qid: &str, docid: &str) -> u32 {
        self.grades.get(qid).and_then(|m| m.get(docid)).copied().unwrap_or(0)
    }

    /// Every judged grade for a query.
    pub fn grades_for(&self, qid: &str) -> Vec<u32> {
        self.grades.get(qid).map(|m| m.values().copied().collect()).unwrap_or_default()
    }

    pub fn total_relevant(&self, qid: &str) -> usize {
        self.grades.get(qid).map_or(0, |m| m.values().filter(|&&g| g > 0).count())
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// TREC qrels: `qid 0 docid grade`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut q = QrelSet::default();
        for (n, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split_ascii_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let [qid, _, docid, grade] = fields[..] else {
                return Err(Error::parse(n + 1, format!("expected 4 fields, got {}", fields.len())));
            };
            let grade = match grade.parse::<i64>() {
                Ok(g) if g < 0 => 0,
                Ok(g) => u32::try_from(g).map_err(|_| Error::parse(n + 1, format!("grade {g} too large")))?,
                Err(_) => return Err(Error::parse(n + 1, format!("invalid grade `{grade}`"))),
            };
            q.insert(qid, docid, grade);
        }
        Ok(q)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (qid, docid) in &self.order {
            let _ = writeln!(out, "{qid} 0 {docid} {}", self.grade(qid, docid));
        }
        out
    }
}
