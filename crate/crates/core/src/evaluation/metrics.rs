//! Ranking metrics over the relevance grades of a ranked list (rank 1 first).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Fraction of the top `k` positions holding a relevant (grade > 0) document.
/// Positions past the end of the list count as non-relevant.
pub fn precision_at_k(grades: &[u32], k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    grades.iter().take(k).filter(|&&g| g > 0).count() as f64 / k as f64
}

/// Sum of precision at each relevant rank, divided by `total_relevant`.
pub fn average_precision(grades: &[u32], total_relevant: usize) -> f64 {
    if total_relevant == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &g) in grades.iter().enumerate() {
        if g > 0 {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / total_relevant as f64
}

fn dcg(grades: impl Iterator<Item = u32>) -> f64 {
    grades
        .enumerate()
        .map(|(i, g)| (2f64.powi(g as i32) - 1.0) / ((i + 2) as f64).log2())
        .sum()
}

/// NDCG@k with gain `2^grade - 1` and discount `log2(rank + 1)`.
/// `all_grades` holds every judged grade for the query and defines the ideal ranking.
pub fn ndcg_at_k(grades: &[u32], all_grades: &[u32], k: usize) -> f64 {
    let mut ideal = all_grades.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg(ideal.into_iter().take(k));
    if idcg == 0.0 {
        return 0.0;
    }
    dcg(grades.iter().copied().take(k)) / idcg
}

/// Reciprocal rank of the first relevant document.
pub fn mrr(grades: &[u32]) -> f64 {
    grades.iter().position(|&g| g > 0).map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Metric {
    Precision(usize),
    /// Average precision; its mean over queries is MAP.
    Map,
    Ndcg(usize),
    Mrr,
}

impl Metric {
    /// Expands metric names, giving `p` and `ndcg` without an explicit cutoff one entry per k.
    pub fn expand(names: &[String], k_values: &[usize]) -> Result<Vec<Metric>> {
        let mut out = Vec::new();
        for name in names {
            match name.as_str() {
                "p" | "ndcg" if !k_values.is_empty() => {
                    for &k in k_values {
                        out.push(format!("{name}@{k}").parse()?);
                    }
                }
                other => out.push(other.parse()?),
            }
        }
        Ok(out)
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let cutoff = |k: &str| -> Result<usize> {
            k.parse::<usize>()
                .ok()
                .filter(|&k| k >= 1)
                .ok_or_else(|| Error::Config(format!("invalid cutoff in metric `{s}`")))
        };
        match s.to_ascii_lowercase().as_str() {
            "map" => Ok(Metric::Map),
            "mrr" => Ok(Metric::Mrr),
            other => {
                if let Some(k) = other.strip_prefix("p@") {
                    Ok(Metric::Precision(cutoff(k)?))
                } else if let Some(k) = other.strip_prefix("ndcg@") {
                    Ok(Metric::Ndcg(cutoff(k)?))
                } else {
                    Err(Error::Config(format!("unknown metric `{s}`")))
                }
            }
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Precision(k) => write!(f, "p@{k}"),
            Metric::Map => write!(f, "map"),
            Metric::Ndcg(k) => write!(f, "ndcg@{k}"),
            Metric::Mrr => write!(f, "mrr"),
        }
    }
}
