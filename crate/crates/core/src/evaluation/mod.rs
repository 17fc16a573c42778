//! Ranking metrics, run/qrels handling and TREC output.

mod metrics;
mod run;
mod trec;

use std::fmt::Write as _;

pub use metrics::{average_precision, mrr, ndcg_at_k, precision_at_k, Metric};
pub use run::{ranking_order, QrelSet, QueryRanking, RankedRun};
pub use trec::{format_trec_run, parse_trec_run, write_trec_run};

use crate::error::{Error, Result};

/// Metric values per query plus their means.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub metrics: Vec<Metric>,
    /// `(qid, value per metric)` in run order.
    pub per_query: Vec<(String, Vec<f64>)>,
    pub means: Vec<f64>,
}

impl EvalReport {
    pub fn mean(&self, metric: Metric) -> Option<f64> {
        self.metrics.iter().position(|&m| m == metric).map(|i| self.means[i])
    }

    /// `metric<TAB>mean` per metric.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for (m, v) in self.metrics.iter().zip(&self.means) {
            let _ = writeln!(out, "{m}\t{v:.6}");
        }
        out
    }

    /// `qid<TAB>metric<TAB>value` per query and metric.
    pub fn per_query_table(&self) -> String {
        let mut out = String::new();
        for (qid, values) in &self.per_query {
            for (m, v) in self.metrics.iter().zip(values) {
                let _ = writeln!(out, "{qid}\t{m}\t{v:.6}");
            }
        }
        out
    }
}

pub fn query_metric(metric: Metric, grades: &[u32], qid: &str, qrels: &QrelSet) -> f64 {
    match metric {
        Metric::Precision(k) => precision_at_k(grades, k),
        Metric::Map => average_precision(grades, qrels.total_relevant(qid)),
        Metric::Ndcg(k) => ndcg_at_k(grades, &qrels.grades_for(qid), k),
        Metric::Mrr => mrr(grades),
    }
}

/// Evaluates every query of the run; queries without judgements score 0.
pub fn evaluate_run(run: &RankedRun, qrels: &QrelSet, metrics: &[Metric]) -> Result<EvalReport> {
    if run.is_empty() {
        return Err(Error::Data("cannot evaluate an empty run".into()));
    }
    let per_query: Vec<(String, Vec<f64>)> = run
        .queries()
        .iter()
        .map(|q| {
            let grades: Vec<u32> = q.docs.iter().map(|(d, _)| qrels.grade(&q.qid, d)).collect();
            let values = metrics.iter().map(|&m| query_metric(m, &grades, &q.qid, qrels)).collect();
            (q.qid.clone(), values)
        })
        .collect();
    let n = per_query.len() as f64;
    let means = (0..metrics.len())
        .map(|i| per_query.iter().map(|(_, v)| v[i]).sum::<f64>() / n)
        .collect();
    Ok(EvalReport {
        metrics: metrics.to_vec(),
        per_query,
        means,
    })
}
