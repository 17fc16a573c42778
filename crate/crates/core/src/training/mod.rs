//! Optimisation of pair scorers under pointwise, pairwise and listwise objectives.

mod loss;
mod optim;

pub use loss::{
    listwise_softmax_ce, listwise_targets, pairwise_hinge, pointwise_logistic, pointwise_mse, LossGraph, LossInput,
    Objective, DEFAULT_MARGIN, PROB_EPS, SCORES_INPUT,
};
pub use optim::{Optimizer, OptimizerConfig, OptimizerKind};

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::autodiff::{Bindings, Gradients, Graph, NodeId};
use crate::dataprep::{generate_batches, Batch, BatchMode, Corpus, RelationRecord};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_run, Metric, QrelSet, RankedRun};
use crate::models::Model;
use crate::tensor::Tensor;

/// Anything that maps one `(left, right)` wid pair to a scalar graph node.
pub trait PairScorer {
    fn graph(&self) -> &Graph;
    fn graph_mut(&mut self) -> &mut Graph;
    fn score_node(&self) -> NodeId;
    fn bindings(&self, left: &[usize], right: &[usize]) -> Result<Bindings>;

    fn score(&self, left: &[usize], right: &[usize]) -> Result<f64> {
        let values = self.graph().forward(&self.bindings(left, right)?)?;
        Ok(values.get(self.score_node()).data()[0])
    }
}

impl PairScorer for Model {
    fn graph(&self) -> &Graph {
        Model::graph(self)
    }
    fn graph_mut(&mut self) -> &mut Graph {
        Model::graph_mut(self)
    }
    fn score_node(&self) -> NodeId {
        Model::score_node(self)
    }
    fn bindings(&self, left: &[usize], right: &[usize]) -> Result<Bindings> {
        Model::bindings(self, left, right)
    }
}

fn default_batch_size() -> usize {
    32
}
fn default_num_neg() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchingConfig {
    pub mode: BatchMode,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    /// Negatives sampled per positive in pairwise mode.
    #[serde(default = "default_num_neg")]
    pub num_neg: usize,
}

impl BatchingConfig {
    pub fn new(mode: BatchMode, batch_size: usize) -> Self {
        BatchingConfig { mode, batch_size, num_neg: default_num_neg() }
    }

    /// Checks that `objective` consumes batches of this mode.
    pub fn check_compatible(&self, objective: &Objective) -> Result<()> {
        if objective.batch_mode() != self.mode {
            return Err(Error::Config(format!(
                "objective {objective:?} needs {:?} batches but batch mode is {:?}",
                objective.batch_mode(),
                self.mode
            )));
        }
        if self.batch_size == 0 || self.num_neg == 0 {
            return Err(Error::Config("batch_size and num_neg must be positive".into()));
        }
        Ok(())
    }
}

/// Relations and a metric evaluated after every epoch.
#[derive(Clone, Copy, Debug)]
pub struct Validation<'a> {
    pub relations: &'a [RelationRecord],
    pub corpus: &'a Corpus,
    pub metric: Metric,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochReport {
    /// 1-based.
    pub epoch: usize,
    /// Mean of the batch losses.
    pub mean_loss: f64,
    pub validation: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochReport>,
    pub wall_time: Duration,
}

impl TrainReport {
    /// `epoch<TAB>mean_loss[<TAB>validation]` per epoch. Wall time is left out so the file is reproducible.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.epochs {
            let _ = write!(out, "{}\t{}", e.epoch, e.mean_loss);
            if let Some(v) = e.validation {
                let _ = write!(out, "\t{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.mean_loss)
    }
}

/// Binary label for a score: positive scores match.
pub fn predict_label(score: f64) -> u32 {
    u32::from(score > 0.0)
}

/// Scores every `(left, right)` pair in `relations`.
pub fn score_relations<S: PairScorer + ?Sized>(
    scorer: &S,
    relations: &[RelationRecord],
    corpus: &Corpus,
) -> Result<Vec<f64>> {
    relations
        .iter()
        .map(|r| scorer.score(&corpus.lookup(&r.left)?.wids, &corpus.lookup(&r.right)?.wids))
        .collect()
}

/// Ranks the right texts of each left text by score.
pub fn rank_relations<S: PairScorer + ?Sized>(
    scorer: &S,
    relations: &[RelationRecord],
    corpus: &Corpus,
) -> Result<RankedRun> {
    let scores = score_relations(scorer, relations, corpus)?;
    RankedRun::from_scores(relations.iter().zip(scores).map(|(r, s)| (r.left.as_str(), r.right.as_str(), s)))
}

/// Mean of `metric` over the queries of `relations`, with the relation labels as grades.
pub fn evaluate_relations<S: PairScorer + ?Sized>(
    scorer: &S,
    relations: &[RelationRecord],
    corpus: &Corpus,
    metric: Metric,
) -> Result<f64> {
    let run = rank_relations(scorer, relations, corpus)?;
    let qrels = QrelSet::from_relations(relations);
    let report = evaluate_run(&run, &qrels, &[metric])?;
    Ok(report.means[0])
}

/// Left and right wids of one scored pair.
type Row<'b> = (&'b [usize], &'b [usize]);

/// Rows to score for one batch plus the matching loss graph.
fn batch_rows<'b>(objective: &Objective, batch: &'b Batch) -> Result<(Vec<Row<'b>>, LossGraph)> {
    let pairs = |l: &'b [Vec<usize>], r: &'b [Vec<usize>]| -> Vec<Row<'b>> {
        l.iter().zip(r).map(|(a, b)| (a.as_slice(), b.as_slice())).collect()
    };
    Ok(match batch {
        Batch::Pointwise { left, right, labels } => {
            (pairs(left, right), LossGraph::new(objective, LossInput::Pointwise { labels })?)
        }
        Batch::Pairwise { left, right_pos, right_neg } => {
            let mut rows = pairs(left, right_pos);
            rows.extend(pairs(left, right_neg));
            (rows, LossGraph::new(objective, LossInput::Pairwise { pairs: left.len() })?)
        }
        Batch::Listwise { left, right, labels, groups } => {
            (pairs(left, right), LossGraph::new(objective, LossInput::Listwise { groups, grades: labels })?)
        }
    })
}

/// Loss of one batch and the accumulated parameter gradient.
pub fn batch_gradient<S: PairScorer + ?Sized>(
    scorer: &S,
    objective: &Objective,
    batch: &Batch,
) -> Result<(f64, Gradients)> {
    let (rows, loss_graph) = batch_rows(objective, batch)?;
    let graph = scorer.graph();
    let node = scorer.score_node();
    let mut values = Vec::with_capacity(rows.len());
    let mut scores = Vec::with_capacity(rows.len());
    for (l, r) in &rows {
        let v = graph.forward(&scorer.bindings(l, r)?)?;
        scores.push(v.get(node).data()[0]);
        values.push(v);
    }
    let (loss, ds) = loss_graph.evaluate(&scores)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite("training loss".into()));
    }
    let mut grads = Gradients::zeros_like(graph);
    let seed_shape = graph.shape(node).to_vec();
    for (v, d) in values.iter().zip(ds) {
        if d != 0.0 {
            grads.accumulate(&graph.backward_from(v, node, &Tensor::filled(seed_shape.clone(), d))?);
        }
    }
    Ok((loss, grads))
}

/// Trains `scorer` for `opt.epochs` epochs; batches are regenerated each epoch from seed `opt.seed + epoch`.
pub fn train<S: PairScorer + ?Sized>(
    scorer: &mut S,
    relations: &[RelationRecord],
    corpus: &Corpus,
    objective: &Objective,
    batching: &BatchingConfig,
    opt: &OptimizerConfig,
    validation: Option<Validation<'_>>,
) -> Result<TrainReport> {
    objective.validate()?;
    batching.check_compatible(objective)?;
    let mut optimizer = Optimizer::new(opt)?;
    let start = Instant::now();
    let mut report = TrainReport::default();
    for epoch in 0..opt.epochs {
        let seed = opt.seed.wrapping_add(epoch as u64);
        let batches = generate_batches(batching.mode, relations, corpus, batching.batch_size, batching.num_neg, seed)?;
        if batches.is_empty() {
            return Err(Error::Data("no training batches could be formed".into()));
        }
        let mut total = 0.0;
        for batch in &batches {
            let (loss, grads) = batch_gradient(&*scorer, objective, batch)?;
            optimizer.step(scorer.graph_mut(), &grads)?;
            total += loss;
        }
        let validation = match validation {
            Some(v) => Some(evaluate_relations(&*scorer, v.relations, v.corpus, v.metric)?),
            None => None,
        };
        report.epochs.push(EpochReport { epoch: epoch + 1, mean_loss: total / batches.len() as f64, validation });
    }
    report.wall_time = start.elapsed();
    Ok(report)
}
