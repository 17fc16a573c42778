//! Objectives expressed as graph nodes over a vector of scores.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, NodeId};
use crate::dataprep::BatchMode;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_MARGIN: f64 = 1.0;
/// Clamp applied to predicted probabilities in the logistic loss.
pub const PROB_EPS: f64 = 1e-12;

fn default_margin() -> f64 {
    DEFAULT_MARGIN
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Objective {
    PointwiseMse,
    PointwiseLogistic,
    PairwiseHinge {
        #[serde(default = "default_margin")]
        margin: f64,
    },
    ListwiseSoftmaxCe,
}

impl Objective {
    pub fn hinge() -> Self {
        Objective::PairwiseHinge { margin: DEFAULT_MARGIN }
    }

    /// The batch layout this objective consumes.
    pub fn batch_mode(&self) -> BatchMode {
        match self {
            Objective::PointwiseMse | Objective::PointwiseLogistic => BatchMode::Pointwise,
            Objective::PairwiseHinge { .. } => BatchMode::Pairwise,
            Objective::ListwiseSoftmaxCe => BatchMode::Listwise,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Objective::PairwiseHinge { margin } if !(*margin > 0.0 && margin.is_finite()) => {
                Err(Error::Config(format!("hinge margin must be positive, got {margin}")))
            }
            _ => Ok(()),
        }
    }
}

fn check_len(g: &Graph, scores: NodeId, n: usize, what: &str) -> Result<()> {
    if n == 0 {
        return Err(Error::Data(format!("{what}: empty batch")));
    }
    if g.shape(scores) != [n] {
        return Err(Error::shape(what, format!("[{n}]"), format!("{:?}", g.shape(scores))));
    }
    Ok(())
}

/// `mean((s - y)^2)`
pub fn pointwise_mse(g: &mut Graph, scores: NodeId, labels: &[f64]) -> Result<NodeId> {
    check_len(g, scores, labels.len(), "pointwise-mse")?;
    let y = g.constant(Tensor::vector(labels.to_vec()));
    let diff = g.sub(scores, y)?;
    let sq = g.mul(diff, diff)?;
    g.mean(sq, 0)
}

/// Binary cross-entropy of `sigmoid(s)` against `y` in `{0, 1}`.
pub fn pointwise_logistic(g: &mut Graph, scores: NodeId, labels: &[f64]) -> Result<NodeId> {
    check_len(g, scores, labels.len(), "pointwise-logistic")?;
    let p = g.sigmoid(scores)?;
    let one = g.constant(Tensor::scalar(1.0));
    let q = g.sub(one, p)?;
    let log_p = g.log(p)?;
    let log_q = g.log(q)?;
    let y = g.constant(Tensor::vector(labels.to_vec()));
    let not_y = g.constant(Tensor::vector(labels.iter().map(|v| 1.0 - v).collect()));
    let a = g.mul(y, log_p)?;
    let b = g.mul(not_y, log_q)?;
    let ll = g.add(a, b)?;
    let mean = g.mean(ll, 0)?;
    g.scale(mean, -1.0)
}

/// `mean(max(0, margin - s_pos + s_neg))`
pub fn pairwise_hinge(g: &mut Graph, pos: NodeId, neg: NodeId, margin: f64) -> Result<NodeId> {
    let n = g.shape(pos).iter().product();
    check_len(g, pos, n, "pairwise-hinge")?;
    check_len(g, neg, n, "pairwise-hinge")?;
    let m = g.constant(Tensor::scalar(margin));
    let gap = g.sub(m, pos)?;
    let gap = g.add(gap, neg)?;
    let hinge = g.relu(gap)?;
    g.mean(hinge, 0)
}

/// Target distribution for a group: grades normalised to sum 1, uniform if all zero.
pub fn listwise_targets(grades: &[u32]) -> Vec<f64> {
    let total: f64 = grades.iter().map(|&g| g as f64).sum();
    if total == 0.0 {
        vec![1.0 / grades.len() as f64; grades.len()]
    } else {
        grades.iter().map(|&g| g as f64 / total).collect()
    }
}

/// Per group `-sum p_i ln softmax(s)_i`, averaged over groups.
pub fn listwise_softmax_ce(g: &mut Graph, scores: NodeId, groups: &[Range<usize>], grades: &[u32]) -> Result<NodeId> {
    check_len(g, scores, grades.len(), "listwise-softmax-ce")?;
    if groups.is_empty() || groups.iter().any(|r| r.is_empty() || r.end > grades.len()) {
        return Err(Error::Data("listwise-softmax-ce: invalid group boundaries".into()));
    }
    let mut per_group = Vec::with_capacity(groups.len());
    for r in groups {
        let s = g.slice(scores, 0, r.start, r.len())?;
        let sm = g.softmax(s, 0)?;
        let log_sm = g.log(sm)?;
        let p = g.constant(Tensor::vector(listwise_targets(&grades[r.clone()])));
        let weighted = g.mul(p, log_sm)?;
        per_group.push(g.sum_all(weighted)?);
    }
    let all = g.concat(&per_group, 0)?;
    let mean = g.mean(all, 0)?;
    g.scale(mean, -1.0)
}

/// Scores and targets for one batch, in the layout its objective expects.
pub enum LossInput<'a> {
    Pointwise { labels: &'a [u32] },
    Pairwise { pairs: usize },
    Listwise { groups: &'a [Range<usize>], grades: &'a [u32] },
}

/// A standalone loss graph whose score vector is a graph input named `scores`.
///
/// Pairwise inputs lay out positive scores first, then negatives.
pub struct LossGraph {
    pub graph: Graph,
    pub loss: NodeId,
    pub scores: usize,
}

pub const SCORES_INPUT: &str = "scores";

impl LossGraph {
    pub fn new(objective: &Objective, input: LossInput<'_>) -> Result<Self> {
        objective.validate()?;
        let mut g = Graph::new();
        let (loss, scores) = match (objective, input) {
            (Objective::PointwiseMse, LossInput::Pointwise { labels }) => {
                let n = labels.len().max(1);
                let s = g.input(SCORES_INPUT, &[n])?;
                let y: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
                (pointwise_mse(&mut g, s, &y)?, labels.len())
            }
            (Objective::PointwiseLogistic, LossInput::Pointwise { labels }) => {
                let n = labels.len().max(1);
                let s = g.input(SCORES_INPUT, &[n])?;
                let y: Vec<f64> = labels.iter().map(|&l| if l > 0 { 1.0 } else { 0.0 }).collect();
                (pointwise_logistic(&mut g, s, &y)?, labels.len())
            }
            (Objective::PairwiseHinge { margin }, LossInput::Pairwise { pairs }) => {
                if pairs == 0 {
                    return Err(Error::Data("pairwise-hinge: empty batch".into()));
                }
                let s = g.input(SCORES_INPUT, &[2 * pairs])?;
                let pos = g.slice(s, 0, 0, pairs)?;
                let neg = g.slice(s, 0, pairs, pairs)?;
                (pairwise_hinge(&mut g, pos, neg, *margin)?, 2 * pairs)
            }
            (Objective::ListwiseSoftmaxCe, LossInput::Listwise { groups, grades }) => {
                let n = grades.len().max(1);
                let s = g.input(SCORES_INPUT, &[n])?;
                (listwise_softmax_ce(&mut g, s, groups, grades)?, grades.len())
            }
            (objective, _) => {
                return Err(Error::Config(format!(
                    "objective {objective:?} does not match the batch layout"
                )))
            }
        };
        Ok(LossGraph { graph: g, loss, scores })
    }

    /// Loss value and its gradient with respect to each score.
    pub fn evaluate(&self, scores: &[f64]) -> Result<(f64, Vec<f64>)> {
        let bindings = [(SCORES_INPUT.to_string(), Tensor::vector(scores.to_vec()))].into();
        let values = self.graph.forward(&bindings)?;
        let loss = values.get(self.loss).data()[0];
        let grads = self.graph.backward(&values, self.loss)?;
        let ds = grads.input(SCORES_INPUT).map(|t| t.data().to_vec()).unwrap_or_else(|| vec![0.0; scores.len()]);
        Ok((loss, ds))
    }
}
