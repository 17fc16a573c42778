//! Matching-specific layers, each built as a fragment of a [`Graph`].

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, NodeId, Op};
use crate::dataprep::PAD;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Uniform `[-s, s]` with `s = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor {
    let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n = shape.iter().product();
    Tensor::from_parts(shape.to_vec(), (0..n).map(|_| rng.gen_range(-s..=s)).collect())
}

/// Fully connected layer on a row vector: `x [1, n] · W [n, o] + b [o]`.
#[derive(Clone, Copy, Debug)]
pub struct Dense {
    pub weight: NodeId,
    pub bias: NodeId,
}

impl Dense {
    pub fn register(g: &mut Graph, name: &str, inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        Ok(Dense {
            weight: g.parameter(&format!("{name}.weight"), glorot_uniform(rng, &[inputs, outputs], inputs, outputs))?,
            bias: g.parameter(&format!("{name}.bias"), Tensor::zeros(vec![outputs]))?,
        })
    }

    pub fn apply(&self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        let y = g.matmul(x, self.weight)?;
        g.add(y, self.bias)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchingMode {
    Dot,
    Cosine,
    /// Exact id match; operands are wid vectors rather than embeddings.
    Indicator,
}

/// Word-by-word matching matrix `[L1, L2]`.
pub fn matching_matrix(g: &mut Graph, left: NodeId, right: NodeId, mode: MatchingMode) -> Result<NodeId> {
    match mode {
        MatchingMode::Dot => {
            if g.shape(left).len() != 2 || g.shape(right).len() != 2 || g.shape(left)[1] != g.shape(right)[1] {
                return Err(Error::shape(
                    "matching_matrix(dot)",
                    "[L1, d] and [L2, d]",
                    format!("{:?} and {:?}", g.shape(left), g.shape(right)),
                ));
            }
            let rt = g.transpose(right)?;
            g.matmul(left, rt)
        }
        MatchingMode::Cosine => g.cosine_matrix(left, right),
        MatchingMode::Indicator => g.op(Op::IndicatorMatrix { padding: PAD }, &[left, right]),
    }
}

/// Softmax gates over the non-padding query terms: `softmax(x_i · w)`.
///
/// `query_ids` marks padding positions, which receive gate 0.
pub fn term_gating(g: &mut Graph, query_emb: NodeId, query_ids: NodeId, gate_weight: NodeId) -> Result<NodeId> {
    let d = g.shape(gate_weight).iter().product::<usize>();
    let w = g.reshape(gate_weight, &[d, 1])?;
    let logits = g.matmul(query_emb, w)?;
    let l1 = g.shape(logits)[0];
    let logits = g.reshape(logits, &[l1])?;
    let mask = g.op(Op::NonPadMask { padding: PAD }, &[query_ids])?;
    g.masked_softmax(logits, mask)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HistogramMode {
    Count,
    LogCount,
}

/// Per query term, counts of cosine similarities to non-padding document
/// terms in `bins` equal-width buckets over `[-1, 1]`. Not differentiated.
pub fn matching_histogram(
    g: &mut Graph,
    query_emb: NodeId,
    doc_emb: NodeId,
    doc_ids: NodeId,
    bins: usize,
    mode: HistogramMode,
) -> Result<NodeId> {
    let log = mode == HistogramMode::LogCount;
    g.op(Op::Histogram { bins, log, padding: PAD }, &[query_emb, doc_emb, doc_ids])
}

/// Max pooling of an `[.., n1, n2]` node onto a `p1 x p2` grid.
pub fn grid_pool(g: &mut Graph, x: NodeId, p1: usize, p2: usize) -> Result<NodeId> {
    g.grid_pool(x, p1, p2)
}

/// Weights of a 2-D GRU with input size `m` and hidden size `h`, in row-vector
/// convention: gate pre-activations are `q · W + b`.
#[derive(Clone, Copy, Debug)]
pub struct Gru2dParams {
    /// `[3h + m, 3h]`, applied to `q = [h_left; h_top; h_diag; s]`.
    pub reset: Dense,
    /// `[m + 3h, h]`, applied to `[s; r_l*h_left; r_t*h_top; r_d*h_diag]`.
    pub candidate: Dense,
    /// `[3h + m, 4h]`, applied to `q`.
    pub mix: Dense,
    pub input_dim: usize,
    pub hidden: usize,
}

impl Gru2dParams {
    pub fn register(g: &mut Graph, name: &str, input_dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let q = 3 * hidden + input_dim;
        Ok(Gru2dParams {
            reset: Dense::register(g, &format!("{name}.reset"), q, 3 * hidden, rng)?,
            candidate: Dense::register(g, &format!("{name}.candidate"), q, hidden, rng)?,
            mix: Dense::register(g, &format!("{name}.mix"), q, 4 * hidden, rng)?,
            input_dim,
            hidden,
        })
    }

    pub fn param_count(input_dim: usize, hidden: usize) -> usize {
        let q = 3 * hidden + input_dim;
        q * 3 * hidden + 3 * hidden + q * hidden + hidden + q * 4 * hidden + 4 * hidden
    }
}

/// Hidden states of a 2-D GRU scan.
#[derive(Clone, Debug)]
pub struct Gru2dOutput {
    /// Row-major `[1, h]` state per cell.
    pub cells: Vec<NodeId>,
    /// Row-major `[4, h]` mixing weights per cell (left, top, diag, candidate).
    pub mixing: Vec<NodeId>,
    pub rows: usize,
    pub cols: usize,
    pub hidden: usize,
}

impl Gru2dOutput {
    pub fn cell(&self, i: usize, j: usize) -> NodeId {
        self.cells[i * self.cols + j]
    }

    /// State of the bottom-right cell, `[1, h]`.
    pub fn last(&self) -> NodeId {
        *self.cells.last().expect("grid is non-empty")
    }

    /// All states stacked as `[L1, L2, h]`.
    pub fn stacked(&self, g: &mut Graph) -> Result<NodeId> {
        let all = g.concat(&self.cells, 0)?;
        g.reshape(all, &[self.rows, self.cols, self.hidden])
    }
}

/// Gated recurrent scan over an interaction tensor `S [L1, L2, m]`.
///
/// Cell `(i, j)` combines the states to its left, top and top-left diagonal
/// (zero outside the grid) with the input `S[i, j]`: three reset gates scale
/// the predecessors inside a tanh candidate, and a per-unit softmax over four
/// logits mixes the three predecessors and the candidate.
pub fn gru2d(g: &mut Graph, input: NodeId, params: &Gru2dParams) -> Result<Gru2dOutput> {
    let shape = g.shape(input).to_vec();
    let h = params.hidden;
    if shape.len() != 3 || shape[2] != params.input_dim {
        return Err(Error::shape("gru2d input", format!("[L1, L2, {}]", params.input_dim), format!("{shape:?}")));
    }
    let (rows, cols, m) = (shape[0], shape[1], shape[2]);
    let flat = g.reshape(input, &[rows * cols, m])?;
    let zero = g.constant(Tensor::zeros(vec![1, h]));
    let mut cells: Vec<NodeId> = Vec::with_capacity(rows * cols);
    let mut mixing = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let left = if j > 0 { cells[i * cols + j - 1] } else { zero };
            let top = if i > 0 { cells[(i - 1) * cols + j] } else { zero };
            let diag = if i > 0 && j > 0 { cells[(i - 1) * cols + j - 1] } else { zero };
            let s = g.slice(flat, 0, i * cols + j, 1)?;

            let q = g.concat(&[left, top, diag, s], 1)?;
            let r = params.reset.apply(g, q)?;
            let r = g.sigmoid(r)?;
            let mut gated = vec![s];
            for (k, prev) in [left, top, diag].into_iter().enumerate() {
                let rk = g.slice(r, 1, k * h, h)?;
                gated.push(g.mul(rk, prev)?);
            }
            let c_in = g.concat(&gated, 1)?;
            let cand = params.candidate.apply(g, c_in)?;
            let cand = g.tanh(cand)?;

            let z = params.mix.apply(g, q)?;
            let z = g.reshape(z, &[4, h])?;
            let z = g.softmax(z, 0)?;
            let mut state = None;
            for (k, src) in [left, top, diag, cand].into_iter().enumerate() {
                let zk = g.slice(z, 0, k, 1)?;
                let term = g.mul(zk, src)?;
                state = Some(match state {
                    None => term,
                    Some(acc) => g.add(acc, term)?,
                });
            }
            cells.push(state.expect("four terms"));
            mixing.push(z);
        }
    }
    Ok(Gru2dOutput {
        cells,
        mixing,
        rows,
        cols,
        hidden: h,
    })
}
