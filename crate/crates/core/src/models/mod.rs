//! Complete scoring models assembled from a [`ModelConfig`].
//!
//! Every model is a graph with two inputs, `left` and `right` (wid vectors of
//! the configured fixed lengths), and a one-element score output.

mod config;
mod file;

use rand_chacha::ChaCha8Rng;

pub use config::{ArciConfig, DrmmConfig, MatchPyramidConfig, MatchSrnnConfig, ModelConfig, ModelKind, MAX_TEXT_LENGTH};
pub use file::{FORMAT_VERSION, MAGIC};

use crate::autodiff::{Bindings, Graph, NodeId};
use crate::dataprep::{load_embeddings, random_embeddings, EmbeddingTable, Vocabulary, PAD};
use crate::error::{Error, Result};
use crate::layers::{self, glorot_uniform, Dense, Gru2dParams, MatchingMode};
use crate::tensor::Tensor;

pub const LEFT_INPUT: &str = "left";
pub const RIGHT_INPUT: &str = "right";

#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    graph: Graph,
    score: NodeId,
}

/// MLP ending in a single output unit; tanh between layers.
struct Mlp {
    layers: Vec<Dense>,
}

impl Mlp {
    fn register(g: &mut Graph, input: usize, hidden: &[usize], rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut widths = vec![input];
        widths.extend_from_slice(hidden);
        widths.push(1);
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Dense::register(g, &format!("mlp.{i}"), w[0], w[1], rng))
            .collect::<Result<_>>()?;
        Ok(Mlp { layers })
    }

    fn apply(&self, g: &mut Graph, mut x: NodeId) -> Result<NodeId> {
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                x = g.tanh(x)?;
            }
            x = layer.apply(g, x)?;
        }
        Ok(x)
    }
}

/// Shared 1-D convolution encoder for ARC-I: conv over positions, relu, max over positions.
fn arci_side(g: &mut Graph, emb: NodeId, kernel: NodeId, bias: NodeId) -> Result<NodeId> {
    let (len, dim) = (g.shape(emb)[0], g.shape(emb)[1]);
    let x = g.transpose(emb)?;
    let x = g.reshape(x, &[dim, 1, len])?;
    let c = g.conv2d(x, kernel, bias)?;
    let c = g.relu(c)?;
    let (f, w) = (g.shape(c)[0], g.shape(c)[2]);
    let c = g.reshape(c, &[f, w])?;
    let pooled = g.max(c, 1)?;
    g.reshape(pooled, &[1, f])
}

fn build_graph(config: &ModelConfig, embeddings: EmbeddingTable) -> Result<(Graph, NodeId)> {
    config.validate()?;
    if embeddings.vocab_size() != config.vocab_size || embeddings.dim() != config.embedding_dim {
        return Err(Error::Config(format!(
            "embedding table [{}, {}] does not match config [{}, {}]",
            embeddings.vocab_size(),
            embeddings.dim(),
            config.vocab_size,
            config.embedding_dim
        )));
    }
    let mut rng = crate::seeded_rng(config.seed.wrapping_add(1));
    let mut g = Graph::new();
    let (l1, l2, d) = (config.left_length, config.right_length, config.embedding_dim);
    let left = g.input(LEFT_INPUT, &[l1])?;
    let right = g.input(RIGHT_INPUT, &[l2])?;
    let table = if config.trainable_embeddings {
        g.parameter("embedding", embeddings.into_tensor())?
    } else {
        g.frozen_parameter("embedding", embeddings.into_tensor())?
    };
    let el = g.gather(table, left, Some(PAD))?;
    let er = g.gather(table, right, Some(PAD))?;

    let score = match config.kind {
        ModelKind::Arci => {
            let c = &config.arci;
            let (f, k) = (c.filters, c.kernel_width);
            let kernel = g.parameter("conv.weight", glorot_uniform(&mut rng, &[f, d, 1, k], d * k, f * k))?;
            let bias = g.parameter("conv.bias", Tensor::zeros(vec![f]))?;
            let mlp = Mlp::register(&mut g, 2 * f, &config.mlp, &mut rng)?;
            let vl = arci_side(&mut g, el, kernel, bias)?;
            let vr = arci_side(&mut g, er, kernel, bias)?;
            let both = g.concat(&[vl, vr], 1)?;
            mlp.apply(&mut g, both)?
        }
        ModelKind::MatchPyramid => {
            let c = &config.matchpyramid;
            let (f, [kh, kw], [p1, p2]) = (c.filters, c.kernel, c.pool);
            let kernel = g.parameter("conv.weight", glorot_uniform(&mut rng, &[f, 1, kh, kw], kh * kw, f * kh * kw))?;
            let bias = g.parameter("conv.bias", Tensor::zeros(vec![f]))?;
            let mlp = Mlp::register(&mut g, f * p1 * p2, &config.mlp, &mut rng)?;
            let m = layers::matching_matrix(&mut g, el, er, MatchingMode::Dot)?;
            let m = g.reshape(m, &[1, l1, l2])?;
            let c = g.conv2d(m, kernel, bias)?;
            let c = g.relu(c)?;
            let pooled = layers::grid_pool(&mut g, c, p1, p2)?;
            let flat = g.reshape(pooled, &[1, f * p1 * p2])?;
            mlp.apply(&mut g, flat)?
        }
        ModelKind::Drmm => {
            let c = &config.drmm;
            let gate = g.parameter("gate.weight", glorot_uniform(&mut rng, &[d], d, 1))?;
            let mlp = Mlp::register(&mut g, c.bins, &config.mlp, &mut rng)?;
            let hist = layers::matching_histogram(&mut g, el, er, right, c.bins, c.histogram)?;
            let term_scores = mlp.apply(&mut g, hist)?;
            let term_scores = g.reshape(term_scores, &[l1])?;
            let gates = layers::term_gating(&mut g, el, left, gate)?;
            let weighted = g.mul(gates, term_scores)?;
            g.sum_all(weighted)?
        }
        ModelKind::MatchSrnn => {
            let h = config.matchsrnn.hidden;
            let params = Gru2dParams::register(&mut g, "gru", 2, h, &mut rng)?;
            let mlp = Mlp::register(&mut g, h, &config.mlp, &mut rng)?;
            let cos = layers::matching_matrix(&mut g, el, er, MatchingMode::Cosine)?;
            let dot = layers::matching_matrix(&mut g, el, er, MatchingMode::Dot)?;
            let cos = g.reshape(cos, &[l1, l2, 1])?;
            let dot = g.reshape(dot, &[l1, l2, 1])?;
            let s = g.concat(&[cos, dot], 2)?;
            let states = layers::gru2d(&mut g, s, &params)?;
            mlp.apply(&mut g, states.last())?
        }
    };
    let score = g.reshape(score, &[1])?;
    Ok((g, score))
}

fn wid_tensor(wids: &[usize]) -> Tensor {
    Tensor::vector(wids.iter().map(|&w| w as f64).collect())
}

impl Model {
    /// Builds a model with seeded random embeddings. Fails if the config
    /// names an embedding file, which needs a vocabulary to resolve.
    pub fn build(config: &ModelConfig) -> Result<Self> {
        if config.embedding_file.is_some() {
            return Err(Error::Config("an embedding file needs a vocabulary; use Model::build_with_vocab".into()));
        }
        Self::build_with_embeddings(config, random_embeddings(config.vocab_size, config.embedding_dim, config.seed)?)
    }

    /// Builds a model, reading pretrained vectors if the config names a file.
    pub fn build_with_vocab(config: &ModelConfig, vocab: &Vocabulary) -> Result<Self> {
        if vocab.size() != config.vocab_size {
            return Err(Error::Config(format!(
                "vocabulary has {} ids but the model expects {}",
                vocab.size(),
                config.vocab_size
            )));
        }
        let table = match &config.embedding_file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read embedding file {}: {e}", path.display())))?;
                load_embeddings(&text, vocab, config.embedding_dim, config.seed)?
            }
            None => random_embeddings(config.vocab_size, config.embedding_dim, config.seed)?,
        };
        Self::build_with_embeddings(config, table)
    }

    pub fn build_with_embeddings(config: &ModelConfig, embeddings: EmbeddingTable) -> Result<Self> {
        let (graph, score) = build_graph(config, embeddings)?;
        Ok(Model {
            config: config.clone(),
            graph,
            score,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn graph_mut(&mut self) -> &mut Graph {
        &mut self.graph
    }

    pub fn score_node(&self) -> NodeId {
        self.score
    }

    pub fn param_count(&self) -> usize {
        self.graph.param_count()
    }

    /// Closed-form number of scalar parameters for a config, or `None` if it overflows `usize`.
    pub fn expected_param_count(config: &ModelConfig) -> Option<usize> {
        let mul = |xs: &[usize]| xs.iter().try_fold(1usize, |acc, &x| acc.checked_mul(x));
        let mlp = |input: usize| {
            let mut widths = vec![input];
            widths.extend_from_slice(&config.mlp);
            widths.push(1);
            widths.windows(2).try_fold(0usize, |acc, w| acc.checked_add(mul(w)?)?.checked_add(w[1]))
        };
        let sum = |xs: &[Option<usize>]| xs.iter().try_fold(0usize, |acc, &x| acc.checked_add(x?));
        let d = config.embedding_dim;
        let head = match config.kind {
            ModelKind::Arci => {
                let f = config.arci.filters;
                sum(&[mul(&[f, d, config.arci.kernel_width]), Some(f), f.checked_mul(2).and_then(mlp)])
            }
            ModelKind::MatchPyramid => {
                let c = &config.matchpyramid;
                let f = c.filters;
                sum(&[mul(&[f, c.kernel[0], c.kernel[1]]), Some(f), mul(&[f, c.pool[0], c.pool[1]]).and_then(mlp)])
            }
            ModelKind::Drmm => sum(&[Some(d), mlp(config.drmm.bins)]),
            ModelKind::MatchSrnn => {
                let h = config.matchsrnn.hidden;
                let q = h.checked_mul(3)?.checked_add(2)?;
                let gru = sum(&[mul(&[q, 3, h]), mul(&[3, h]), mul(&[q, h]), Some(h), mul(&[q, 4, h]), mul(&[4, h])]);
                sum(&[gru, mlp(h)])
            }
        };
        sum(&[mul(&[config.vocab_size, d]), head])
    }

    /// Input bindings for one pair, checking the fixed lengths.
    pub fn bindings(&self, left: &[usize], right: &[usize]) -> Result<Bindings> {
        for (side, wids, expected) in [
            (LEFT_INPUT, left, self.config.left_length),
            (RIGHT_INPUT, right, self.config.right_length),
        ] {
            if wids.len() != expected {
                return Err(Error::shape(format!("{side} input"), format!("[{expected}]"), format!("[{}]", wids.len())));
            }
        }
        Ok(Bindings::from([
            (LEFT_INPUT.to_string(), wid_tensor(left)),
            (RIGHT_INPUT.to_string(), wid_tensor(right)),
        ]))
    }

    pub fn score_pair(&self, left: &[usize], right: &[usize]) -> Result<f64> {
        let values = self.graph.forward(&self.bindings(left, right)?)?;
        Ok(values.get(self.score).data()[0])
    }

    /// Scores `left[i]` against `right[i]` for every row.
    pub fn score_pairs(&self, left: &[Vec<usize>], right: &[Vec<usize>]) -> Result<Tensor> {
        if left.len() != right.len() || left.is_empty() {
            return Err(Error::Data(format!(
                "score_pairs needs matching non-empty batches, got {} and {} rows",
                left.len(),
                right.len()
            )));
        }
        let scores = left
            .iter()
            .zip(right)
            .map(|(l, r)| self.score_pair(l, r))
            .collect::<Result<Vec<_>>>()?;
        Ok(Tensor::vector(scores))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_table_must_match_config() {
        let c = ModelConfig::new(ModelKind::Drmm, 6, 3, 2, 3);
        let table = random_embeddings(5, 3, 0).unwrap();
        assert!(Model::build_with_embeddings(&c, table).is_err());
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let m = Model::build(&ModelConfig::new(ModelKind::Drmm, 6, 3, 2, 3)).unwrap();
        assert!(m.score_pair(&[2, 3, 4], &[2, 3, 4]).is_err());
        assert!(m.score_pair(&[2, 3], &[2, 3, 4]).is_ok());
    }

    #[test]
    fn out_of_vocabulary_wid_is_rejected() {
        let m = Model::build(&ModelConfig::new(ModelKind::MatchSrnn, 6, 3, 2, 3)).unwrap();
        assert!(matches!(m.score_pair(&[2, 6], &[2, 3, 4]), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn embedding_file_requires_vocab() {
        let mut c = ModelConfig::new(ModelKind::Drmm, 6, 3, 2, 3);
        c.embedding_file = Some("vectors.txt".into());
        assert!(Model::build(&c).is_err());
    }
}
