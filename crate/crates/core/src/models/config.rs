use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::HistogramMode;

/// Upper bound on `left_length` and `right_length`.
pub const MAX_TEXT_LENGTH: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Representation-focused: convolutional encoders per side, compared by an MLP.
    Arci,
    /// Interaction-focused: convolution and dynamic pooling over a dot-product matching matrix.
    MatchPyramid,
    /// Interaction-focused: matching histograms scored per term and combined by term gating.
    Drmm,
    /// Interaction-focused: 2-D GRU over a cosine/dot interaction tensor.
    MatchSrnn,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arci" => Ok(ModelKind::Arci),
            "matchpyramid" => Ok(ModelKind::MatchPyramid),
            "drmm" => Ok(ModelKind::Drmm),
            "matchsrnn" => Ok(ModelKind::MatchSrnn),
            other => Err(Error::Config(format!("unknown model kind `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArciConfig {
    pub filters: usize,
    pub kernel_width: usize,
}

impl Default for ArciConfig {
    fn default() -> Self {
        ArciConfig { filters: 8, kernel_width: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatchPyramidConfig {
    pub filters: usize,
    pub kernel: [usize; 2],
    pub pool: [usize; 2],
}

impl Default for MatchPyramidConfig {
    fn default() -> Self {
        MatchPyramidConfig {
            filters: 4,
            kernel: [2, 2],
            pool: [2, 2],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DrmmConfig {
    pub bins: usize,
    pub histogram: HistogramMode,
}

impl Default for DrmmConfig {
    fn default() -> Self {
        DrmmConfig {
            bins: 30,
            histogram: HistogramMode::LogCount,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatchSrnnConfig {
    pub hidden: usize,
}

impl Default for MatchSrnnConfig {
    fn default() -> Self {
        MatchSrnnConfig { hidden: 4 }
    }
}

/// Declarative description of a scoring model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Rows of the embedding table, including PAD and OOV.
    pub vocab_size: usize,
    pub embedding_dim: usize,
    pub left_length: usize,
    pub right_length: usize,
    /// Hidden widths of the scoring MLP; a width-1 output layer is always appended.
    #[serde(default)]
    pub mlp: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Pretrained vectors; `None` means seeded random initialisation.
    #[serde(default)]
    pub embedding_file: Option<PathBuf>,
    #[serde(default = "yes")]
    pub trainable_embeddings: bool,
    #[serde(default)]
    pub arci: ArciConfig,
    #[serde(default)]
    pub matchpyramid: MatchPyramidConfig,
    #[serde(default)]
    pub drmm: DrmmConfig,
    #[serde(default)]
    pub matchsrnn: MatchSrnnConfig,
}

fn yes() -> bool {
    true
}

impl ModelConfig {
    /// A config with default hyperparameters for `kind`.
    pub fn new(kind: ModelKind, vocab_size: usize, embedding_dim: usize, left_length: usize, right_length: usize) -> Self {
        ModelConfig {
            kind,
            vocab_size,
            embedding_dim,
            left_length,
            right_length,
            mlp: Vec::new(),
            seed: 0,
            embedding_file: None,
            trainable_embeddings: true,
            arci: ArciConfig::default(),
            matchpyramid: MatchPyramidConfig::default(),
            drmm: DrmmConfig::default(),
            matchsrnn: MatchSrnnConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.vocab_size < 2 {
            return bad(format!("vocab_size must cover PAD and OOV, got {}", self.vocab_size));
        }
        for (name, v) in [
            ("embedding_dim", self.embedding_dim),
            ("left_length", self.left_length),
            ("right_length", self.right_length),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.left_length.max(self.right_length) > MAX_TEXT_LENGTH {
            return bad(format!("text lengths are limited to {MAX_TEXT_LENGTH}"));
        }
        if self.mlp.contains(&0) {
            return bad("mlp widths must be positive".into());
        }
        match self.kind {
            ModelKind::Arci => {
                let c = &self.arci;
                if c.filters == 0 || c.kernel_width == 0 {
                    return bad("arci filters and kernel_width must be positive".into());
                }
                if c.kernel_width > self.left_length.min(self.right_length) {
                    return bad(format!(
                        "arci kernel_width {} exceeds a text length ({}, {})",
                        c.kernel_width, self.left_length, self.right_length
                    ));
                }
            }
            ModelKind::MatchPyramid => {
                let c = &self.matchpyramid;
                if c.filters == 0 || c.kernel.contains(&0) || c.pool.contains(&0) {
                    return bad("matchpyramid filters, kernel and pool must be positive".into());
                }
                if c.kernel[0] > self.left_length || c.kernel[1] > self.right_length {
                    return bad(format!("matchpyramid kernel {:?} larger than the matching matrix", c.kernel));
                }
                let (h, w) = (self.left_length - c.kernel[0] + 1, self.right_length - c.kernel[1] + 1);
                if c.pool[0] > h || c.pool[1] > w {
                    return bad(format!("matchpyramid pool grid {:?} larger than the feature map [{h}, {w}]", c.pool));
                }
            }
            ModelKind::Drmm => {
                if self.drmm.bins < 2 {
                    return bad("drmm needs at least 2 histogram bins".into());
                }
            }
            ModelKind::MatchSrnn => {
                if self.matchsrnn.hidden == 0 {
                    return bad("matchsrnn hidden size must be positive".into());
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}
