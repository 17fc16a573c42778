//! Deep text matching toolkit.
//!
//! The crate is organised as a pipeline:
//!
//! * [`dataprep`] turns labelled text pairs into a word dictionary, a
//!   fixed-length corpus and a relation file, and generates pointwise,
//!   pairwise and listwise batches;
//! * [`autodiff`] and [`layers`] provide a small reverse-mode tensor engine
//!   and the matching-specific layers built on it;
//! * [`models`] assembles complete scoring graphs (ARC-I, MatchPyramid,
//!   DRMM, Match-SRNN) from a declarative [`models::ModelConfig`];
//! * [`training`] optimises them under pointwise, pairwise and listwise
//!   objectives, and [`evaluation`] computes ranking metrics and writes
//!   TREC run files.

pub mod autodiff;
pub mod dataprep;
pub mod error;
pub mod evaluation;
pub mod layers;
pub mod models;
pub mod synthetic;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use tensor::Tensor;

/// The generator behind every seeded choice in the crate.
pub(crate) fn seeded_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}
