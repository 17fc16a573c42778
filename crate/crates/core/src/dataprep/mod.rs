//! Conversion of labelled text pairs into the unified dictionary / corpus /
//! relation representation, plus batch generation for training.

mod batches;
mod corpus;
mod embeddings;
mod prepare;
mod relations;
mod vocab;

pub use batches::{batches_listwise, batches_pairwise, batches_pointwise, generate_batches, Batch, BatchMode};
pub use corpus::{encode_corpus, encode_text, Corpus, CorpusEntry};
pub use embeddings::{load_embeddings, random_embeddings, EmbeddingTable, EMBEDDING_INIT_RANGE};
pub use prepare::{parse_raw_pairs, prepare, PrepareOptions, Prepared, RawPair};
pub use relations::{parse_relations, write_relations, RelationRecord};
pub use vocab::{build_vocabulary, Vocabulary, VocabFilter};

/// Padding id; never assigned to a word.
pub const PAD: usize = 0;
/// Id of every word missing from the vocabulary.
pub const OOV: usize = 1;

/// Lowercases and splits on ASCII whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase().split_ascii_whitespace().map(str::to_string).collect()
}
