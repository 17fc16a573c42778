use rand::Rng;

use super::{Vocabulary, PAD};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Half-width of the uniform range used for rows without a pretrained vector.
pub const EMBEDDING_INIT_RANGE: f64 = 0.2;

/// Word vectors indexed by wid, shape `[vocab_size, dim]`. Row 0 (PAD) is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    table: Tensor,
}

impl EmbeddingTable {
    pub fn from_tensor(table: Tensor) -> Result<Self> {
        if table.ndim() != 2 {
            return Err(Error::Data(format!("embedding table must be 2-D, got {:?}", table.shape())));
        }
        if !table.is_finite() {
            return Err(Error::Data("embedding table contains non-finite values".into()));
        }
        let mut table = table;
        let dim = table.shape()[1];
        table.data_mut()[PAD * dim..(PAD + 1) * dim].fill(0.0);
        Ok(EmbeddingTable { table })
    }

    pub fn tensor(&self) -> &Tensor {
        &self.table
    }

    pub fn into_tensor(self) -> Tensor {
        self.table
    }

    pub fn vocab_size(&self) -> usize {
        self.table.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.table.shape()[1]
    }

    pub fn row(&self, wid: usize) -> &[f64] {
        let d = self.dim();
        &self.table.data()[wid * d..(wid + 1) * d]
    }
}

fn uniform_rows(vocab_size: usize, dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = crate::seeded_rng(seed);
    (0..vocab_size * dim)
        .map(|_| rng.gen_range(-EMBEDDING_INIT_RANGE..=EMBEDDING_INIT_RANGE))
        .collect()
}

/// Seeded uniform `[-0.2, 0.2]` table with a zero PAD row.
pub fn random_embeddings(vocab_size: usize, dim: usize, seed: u64) -> Result<EmbeddingTable> {
    if vocab_size < 2 || dim == 0 {
        return Err(Error::Config(format!("invalid embedding shape [{vocab_size}, {dim}]")));
    }
    EmbeddingTable::from_tensor(Tensor::from_parts(vec![vocab_size, dim], uniform_rows(vocab_size, dim, seed)))
}

fn is_header(line: &str) -> bool {
    let toks: Vec<&str> = line.split_ascii_whitespace().collect();
    toks.len() == 2 && toks.iter().all(|t| t.parse::<u64>().is_ok())
}

/// Reads a word2vec-style text file (`word v1 ... vd` per line, optional
/// `count dim` header). Vocabulary words absent from the file keep seeded
/// uniform vectors; words absent from the vocabulary are ignored.
pub fn load_embeddings(text: &str, vocab: &Vocabulary, dim: usize, seed: u64) -> Result<EmbeddingTable> {
    if dim == 0 {
        return Err(Error::Config("embedding dimension must be positive".into()));
    }
    let mut rows = uniform_rows(vocab.size(), dim, seed);
    for (n, line) in text.lines().enumerate() {
        if n == 0 && is_header(line) {
            continue;
        }
        let mut toks = line.split(' ').filter(|t| !t.is_empty());
        let Some(word) = toks.next() else {
            continue;
        };
        let values = toks
            .map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| Error::parse(n + 1, format!("invalid vector value for word `{word}`")))?;
        if values.len() != dim {
            return Err(Error::parse(
                n + 1,
                format!("word `{word}` has {} values, expected {dim}", values.len()),
            ));
        }
        if let Some(wid) = vocab.wid(word) {
            rows[wid * dim..(wid + 1) * dim].copy_from_slice(&values);
        }
    }
    EmbeddingTable::from_tensor(Tensor::from_parts(vec![vocab.size(), dim], rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataprep::{build_vocabulary, tokenize, VocabFilter};

    fn vocab() -> Vocabulary {
        build_vocabulary(&[tokenize("b a"), tokenize("a c")], &VocabFilter::default()).unwrap()
    }

    #[test]
    fn file_rows_are_copied() {
        let text = "3 2\na 1 2\nb 3 4\nc 5 6\nzzz 9 9\n";
        let t = load_embeddings(text, &vocab(), 2, 1).unwrap();
        assert_eq!(t.row(2), &[1.0, 2.0]);
        assert_eq!(t.row(3), &[3.0, 4.0]);
        assert_eq!(t.row(4), &[5.0, 6.0]);
        assert_eq!(t.row(PAD), &[0.0, 0.0]);
    }

    #[test]
    fn empty_file_falls_back_to_seeded_uniform() {
        let a = load_embeddings("", &vocab(), 3, 9).unwrap();
        let b = load_embeddings("", &vocab(), 3, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.row(PAD), &[0.0; 3]);
        for w in 1..5 {
            assert!(a.row(w).iter().all(|v| v.abs() <= EMBEDDING_INIT_RANGE));
            assert!(a.row(w).iter().any(|&v| v != 0.0));
        }
    }

    #[test]
    fn dimension_mismatch_names_word() {
        let err = load_embeddings("a 1 2\nb 3\n", &vocab(), 2, 0).unwrap_err();
        assert!(err.to_string().contains("`b`"), "{err}");
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn header_needs_two_integers() {
        // A two-token line that is not all-integer is a 1-d vector.
        let t = load_embeddings("a 0.5\n", &vocab(), 1, 0).unwrap();
        assert_eq!(t.row(2), &[0.5]);
        let t = load_embeddings("4 1\na 0.5\n", &vocab(), 1, 0).unwrap();
        assert_eq!(t.row(2), &[0.5]);
    }
}
