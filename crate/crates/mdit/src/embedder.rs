//! Token embedding, one-hot label encoding, and pooled fixed-size vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{TokenizedSample, PAD_ID};
use crate::error::{Error, Result};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Original,
    Generated,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Provenance::Original => write!(f, "original"),
            Provenance::Generated => write!(f, "generated"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    weights: Matrix,
    pub seed: u64,
}

impl EmbeddingTable {
    pub fn vocab_size(&self) -> usize {
        self.weights.rows()
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn row(&self, id: u32) -> &[f64] {
        self.weights.row(id as usize)
    }
}

/// Uniform [-0.1, 0.1] entries from a seeded ChaCha8 stream; the PAD row
/// is zeroed afterward so alignment padding stays inert.
pub fn init_embedding_table(vocab_size: usize, dim: usize, seed: u64) -> Result<EmbeddingTable> {
    if vocab_size < 5 || dim < 2 {
        return Err(Error::InvalidParameter(format!(
            "embedding table needs V >= 5 and d >= 2, got V={vocab_size}, d={dim}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Matrix::zeros(vocab_size, dim);
    for v in weights.data_mut() {
        *v = rng.gen_range(-0.1..=0.1);
    }
    for v in weights.row_mut(PAD_ID as usize) {
        *v = 0.0;
    }
    Ok(EmbeddingTable { weights, seed })
}

/// A sample lifted into embedding space: per-position embedding rows plus
/// per-label-position distributions over the vocabulary. Rows at and past
/// `real_rows` / `real_label_rows` are alignment padding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedSample {
    pub hidden: Matrix,
    pub labels: Matrix,
    pub real_rows: usize,
    pub real_label_rows: usize,
    pub task_id: String,
    pub provenance: Provenance,
}

pub fn one_hot(id: u32, vocab_size: usize) -> Result<Vec<f64>> {
    if id as usize >= vocab_size {
        return Err(Error::InvalidParameter(format!(
            "one-hot id {id} out of range for V={vocab_size}"
        )));
    }
    let mut v = vec![0.0; vocab_size];
    v[id as usize] = 1.0;
    Ok(v)
}

pub fn embed(sample: &TokenizedSample, table: &EmbeddingTable) -> Result<EmbeddedSample> {
    let vocab_size = table.vocab_size();
    for &id in sample.input_ids.iter().chain(&sample.label_ids) {
        if id as usize >= vocab_size {
            return Err(Error::CorruptInput(format!(
                "token id {id} out of range for V={vocab_size}"
            )));
        }
    }
    let mut hidden = Matrix::zeros(sample.input_len(), table.dim());
    for (t, &id) in sample.input_ids.iter().enumerate() {
        hidden.row_mut(t).copy_from_slice(table.row(id));
    }
    let mut labels = Matrix::zeros(sample.label_len(), vocab_size);
    for (t, &id) in sample.label_ids.iter().enumerate() {
        labels.set(t, id as usize, 1.0);
    }
    Ok(EmbeddedSample {
        real_rows: hidden.rows(),
        real_label_rows: labels.rows(),
        hidden,
        labels,
        task_id: sample.task_id.clone(),
        provenance: Provenance::Original,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PooledVector {
    pub values: Vec<f64>,
    /// Index into whatever pool the caller assembled.
    pub source: usize,
}

/// Arithmetic mean over the non-PAD hidden rows.
pub fn pool(sample: &EmbeddedSample, source: usize) -> Result<PooledVector> {
    if sample.real_rows == 0 {
        return Err(Error::DegenerateInput(
            "cannot pool a sample with no non-PAD rows".into(),
        ));
    }
    Ok(PooledVector {
        values: sample.hidden.mean_of_rows(sample.real_rows),
        source,
    })
}
