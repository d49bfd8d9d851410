//! On-disk layout for embedded sample sets.
//!
//! A set directory holds `hidden.mdt1` (all hidden matrices concatenated
//! row-wise), `labels.mdt1` (all label matrices concatenated row-wise),
//! and `index.json` describing per-sample row spans. Generated sets add
//! `manifest.jsonl` with one line per sample:
//! `{"lambda": float, "parent_i": int, "parent_j": int, "tasks": [str, str]}`.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedder::{EmbeddedSample, Provenance};
use crate::error::{Error, Result};
use crate::interpolator::{GeneratedSample, GeneratedSet};
use crate::tensor::{self, Matrix};

#[derive(Debug, Serialize, Deserialize)]
struct SampleEntry {
    task: String,
    provenance: Provenance,
    hidden_rows: usize,
    real_rows: usize,
    label_rows: usize,
    real_label_rows: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct SetIndex {
    dim: usize,
    vocab_size: usize,
    samples: Vec<SampleEntry>,
}

#[derive(Debug, Serialize, Deserialize, Clone, PartialEq)]
pub struct ManifestEntry {
    pub lambda: f64,
    pub parent_i: usize,
    pub parent_j: usize,
    pub tasks: (String, String),
}

pub fn save_set<'a, I>(dir: &Path, samples: I, dim: usize, vocab_size: usize) -> Result<()>
where
    I: IntoIterator<Item = &'a EmbeddedSample>,
{
    fs::create_dir_all(dir)?;
    let mut hidden_data = Vec::new();
    let mut label_data = Vec::new();
    let mut entries = Vec::new();
    for s in samples {
        hidden_data.extend_from_slice(s.hidden.data());
        label_data.extend_from_slice(s.labels.data());
        entries.push(SampleEntry {
            task: s.task_id.clone(),
            provenance: s.provenance,
            hidden_rows: s.hidden.rows(),
            real_rows: s.real_rows,
            label_rows: s.labels.rows(),
            real_label_rows: s.real_label_rows,
        });
    }
    let total_hidden: usize = entries.iter().map(|e| e.hidden_rows).sum();
    let total_labels: usize = entries.iter().map(|e| e.label_rows).sum();
    tensor::write_tensor(&dir.join("hidden.mdt1"), &[total_hidden, dim], &hidden_data)?;
    tensor::write_tensor(&dir.join("labels.mdt1"), &[total_labels, vocab_size], &label_data)?;
    let index = SetIndex {
        dim,
        vocab_size,
        samples: entries,
    };
    fs::write(
        dir.join("index.json"),
        serde_json::to_string_pretty(&index)?.as_bytes(),
    )?;
    Ok(())
}

pub fn load_set(dir: &Path) -> Result<Vec<EmbeddedSample>> {
    let index: SetIndex = serde_json::from_str(&fs::read_to_string(dir.join("index.json"))?)?;
    let (hidden_dims, hidden_data) = tensor::read_tensor(&dir.join("hidden.mdt1"))?;
    let (label_dims, label_data) = tensor::read_tensor(&dir.join("labels.mdt1"))?;
    if hidden_dims.len() != 2 || hidden_dims[1] != index.dim {
        return Err(Error::CorruptInput(format!(
            "{}: hidden tensor dims {hidden_dims:?} disagree with index",
            dir.display()
        )));
    }
    if label_dims.len() != 2 || label_dims[1] != index.vocab_size {
        return Err(Error::CorruptInput(format!(
            "{}: label tensor dims {label_dims:?} disagree with index",
            dir.display()
        )));
    }
    let mut samples = Vec::with_capacity(index.samples.len());
    let mut h_off = 0usize;
    let mut l_off = 0usize;
    for e in index.samples {
        let h_len = e.hidden_rows * index.dim;
        let l_len = e.label_rows * index.vocab_size;
        if h_off + h_len > hidden_data.len() || l_off + l_len > label_data.len() {
            return Err(Error::CorruptInput(format!(
                "{}: index spans exceed tensor payload",
                dir.display()
            )));
        }
        samples.push(EmbeddedSample {
            hidden: Matrix::from_vec(
                e.hidden_rows,
                index.dim,
                hidden_data[h_off..h_off + h_len].to_vec(),
            ),
            labels: Matrix::from_vec(
                e.label_rows,
                index.vocab_size,
                label_data[l_off..l_off + l_len].to_vec(),
            ),
            real_rows: e.real_rows,
            real_label_rows: e.real_label_rows,
            task_id: e.task,
            provenance: e.provenance,
        });
        h_off += h_len;
        l_off += l_len;
    }
    Ok(samples)
}

pub fn save_generated(dir: &Path, set: &GeneratedSet, dim: usize, vocab_size: usize) -> Result<()> {
    save_set(dir, set.samples.iter().map(|g| &g.embedded), dim, vocab_size)?;
    let mut w = std::io::BufWriter::new(fs::File::create(dir.join("manifest.jsonl"))?);
    for g in &set.samples {
        let entry = ManifestEntry {
            lambda: g.lambda,
            parent_i: g.parent_i,
            parent_j: g.parent_j,
            tasks: g.parent_tasks.clone(),
        };
        writeln!(w, "{}", serde_json::to_string(&entry)?)?;
    }
    Ok(())
}

pub fn load_generated(dir: &Path) -> Result<GeneratedSet> {
    let embedded = load_set(dir)?;
    let reader = BufReader::new(fs::File::open(dir.join("manifest.jsonl"))?);
    let mut entries = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        entries.push(serde_json::from_str::<ManifestEntry>(&line)?);
    }
    if entries.len() != embedded.len() {
        return Err(Error::CorruptInput(format!(
            "{}: manifest has {} entries for {} samples",
            dir.display(),
            entries.len(),
            embedded.len()
        )));
    }
    Ok(GeneratedSet {
        samples: embedded
            .into_iter()
            .zip(entries)
            .map(|(embedded, e)| GeneratedSample {
                embedded,
                lambda: e.lambda,
                parent_i: e.parent_i,
                parent_j: e.parent_j,
                parent_tasks: e.tasks,
            })
            .collect(),
    })
}
