//! Corpus loading, vocabulary, tokenization, and length bucketing.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const BOS_ID: u32 = 2;
pub const EOS_ID: u32 = 3;

pub const RESERVED_TOKENS: [&str; 4] = ["<pad>", "<unk>", "<bos>", "<eos>"];

#[derive(Debug, Clone)]
pub struct InstructionSample {
    pub instruction: String,
    pub input: Option<String>,
    pub output: String,
    pub task_id: String,
}

#[derive(Debug, Clone)]
pub struct TaskDataset {
    pub task_id: String,
    pub samples: Vec<InstructionSample>,
}

impl TaskDataset {
    pub fn size(&self) -> usize {
        self.samples.len()
    }
}

#[derive(Debug, Deserialize)]
struct RawSample {
    instruction: String,
    #[serde(default)]
    input: Option<String>,
    output: String,
}

/// Loads a JSONL instruction file. Malformed lines are skipped and counted,
/// not fatal; a file with zero valid lines is an error.
pub fn load_jsonl(path: &Path, task_id: &str) -> Result<(TaskDataset, usize)> {
    let file = File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let reader = BufReader::new(file);
    let mut samples = Vec::new();
    let mut malformed = 0usize;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RawSample>(&line) {
            Ok(raw) if !raw.instruction.trim().is_empty() && !raw.output.trim().is_empty() => {
                samples.push(InstructionSample {
                    instruction: raw.instruction,
                    input: raw.input.filter(|s| !s.trim().is_empty()),
                    output: raw.output,
                    task_id: task_id.to_string(),
                });
            }
            _ => malformed += 1,
        }
    }
    if samples.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "{}: no valid samples ({malformed} malformed lines)",
            path.display()
        )));
    }
    Ok((
        TaskDataset {
            task_id: task_id.to_string(),
            samples,
        },
        malformed,
    ))
}

#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn id(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Plain-text format: one token per line, line number = id.
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(File::create(path)?);
        for t in &self.tokens {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Vocabulary> {
        let reader = BufReader::new(File::open(path)?);
        let tokens: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
        if tokens.len() < 4 || tokens[..4] != RESERVED_TOKENS {
            return Err(Error::CorruptInput(format!(
                "{}: vocabulary file lacks the reserved token header",
                path.display()
            )));
        }
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Ok(Vocabulary { tokens, ids })
    }
}

/// Lowercases, then splits on whitespace with punctuation characters
/// broken out as standalone tokens.
pub fn split_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for ch in text.to_lowercase().chars() {
        if ch.is_whitespace() {
            if !word.is_empty() {
                out.push(std::mem::take(&mut word));
            }
        } else if ch.is_alphanumeric() {
            word.push(ch);
        } else {
            if !word.is_empty() {
                out.push(std::mem::take(&mut word));
            }
            out.push(ch.to_string());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

/// Builds the vocabulary: 4 reserved tokens plus all corpus tokens with
/// frequency >= min_freq, ordered by descending frequency then lexicographic.
pub fn build_vocab(datasets: &[TaskDataset], min_freq: usize) -> Result<Vocabulary> {
    if min_freq < 1 {
        return Err(Error::InvalidParameter("min_freq must be >= 1".into()));
    }
    let mut freq: HashMap<String, usize> = HashMap::new();
    for ds in datasets {
        for s in &ds.samples {
            for field in [Some(&s.instruction), s.input.as_ref(), Some(&s.output)]
                .into_iter()
                .flatten()
            {
                for t in split_tokens(field) {
                    *freq.entry(t).or_insert(0) += 1;
                }
            }
        }
    }
    if freq.is_empty() {
        return Err(Error::EmptyDataset("corpus contains no tokens".into()));
    }
    let mut ordered: Vec<(String, usize)> =
        freq.into_iter().filter(|&(_, c)| c >= min_freq).collect();
    ordered.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let mut tokens: Vec<String> = RESERVED_TOKENS.iter().map(|s| s.to_string()).collect();
    tokens.extend(ordered.into_iter().map(|(t, _)| t));
    let ids = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i as u32))
        .collect();
    Ok(Vocabulary { tokens, ids })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenizedSample {
    /// BOS, then instruction tokens, then optional input tokens.
    pub input_ids: Vec<u32>,
    /// Output tokens terminated by EOS.
    pub label_ids: Vec<u32>,
    pub task_id: String,
}

impl TokenizedSample {
    pub fn input_len(&self) -> usize {
        self.input_ids.len()
    }

    pub fn label_len(&self) -> usize {
        self.label_ids.len()
    }
}

pub fn tokenize(sample: &InstructionSample, vocab: &Vocabulary) -> TokenizedSample {
    let mut input_ids = vec![BOS_ID];
    input_ids.extend(split_tokens(&sample.instruction).iter().map(|t| vocab.id(t)));
    if let Some(input) = &sample.input {
        input_ids.extend(split_tokens(input).iter().map(|t| vocab.id(t)));
    }
    let mut label_ids: Vec<u32> = split_tokens(&sample.output)
        .iter()
        .map(|t| vocab.id(t))
        .collect();
    label_ids.push(EOS_ID);
    TokenizedSample {
        input_ids,
        label_ids,
        task_id: sample.task_id.clone(),
    }
}

#[derive(Debug, Clone)]
pub struct LengthBucketIndex {
    pub bucket_width: usize,
    /// bucket index -> task_id -> per-task sample ordinals, in input order.
    pub buckets: BTreeMap<usize, BTreeMap<String, Vec<usize>>>,
}

pub fn build_length_buckets(
    samples: &[TokenizedSample],
    bucket_width: usize,
) -> Result<LengthBucketIndex> {
    if bucket_width == 0 {
        return Err(Error::InvalidParameter("bucket_width must be >= 1".into()));
    }
    let mut buckets: BTreeMap<usize, BTreeMap<String, Vec<usize>>> = BTreeMap::new();
    let mut per_task_pos: HashMap<String, usize> = HashMap::new();
    for s in samples {
        let ordinal = per_task_pos.entry(s.task_id.clone()).or_insert(0);
        let bucket = s.input_len() / bucket_width;
        buckets
            .entry(bucket)
            .or_default()
            .entry(s.task_id.clone())
            .or_default()
            .push(*ordinal);
        *ordinal += 1;
    }
    Ok(LengthBucketIndex {
        bucket_width,
        buckets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::NamedTempFile;

    fn write_lines(lines: &[&str]) -> NamedTempFile {
        let mut f = NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn load_jsonl_maps_fields_and_task() {
        let f = write_lines(&[r#"{"instruction":"Add 2+2","output":"4"}"#]);
        let (ds, malformed) = load_jsonl(f.path(), "math").unwrap();
        assert_eq!(ds.size(), 1);
        assert_eq!(ds.task_id, "math");
        assert_eq!(ds.samples[0].task_id, "math");
        assert_eq!(malformed, 0);
    }

    #[test]
    fn load_jsonl_skips_empty_instruction() {
        let f = write_lines(&[
            r#"{"instruction":"","output":"x"}"#,
            r#"{"instruction":"ok","output":"y"}"#,
        ]);
        let (ds, malformed) = load_jsonl(f.path(), "t").unwrap();
        assert_eq!(ds.size(), 1);
        assert_eq!(malformed, 1);
    }

    #[test]
    fn load_jsonl_counts_malformed_lines() {
        let f = write_lines(&[
            r#"{"instruction":"a","output":"b"}"#,
            r#"{"instruction":"c","output":"d"}"#,
            r#"not json"#,
            r#"{"instruction":"e","output":"f"}"#,
        ]);
        let (ds, malformed) = load_jsonl(f.path(), "t").unwrap();
        assert_eq!(ds.size(), 3);
        assert_eq!(malformed, 1);
    }

    #[test]
    fn load_jsonl_empty_file_is_error() {
        let f = write_lines(&["not json at all"]);
        assert!(matches!(
            load_jsonl(f.path(), "t"),
            Err(Error::EmptyDataset(_))
        ));
    }

    fn one_task(texts: &[&str]) -> Vec<TaskDataset> {
        vec![TaskDataset {
            task_id: "t".into(),
            samples: texts
                .iter()
                .map(|t| InstructionSample {
                    instruction: t.to_string(),
                    input: None,
                    output: "o".into(),
                    task_id: "t".into(),
                })
                .collect(),
        }]
    }

    #[test]
    fn vocab_frequency_ordering() {
        // output token "o" appears too; check the instruction tokens only.
        let v = build_vocab(&one_task(&["a b a"]), 1).unwrap();
        let tail: Vec<&str> = v.tokens()[4..].iter().map(String::as_str).collect();
        assert!(tail.contains(&"a") && tail.contains(&"b"));
        assert!(v.id("a") < v.id("b"), "higher frequency gets lower id");
    }

    #[test]
    fn vocab_min_freq_threshold() {
        let v = build_vocab(&one_task(&["a b a"]), 2).unwrap();
        let tail: Vec<&str> = v.tokens()[4..].iter().map(String::as_str).collect();
        assert!(tail.contains(&"a"));
        assert!(!tail.contains(&"b"));
    }

    #[test]
    fn vocab_ties_break_lexicographically() {
        // "y" occurs twice, "x" and "z" once each; "o" (outputs) twice.
        let v = build_vocab(&one_task(&["x y", "y z"]), 1).unwrap();
        assert!(v.id("y") < v.id("x"));
        assert!(v.id("x") < v.id("z"));
    }

    #[test]
    fn tokenize_bos_eos_and_lookup() {
        let v = build_vocab(&one_task(&["a b a"]), 1).unwrap();
        let s = InstructionSample {
            instruction: "a b".into(),
            input: None,
            output: "a".into(),
            task_id: "t".into(),
        };
        let tok = tokenize(&s, &v);
        assert_eq!(tok.input_ids, vec![BOS_ID, v.id("a"), v.id("b")]);
        assert_eq!(tok.label_ids, vec![v.id("a"), EOS_ID]);
    }

    #[test]
    fn tokenize_oov_maps_to_unk() {
        let v = build_vocab(&one_task(&["a b a"]), 1).unwrap();
        let s = InstructionSample {
            instruction: "zzz".into(),
            input: None,
            output: "a".into(),
            task_id: "t".into(),
        };
        let tok = tokenize(&s, &v);
        assert_eq!(tok.input_ids, vec![BOS_ID, UNK_ID]);
    }

    #[test]
    fn tokenize_concatenates_optional_input() {
        let v = build_vocab(&one_task(&["a b a"]), 1).unwrap();
        let mut s = InstructionSample {
            instruction: "a".into(),
            input: Some("b".into()),
            output: "a".into(),
            task_id: "t".into(),
        };
        let with_input = tokenize(&s, &v);
        assert_eq!(with_input.input_ids, vec![BOS_ID, v.id("a"), v.id("b")]);
        s.input = None;
        let without = tokenize(&s, &v);
        assert_eq!(without.input_ids, vec![BOS_ID, v.id("a")]);
    }

    #[test]
    fn punctuation_splits_standalone() {
        assert_eq!(
            split_tokens("Add 2+2!"),
            vec!["add", "2", "+", "2", "!"]
        );
    }

    fn tok_with_len(len: usize, task: &str) -> TokenizedSample {
        TokenizedSample {
            input_ids: vec![BOS_ID; len],
            label_ids: vec![EOS_ID],
            task_id: task.into(),
        }
    }

    #[test]
    fn buckets_floor_division() {
        let samples = vec![tok_with_len(3, "t"), tok_with_len(5, "t"), tok_with_len(17, "t")];
        let idx = build_length_buckets(&samples, 16).unwrap();
        assert_eq!(idx.buckets[&0]["t"], vec![0, 1]);
        assert_eq!(idx.buckets[&1]["t"], vec![2]);
    }

    #[test]
    fn buckets_boundary_split() {
        let samples = vec![tok_with_len(15, "t"), tok_with_len(16, "t")];
        let idx = build_length_buckets(&samples, 16).unwrap();
        assert_eq!(idx.buckets.len(), 2);
    }

    #[test]
    fn buckets_width_one_isolates_lengths() {
        let samples = vec![tok_with_len(2, "t"), tok_with_len(3, "t"), tok_with_len(3, "t")];
        let idx = build_length_buckets(&samples, 1).unwrap();
        assert_eq!(idx.buckets[&2]["t"].len(), 1);
        assert_eq!(idx.buckets[&3]["t"].len(), 2);
    }

    #[test]
    fn bucket_width_zero_rejected() {
        assert!(build_length_buckets(&[], 0).is_err());
    }

    #[test]
    fn bucket_partition_is_exhaustive() {
        let samples: Vec<TokenizedSample> = (1..40).map(|l| tok_with_len(l, "t")).collect();
        let idx = build_length_buckets(&samples, 7).unwrap();
        let total: usize = idx
            .buckets
            .values()
            .flat_map(|m| m.values())
            .map(Vec::len)
            .sum();
        assert_eq!(total, samples.len());
        for (bucket, tasks) in &idx.buckets {
            for ordinals in tasks.values() {
                for &o in ordinals {
                    assert_eq!(samples[o].input_len() / 7, *bucket);
                }
            }
        }
    }

    #[test]
    fn vocab_round_trip_file() {
        let v = build_vocab(&one_task(&["a b a"]), 1).unwrap();
        let f = NamedTempFile::new().unwrap();
        v.write_to(f.path()).unwrap();
        let back = Vocabulary::read_from(f.path()).unwrap();
        assert_eq!(back.tokens(), v.tokens());
    }
}
