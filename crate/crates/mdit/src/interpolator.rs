//! Cross-task interpolation in embedding space: pair samples within
//! length buckets, draw a Beta(alpha, alpha) weight, and mix hidden
//! states and labels linearly.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{LengthBucketIndex, PAD_ID};
use crate::embedder::{EmbeddedSample, Provenance};
use crate::error::{Error, Result};
use crate::tensor::Matrix;

#[derive(Debug, Clone)]
pub struct InterpolationConfig {
    pub alpha: f64,
    /// Generated samples per original sample pair.
    pub per_pair: usize,
    pub bucket_width: usize,
    pub seed: u64,
    pub task_pairs: Vec<(String, String)>,
}

impl InterpolationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha <= 0.0 {
            return Err(Error::InvalidParameter("alpha must be > 0".into()));
        }
        if self.bucket_width == 0 {
            return Err(Error::InvalidParameter("bucket_width must be >= 1".into()));
        }
        for (a, b) in &self.task_pairs {
            if a == b {
                return Err(Error::InvalidParameter(format!(
                    "task pair must join distinct tasks, got ({a}, {b})"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedSample {
    pub embedded: EmbeddedSample,
    pub lambda: f64,
    pub parent_i: usize,
    pub parent_j: usize,
    pub parent_tasks: (String, String),
}

#[derive(Debug, Clone, Default)]
pub struct GeneratedSet {
    pub samples: Vec<GeneratedSample>,
}

impl GeneratedSet {
    pub fn count(&self) -> usize {
        self.samples.len()
    }
}

/// Standard normal via Box-Muller.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u1: f64 = rng.gen::<f64>();
        if u1 <= f64::MIN_POSITIVE {
            continue;
        }
        let u2: f64 = rng.gen::<f64>();
        return (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
    }
}

/// Gamma(shape, 1) by Marsaglia-Tsang squeeze rejection; shapes below 1
/// use the Gamma(shape + 1) boost with a U^(1/shape) factor.
fn sample_gamma<R: Rng>(shape: f64, rng: &mut R) -> f64 {
    if shape < 1.0 {
        let boost = sample_gamma(shape + 1.0, rng);
        let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
        return boost * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = standard_normal(rng);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u: f64 = rng.gen::<f64>();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 {
            return d * v;
        }
        if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Draws an interpolation weight from Beta(alpha, alpha) as the ratio of
/// two Gamma(alpha, 1) variates, rejecting endpoint draws so the result
/// is strictly inside (0, 1).
pub fn sample_lambda<R: Rng>(alpha: f64, rng: &mut R) -> Result<f64> {
    if alpha <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "Beta shape must be > 0, got {alpha}"
        )));
    }
    loop {
        let g1 = sample_gamma(alpha, rng);
        let g2 = sample_gamma(alpha, rng);
        let total = g1 + g2;
        if total <= 0.0 {
            continue;
        }
        let lambda = g1 / total;
        if lambda > 0.0 && lambda < 1.0 {
            return Ok(lambda);
        }
    }
}

/// Pads both hidden matrices with zero (PAD-embedding) rows and both
/// label matrices with one-hot-PAD rows up to the pairwise maxima.
/// Each aligned sample keeps its own `real_rows`, so pooling still
/// ignores the padding.
pub fn align_lengths(a: &EmbeddedSample, b: &EmbeddedSample) -> (EmbeddedSample, EmbeddedSample) {
    let mut a = a.clone();
    let mut b = b.clone();
    let hidden_len = a.hidden.rows().max(b.hidden.rows());
    let label_len = a.labels.rows().max(b.labels.rows());
    for s in [&mut a, &mut b] {
        let extra = hidden_len - s.hidden.rows();
        s.hidden.pad_rows(extra);
        let first_new = s.labels.rows();
        s.labels.pad_rows(label_len - first_new);
        for r in first_new..label_len {
            s.labels.set(r, PAD_ID as usize, 1.0);
        }
    }
    (a, b)
}

pub fn interpolate_pair(
    a: &EmbeddedSample,
    b: &EmbeddedSample,
    lambda: f64,
) -> Result<EmbeddedSample> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!(
            "lambda must lie in [0, 1], got {lambda}"
        )));
    }
    let hidden = Matrix::lerp(&a.hidden, &b.hidden, lambda)?;
    let labels = Matrix::lerp(&a.labels, &b.labels, lambda)?;
    Ok(EmbeddedSample {
        real_rows: hidden.rows(),
        real_label_rows: labels.rows(),
        hidden,
        labels,
        task_id: format!("cross:{}+{}", a.task_id, b.task_id),
        provenance: Provenance::Generated,
    })
}

/// Algorithm: per bucket shared by both tasks, form min-count disjoint
/// random pairs without replacement; each pair yields `per_pair`
/// independently weighted interpolations. Output order is bucket order,
/// then pair order, then draw order, so a fixed seed fixes the set.
pub fn generate_cross_task<R: Rng>(
    pool_i: &[EmbeddedSample],
    pool_j: &[EmbeddedSample],
    buckets: &LengthBucketIndex,
    config: &InterpolationConfig,
    rng: &mut R,
) -> Result<GeneratedSet> {
    config.validate()?;
    let mut out = GeneratedSet::default();
    if pool_i.is_empty() || pool_j.is_empty() || config.per_pair == 0 {
        return Ok(out);
    }
    let task_i = &pool_i[0].task_id;
    let task_j = &pool_j[0].task_id;
    for tasks in buckets.buckets.values() {
        let (Some(members_i), Some(members_j)) = (tasks.get(task_i), tasks.get(task_j)) else {
            continue;
        };
        let mut order_i = members_i.clone();
        let mut order_j = members_j.clone();
        order_i.shuffle(rng);
        order_j.shuffle(rng);
        let pairs = order_i.len().min(order_j.len());
        for (&idx_i, &idx_j) in order_i.iter().zip(&order_j).take(pairs) {
            let (aligned_i, aligned_j) = align_lengths(&pool_i[idx_i], &pool_j[idx_j]);
            for _ in 0..config.per_pair {
                let lambda = sample_lambda(config.alpha, rng)?;
                let embedded = interpolate_pair(&aligned_i, &aligned_j, lambda)?;
                out.samples.push(GeneratedSample {
                    embedded,
                    lambda,
                    parent_i: idx_i,
                    parent_j: idx_j,
                    parent_tasks: (task_i.clone(), task_j.clone()),
                });
            }
        }
    }
    Ok(out)
}
