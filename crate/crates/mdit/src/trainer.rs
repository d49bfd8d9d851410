//! Toy sequence model trained with soft-label cross entropy and plain SGD.
//!
//! The model consumes pre-embedded inputs: the context for label position
//! t is the mean of the hidden rows plus a learned positional bias, pushed
//! through a two-layer feed-forward head onto vocabulary logits.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedder::EmbeddedSample;
use crate::error::{Error, Result};
use crate::seed::splitmix64;
use crate::tensor::{self, Matrix};

/// Positional bias rows; longer label sequences clamp to the last row.
pub const MAX_POSITIONS: usize = 64;

#[derive(Debug, Clone)]
pub struct ToyModel {
    pub dim: usize,
    pub hidden_width: usize,
    pub vocab_size: usize,
    pub seed: u64,
    pub w1: Matrix, // h x d
    pub b1: Vec<f64>,
    pub w2: Matrix, // V x h
    pub b2: Vec<f64>,
    pub pos: Matrix, // MAX_POSITIONS x d
}

impl ToyModel {
    pub fn new(dim: usize, hidden_width: usize, vocab_size: usize, seed: u64) -> Result<Self> {
        if dim < 1 || hidden_width < 1 || vocab_size < 2 {
            return Err(Error::InvalidParameter(format!(
                "model dims out of range: d={dim}, h={hidden_width}, V={vocab_size}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
        let mut init = |rows: usize, cols: usize| {
            let mut m = Matrix::zeros(rows, cols);
            for v in m.data_mut() {
                *v = rng.gen_range(-0.1..=0.1);
            }
            m
        };
        Ok(ToyModel {
            dim,
            hidden_width,
            vocab_size,
            seed,
            w1: init(hidden_width, dim),
            b1: vec![0.0; hidden_width],
            w2: init(vocab_size, hidden_width),
            b2: vec![0.0; vocab_size],
            pos: init(MAX_POSITIONS, dim),
        })
    }

    /// Named views over every parameter tensor, for checkpointing and
    /// finite-difference checking.
    pub fn param_tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("w1", self.w1.data_mut()),
            ("b1", self.b1.as_mut_slice()),
            ("w2", self.w2.data_mut()),
            ("b2", self.b2.as_mut_slice()),
            ("pos", self.pos.data_mut()),
        ]
    }

    pub fn save(&self, dir: &Path, step: usize) -> Result<()> {
        fs::create_dir_all(dir)?;
        tensor::write_matrix(&dir.join("w1.mdt1"), &self.w1)?;
        tensor::write_tensor(&dir.join("b1.mdt1"), &[self.b1.len()], &self.b1)?;
        tensor::write_matrix(&dir.join("w2.mdt1"), &self.w2)?;
        tensor::write_tensor(&dir.join("b2.mdt1"), &[self.b2.len()], &self.b2)?;
        tensor::write_matrix(&dir.join("pos.mdt1"), &self.pos)?;
        let header = serde_json::json!({
            "d": self.dim,
            "h": self.hidden_width,
            "V": self.vocab_size,
            "seed": self.seed,
            "step": step,
        });
        fs::write(dir.join("checkpoint.json"), serde_json::to_string_pretty(&header)?.as_bytes())?;
        Ok(())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::CorruptInput(format!("json: {e}"))
    }
}

#[derive(Debug, Clone)]
pub struct Gradients {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
    pub pos: Matrix,
}

impl Gradients {
    pub fn zeros(model: &ToyModel) -> Self {
        Gradients {
            w1: Matrix::zeros(model.hidden_width, model.dim),
            b1: vec![0.0; model.hidden_width],
            w2: Matrix::zeros(model.vocab_size, model.hidden_width),
            b2: vec![0.0; model.vocab_size],
            pos: Matrix::zeros(MAX_POSITIONS, model.dim),
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("w1", self.w1.data_mut()),
            ("b1", self.b1.as_mut_slice()),
            ("w2", self.w2.data_mut()),
            ("b2", self.b2.as_mut_slice()),
            ("pos", self.pos.data_mut()),
        ]
    }

    fn scale(&mut self, factor: f64) {
        for (_, t) in self.tensors_mut() {
            for v in t {
                *v *= factor;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::InvalidParameter("learning_rate must be > 0".into()));
        }
        if self.epochs < 1 {
            return Err(Error::InvalidParameter("epochs must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::InvalidParameter("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct LossReport {
    pub step_losses: Vec<f64>,
    pub epoch_means: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EvalMetrics {
    pub nll: f64,
    pub accuracy: f64,
}

fn softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn forward(model: &ToyModel, hidden: &Matrix, n: usize) -> Result<Matrix> {
    if hidden.cols() != model.dim {
        return Err(Error::InvalidParameter(format!(
            "hidden width {} does not match model d={}",
            hidden.cols(),
            model.dim
        )));
    }
    if hidden.rows() == 0 || n == 0 {
        return Err(Error::InvalidParameter("empty input or label length".into()));
    }
    let ctx = hidden.mean_of_rows(hidden.rows());
    let mut logits = Matrix::zeros(n, model.vocab_size);
    for t in 0..n {
        let pos_row = model.pos.row(t.min(MAX_POSITIONS - 1));
        // a = W1 (ctx + pos_t) + b1; r = relu(a); z = W2 r + b2
        let mut act = vec![0.0; model.hidden_width];
        for (i, a) in act.iter_mut().enumerate() {
            let w = model.w1.row(i);
            let mut s = model.b1[i];
            for k in 0..model.dim {
                s += w[k] * (ctx[k] + pos_row[k]);
            }
            *a = s.max(0.0);
        }
        let out = logits.row_mut(t);
        for (r, o) in out.iter_mut().enumerate() {
            let w = model.w2.row(r);
            let mut s = model.b2[r];
            for (k, &a) in act.iter().enumerate() {
                s += w[k] * a;
            }
            *o = s;
        }
    }
    Ok(logits)
}

/// Soft-label cross entropy averaged over label positions. With one-hot
/// labels this is the mean negative log-probability of the true token.
pub fn soft_ce_loss(logits: &Matrix, labels: &Matrix) -> Result<f64> {
    if logits.rows() != labels.rows() || logits.cols() != labels.cols() {
        return Err(Error::InvalidParameter(format!(
            "logits {}x{} vs labels {}x{}",
            logits.rows(),
            logits.cols(),
            labels.rows(),
            labels.cols()
        )));
    }
    let mut total = 0.0;
    for t in 0..logits.rows() {
        let row_sum: f64 = labels.row(t).iter().sum();
        if (row_sum - 1.0).abs() > 1e-4 {
            return Err(Error::InvalidParameter(format!(
                "label row {t} sums to {row_sum}, not a distribution"
            )));
        }
        let z = logits.row(t);
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_norm = z.iter().map(|&v| (v - max).exp()).sum::<f64>().ln() + max;
        for (r, &y) in labels.row(t).iter().enumerate() {
            if y != 0.0 {
                total -= y * (z[r] - log_norm);
            }
        }
    }
    Ok(total / logits.rows() as f64)
}

/// Adds this sample's unscaled gradient contributions (logit-space
/// gradient softmax(z) - Y per position) to `grads`; returns the summed
/// per-token loss and the token count.
fn accumulate(
    model: &ToyModel,
    hidden: &Matrix,
    labels: &Matrix,
    grads: &mut Gradients,
) -> Result<(f64, usize)> {
    let n = labels.rows();
    let logits = forward(model, hidden, n)?;
    let loss_sum = soft_ce_loss(&logits, labels)? * n as f64;
    let ctx = hidden.mean_of_rows(hidden.rows());
    for t in 0..n {
        let pos_idx = t.min(MAX_POSITIONS - 1);
        let pos_row = model.pos.row(pos_idx);
        let u: Vec<f64> = ctx.iter().zip(pos_row).map(|(&c, &p)| c + p).collect();
        let mut pre = vec![0.0; model.hidden_width];
        let mut act = vec![0.0; model.hidden_width];
        for i in 0..model.hidden_width {
            let w = model.w1.row(i);
            let mut s = model.b1[i];
            for k in 0..model.dim {
                s += w[k] * u[k];
            }
            pre[i] = s;
            act[i] = s.max(0.0);
        }
        let p = softmax(logits.row(t));
        let dz: Vec<f64> = p
            .iter()
            .zip(labels.row(t))
            .map(|(&pi, &yi)| pi - yi)
            .collect();
        // W2, b2
        for (r, &g) in dz.iter().enumerate() {
            grads.b2[r] += g;
            let row = grads.w2.row_mut(r);
            for (k, &a) in act.iter().enumerate() {
                row[k] += g * a;
            }
        }
        // back through relu
        let mut da = vec![0.0; model.hidden_width];
        for (r, &g) in dz.iter().enumerate() {
            let w = model.w2.row(r);
            for (k, d) in da.iter_mut().enumerate() {
                *d += g * w[k];
            }
        }
        for (k, d) in da.iter_mut().enumerate() {
            if pre[k] <= 0.0 {
                *d = 0.0;
            }
        }
        // W1, b1, pos
        for (i, &g) in da.iter().enumerate() {
            grads.b1[i] += g;
            let row = grads.w1.row_mut(i);
            for (k, &uk) in u.iter().enumerate() {
                row[k] += g * uk;
            }
        }
        let pos_grad = grads.pos.row_mut(pos_idx);
        for (k, pg) in pos_grad.iter_mut().enumerate() {
            let mut s = 0.0;
            for (i, &g) in da.iter().enumerate() {
                s += g * model.w1.get(i, k);
            }
            *pg += s;
        }
    }
    Ok((loss_sum, n))
}

/// Analytic gradients of the per-token-averaged soft cross entropy for a
/// single sample.
pub fn backward(model: &ToyModel, hidden: &Matrix, labels: &Matrix) -> Result<Gradients> {
    let mut grads = Gradients::zeros(model);
    let (_, tokens) = accumulate(model, hidden, labels, &mut grads)?;
    grads.scale(1.0 / tokens as f64);
    Ok(grads)
}

pub fn sgd_step(model: &mut ToyModel, grads: &mut Gradients, learning_rate: f64) -> Result<()> {
    for (name, g) in grads.tensors_mut() {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence(format!(
                "non-finite gradient in tensor {name}"
            )));
        }
        let _ = name;
    }
    let pairs = [
        (model.w1.data_mut(), grads.w1.data()),
        (model.b1.as_mut_slice(), grads.b1.as_slice()),
        (model.w2.data_mut(), grads.w2.data()),
        (model.b2.as_mut_slice(), grads.b2.as_slice()),
        (model.pos.data_mut(), grads.pos.data()),
    ];
    for (params, g) in pairs {
        for (p, &gv) in params.iter_mut().zip(g) {
            *p -= learning_rate * gv;
        }
    }
    Ok(())
}

pub fn train(
    model: &mut ToyModel,
    data: &[&EmbeddedSample],
    config: &TrainConfig,
) -> Result<LossReport> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset("no training samples".into()));
    }
    let mut report = LossReport::default();
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(config.seed ^ epoch as u64));
        use rand::seq::SliceRandom;
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_steps = 0usize;
        for batch in order.chunks(config.batch_size) {
            let mut grads = Gradients::zeros(model);
            let mut loss_sum = 0.0;
            let mut tokens = 0usize;
            for &idx in batch {
                let s = data[idx];
                let (l, n) = accumulate(model, &s.hidden, &s.labels, &mut grads)?;
                loss_sum += l;
                tokens += n;
            }
            let batch_loss = loss_sum / tokens as f64;
            if !batch_loss.is_finite() {
                return Err(Error::Divergence(format!(
                    "non-finite loss at step {}",
                    report.step_losses.len()
                )));
            }
            grads.scale(1.0 / tokens as f64);
            sgd_step(model, &mut grads, config.learning_rate)?;
            report.step_losses.push(batch_loss);
            epoch_loss += batch_loss;
            epoch_steps += 1;
        }
        report.epoch_means.push(epoch_loss / epoch_steps as f64);
    }
    Ok(report)
}

/// Mean per-token NLL and top-1 accuracy on one-hot-labeled samples.
pub fn evaluate(model: &ToyModel, data: &[&EmbeddedSample]) -> Result<EvalMetrics> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("no evaluation samples".into()));
    }
    let mut nll_sum = 0.0;
    let mut correct = 0usize;
    let mut tokens = 0usize;
    for s in data {
        for t in 0..s.labels.rows() {
            let row = s.labels.row(t);
            let ones = row.iter().filter(|&&v| v == 1.0).count();
            let zeros = row.iter().filter(|&&v| v == 0.0).count();
            if ones != 1 || ones + zeros != row.len() {
                return Err(Error::InvalidParameter(
                    "evaluation requires one-hot labels".into(),
                ));
            }
        }
        let logits = forward(model, &s.hidden, s.labels.rows())?;
        nll_sum += soft_ce_loss(&logits, &s.labels)? * s.labels.rows() as f64;
        for t in 0..s.labels.rows() {
            let pred = logits
                .row(t)
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            let truth = s
                .labels
                .row(t)
                .iter()
                .position(|&v| v == 1.0)
                .unwrap();
            if pred == truth {
                correct += 1;
            }
            tokens += 1;
        }
    }
    Ok(EvalMetrics {
        nll: nll_sum / tokens as f64,
        accuracy: correct as f64 / tokens as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedder::Provenance;

    fn zero_model(d: usize, h: usize, v: usize) -> ToyModel {
        let mut m = ToyModel::new(d, h, v, 0).unwrap();
        for (_, t) in m.param_tensors_mut() {
            for x in t {
                *x = 0.0;
            }
        }
        m
    }

    #[test]
    fn model_init_is_seed_deterministic() {
        let a = ToyModel::new(4, 8, 6, 9).unwrap();
        let b = ToyModel::new(4, 8, 6, 9).unwrap();
        assert_eq!(a.w1, b.w1);
        assert_eq!(a.w2, b.w2);
        assert_eq!(a.pos, b.pos);
    }

    #[test]
    fn forward_zero_everything_gives_zero_logits() {
        let m = zero_model(3, 4, 5);
        let hidden = Matrix::zeros(2, 3);
        let logits = forward(&m, &hidden, 2).unwrap();
        assert!(logits.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_shape_and_purity() {
        let m = ToyModel::new(4, 8, 6, 1).unwrap();
        let hidden = Matrix::from_rows(&[vec![0.1, -0.2, 0.3, 0.0], vec![0.5, 0.1, -0.1, 0.2]]);
        let a = forward(&m, &hidden, 3).unwrap();
        let b = forward(&m, &hidden, 3).unwrap();
        assert_eq!(a.rows(), 3);
        assert_eq!(a.cols(), 6);
        assert_eq!(a, b);
    }

    #[test]
    fn forward_dim_mismatch_is_error() {
        let m = ToyModel::new(4, 8, 6, 1).unwrap();
        assert!(forward(&m, &Matrix::zeros(2, 3), 1).is_err());
    }

    #[test]
    fn uniform_logits_loss_is_ln_v() {
        let logits = Matrix::zeros(2, 4);
        let labels = Matrix::from_rows(&[vec![1.0, 0.0, 0.0, 0.0], vec![0.25; 4]]);
        let loss = soft_ce_loss(&logits, &labels).unwrap();
        assert!((loss - 4.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn saturated_logits_loss_near_zero() {
        let logits = Matrix::from_rows(&[vec![100.0, 0.0, 0.0, 0.0]]);
        let labels = Matrix::from_rows(&[vec![1.0, 0.0, 0.0, 0.0]]);
        assert!(soft_ce_loss(&logits, &labels).unwrap() < 1e-6);
    }

    #[test]
    fn loss_is_linear_in_labels() {
        let logits = Matrix::from_rows(&[vec![0.3, -1.0, 0.7]]);
        let ya = Matrix::from_rows(&[vec![1.0, 0.0, 0.0]]);
        let yb = Matrix::from_rows(&[vec![0.0, 0.0, 1.0]]);
        let lambda = 0.3;
        let mixed = Matrix::lerp(&ya, &yb, lambda).unwrap();
        let lhs = soft_ce_loss(&logits, &mixed).unwrap();
        let rhs = lambda * soft_ce_loss(&logits, &ya).unwrap()
            + (1.0 - lambda) * soft_ce_loss(&logits, &yb).unwrap();
        assert!((lhs - rhs).abs() < 1e-6);
    }

    #[test]
    fn non_normalized_label_row_rejected() {
        let logits = Matrix::zeros(1, 3);
        let labels = Matrix::from_rows(&[vec![0.5, 0.1, 0.1]]);
        assert!(soft_ce_loss(&logits, &labels).is_err());
    }

    #[test]
    fn logit_gradient_uniform_case() {
        // One position, zero model: softmax of zero logits is uniform, so
        // the b2 gradient is softmax - Y.
        let m = zero_model(2, 2, 2);
        let hidden = Matrix::zeros(1, 2);
        let labels = Matrix::from_rows(&[vec![1.0, 0.0]]);
        let g = backward(&m, &hidden, &labels).unwrap();
        assert!((g.b2[0] + 0.5).abs() < 1e-12);
        assert!((g.b2[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gradient_zero_when_labels_match_softmax() {
        let m = zero_model(2, 2, 4);
        let hidden = Matrix::zeros(1, 2);
        let labels = Matrix::from_rows(&[vec![0.25; 4]]);
        let g = backward(&m, &hidden, &labels).unwrap();
        assert!(g.b2.iter().all(|&v| v.abs() < 1e-12));
        assert!(g.w2.data().iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn sgd_step_arithmetic() {
        let mut m = zero_model(2, 2, 2);
        m.w1.set(0, 0, 1.0);
        let mut g = Gradients::zeros(&m);
        g.w1.set(0, 0, 2.0);
        sgd_step(&mut m, &mut g, 0.1).unwrap();
        assert!((m.w1.get(0, 0) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn sgd_zero_gradient_is_fixed_point() {
        let mut m = ToyModel::new(3, 4, 5, 2).unwrap();
        let before = m.clone();
        let mut g = Gradients::zeros(&m);
        sgd_step(&mut m, &mut g, 0.5).unwrap();
        assert_eq!(m.w1, before.w1);
        assert_eq!(m.pos, before.pos);
        sgd_step(&mut m, &mut g, 0.0).unwrap();
        assert_eq!(m.w1, before.w1);
    }

    #[test]
    fn sgd_rejects_non_finite_gradient() {
        let mut m = zero_model(2, 2, 2);
        let mut g = Gradients::zeros(&m);
        g.b2[0] = f64::NAN;
        assert!(matches!(
            sgd_step(&mut m, &mut g, 0.1),
            Err(Error::Divergence(_))
        ));
    }

    fn toy_sample(seed: u64, d: usize, v: usize, len: usize, n: usize) -> EmbeddedSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut hidden = Matrix::zeros(len, d);
        for x in hidden.data_mut() {
            *x = rng.gen_range(-1.0..1.0);
        }
        let mut labels = Matrix::zeros(n, v);
        for t in 0..n {
            labels.set(t, rng.gen_range(0..v), 1.0);
        }
        EmbeddedSample {
            real_rows: len,
            real_label_rows: n,
            hidden,
            labels,
            task_id: "t".into(),
            provenance: Provenance::Original,
        }
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        let samples: Vec<EmbeddedSample> = (0..8).map(|i| toy_sample(i, 4, 6, 3, 2)).collect();
        let refs: Vec<&EmbeddedSample> = samples.iter().collect();
        let config = TrainConfig {
            learning_rate: 0.05,
            epochs: 20,
            batch_size: 4,
            seed: 3,
        };
        let mut m1 = ToyModel::new(4, 16, 6, 5).unwrap();
        let r1 = train(&mut m1, &refs, &config).unwrap();
        assert!(*r1.epoch_means.last().unwrap() < r1.epoch_means[0]);

        let mut m2 = ToyModel::new(4, 16, 6, 5).unwrap();
        let r2 = train(&mut m2, &refs, &config).unwrap();
        assert_eq!(r1.step_losses, r2.step_losses);
        assert_eq!(m1.w1, m2.w1);
        assert_eq!(m1.pos, m2.pos);
    }

    #[test]
    fn overfit_fixture_descends_by_10x() {
        // Well-separated contexts so 200 steps at 0.05 reach a tight fit.
        let samples: Vec<EmbeddedSample> = (0..8)
            .map(|i| {
                let mut s = toy_sample(100 + i, 8, 6, 4, 1);
                for v in s.hidden.data_mut() {
                    *v *= 6.0;
                }
                s
            })
            .collect();
        let refs: Vec<&EmbeddedSample> = samples.iter().collect();
        let config = TrainConfig {
            learning_rate: 0.05,
            epochs: 200,
            batch_size: 8,
            seed: 7,
        };
        let mut model = ToyModel::new(8, 32, 6, 11).unwrap();
        let report = train(&mut model, &refs, &config).unwrap();
        assert_eq!(report.step_losses.len(), 200);
        let initial = report.step_losses[0];
        let final_loss = *report.step_losses.last().unwrap();
        assert!(
            final_loss < 0.1 * initial,
            "descent too shallow: {initial} -> {final_loss}"
        );
    }

    #[test]
    fn evaluate_perfect_predictor() {
        let mut m = zero_model(2, 2, 3);
        // Bias the logits so class 1 always wins by a wide margin.
        m.b2[1] = 100.0;
        let mut s = toy_sample(0, 2, 3, 2, 2);
        s.labels = Matrix::from_rows(&[vec![0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0]]);
        let metrics = evaluate(&m, &[&s]).unwrap();
        assert_eq!(metrics.accuracy, 1.0);
        assert!(metrics.nll < 1e-6);
    }

    #[test]
    fn evaluate_uniform_model_nll_is_ln_v() {
        let m = zero_model(2, 2, 4);
        let s = toy_sample(1, 2, 4, 2, 3);
        let metrics = evaluate(&m, &[&s]).unwrap();
        assert!((metrics.nll - 4.0_f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn evaluate_rejects_soft_labels() {
        let m = zero_model(2, 2, 4);
        let mut s = toy_sample(1, 2, 4, 2, 1);
        s.labels = Matrix::from_rows(&[vec![0.5, 0.5, 0.0, 0.0]]);
        assert!(evaluate(&m, &[&s]).is_err());
    }

    #[test]
    fn random_model_on_balanced_two_tokens_is_half_right() {
        // Monte Carlo over seeded random models: accuracy ~ 0.5.
        let mut correct = 0usize;
        let mut total = 0usize;
        for seed in 0..200u64 {
            let m = ToyModel::new(4, 8, 2, seed).unwrap();
            let mut s = toy_sample(seed * 31 + 7, 4, 2, 3, 2);
            let mut labels = Matrix::zeros(2, 2);
            labels.set(0, (seed % 2) as usize, 1.0);
            labels.set(1, ((seed / 2) % 2) as usize, 1.0);
            s.labels = labels;
            let metrics = evaluate(&m, &[&s]).unwrap();
            correct += (metrics.accuracy * 2.0).round() as usize;
            total += 2;
        }
        let acc = correct as f64 / total as f64;
        assert!((acc - 0.5).abs() < 0.05, "accuracy {acc}");
    }

    #[test]
    fn checkpoint_round_trip_header() {
        let dir = tempfile::tempdir().unwrap();
        let m = ToyModel::new(4, 8, 6, 3).unwrap();
        m.save(dir.path(), 17).unwrap();
        let header: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("checkpoint.json")).unwrap())
                .unwrap();
        assert_eq!(header["d"], 4);
        assert_eq!(header["step"], 17);
        let w1 = tensor::read_matrix(&dir.path().join("w1.mdt1")).unwrap();
        assert_eq!(w1.rows(), 8);
        assert_eq!(w1.cols(), 4);
    }
}
