//! Trunk-sequence LSTM decoder.
//!
//! Node features are linearly embedded, every trunk of a level is run through
//! that level's stacked LSTM, the final hidden states of a level are summed,
//! and the per-level sums are mapped to `C` outputs by learnable matrices and
//! added. A logistic head scaled to `[0, a]` gives ratings; a softmax head
//! gives class probabilities.

mod checkpoint;
mod fnn;
mod init;
mod lstm;
mod model;
mod tensor;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::connectome::{EmotionRatings, TimeSeriesMatrix};

pub use checkpoint::{AnyModel, Checkpoint, NamedTensor, CHECKPOINT_VERSION};
pub use fnn::FnnModel;
pub use init::xavier_init;
pub use lstm::{LstmLayer, LstmStack};
pub use model::{build_dft_variant, build_ea1_variant, dft_sequence, HemonModel, LevelBranch, ModelKind};
pub use tensor::Matrix;
pub use train::{
    evaluate, gradient, loss_and_logit_grad, predictions, split_samples, train, Adam, EpochRecord, LrEvent,
    PlateauSchedule, Split, StopReason, TrainOptions, TrainReport,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parameter shape must have positive dimensions, got {0}x{1}")]
    ZeroDim(usize, usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("empty {0} set")]
    EmptySet(&'static str),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Output head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Head {
    /// `C` ratings in `[0, max_rating]` through `max_rating * sigmoid(h)`.
    Regression { categories: usize, max_rating: f64 },
    /// Softmax over `classes` logits.
    Classification { classes: usize },
}

impl Head {
    pub fn outputs(&self) -> usize {
        match *self {
            Head::Regression { categories, .. } => categories,
            Head::Classification { classes } => classes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionLoss {
    L1,
    Mse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub lstm_layers: usize,
    pub dropout: f64,
    pub batch_size: usize,
    pub lr_init: f64,
    pub lr_factor: f64,
    pub lr_patience: usize,
    pub lr_min: f64,
    pub max_epochs: usize,
    pub head: Head,
    pub loss: RegressionLoss,
    /// One LSTM stack for all levels instead of one per level.
    pub share_lstm_across_levels: bool,
    pub seed: u64,
}

impl ModelConfig {
    /// Defaults: 64-dim embedding, three 64-unit LSTM layers, dropout 0.2,
    /// batch 32, Adam at 5e-4 halved after 10 flat epochs down to 2e-5, at
    /// most 300 epochs.
    pub fn new(input_dim: usize, head: Head) -> Self {
        ModelConfig {
            input_dim,
            embed_dim: 64,
            hidden_dim: 64,
            lstm_layers: 3,
            dropout: 0.2,
            batch_size: 32,
            lr_init: 0.0005,
            lr_factor: 0.5,
            lr_patience: 10,
            lr_min: 2e-5,
            max_epochs: 300,
            head,
            loss: RegressionLoss::L1,
            share_lstm_across_levels: false,
            seed: 0,
        }
    }

    pub fn regression(input_dim: usize, categories: usize) -> Self {
        Self::new(
            input_dim,
            Head::Regression {
                categories,
                max_rating: crate::connectome::DEFAULT_MAX_RATING,
            },
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ModelError::Config(m.to_string()));
        if self.input_dim == 0 || self.embed_dim == 0 || self.hidden_dim == 0 || self.lstm_layers == 0 {
            return bad("dimensions and layer count must be positive");
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return bad("batch size and epoch budget must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(self.lr_init > 0.0 && self.lr_min > 0.0 && self.lr_min < self.lr_init) {
            return bad("need 0 < lr_min < lr_init");
        }
        if !(self.lr_factor > 0.0 && self.lr_factor < 1.0) {
            return bad("lr_factor must lie in (0, 1)");
        }
        match self.head {
            Head::Regression { categories, max_rating } if categories == 0 || !(max_rating > 0.0) => {
                bad("regression head needs C >= 1 and a > 0")
            }
            Head::Classification { classes: 0 } => bad("classification head needs C >= 1"),
            _ => Ok(()),
        }
    }
}

/// Supervision for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Ratings(Vec<f64>),
    Class(usize),
}

/// Node features (`N x c_in`) for one stimulus with its target.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Matrix,
    pub target: Target,
}

/// One sample per row: the row's ROI values become an `N x 1` feature matrix
/// and the matching ratings row the target.
pub fn regression_samples(ts: &TimeSeriesMatrix, ratings: &EmotionRatings) -> Result<Vec<Sample>> {
    if ts.time_count() != ratings.len() {
        return Err(ModelError::Shape(format!(
            "{} time points vs {} rating rows",
            ts.time_count(),
            ratings.len()
        )));
    }
    Ok((0..ts.time_count())
        .map(|t| Sample {
            features: Matrix::from_vec(ts.roi_count(), 1, ts.row(t).to_vec()),
            target: Target::Ratings(ratings.row(t).to_vec()),
        })
        .collect())
}

/// Common surface of the trainable models.
pub trait Network: Clone {
    type Tape;

    fn config(&self) -> &ModelConfig;

    /// Output logits `h_T`. Dropout is active only when an RNG is supplied.
    fn forward(&self, features: &Matrix, dropout: Option<&mut rand_chacha::ChaCha8Rng>) -> (Vec<f64>, Self::Tape);

    /// Accumulates parameter gradients into `grads` (a model of the same shape).
    fn backward(&self, tape: &Self::Tape, d_logits: &[f64], grads: &mut Self);

    /// Parameters in a fixed order, with stable names.
    fn params(&self) -> Vec<(String, &Matrix)>;

    fn params_mut(&mut self) -> Vec<&mut Matrix>;

    fn parameter_count(&self) -> usize {
        self.params().iter().map(|(_, m)| m.len()).sum()
    }

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for p in z.params_mut() {
            p.fill(0.0);
        }
        z
    }

    fn logits(&self, features: &Matrix) -> Vec<f64> {
        self.forward(features, None).0
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `max_rating * sigmoid(h)` element-wise.
pub fn ratings_from_logits(logits: &[f64], max_rating: f64) -> Vec<f64> {
    logits.iter().map(|&h| max_rating * sigmoid(h)).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&h| (h - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Index of the largest entry; the smallest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Ratings predicted in evaluation mode.
pub fn predict_ratings<M: Network>(model: &M, sample: &Sample) -> Result<Vec<f64>> {
    match model.config().head {
        Head::Regression { max_rating, .. } => Ok(ratings_from_logits(&model.logits(&sample.features), max_rating)),
        Head::Classification { .. } => Err(ModelError::Config("model has a classification head".into())),
    }
}

/// Predicted class and the full probability vector, in evaluation mode.
pub fn predict_class<M: Network>(model: &M, sample: &Sample) -> Result<(usize, Vec<f64>)> {
    match model.config().head {
        Head::Classification { .. } => {
            let p = softmax(&model.logits(&sample.features));
            Ok((argmax(&p), p))
        }
        Head::Regression { .. } => Err(ModelError::Config("model has a regression head".into())),
    }
}

/// Mean over stimuli of the summed absolute error over categories.
pub fn mae(truth: &[Vec<f64>], predicted: &[Vec<f64>]) -> Result<f64> {
    if truth.len() != predicted.len() {
        return Err(ModelError::Shape(format!(
            "{} true rows vs {} predicted rows",
            truth.len(),
            predicted.len()
        )));
    }
    if truth.is_empty() {
        return Err(ModelError::EmptySet("evaluation"));
    }
    let mut total = 0.0;
    for (i, (y, yhat)) in truth.iter().zip(predicted).enumerate() {
        if y.len() != yhat.len() {
            return Err(ModelError::Shape(format!(
                "row {i}: {} true vs {} predicted categories",
                y.len(),
                yhat.len()
            )));
        }
        total += y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum::<f64>();
    }
    Ok(total / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rating_head_values() {
        assert_eq!(ratings_from_logits(&[0.0, 0.0], 100.0), vec![50.0, 50.0]);
        assert_eq!(ratings_from_logits(&[1e6], 100.0), vec![100.0]);
        assert_eq!(ratings_from_logits(&[-1e6], 100.0), vec![0.0]);
        let r = ratings_from_logits(&[3f64.ln()], 100.0)[0];
        assert!((r - 75.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_values() {
        assert_eq!(softmax(&[0.0; 4]), vec![0.25; 4]);
        let p = softmax(&[1.0, 0.0]);
        assert!((p[0] - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert!((p[1] - 0.268_941_421_369_995_1).abs() < 1e-12);
        let shifted = softmax(&[1.0 + 37.5, 37.5]);
        assert!(p.iter().zip(&shifted).all(|(a, b)| (a - b).abs() < 1e-12));
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
    }

    #[test]
    fn mae_hand_cases() {
        assert_eq!(mae(&[vec![10.0, 20.0]], &[vec![10.0, 20.0]]).unwrap(), 0.0);
        assert_eq!(mae(&[vec![10.0, 20.0]], &[vec![12.0, 17.0]]).unwrap(), 5.0);
        assert!(mae(&[vec![1.0]], &[vec![1.0, 2.0]]).is_err());
        assert!(mae(&[vec![1.0]], &[]).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = ModelConfig::regression(1, 2);
        assert!(c.validate().is_ok());
        c.dropout = 1.0;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::regression(1, 2);
        c.lr_min = c.lr_init;
        assert!(c.validate().is_err());
        assert!(ModelConfig::regression(1, 0).validate().is_err());
    }
}
