use std::time::Instant;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    mae, ratings_from_logits, sigmoid, softmax, Head, Matrix, ModelError, Network, RegressionLoss, Result, Sample,
    Target,
};
use crate::rng::{substream, Stream};

/// Loss of one sample and its gradient with respect to the logits.
pub fn loss_and_logit_grad(
    head: &Head,
    loss: RegressionLoss,
    logits: &[f64],
    target: &Target,
) -> Result<(f64, Vec<f64>)> {
    match (head, target) {
        (Head::Regression { max_rating, .. }, Target::Ratings(y)) => {
            if y.len() != logits.len() {
                return Err(ModelError::Shape(format!(
                    "{} ratings for {} outputs",
                    y.len(),
                    logits.len()
                )));
            }
            let a = *max_rating;
            let mut total = 0.0;
            let mut grad = Vec::with_capacity(y.len());
            for (&h, &t) in logits.iter().zip(y) {
                let s = sigmoid(h);
                let err = a * s - t;
                let (l, d_pred) = match loss {
                    RegressionLoss::L1 => (err.abs(), if err > 0.0 { 1.0 } else if err < 0.0 { -1.0 } else { 0.0 }),
                    RegressionLoss::Mse => (err * err, 2.0 * err),
                };
                total += l;
                grad.push(d_pred * a * s * (1.0 - s));
            }
            Ok((total, grad))
        }
        (Head::Classification { classes }, Target::Class(c)) => {
            if *c >= *classes {
                return Err(ModelError::Shape(format!("class {c} out of range for {classes} classes")));
            }
            let mut p = softmax(logits);
            let l = -p[*c].max(f64::MIN_POSITIVE).ln();
            p[*c] -= 1.0;
            Ok((l, p))
        }
        _ => Err(ModelError::Config("target kind does not match the model head".into())),
    }
}

/// Mean loss over `samples` and the mean parameter gradient.
pub fn gradient<M: Network>(
    model: &M,
    samples: &[&Sample],
    mut dropout: Option<&mut ChaCha8Rng>,
) -> Result<(f64, M)> {
    if samples.is_empty() {
        return Err(ModelError::EmptySet("batch"));
    }
    let cfg = model.config();
    let mut grads = model.zeros_like();
    let mut total = 0.0;
    for s in samples {
        let (logits, tape) = model.forward(&s.features, dropout.as_deref_mut());
        let (l, d_logits) = loss_and_logit_grad(&cfg.head, cfg.loss, &logits, &s.target)?;
        total += l;
        model.backward(&tape, &d_logits, &mut grads);
    }
    let inv = 1.0 / samples.len() as f64;
    for g in grads.params_mut() {
        g.scale(inv);
    }
    Ok((total * inv, grads))
}

/// Adam with the usual defaults (`beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`).
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Default for Adam {
    fn default() -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }
}

impl Adam {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn step<M: Network>(&mut self, model: &mut M, grads: &M, lr: f64) {
        let g: Vec<&Matrix> = grads.params().into_iter().map(|(_, m)| m).collect();
        let mut params = model.params_mut();
        if self.first.is_empty() {
            self.first = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.second = self.first.clone();
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        for (k, p) in params.iter_mut().enumerate() {
            let (m, v) = (&mut self.first[k], &mut self.second[k]);
            for (i, (w, &gi)) in p.data_mut().iter_mut().zip(g[k].data()).enumerate() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrEvent {
    pub epoch: usize,
    pub from: f64,
    pub to: f64,
}

/// Multiplies the learning rate by `factor` once the monitored metric has
/// failed to improve for more than `patience` consecutive epochs. Signals a
/// stop when the reduced rate would fall below `min_lr`.
#[derive(Debug, Clone)]
pub struct PlateauSchedule {
    pub lr: f64,
    factor: f64,
    patience: usize,
    min_lr: f64,
    best: f64,
    bad_epochs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateauStep {
    pub improved: bool,
    pub event: Option<LrEvent>,
    pub stop: bool,
}

impl PlateauSchedule {
    pub fn new(lr: f64, factor: f64, patience: usize, min_lr: f64) -> Self {
        PlateauSchedule {
            lr,
            factor,
            patience,
            min_lr,
            best: f64::INFINITY,
            bad_epochs: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, metric: f64) -> PlateauStep {
        if metric < self.best {
            self.best = metric;
            self.bad_epochs = 0;
            return PlateauStep {
                improved: true,
                event: None,
                stop: false,
            };
        }
        self.bad_epochs += 1;
        if self.bad_epochs <= self.patience {
            return PlateauStep {
                improved: false,
                event: None,
                stop: false,
            };
        }
        self.bad_epochs = 0;
        let to = self.lr * self.factor;
        let event = LrEvent {
            epoch,
            from: self.lr,
            to,
        };
        self.lr = to;
        PlateauStep {
            improved: false,
            event: Some(event),
            stop: to < self.min_lr,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    LrFloor,
    TargetReached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_metric: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// `mae` for regression heads, `cross_entropy` for classification.
    pub metric: String,
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    pub lr_events: Vec<LrEvent>,
    pub stop_reason: StopReason,
    pub best_epoch: usize,
    pub best_val_metric: f64,
    pub wall_time_secs: f64,
}

impl TrainReport {
    /// Copy with the wall-clock field zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        TrainReport {
            wall_time_secs: 0.0,
            ..self.clone()
        }
    }

    pub fn metrics_csv(&self) -> String {
        let mut out = format!("epoch,train_loss,val_{},lr\n", self.metric);
        for e in &self.epochs {
            out.push_str(&format!("{},{:?},{:?},{:?}\n", e.epoch, e.train_loss, e.val_metric, e.lr));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TrainOptions {
    /// Stop as soon as the validation metric drops below this value.
    pub stop_below: Option<f64>,
}

/// Validation metric: MAE for regression, mean cross-entropy otherwise.
pub fn evaluate<M: Network>(model: &M, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(ModelError::EmptySet("evaluation"));
    }
    match model.config().head {
        Head::Regression { .. } => {
            let truth = samples
                .iter()
                .map(|s| match &s.target {
                    Target::Ratings(y) => Ok(y.clone()),
                    Target::Class(_) => Err(ModelError::Config("class target for a regression head".into())),
                })
                .collect::<Result<Vec<_>>>()?;
            mae(&truth, &predictions(model, samples))
        }
        Head::Classification { .. } => {
            let cfg = model.config();
            let mut total = 0.0;
            for s in samples {
                total += loss_and_logit_grad(&cfg.head, cfg.loss, &model.logits(&s.features), &s.target)?.0;
            }
            Ok(total / samples.len() as f64)
        }
    }
}

/// Evaluation-mode head outputs: ratings or class probabilities.
pub fn predictions<M: Network>(model: &M, samples: &[Sample]) -> Vec<Vec<f64>> {
    samples
        .iter()
        .map(|s| {
            let logits = model.logits(&s.features);
            match model.config().head {
                Head::Regression { max_rating, .. } => ratings_from_logits(&logits, max_rating),
                Head::Classification { .. } => softmax(&logits),
            }
        })
        .collect()
}

/// Mini-batch Adam training with plateau learning-rate decay. Returns the
/// parameters that scored best on `val`.
pub fn train<M: Network>(
    model: M,
    train_set: &[Sample],
    val_set: &[Sample],
    options: TrainOptions,
) -> Result<(M, TrainReport)> {
    if train_set.is_empty() {
        return Err(ModelError::EmptySet("training"));
    }
    if val_set.is_empty() {
        return Err(ModelError::EmptySet("validation"));
    }
    let started = Instant::now();
    let cfg = model.config().clone();
    cfg.validate()?;
    let mut model = model;
    let mut shuffle_rng = substream(cfg.seed, Stream::Shuffle);
    let mut dropout_rng = substream(cfg.seed, Stream::Dropout);
    let mut adam = Adam::new();
    let mut schedule = PlateauSchedule::new(cfg.lr_init, cfg.lr_factor, cfg.lr_patience, cfg.lr_min);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best = model.clone();
    let mut report = TrainReport {
        metric: match cfg.head {
            Head::Regression { .. } => "mae".into(),
            Head::Classification { .. } => "cross_entropy".into(),
        },
        seed: cfg.seed,
        epochs: Vec::new(),
        lr_events: Vec::new(),
        stop_reason: StopReason::MaxEpochs,
        best_epoch: 0,
        best_val_metric: f64::INFINITY,
        wall_time_secs: 0.0,
    };

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let lr = schedule.lr;
        let mut epoch_loss = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (loss, grads) = gradient(&model, &batch, Some(&mut dropout_rng))?;
            if !loss.is_finite() || grads.params().iter().any(|(_, g)| !g.is_finite()) {
                return Err(ModelError::NonFiniteLoss { epoch, batch: b });
            }
            epoch_loss += loss * batch.len() as f64;
            adam.step(&mut model, &grads, lr);
        }
        let val = evaluate(&model, val_set)?;
        if !val.is_finite() {
            return Err(ModelError::NonFiniteLoss { epoch, batch: usize::MAX });
        }
        report.epochs.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / train_set.len() as f64,
            val_metric: val,
            lr,
        });
        let step = schedule.observe(epoch, val);
        if step.improved {
            best = model.clone();
            report.best_epoch = epoch;
            report.best_val_metric = val;
        }
        if let Some(event) = step.event {
            report.lr_events.push(event);
        }
        if options.stop_below.is_some_and(|t| val < t) {
            report.stop_reason = StopReason::TargetReached;
            break;
        }
        if step.stop {
            report.stop_reason = StopReason::LrFloor;
            break;
        }
    }
    report.wall_time_secs = started.elapsed().as_secs_f64();
    Ok((best, report))
}

/// Index sets of a train/validation/test split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles `0..n` with the split substream of `seed`, holds out
/// `test_fraction` of it for testing and `val_fraction` of the remainder for
/// validation (at least one sample each when the fractions are positive).
pub fn split_samples(n: usize, test_fraction: f64, val_fraction: f64, seed: u64) -> Result<Split> {
    if !(0.0..1.0).contains(&test_fraction) || !(0.0..1.0).contains(&val_fraction) {
        return Err(ModelError::Config("split fractions must lie in [0, 1)".into()));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut substream(seed, Stream::Split));
    let take = |frac: f64, len: usize| {
        if frac > 0.0 {
            ((frac * len as f64).round() as usize).max(1)
        } else {
            0
        }
    };
    let n_test = take(test_fraction, n);
    let test = idx.split_off(n - n_test.min(n));
    let n_val = take(val_fraction, idx.len());
    let val = idx.split_off(idx.len() - n_val.min(idx.len()));
    if idx.is_empty() || (val_fraction > 0.0 && val.is_empty()) {
        return Err(ModelError::EmptySet("training"));
    }
    let sorted = |mut v: Vec<usize>| {
        v.sort_unstable();
        v
    };
    Ok(Split {
        train: sorted(idx),
        val: sorted(val),
        test: sorted(test),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eleven_flat_epochs_halve_once() {
        let mut s = PlateauSchedule::new(5e-4, 0.5, 10, 2e-5);
        assert!(s.observe(1, 10.0).improved);
        let mut events = Vec::new();
        for e in 2..=12 {
            if let Some(ev) = s.observe(e, 10.0).event {
                events.push(ev);
            }
        }
        assert_eq!(events, vec![LrEvent { epoch: 12, from: 5e-4, to: 2.5e-4 }]);
        assert_eq!(s.lr, 2.5e-4);
    }

    #[test]
    fn schedule_stops_below_floor() {
        let mut s = PlateauSchedule::new(5e-4, 0.5, 0, 2e-5);
        s.observe(0, 1.0);
        let mut stops = Vec::new();
        for e in 1..=6 {
            let st = s.observe(e, 1.0);
            stops.push(st.stop);
        }
        // 2.5e-4, 1.25e-4, 6.25e-5, 3.125e-5, 1.5625e-5 (< 2e-5)
        assert_eq!(stops, vec![false, false, false, false, true, true]);
    }

    #[test]
    fn l1_regression_gradient() {
        let head = Head::Regression {
            categories: 2,
            max_rating: 100.0,
        };
        let (l, g) = loss_and_logit_grad(&head, RegressionLoss::L1, &[0.0, 0.0], &Target::Ratings(vec![40.0, 70.0]))
            .unwrap();
        assert_eq!(l, 30.0);
        assert_eq!(g, vec![25.0, -25.0]);
        assert!(loss_and_logit_grad(&head, RegressionLoss::L1, &[0.0, 0.0], &Target::Class(0)).is_err());
    }

    #[test]
    fn cross_entropy_gradient() {
        let head = Head::Classification { classes: 2 };
        let (l, g) = loss_and_logit_grad(&head, RegressionLoss::L1, &[0.0, 0.0], &Target::Class(1)).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-15);
        assert_eq!(g, vec![0.5, -0.5]);
    }

    #[test]
    fn split_is_a_partition() {
        let s = split_samples(30, 1.0 / 3.0, 0.1, 3).unwrap();
        assert_eq!(s.test.len(), 10);
        assert_eq!(s.val.len(), 2);
        assert_eq!(s.train.len(), 18);
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..30).collect::<Vec<_>>());
        assert_eq!(split_samples(30, 1.0 / 3.0, 0.1, 3).unwrap(), s);
    }
}
