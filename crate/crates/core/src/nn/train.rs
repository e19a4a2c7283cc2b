//! Mini-batch training with early stopping on validation accuracy.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{adam_step, bce_batch, AdamConfig, AdamState, BackwardMode, Model, NnError, Span, Tensor};
use crate::imagecore::FloatImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub threshold: f64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            max_epochs: 50,
            patience: 15,
            seed: 0,
            threshold: 0.5,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if self.batch_size == 0 {
            return Err(NnError::InvalidConfig("batch_size must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(NnError::InvalidConfig("patience must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(NnError::InvalidConfig("max_epochs must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(NnError::InvalidConfig(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        if self.adam.lr.is_nan() || self.adam.lr < 0.0 || !(0.0..1.0).contains(&self.adam.beta1) || !(0.0..1.0).contains(&self.adam.beta2) {
            return Err(NnError::InvalidConfig("Adam hyper-parameters out of range".into()));
        }
        Ok(())
    }
}

/// A labelled image collection the trainer can draw from.
pub trait Samples {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn label(&self, index: usize) -> bool;

    /// Model input for `index`. `epoch` is set while training (so implementations may
    /// augment deterministically per epoch) and `None` for evaluation.
    fn input(&self, index: usize, epoch: Option<usize>) -> Result<FloatImage, NnError>;
}

/// In-memory samples without augmentation.
impl Samples for [(FloatImage, bool)] {
    fn len(&self) -> usize {
        <[_]>::len(self)
    }

    fn label(&self, index: usize) -> bool {
        self[index].1
    }

    fn input(&self, index: usize, _epoch: Option<usize>) -> Result<FloatImage, NnError> {
        Ok(self[index].0.clone())
    }
}

/// Loss and thresholded counts summarised for one pass over a sample set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochEval {
    pub loss: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

impl EpochEval {
    pub fn from_predictions(probs: &[f32], labels: &[bool], threshold: f64) -> Self {
        let (loss, _) = bce_batch(&probs.iter().map(|&p| p as f64).collect::<Vec<_>>(), labels);
        let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
        for (&p, &y) in probs.iter().zip(labels) {
            match (p as f64 >= threshold, y) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => tn += 1,
            }
        }
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        Self {
            loss,
            accuracy: ratio(tp + tn, probs.len()),
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub train_precision: f64,
    pub train_recall: f64,
    pub val_precision: f64,
    pub val_recall: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    /// 1-based epoch whose weights were restored.
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub warnings: Vec<String>,
}

impl TrainLog {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        for e in &self.epochs {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Patience counter over a maximised metric with strict improvement.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<f64>,
    best_epoch: usize,
    stale: usize,
}

/// What the tracker concluded after observing an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopDecision {
    pub improved: bool,
    pub stop: bool,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: None,
            best_epoch: 0,
            stale: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, metric: f64) -> StopDecision {
        let improved = self.best.is_none_or(|b| metric > b);
        if improved {
            self.best = Some(metric);
            self.best_epoch = epoch;
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        StopDecision {
            improved,
            stop: self.stale >= self.patience,
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }
}

fn to_batch(model: &Model, images: &[FloatImage]) -> Result<Tensor, NnError> {
    let [c, h, w] = model.input_shape();
    let mut data = Vec::with_capacity(images.len() * c * h * w);
    for img in images {
        if img.channels() != c || img.height() != h || img.width() != w {
            return Err(NnError::ShapeMismatch(format!(
                "image {}x{}x{} does not match model input {c}x{h}x{w}",
                img.channels(),
                img.height(),
                img.width()
            )));
        }
        for ch in 0..c {
            data.extend(img.data().iter().skip(ch).step_by(c));
        }
    }
    Tensor::new(vec![images.len(), c, h, w], data)
}

/// Probability of the positive class for one image.
pub fn predict(model: &Model, img: &FloatImage) -> Result<f32, NnError> {
    Ok(predict_batch(model, std::slice::from_ref(img))?[0])
}

pub fn predict_batch(model: &Model, images: &[FloatImage]) -> Result<Vec<f32>, NnError> {
    if images.is_empty() {
        return Ok(Vec::new());
    }
    Ok(model.infer(&to_batch(model, images)?)?.probabilities.into_data())
}

fn gather<S: Samples + ?Sized>(set: &S, idx: &[usize], epoch: Option<usize>) -> Result<Vec<FloatImage>, NnError> {
    idx.iter().map(|&i| set.input(i, epoch)).collect()
}

/// Probabilities for a whole set, without augmentation, in index order.
pub fn predict_set<S: Samples + ?Sized>(model: &Model, set: &S, batch_size: usize) -> Result<Vec<f32>, NnError> {
    let idx: Vec<usize> = (0..set.len()).collect();
    let mut out = Vec::with_capacity(idx.len());
    for chunk in idx.chunks(batch_size.max(1)) {
        out.extend(predict_batch(model, &gather(set, chunk, None)?)?);
    }
    Ok(out)
}

/// Trains `model` on `train_set`, evaluating with `monitor` after every epoch.
///
/// `monitor` receives the 1-based epoch and the current model. The weights of the
/// best epoch by monitored accuracy are restored before returning.
pub fn train_with_monitor<S, F>(model: &mut Model, train_set: &S, config: &TrainConfig, mut monitor: F) -> Result<TrainLog, NnError>
where
    S: Samples + ?Sized,
    F: FnMut(usize, &Model) -> Result<EpochEval, NnError>,
{
    config.validate()?;
    if train_set.is_empty() {
        return Err(NnError::EmptyDataset("training set has no samples".into()));
    }
    let start = model
        .first_trainable()
        .ok_or_else(|| NnError::InvalidArchitecture("model has no trainable parameters".into()))?;
    let top = model.len();
    let mut adam = AdamState::new(model, config.adam);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = model.snapshot();
    let mut log = TrainLog::default();
    let labels: Vec<bool> = (0..train_set.len()).map(|i| train_set.label(i)).collect();
    if labels.iter().all(|&l| l == labels[0]) {
        log.warnings.push("training set contains a single class".into());
    }

    for epoch in 1..=config.max_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(crate::seed::derive(config.seed, "shuffle", epoch as u64));
        let order = stratified_order(&labels, &mut rng);

        let mut probs = Vec::with_capacity(order.len());
        let mut seen = Vec::with_capacity(order.len());
        for chunk in order.chunks(config.batch_size) {
            let images = gather(train_set, chunk, Some(epoch))?;
            let batch = to_batch(model, &images)?;
            let features = model.run_span(&batch, 0, start)?;
            let (fwd, record) = model.forward_from(start, features)?;
            let p = fwd.probabilities.into_data();
            let y: Vec<bool> = chunk.iter().map(|&i| labels[i]).collect();
            let (_, grad) = bce_batch(&p, &y);
            let grads = model.backward_span(
                &record,
                Tensor::new(vec![grad.len(), 1], grad)?,
                Span {
                    bottom: start,
                    top,
                    mode: BackwardMode::Standard,
                    param_grads: true,
                    input_grad: false,
                },
            )?;
            adam_step(model, &grads, &mut adam)?;
            probs.extend(p);
            seen.extend(y);
        }
        let tr = EpochEval::from_predictions(&probs, &seen, config.threshold);
        let val = monitor(epoch, model)?;
        log.epochs.push(EpochLog {
            epoch,
            train_loss: tr.loss,
            train_acc: tr.accuracy,
            val_loss: val.loss,
            val_acc: val.accuracy,
            train_precision: tr.precision,
            train_recall: tr.recall,
            val_precision: val.precision,
            val_recall: val.recall,
        });
        let decision = stopper.observe(epoch, val.accuracy);
        if decision.improved {
            best = model.snapshot();
        }
        if decision.stop {
            log.stopped_early = epoch < config.max_epochs;
            break;
        }
    }
    log.best_epoch = stopper.best_epoch();
    model.restore(best)?;
    Ok(log)
}

/// A seeded permutation of `0..labels.len()` in which every prefix holds each class
/// in proportion to its share of the whole set, to within one sample.
///
/// Each class is shuffled on its own and the two are then merged, always drawing
/// next from the class that lags furthest behind its quota.
pub fn stratified_order(labels: &[bool], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    pos.shuffle(rng);
    neg.shuffle(rng);
    let n = labels.len();
    let mut order = Vec::with_capacity(n);
    let (mut p, mut q) = (0usize, 0usize);
    for t in 1..=n {
        let pos_deficit = (pos.len() * t) as f64 / n as f64 - p as f64;
        let neg_deficit = (neg.len() * t) as f64 / n as f64 - q as f64;
        if p < pos.len() && (q == neg.len() || pos_deficit >= neg_deficit) {
            order.push(pos[p]);
            p += 1;
        } else {
            order.push(neg[q]);
            q += 1;
        }
    }
    order
}

/// Trains with validation accuracy at `config.threshold` as the monitored metric.
pub fn train<S, V>(model: &mut Model, train_set: &S, val_set: &V, config: &TrainConfig) -> Result<TrainLog, NnError>
where
    S: Samples + ?Sized,
    V: Samples + ?Sized,
{
    if val_set.is_empty() {
        return Err(NnError::EmptyDataset("validation set has no samples".into()));
    }
    let val_labels: Vec<bool> = (0..val_set.len()).map(|i| val_set.label(i)).collect();
    let one_class = val_labels.iter().all(|&l| l == val_labels[0]);

    let start = model.first_trainable().unwrap_or(0);
    let mut val_features = Vec::new();
    for chunk in (0..val_set.len()).collect::<Vec<_>>().chunks(config.batch_size.max(1)) {
        let batch = to_batch(model, &gather(val_set, chunk, None)?)?;
        val_features.push(model.run_span(&batch, 0, start)?);
    }
    let threshold = config.threshold;
    let mut log = train_with_monitor(model, train_set, config, |_, m| {
        let mut probs = Vec::with_capacity(val_labels.len());
        for f in &val_features {
            probs.extend_from_slice(m.run_span(f, start, m.len())?.data());
        }
        Ok(EpochEval::from_predictions(&probs, &val_labels, threshold))
    })?;
    if one_class {
        log.warnings
            .insert(0, "validation set contains a single class; validation accuracy is degenerate".into());
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{build_transfer_model, Backbone};

    fn toy_set(n: usize) -> Vec<(FloatImage, bool)> {
        (0..n)
            .map(|i| {
                let positive = i % 2 == 0;
                let v = if positive { 0.8 } else { 0.2 };
                let data = (0..1600).map(|k| v + 0.01 * ((k * 7 + i) % 5) as f32).collect();
                (FloatImage::gray(40, 40, data).unwrap(), positive)
            })
            .collect()
    }

    fn toy_model(seed: u64) -> Model {
        build_transfer_model(Backbone::tinynet([1, 40, 40], seed), true, seed).unwrap()
    }

    #[test]
    fn stratified_order_is_a_balanced_permutation() {
        let labels: Vec<bool> = (0..200).map(|i| i % 3 == 0).collect();
        let positives = labels.iter().filter(|&&l| l).count();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let order = stratified_order(&labels, &mut rng);
        let mut sorted = order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..200).collect::<Vec<_>>());
        let mut seen = 0usize;
        for (t, &i) in order.iter().enumerate() {
            seen += labels[i] as usize;
            let quota = (positives * (t + 1)) as f64 / 200.0;
            assert!((seen as f64 - quota).abs() <= 1.0, "prefix {t}");
        }
        let again = stratified_order(&labels, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(order, again);
        assert_ne!(order, stratified_order(&labels, &mut ChaCha8Rng::seed_from_u64(5)));
        assert_eq!(stratified_order(&[true; 5], &mut rng).len(), 5);
    }

    #[test]
    fn early_stopping_arithmetic() {
        let mut s = EarlyStopping::new(3);
        let stops: Vec<bool> = (1..=6).map(|e| s.observe(e, 0.6).stop).collect();
        assert_eq!(stops, [false, false, false, true, true, true]);
        assert_eq!(s.best_epoch(), 1);
    }

    #[test]
    fn early_stopping_resets_on_strict_improvement() {
        let mut s = EarlyStopping::new(2);
        assert!(!s.observe(1, 0.5).stop);
        assert!(!s.observe(2, 0.5).stop);
        assert!(s.observe(3, 0.7).improved);
        assert!(!s.observe(4, 0.7).stop);
        assert!(s.observe(5, 0.6).stop);
        assert_eq!(s.best_epoch(), 3);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(bad.validate(), Err(NnError::InvalidConfig(_))));
        let bad = TrainConfig {
            patience: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn empty_training_set() {
        let mut m = toy_model(0);
        let empty: Vec<(FloatImage, bool)> = Vec::new();
        let val = toy_set(4);
        let err = train(&mut m, empty.as_slice(), val.as_slice(), &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, NnError::EmptyDataset(_)));
    }

    #[test]
    fn one_class_validation_is_a_warning() {
        let mut m = toy_model(0);
        let train_set = toy_set(8);
        let val: Vec<_> = toy_set(8).into_iter().filter(|s| s.1).collect();
        let cfg = TrainConfig {
            max_epochs: 2,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let log = train(&mut m, train_set.as_slice(), val.as_slice(), &cfg).unwrap();
        assert_eq!(log.epochs.len(), 2);
        assert!(log.warnings[0].contains("single class"));
    }

    #[test]
    fn deterministic_runs() {
        let data = toy_set(12);
        let cfg = TrainConfig {
            max_epochs: 3,
            batch_size: 5,
            seed: 11,
            ..TrainConfig::default()
        };
        let run = || {
            let mut m = toy_model(2);
            let log = train(&mut m, data.as_slice(), data.as_slice(), &cfg).unwrap();
            (log, m.snapshot())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn batch_predict_matches_single() {
        let m = toy_model(5);
        let data = toy_set(6);
        let imgs: Vec<FloatImage> = data.iter().map(|s| s.0.clone()).collect();
        let batch = predict_batch(&m, &imgs).unwrap();
        for (img, p) in imgs.iter().zip(&batch) {
            assert_eq!(predict(&m, img).unwrap().to_bits(), p.to_bits());
            assert!(*p > 0.0 && *p < 1.0);
        }
    }

    #[test]
    fn predict_rejects_wrong_size() {
        let m = toy_model(5);
        let img = FloatImage::gray(4, 4, vec![0.0; 16]).unwrap();
        assert!(matches!(predict(&m, &img), Err(NnError::ShapeMismatch(_))));
    }

    #[test]
    fn csv_header() {
        let log = TrainLog {
            epochs: vec![EpochLog {
                epoch: 1,
                train_loss: 0.5,
                train_acc: 1.0,
                val_loss: 0.25,
                val_acc: 0.5,
                train_precision: 1.0,
                train_recall: 1.0,
                val_precision: 0.0,
                val_recall: 0.0,
            }],
            ..TrainLog::default()
        };
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "epoch,train_loss,train_acc,val_loss,val_acc,train_precision,train_recall,val_precision,val_recall"
        );
        assert_eq!(text.lines().nth(1).unwrap(), "1,0.5,1.0,0.25,0.5,1.0,1.0,0.0,0.0");
    }
}
