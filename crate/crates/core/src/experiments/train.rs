use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::Metrics;
use crate::corpus::ClipIndex;
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FeatureStats, FeatureStore};
use crate::models::ModelConfig;
use crate::nn::{adam_step, softmax_cross_entropy, AdamConfig, AdamState, Mode, Network, Tensor};
use crate::seed::mix;
use crate::splits::SplitSpec;

pub const DEFAULT_SEEDS: [u64; 5] = [11, 22, 33, 44, 55];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seeds: Vec<u64>,
    /// Single-threaded forward/backward. The engine is always single
    /// threaded, so this only documents the run.
    pub strict_determinism: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 32,
            learning_rate: 1e-3,
            seeds: DEFAULT_SEEDS.to_vec(),
            strict_determinism: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("train.epochs must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("train.batch_size must be positive".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::Config(format!(
                "train.learning_rate must be a non-negative number, got {}",
                self.learning_rate
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("train.seeds must list at least one seed".into()));
        }
        let distinct: BTreeSet<_> = self.seeds.iter().collect();
        if distinct.len() != self.seeds.len() {
            return Err(Error::Config("train.seeds must be distinct".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub validation_accuracy: Option<f64>,
}

/// Network weights plus the standardization fitted on its training data.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub network: Network<f32>,
    pub stats: FeatureStats,
    pub optimizer_steps: u64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub history: Vec<EpochRecord>,
}

/// Read access to the features of one set of partitions only.
pub struct FeatureView<'a> {
    store: &'a FeatureStore,
    allowed: BTreeSet<&'a str>,
    scope: &'static str,
}

impl<'a> FeatureView<'a> {
    pub fn new<I: IntoIterator<Item = &'a String>>(store: &'a FeatureStore, ids: I, scope: &'static str) -> Self {
        FeatureView {
            store,
            allowed: ids.into_iter().map(String::as_str).collect(),
            scope,
        }
    }

    pub fn get(&self, clip_id: &str) -> Result<&'a FeatureMatrix> {
        if !self.allowed.contains(clip_id) {
            return Err(Error::Protocol(format!(
                "clip {clip_id} is outside the {} partitions",
                self.scope
            )));
        }
        self.store
            .get(clip_id)
            .ok_or_else(|| Error::CacheMiss(vec![clip_id.to_string()]))
    }
}

fn label_of(index: &ClipIndex, id: &str) -> Result<usize> {
    index
        .get(id)
        .map(|m| m.valence.class_index())
        .ok_or_else(|| Error::Protocol(format!("clip {id} is not in any loaded manifest")))
}

/// Standardized features laid out `[N, 1, n_mfcc, n_frames]`.
struct Batchable {
    x: Vec<f32>,
    labels: Vec<usize>,
    per_sample: usize,
    shape: [usize; 3],
}

impl Batchable {
    fn build(ids: &[String], view: &FeatureView, index: &ClipIndex, stats: &FeatureStats, model: &ModelConfig) -> Result<Self> {
        let shape = model.engine_input();
        let per_sample = shape.iter().product();
        let mut x = Vec::with_capacity(ids.len() * per_sample);
        let mut labels = Vec::with_capacity(ids.len());
        for id in ids {
            let m = view.get(id)?;
            if [1, m.n_mfcc, m.n_frames] != shape {
                return Err(Error::dim(
                    format!("features of {id}"),
                    format!("({}, {}) does not match model input {:?}", m.n_mfcc, m.n_frames, model.input_shape),
                ));
            }
            for r in 0..m.n_mfcc {
                let mean = stats.mean[r];
                let scale = 1.0 / stats.std[r].max(FeatureStats::STD_FLOOR);
                x.extend(m.row(r).iter().map(|&v| ((v as f64 - mean) * scale) as f32));
            }
            labels.push(label_of(index, id)?);
        }
        Ok(Batchable { x, labels, per_sample, shape })
    }

    fn len(&self) -> usize {
        self.labels.len()
    }

    fn batch(&self, rows: &[usize]) -> (Tensor<f32>, Vec<usize>) {
        let mut data = Vec::with_capacity(rows.len() * self.per_sample);
        for &r in rows {
            data.extend_from_slice(&self.x[r * self.per_sample..(r + 1) * self.per_sample]);
        }
        let [c, h, w] = self.shape;
        let t = Tensor::new(vec![rows.len(), c, h, w], data).expect("batch shape");
        (t, rows.iter().map(|&r| self.labels[r]).collect())
    }

    fn predict(&self, net: &Network<f32>) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(self.len());
        let rows: Vec<usize> = (0..self.len()).collect();
        for chunk in rows.chunks(64) {
            let (x, _) = self.batch(chunk);
            out.extend(net.predict(&x)?.argmax_rows());
        }
        Ok(out)
    }
}

/// Trains a fresh network on `split.train` for a fixed number of epochs and
/// returns the final-epoch weights.
///
/// Only train and validation features are readable here. Standardization
/// statistics come from the training partition alone.
pub fn train(
    model: &ModelConfig,
    split: &SplitSpec,
    index: &ClipIndex,
    store: &FeatureStore,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    config.validate()?;
    if split.train.is_empty() {
        return Err(Error::Protocol("training partition is empty".into()));
    }
    store.require(split.train.iter().chain(&split.validation))?;
    let view = FeatureView::new(store, split.train.iter().chain(&split.validation), "train/validation");
    let train_mats = split.train.iter().map(|id| view.get(id)).collect::<Result<Vec<_>>>()?;
    let stats = FeatureStats::from_matrices(train_mats)?;
    let train_set = Batchable::build(&split.train, &view, index, &stats, model)?;
    let val_set = Batchable::build(&split.validation, &view, index, &stats, model)?;

    let mut net = model.instantiate::<f32>(mix(&[seed, 1]))?;
    let mut adam = AdamState::new(AdamConfig::with_lr(config.learning_rate), net.params());
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut step = 0u64;
    for epoch in 0..config.epochs {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(&[seed, 2, epoch as u64])));
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for rows in order.chunks(config.batch_size) {
            let (x, labels) = train_set.batch(rows);
            let (logits, cache) = net.forward(&x, Mode::Train, mix(&[seed, 3, step]))?;
            let (loss, dlogits) = softmax_cross_entropy(&logits, &labels)?;
            let grads = net.backward(&cache, &dlogits)?;
            net.update_running_stats(&cache);
            adam_step(&mut net, &grads, &mut adam)?;
            loss_sum += loss as f64 * rows.len() as f64;
            correct += logits.argmax_rows().iter().zip(&labels).filter(|(p, l)| p == l).count();
            step += 1;
        }
        let validation_accuracy = if val_set.len() > 0 {
            let preds = val_set.predict(&net)?;
            let hits = preds.iter().zip(&val_set.labels).filter(|(p, l)| p == l).count();
            Some(hits as f64 / val_set.len() as f64)
        } else {
            None
        };
        history.push(EpochRecord {
            epoch: epoch + 1,
            train_loss: loss_sum / train_set.len() as f64,
            train_accuracy: correct as f64 / train_set.len() as f64,
            validation_accuracy,
        });
    }
    Ok(TrainOutcome {
        model: TrainedModel {
            config: model.clone(),
            network: net,
            stats,
            optimizer_steps: step,
        },
        history,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub metrics: Metrics,
    pub predictions: Vec<usize>,
}

/// Argmax predictions on `clip_ids`, scored against their valence labels.
pub fn evaluate(model: &TrainedModel, clip_ids: &[String], index: &ClipIndex, store: &FeatureStore) -> Result<Evaluation> {
    if clip_ids.is_empty() {
        return Err(Error::Protocol("test partition is empty".into()));
    }
    store.require(clip_ids)?;
    let view = FeatureView::new(store, clip_ids, "test");
    let set = Batchable::build(clip_ids, &view, index, &model.stats, &model.config)?;
    let predictions = set.predict(&model.network)?;
    let metrics = Metrics::from_predictions(&set.labels, &predictions, model.config.n_classes)?;
    Ok(Evaluation { metrics, predictions })
}
