use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::{ClassifierParams, PARAM_COUNT};
use super::patches::Patch;
use crate::rng::RngStream;

/// Samples per gradient chunk. Chunks are summed in a fixed order so the
/// result does not depend on the number of threads.
const CHUNK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 0.01, momentum: 0.9, batch_size: 64, epochs: 30 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedClassifier {
    pub params: ClassifierParams<f32>,
    /// 1-based epoch of the kept snapshot (0 when no epoch ran).
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub history: Vec<EpochStats>,
}

/// Labeled tensors ready for training or evaluation.
#[derive(Debug, Clone, Default)]
pub struct Examples {
    pub inputs: Vec<Vec<f32>>,
    pub labels: Vec<usize>,
}

impl Examples {
    /// Source patches get label 0, target patches label 1.
    pub fn from_domains(source: &[Patch], target: &[Patch]) -> Self {
        let inputs = source.par_iter().chain(target.par_iter()).map(Patch::to_tensor).collect();
        let labels = std::iter::repeat_n(0, source.len()).chain(std::iter::repeat_n(1, target.len())).collect();
        Examples { inputs, labels }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

pub fn predict_all(params: &ClassifierParams<f32>, inputs: &[Vec<f32>]) -> Vec<usize> {
    inputs.par_iter().map(|x| params.predict(x)).collect()
}

pub fn accuracy(params: &ClassifierParams<f32>, data: &Examples) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let correct = predict_all(params, &data.inputs).iter().zip(&data.labels).filter(|(p, l)| p == l).count();
    correct as f64 / data.len() as f64
}

/// Mean loss and gradient over the listed examples.
fn minibatch_gradient(params: &ClassifierParams<f32>, data: &Examples, batch: &[usize]) -> (f64, Vec<f32>) {
    let scale = 1.0 / batch.len() as f32;
    let partials: Vec<(f64, Vec<f32>)> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = vec![0.0f32; PARAM_COUNT];
            let mut loss = 0.0f64;
            for &i in chunk {
                loss += params.backward(&data.inputs[i], data.labels[i], scale, &mut g) as f64;
            }
            (loss, g)
        })
        .collect();
    let mut iter = partials.into_iter();
    let (mut loss, mut grad) = iter.next().unwrap_or((0.0, vec![0.0; PARAM_COUNT]));
    for (l, g) in iter {
        loss += l;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    (loss / batch.len() as f64, grad)
}

/// Mean cross-entropy over a set.
pub fn mean_loss(params: &ClassifierParams<f32>, data: &Examples) -> f64 {
    let total: f64 = data
        .inputs
        .par_iter()
        .zip(&data.labels)
        .map(|(x, &y)| super::network::softmax_xent(&params.logits(x), y).1 as f64)
        .sum();
    total / data.len().max(1) as f64
}

/// Mini-batch SGD with momentum (`v = m v + g; w -= lr v`) on softmax
/// cross-entropy. The training order is reshuffled every epoch. Returns the
/// snapshot with the highest validation accuracy (earliest on ties).
pub fn train_classifier(train: &Examples, val: &Examples, cfg: &TrainConfig, rng: &mut RngStream) -> TrainedClassifier {
    let mut params = ClassifierParams::<f32>::init(rng);
    let mut velocity = vec![0.0f32; PARAM_COUNT];
    let (lr, mom) = (cfg.learning_rate as f32, cfg.momentum as f32);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best = TrainedClassifier { params: params.clone(), best_epoch: 0, best_val_accuracy: accuracy(&params, val), history: Vec::new() };
    let mut any_epoch = false;
    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size.max(1)) {
            let (loss, grad) = minibatch_gradient(&params, train, batch);
            loss_sum += loss * batch.len() as f64;
            for ((w, v), g) in params.data.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = mom * *v + g;
                *w -= lr * *v;
            }
        }
        let val_accuracy = accuracy(&params, val);
        let train_loss = loss_sum / train.len().max(1) as f64;
        log::debug!("epoch {epoch}: train loss {train_loss:.4}, val accuracy {val_accuracy:.4}");
        best.history.push(EpochStats { epoch, train_loss, val_accuracy });
        if !any_epoch || val_accuracy > best.best_val_accuracy {
            best.params = params.clone();
            best.best_epoch = epoch;
            best.best_val_accuracy = val_accuracy;
            any_epoch = true;
        }
    }
    best
}
