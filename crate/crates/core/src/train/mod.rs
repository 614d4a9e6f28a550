//! Plain minibatch SGD with per-batch monitoring of the mean trace of the
//! local data matrix.

mod checkpoint;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint,
    CheckpointError, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};

use crate::data::Dataset;
use crate::geometry::local_data_matrix;
use crate::net::{self, NetError, NetParams};
use crate::rng::{self, Rng};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

pub const EMA_DECAY: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Batches between trace measurements; 0 disables monitoring.
    pub trace_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            batch_size: 60,
            epochs: 10,
            seed: 0,
            trace_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(format!("learning rate must be >= 0, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return Err("batch size must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: u64,
    pub trace: f64,
    pub trace_ema: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceLog {
    pub rows: Vec<TraceRow>,
}

impl TraceLog {
    /// Appends a measurement, smoothing with [`EMA_DECAY`] (the first row seeds the average).
    pub fn push(&mut self, step: u64, trace: f64, loss: f64) {
        if let Some(last) = self.rows.last() {
            assert!(step > last.step, "trace steps must increase");
        }
        let trace_ema = match self.rows.last() {
            Some(last) => EMA_DECAY * last.trace_ema + (1.0 - EMA_DECAY) * trace,
            None => trace,
        };
        self.rows.push(TraceRow {
            step,
            trace,
            trace_ema,
            loss,
        });
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,trace,trace_ema,loss\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.step, r.trace, r.trace_ema, r.loss);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<TraceLog, String> {
        let mut lines = text.lines();
        if lines.next() != Some("step,trace,trace_ema,loss") {
            return Err("missing trace CSV header".into());
        }
        let mut log = TraceLog::default();
        for (k, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || format!("malformed trace row {}", k + 1);
            if f.len() != 4 {
                return Err(bad());
            }
            log.rows.push(TraceRow {
                step: f[0].parse().map_err(|_| bad())?,
                trace: f[1].parse().map_err(|_| bad())?,
                trace_ema: f[2].parse().map_err(|_| bad())?,
                loss: f[3].parse().map_err(|_| bad())?,
            });
        }
        Ok(log)
    }

    /// Smoothed trace at the last measurement taken at or before `step`.
    pub fn ema_at(&self, step: u64) -> Option<f64> {
        self.rows
            .iter()
            .take_while(|r| r.step <= step)
            .last()
            .map(|r| r.trace_ema)
    }
}

/// Whether the smoothed trace rose above its initial value and afterwards
/// fell below `fraction` of its running peak. Returns `(rose, fell, peak_step)`.
pub fn rise_then_fall(log: &TraceLog, fraction: f64) -> (bool, bool, Option<u64>) {
    let Some(first) = log.rows.first() else {
        return (false, false, None);
    };
    let mut peak = first.trace_ema;
    let mut peak_step = first.step;
    let mut rose = false;
    for r in &log.rows {
        if r.trace_ema > peak {
            peak = r.trace_ema;
            peak_step = r.step;
        }
        rose |= r.trace_ema > first.trace_ema;
        if rose && r.trace_ema < fraction * peak {
            return (true, true, Some(peak_step));
        }
    }
    (rose, false, Some(peak_step))
}

/// `-s_y + log Σ_j exp(s_j)`, i.e. `-log_softmax(scores)_y`.
pub fn cross_entropy(scores: &[f64], y: usize) -> Result<f64, NetError> {
    if y >= scores.len() {
        return Err(NetError::LabelOutOfRange {
            label: y,
            classes: scores.len(),
        });
    }
    Ok(-net::log_softmax(scores)?[y])
}

/// Mean of `trace G(x,w) = Σ_i p_i ||∇_x log p_i||²` over a set of inputs.
pub fn mean_trace<'a>(
    params: &NetParams,
    xs: impl IntoIterator<Item = &'a Vec<f64>>,
) -> Result<f64, NetError> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for x in xs {
        let g = local_data_matrix(params, x).map_err(|e| match e {
            crate::geometry::GeometryError::Net(n) => n,
            other => unreachable!("local data matrix only fails in the net: {other}"),
        })?;
        sum += g.trace();
        count += 1;
    }
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

pub fn accuracy(params: &NetParams, data: &Dataset) -> Result<f64, NetError> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for (x, &y) in data.images.iter().zip(&data.labels) {
        if net::argmax(&net::forward(params, x)?) == y {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}

pub fn mean_loss(params: &NetParams, data: &Dataset) -> Result<f64, NetError> {
    let mut total = 0.0;
    for (x, &y) in data.images.iter().zip(&data.labels) {
        total += cross_entropy(&net::forward(params, x)?, y)?;
    }
    Ok(total / data.len().max(1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochSummary {
    pub epoch: usize,
    pub step: u64,
    pub mean_loss: f64,
}

/// Owns the single mutable copy of the parameters during training.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub params: NetParams,
    pub config: TrainConfig,
    pub step: u64,
    pub epoch: usize,
    pub trace: TraceLog,
    shuffle: Rng,
    batches_seen: u64,
}

impl Trainer {
    pub fn new(params: NetParams, config: TrainConfig) -> Self {
        Trainer {
            params,
            config,
            step: 0,
            epoch: 0,
            trace: TraceLog::default(),
            shuffle: rng::stream(config.seed, "shuffle"),
            batches_seen: 0,
        }
    }

    /// Initial parameters drawn from the run seed, then a trainer over them.
    pub fn from_seed(layer_dims: &[usize], config: TrainConfig) -> Result<Self, NetError> {
        let params = NetParams::init(
            layer_dims,
            net::Activation::Relu,
            &mut rng::stream(config.seed, "init"),
        )?;
        Ok(Self::new(params, config))
    }

    /// One pass over a freshly shuffled copy of the data.
    pub fn run_epoch(&mut self, data: &Dataset) -> Result<EpochSummary, NetError> {
        assert!(!data.is_empty(), "cannot train on an empty dataset");
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut self.shuffle);
        let mut total_loss = 0.0;
        for batch in order.chunks(self.config.batch_size) {
            let xs: Vec<&[f64]> = batch.iter().map(|&k| data.images[k].as_slice()).collect();
            let ys: Vec<usize> = batch.iter().map(|&k| data.labels[k]).collect();
            let (mut batch_loss, grad) = net::batch_gradient(&self.params, &xs, &ys)?;
            batch_loss /= batch.len() as f64;
            total_loss += batch_loss * batch.len() as f64;
            let every = self.config.trace_every as u64;
            if every > 0 && self.batches_seen % every == 0 {
                let t = mean_trace(&self.params, batch.iter().map(|&k| &data.images[k]))?;
                self.trace.push(self.step, t, batch_loss);
            }
            self.params
                .axpy(-self.config.learning_rate / batch.len() as f64, &grad);
            self.step += 1;
            self.batches_seen += 1;
        }
        self.epoch += 1;
        Ok(EpochSummary {
            epoch: self.epoch,
            step: self.step,
            mean_loss: total_loss / data.len() as f64,
        })
    }

    pub fn checkpoint(&self, data: &Dataset) -> Checkpoint {
        Checkpoint {
            step: self.step,
            epoch: self.epoch as u64,
            params: self.params.clone(),
            config: self.config,
            fingerprint: data.fingerprint(),
        }
    }
}

/// Picks the epoch-end checkpoint to experiment on.
///
/// After the smoothed trace peaks it decays back towards its starting value;
/// the pick is the epoch end after the peak whose smoothed trace is closest
/// to the initial value from above. Falls back to the epoch at the peak, or
/// the last epoch when nothing rose. `epoch_end_steps[e]` is the step count
/// at the end of epoch `e + 1`; the return value is that index.
pub fn select_checkpoint(log: &TraceLog, epoch_end_steps: &[u64]) -> Option<usize> {
    let initial = log.rows.first()?.trace_ema;
    if epoch_end_steps.is_empty() {
        return None;
    }
    let emas: Vec<Option<f64>> = epoch_end_steps.iter().map(|&s| log.ema_at(s)).collect();
    let peak = emas
        .iter()
        .enumerate()
        .filter_map(|(i, e)| e.map(|v| (i, v)))
        .max_by(|a, b| a.1.total_cmp(&b.1))?;
    if peak.1 <= initial {
        return Some(epoch_end_steps.len() - 1);
    }
    let after = (peak.0..emas.len())
        .filter_map(|i| emas[i].map(|v| (i, v)))
        .filter(|&(_, v)| v >= initial)
        .min_by(|a, b| a.1.total_cmp(&b.1));
    Some(after.map_or(peak.0, |(i, _)| i))
}
