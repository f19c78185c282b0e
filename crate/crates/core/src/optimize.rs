//! Per-window runtime fitting of the motion field, and querying it.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::{adam_step, AdamConfig, AdamState};
use crate::cloud::{InputWindow, Normalization, PointCloud};
use crate::field::{select_reference, FieldConfig, NeuralField};
use crate::losses::{total_loss_prepared, LossBreakdown, LossConfig, PreparedWindow};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub max_iters: usize,
    pub lr: f64,
    /// Multiplicative learning-rate factor applied after every step.
    pub lr_decay: f64,
    pub seed: u64,
    pub loss: LossConfig,
    pub field: FieldConfig,
    pub log_every: usize,
    /// The loss may grow to this multiple of its first value before the
    /// learning rate is halved (once) and then the fit aborted.
    pub divergence_factor: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            lr: 1e-3,
            lr_decay: 1.0,
            seed: 0,
            loss: LossConfig::default(),
            field: FieldConfig::default(),
            log_every: 1,
            divergence_factor: 10.0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::InvalidConfig(format!("lr must be > 0, got {}", self.lr)));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::InvalidConfig("lr_decay must be in (0, 1]".into()));
        }
        if self.log_every == 0 {
            return Err(Error::InvalidConfig("log_every must be >= 1".into()));
        }
        if !(self.divergence_factor > 1.0) {
            return Err(Error::InvalidConfig("divergence_factor must be > 1".into()));
        }
        self.loss.validate()?;
        self.field.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub iteration: usize,
    pub loss: LossBreakdown,
    pub ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Loss before the update of every `log_every`-th iteration.
    pub history: Vec<LogEntry>,
    /// Wall-clock milliseconds of every iteration.
    pub iteration_ms: Vec<f64>,
    /// Loss of the returned parameters.
    pub final_loss: LossBreakdown,
    pub lr_halvings: usize,
    pub final_lr: f64,
    pub num_params: usize,
}

impl FitReport {
    /// Tab-separated `iteration cd emd smooth total ms`, one logged iteration per line.
    pub fn write_log(&self, path: &Path) -> Result<()> {
        let mut out = String::from("iteration\tcd\temd\tsmooth\ttotal\tms\n");
        for e in &self.history {
            out.push_str(&format!(
                "{}\t{:e}\t{:e}\t{:e}\t{:e}\t{:.3}\n",
                e.iteration, e.loss.cd, e.loss.emd, e.loss.smooth, e.loss.total, e.ms
            ));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// JSON summary without the per-pair terms of each logged iteration.
    pub fn write_summary(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Summary<'a> {
            iterations: usize,
            logged: usize,
            initial_total: f64,
            final_loss: &'a LossBreakdown,
            lr_halvings: usize,
            final_lr: f64,
            num_params: usize,
            total_ms: f64,
        }
        let s = Summary {
            iterations: self.iteration_ms.len(),
            logged: self.history.len(),
            initial_total: self.history.first().map_or(f64::NAN, |e| e.loss.total),
            final_loss: &self.final_loss,
            lr_halvings: self.lr_halvings,
            final_lr: self.final_lr,
            num_params: self.num_params,
            total_ms: self.iteration_ms.iter().sum(),
        };
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(&mut f, &s).map_err(|e| Error::InvalidInput(e.to_string()))?;
        writeln!(f).map_err(|e| Error::io(path, e))
    }
}

fn diverged(iteration: usize, e: Error) -> Error {
    match e {
        Error::NonFinite(what) => Error::Diverged {
            iteration,
            reason: format!("non-finite {what}"),
        },
        other => other,
    }
}

/// Fits a fresh field to `window` with full-batch Adam.
pub fn fit(window: &InputWindow, config: &FitConfig) -> Result<(NeuralField, FitReport)> {
    config.validate()?;
    let mut field = NeuralField::new(config.field, config.seed)?;
    field.normalization = Normalization::fit(window);
    field.time_axis = window.time_axis();
    let adam_config = AdamConfig {
        lr: config.lr,
        ..AdamConfig::default()
    };
    field.adam = AdamState::new(adam_config, field.layers())?;
    let prepared = PreparedWindow::new(window, &field.normalization, &field.time_axis, &config.loss)?;

    let mut history = Vec::with_capacity(config.max_iters.div_ceil(config.log_every));
    let mut iteration_ms = Vec::with_capacity(config.max_iters);
    let mut initial = None;
    let mut lr_halvings = 0;

    for it in 0..config.max_iters {
        let start = Instant::now();
        let (loss, grads) =
            total_loss_prepared(&field, &prepared, &config.loss, true).map_err(|e| diverged(it, e))?;
        let grads = grads.expect("gradients requested");
        let first = *initial.get_or_insert(loss.total);
        if loss.total > config.divergence_factor * first {
            if lr_halvings > 0 {
                return Err(Error::Diverged {
                    iteration: it,
                    reason: format!(
                        "loss {:e} exceeds {} x initial {:e} after halving lr",
                        loss.total, config.divergence_factor, first
                    ),
                });
            }
            field.adam.config.lr *= 0.5;
            lr_halvings += 1;
        }
        let (layers, adam) = field.params_and_adam();
        adam_step(layers, &grads, adam).map_err(|e| diverged(it, e))?;
        adam.config.lr *= config.lr_decay;
        let ms = start.elapsed().as_secs_f64() * 1e3;
        iteration_ms.push(ms);
        if it % config.log_every == 0 {
            history.push(LogEntry {
                iteration: it,
                loss,
                ms,
            });
        }
    }
    let (final_loss, _) = total_loss_prepared(&field, &prepared, &config.loss, false)
        .map_err(|e| diverged(config.max_iters, e))?;
    let report = FitReport {
        history,
        iteration_ms,
        final_loss,
        lr_halvings,
        final_lr: field.adam.config.lr,
        num_params: field.num_params(),
    };
    Ok((field, report))
}

/// Predicts a cloud at every world time in `query_times`, each from its
/// temporally nearest input frame.
pub fn interpolate(field: &NeuralField, window: &InputWindow, query_times: &[f64]) -> Result<Vec<PointCloud>> {
    query_times
        .iter()
        .map(|&q| {
            if !q.is_finite() {
                return Err(Error::NonFinite("query time".into()));
            }
            let reference = &window.frames()[select_reference(window, q)];
            field.field_forward(reference, reference.time, q)
        })
        .collect()
}

/// World times of the `horizon` frames after the last input, one frame step apart.
pub fn extrapolation_times(window: &InputWindow, horizon: usize) -> Vec<f64> {
    let axis = window.time_axis();
    let last = (window.len() - 1) as f64;
    (1..=horizon).map(|h| axis.denormalize(last + h as f64)).collect()
}

/// Predicts `horizon` future frames from the last input frame.
pub fn extrapolate(field: &NeuralField, window: &InputWindow, horizon: usize) -> Result<Vec<PointCloud>> {
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be >= 1".into()));
    }
    let last = window.frames().last().expect("window has frames");
    extrapolation_times(window, horizon)
        .into_iter()
        .map(|q| field.field_forward(last, last.time, q))
        .collect()
}

/// `n` equally spaced times strictly between `t0` and `t1`.
pub fn equispaced_queries(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|k| t0 + (t1 - t0) * k as f64 / (n + 1) as f64).collect()
}

/// The interpolation gap of a window: between its two middle frames.
pub fn middle_pair(window: &InputWindow) -> (usize, usize) {
    let hi = window.len() / 2;
    (hi - 1, hi)
}

/// `n` equally spaced world times between the window's middle frames.
pub fn middle_queries(window: &InputWindow, n: usize) -> Vec<f64> {
    let (a, b) = middle_pair(window);
    equispaced_queries(window.frames()[a].time, window.frames()[b].time, n)
}
