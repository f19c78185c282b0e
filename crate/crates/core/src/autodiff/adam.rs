//! Bias-corrected Adam over a set of dense layers.

use ndarray::{Array1, Array2, Zip};
use serde::{Deserialize, Serialize};

use super::dense::{LayerGrads, LayerParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Moments {
    m_w: Array2<f64>,
    v_w: Array2<f64>,
    m_b: Array1<f64>,
    v_b: Array1<f64>,
}

/// First/second moments per layer plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    step_count: u64,
    moments: Vec<Moments>,
}

impl AdamState {
    pub fn new(config: AdamConfig, layers: &[LayerParams]) -> Result<Self> {
        if !(config.lr > 0.0) || !config.lr.is_finite() {
            return Err(Error::InvalidConfig(format!("lr must be positive, got {}", config.lr)));
        }
        let moments = layers
            .iter()
            .map(|l| Moments {
                m_w: Array2::zeros(l.weights().raw_dim()),
                v_w: Array2::zeros(l.weights().raw_dim()),
                m_b: Array1::zeros(l.out_dim()),
                v_b: Array1::zeros(l.out_dim()),
            })
            .collect();
        Ok(Self {
            config,
            step_count: 0,
            moments,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn second_moments_nonnegative(&self) -> bool {
        self.moments
            .iter()
            .all(|m| m.v_w.iter().chain(m.v_b.iter()).all(|&v| v >= 0.0))
    }

    /// Flattened `(m, v)` per layer, weights then biases; used by checkpoints.
    pub(crate) fn flat_moments(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        self.moments
            .iter()
            .map(|m| {
                let mut first: Vec<f64> = m.m_w.iter().copied().collect();
                first.extend(m.m_b.iter());
                let mut second: Vec<f64> = m.v_w.iter().copied().collect();
                second.extend(m.v_b.iter());
                (first, second)
            })
            .collect()
    }

    pub(crate) fn restore(
        config: AdamConfig,
        step_count: u64,
        layers: &[LayerParams],
        flat: Vec<(Vec<f64>, Vec<f64>)>,
    ) -> Result<Self> {
        let mut state = Self::new(config, layers)?;
        state.step_count = step_count;
        for ((m, layer), (first, second)) in state.moments.iter_mut().zip(layers).zip(flat) {
            let nw = layer.weights().len();
            let shape = layer.weights().raw_dim();
            m.m_w = Array2::from_shape_vec(shape, first[..nw].to_vec())
                .map_err(|e| Error::Shape(e.to_string()))?;
            m.m_b = Array1::from(first[nw..].to_vec());
            m.v_w = Array2::from_shape_vec(shape, second[..nw].to_vec())
                .map_err(|e| Error::Shape(e.to_string()))?;
            m.v_b = Array1::from(second[nw..].to_vec());
        }
        Ok(state)
    }
}

/// One Adam update of every layer.
///
/// Gradients are validated before anything is touched, so a rejected call
/// leaves parameters and state unchanged.
pub fn adam_step(
    layers: &mut [LayerParams],
    grads: &[LayerGrads],
    state: &mut AdamState,
) -> Result<()> {
    if layers.len() != grads.len() || layers.len() != state.moments.len() {
        return Err(Error::Shape(format!(
            "{} layers, {} gradients, {} moment sets",
            layers.len(),
            grads.len(),
            state.moments.len()
        )));
    }
    for (i, (l, g)) in layers.iter().zip(grads).enumerate() {
        if l.weights().dim() != g.weights.dim() || l.biases().len() != g.biases.len() {
            return Err(Error::Shape(format!("gradient shape mismatch at layer {i}")));
        }
        if !g.is_finite() {
            return Err(Error::NonFinite(format!("gradient of layer {i}")));
        }
    }

    state.step_count += 1;
    let AdamConfig {
        lr,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let t = state.step_count as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);

    let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
    };

    for ((layer, g), mom) in layers.iter_mut().zip(grads).zip(state.moments.iter_mut()) {
        layer.update(|w, b| {
            Zip::from(w)
                .and(&mut mom.m_w)
                .and(&mut mom.v_w)
                .and(&g.weights)
                .for_each(|p, m, v, &g| update(p, m, v, g));
            Zip::from(b)
                .and(&mut mom.m_b)
                .and(&mut mom.v_b)
                .and(&g.biases)
                .for_each(|p, m, v, &g| update(p, m, v, g));
        });
    }
    Ok(())
}
