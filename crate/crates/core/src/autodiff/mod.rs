//! Minimal dense-network engine: batched affine + LeakyReLU layers, a
//! reverse-mode tape, Adam, and seeded initialization.

mod adam;
mod dense;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use dense::{
    backward, leaky_relu, linear_leakyrelu_forward, mlp_forward, LayerGrads, LayerParams,
    LayerTape, Tape,
};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Fan-in scaled uniform initialization, `U(-sqrt(6/fan_in), sqrt(6/fan_in))`
/// (standard deviation `sqrt(2/fan_in)`), zero biases.
///
/// `shapes` lists `(in_dim, out_dim)` per layer. The last layer's weights are
/// multiplied by `final_layer_scale`.
pub fn init_params(
    shapes: &[(usize, usize)],
    seed: u64,
    final_layer_scale: f64,
) -> Result<Vec<LayerParams>> {
    if shapes.is_empty() {
        return Err(Error::InvalidConfig("at least one layer is required".into()));
    }
    if !(final_layer_scale >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "final_layer_scale must be >= 0, got {final_layer_scale}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last = shapes.len() - 1;
    shapes
        .iter()
        .enumerate()
        .map(|(i, &(fan_in, out))| {
            if fan_in == 0 || out == 0 {
                return Err(Error::InvalidConfig(format!("layer {i} has a zero dimension")));
            }
            let limit = (6.0 / fan_in as f64).sqrt();
            let gain = if i == last { final_layer_scale } else { 1.0 };
            let w = Array2::from_shape_simple_fn((out, fan_in), || {
                rng.random_range(-limit..limit) * gain
            });
            LayerParams::new(w, Array1::zeros(out))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_params() {
        let shapes = [(12, 32), (32, 32), (32, 3)];
        let a = init_params(&shapes, 7, 0.01).unwrap();
        let b = init_params(&shapes, 7, 0.01).unwrap();
        assert_eq!(a, b);
        let c = init_params(&shapes, 8, 0.01).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_final_scale_zeroes_last_layer() {
        let p = init_params(&[(4, 8), (8, 3)], 1, 0.0).unwrap();
        assert!(p[1].weights().iter().all(|&w| w == 0.0));
        assert!(p[0].weights().iter().any(|&w| w != 0.0));
    }

    #[test]
    fn fan_in_512_standard_deviation() {
        // 512 x 200 = 102400 samples
        let p = init_params(&[(512, 200), (200, 1)], 3, 1.0).unwrap();
        let w = p[0].weights();
        let n = w.len() as f64;
        let mean = w.sum() / n;
        let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let target = (2.0f64 / 512.0).sqrt();
        assert!((var.sqrt() - target).abs() < 0.2 * target);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(init_params(&[], 0, 1.0).is_err());
        assert!(init_params(&[(3, 3)], 0, -1.0).is_err());
        assert!(init_params(&[(0, 3)], 0, 1.0).is_err());
    }
}
