//! Dense affine layers with an optional LeakyReLU, recorded on a tape for
//! reverse-mode differentiation over a batch of points.
//!
//! Batches are row-major: one row per point, so an `N x in_dim` input maps
//! to an `N x out_dim` output through `y = act(x W^T + b)`.

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::{Error, Result};

static NEXT_LAYER_ID: AtomicU64 = AtomicU64::new(1);

/// Weights (`out_dim x in_dim`) and biases of one dense layer.
///
/// Every mutation through [`LayerParams::update`] bumps `version`; tapes
/// recorded against an older version are rejected by [`LayerTape::backward`].
#[derive(Debug, Clone)]
pub struct LayerParams {
    weights: Array2<f64>,
    biases: Array1<f64>,
    id: u64,
    version: u64,
}

impl PartialEq for LayerParams {
    fn eq(&self, other: &Self) -> bool {
        self.weights == other.weights && self.biases == other.biases
    }
}

impl LayerParams {
    pub fn new(weights: Array2<f64>, biases: Array1<f64>) -> Result<Self> {
        let (out_dim, in_dim) = weights.dim();
        if out_dim == 0 || in_dim == 0 {
            return Err(Error::Shape("layer dims must be >= 1".into()));
        }
        if biases.len() != out_dim {
            return Err(Error::Shape(format!(
                "bias length {} does not match out_dim {out_dim}",
                biases.len()
            )));
        }
        if weights.iter().chain(biases.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("layer parameters".into()));
        }
        Ok(Self {
            weights,
            biases,
            id: NEXT_LAYER_ID.fetch_add(1, Ordering::Relaxed),
            version: 0,
        })
    }

    pub fn zeros(out_dim: usize, in_dim: usize) -> Result<Self> {
        Self::new(Array2::zeros((out_dim, in_dim)), Array1::zeros(out_dim))
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn biases(&self) -> &Array1<f64> {
        &self.biases
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    /// Mutates weights and biases in place and invalidates outstanding tapes.
    pub fn update(&mut self, f: impl FnOnce(&mut Array2<f64>, &mut Array1<f64>)) {
        f(&mut self.weights, &mut self.biases);
        self.version += 1;
    }

    pub(crate) fn stamp(&self) -> (u64, u64) {
        (self.id, self.version)
    }
}

/// Parameter gradients of one layer, same shapes as [`LayerParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

impl LayerGrads {
    pub fn zeros_like(params: &LayerParams) -> Self {
        Self {
            weights: Array2::zeros(params.weights.raw_dim()),
            biases: Array1::zeros(params.biases.len()),
        }
    }

    pub fn accumulate(&mut self, other: &LayerGrads) {
        self.weights += &other.weights;
        self.biases += &other.biases;
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(self.biases.iter()).all(|v| v.is_finite())
    }
}

#[inline]
pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

/// What one dense forward recorded: its input, and the pre-activation when
/// an activation was applied.
#[derive(Debug)]
pub struct LayerTape {
    layer: (u64, u64),
    input: Array2<f64>,
    pre_activation: Option<(Array2<f64>, f64)>,
}

impl LayerTape {
    pub fn input(&self) -> &Array2<f64> {
        &self.input
    }

    /// Reverse pass through the recorded layer. Consumes the tape.
    ///
    /// Returns the parameter gradients (summed over the batch) and the
    /// gradient with respect to the layer input.
    pub fn backward(
        self,
        params: &LayerParams,
        output_grad: ArrayView2<f64>,
    ) -> Result<(LayerGrads, Array2<f64>)> {
        if self.layer.0 != params.id {
            return Err(Error::Shape("tape was recorded against a different layer".into()));
        }
        if self.layer.1 != params.version {
            return Err(Error::StaleTape {
                recorded: self.layer.1,
                current: params.version,
            });
        }
        let expected = (self.input.nrows(), params.out_dim());
        if output_grad.dim() != expected {
            return Err(Error::Shape(format!(
                "output gradient is {:?}, tape expects {:?}",
                output_grad.dim(),
                expected
            )));
        }
        let delta = match self.pre_activation {
            Some((mut pre, slope)) => {
                pre.zip_mut_with(&output_grad, |z, &g| {
                    *z = if *z > 0.0 { g } else { slope * g };
                });
                pre
            }
            None => output_grad.to_owned(),
        };
        let grads = LayerGrads {
            weights: delta.t().dot(&self.input),
            biases: delta.sum_axis(Axis(0)),
        };
        let input_grad = delta.dot(&params.weights);
        Ok((grads, input_grad))
    }
}

/// `act(x W^T + b)` over a batch; `activation_slope = None` leaves the map affine.
pub fn linear_leakyrelu_forward(
    params: &LayerParams,
    input: ArrayView2<f64>,
    activation_slope: Option<f64>,
) -> Result<(Array2<f64>, LayerTape)> {
    if input.ncols() != params.in_dim() {
        return Err(Error::Shape(format!(
            "input has {} columns, layer expects {}",
            input.ncols(),
            params.in_dim()
        )));
    }
    let mut pre = input.dot(&params.weights.t());
    pre += &params.biases;
    let (output, pre_activation) = match activation_slope {
        Some(slope) => {
            let out = pre.mapv(|z| leaky_relu(z, slope));
            (out, Some((pre, slope)))
        }
        None => (pre, None),
    };
    let tape = LayerTape {
        layer: params.stamp(),
        input: input.to_owned(),
        pre_activation,
    };
    Ok((output, tape))
}

/// Recorded forward pass through a chain of dense layers.
#[derive(Debug, Default)]
pub struct Tape {
    layers: Vec<LayerTape>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, layer: LayerTape) {
        self.layers.push(layer);
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }
}

/// Forward through `layers` in order, LeakyReLU on all but the last.
pub fn mlp_forward(
    layers: &[LayerParams],
    input: ArrayView2<f64>,
    slope: f64,
) -> Result<(Array2<f64>, Tape)> {
    let mut tape = Tape::new();
    let mut h = input.to_owned();
    for (i, layer) in layers.iter().enumerate() {
        let act = (i + 1 < layers.len()).then_some(slope);
        let (out, frag) = linear_leakyrelu_forward(layer, h.view(), act)?;
        tape.push(frag);
        h = out;
    }
    Ok((h, tape))
}

/// Reverse pass over a [`Tape`]; every recorded layer is consumed once.
pub fn backward(
    layers: &[LayerParams],
    tape: Tape,
    output_grad: ArrayView2<f64>,
) -> Result<(Vec<LayerGrads>, Array2<f64>)> {
    if tape.len() != layers.len() {
        return Err(Error::Shape(format!(
            "tape has {} layers, network has {}",
            tape.len(),
            layers.len()
        )));
    }
    let mut grads = Vec::with_capacity(layers.len());
    let mut g = output_grad.to_owned();
    for (frag, layer) in tape.layers.into_iter().zip(layers).rev() {
        let (lg, ig) = frag.backward(layer, g.view())?;
        grads.push(lg);
        g = ig;
    }
    grads.reverse();
    Ok((grads, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_layer(rng: &mut ChaCha8Rng, out: usize, inp: usize) -> LayerParams {
        let w = Array2::from_shape_fn((out, inp), |_| rng.random_range(-1.0..1.0));
        let b = Array1::from_shape_fn(out, |_| rng.random_range(-1.0..1.0));
        LayerParams::new(w, b).unwrap()
    }

    #[test]
    fn zero_layer_annihilates() {
        let layer = LayerParams::zeros(4, 3).unwrap();
        let x = array![[1.0, -2.0, 3.0], [0.5, 0.5, 0.5]];
        let (y, _) = linear_leakyrelu_forward(&layer, x.view(), Some(0.01)).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_with_leaky_relu() {
        let layer = LayerParams::new(Array2::eye(2), Array1::zeros(2)).unwrap();
        let x = array![[-1.0, 2.0]];
        let (y, _) = linear_leakyrelu_forward(&layer, x.view(), Some(0.01)).unwrap();
        assert_eq!(y, array![[-0.01, 2.0]]);
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let layer = LayerParams::zeros(2, 3).unwrap();
        let x = Array2::zeros((5, 4));
        assert!(matches!(
            linear_leakyrelu_forward(&layer, x.view(), None),
            Err(Error::Shape(_))
        ));
        assert!(LayerParams::new(Array2::zeros((2, 3)), Array1::zeros(3)).is_err());
    }

    #[test]
    fn zero_output_grad_gives_zero_param_grad() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let layer = random_layer(&mut rng, 3, 3);
        let x = Array2::from_shape_fn((5, 3), |_| rng.random_range(-1.0..1.0));
        let (_, tape) = linear_leakyrelu_forward(&layer, x.view(), Some(0.01)).unwrap();
        let (g, ig) = tape.backward(&layer, Array2::zeros((5, 3)).view()).unwrap();
        assert!(g.weights.iter().chain(g.biases.iter()).all(|&v| v == 0.0));
        assert!(ig.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_base_case_is_outer_product() {
        let w = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let layer = LayerParams::new(w, Array1::zeros(3)).unwrap();
        let x = array![[0.5, -1.5]];
        let g = array![[1.0, -2.0, 0.25]];
        let (_, tape) = linear_leakyrelu_forward(&layer, x.view(), None).unwrap();
        let (grads, _) = tape.backward(&layer, g.view()).unwrap();
        let expected = array![[0.5, -1.5], [-1.0, 3.0], [0.125, -0.375]];
        assert_eq!(grads.weights, expected);
    }

    #[test]
    fn finite_difference_random_layer() {
        // Loss = sum(c ⊙ y) with fixed random c, so dL/dy = c.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let layer = random_layer(&mut rng, 3, 3);
        let x = Array2::from_shape_fn((5, 3), |_| rng.random_range(-1.0..1.0));
        let c = Array2::from_shape_fn((5, 3), |_| rng.random_range(-1.0..1.0));
        let loss = |l: &LayerParams| {
            let (y, _) = linear_leakyrelu_forward(l, x.view(), Some(0.01)).unwrap();
            (&y * &c).sum()
        };
        let (_, tape) = linear_leakyrelu_forward(&layer, x.view(), Some(0.01)).unwrap();
        let (grads, _) = tape.backward(&layer, c.view()).unwrap();
        let h = 1e-5;
        for r in 0..3 {
            for col in 0..3 {
                let mut plus = layer.clone();
                plus.update(|w, _| w[[r, col]] += h);
                let mut minus = layer.clone();
                minus.update(|w, _| w[[r, col]] -= h);
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
                let an = grads.weights[[r, col]];
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
                assert!(rel < 1e-4, "w[{r},{col}] fd={fd} an={an}");
            }
            let mut plus = layer.clone();
            plus.update(|_, b| b[r] += h);
            let mut minus = layer.clone();
            minus.update(|_, b| b[r] -= h);
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            let an = grads.biases[r];
            assert!((fd - an).abs() / fd.abs().max(an.abs()).max(1e-8) < 1e-4);
        }
    }

    #[test]
    fn stale_and_foreign_tapes_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut layer = random_layer(&mut rng, 2, 2);
        let other = random_layer(&mut rng, 2, 2);
        let x = Array2::ones((1, 2));
        let (_, tape) = linear_leakyrelu_forward(&layer, x.view(), None).unwrap();
        assert!(matches!(
            tape.backward(&other, Array2::ones((1, 2)).view()),
            Err(Error::Shape(_))
        ));
        let (_, tape) = linear_leakyrelu_forward(&layer, x.view(), None).unwrap();
        layer.update(|w, _| w[[0, 0]] += 1.0);
        assert!(matches!(
            tape.backward(&layer, Array2::ones((1, 2)).view()),
            Err(Error::StaleTape { .. })
        ));
        let (_, tape) = linear_leakyrelu_forward(&layer, x.view(), None).unwrap();
        assert!(tape.backward(&layer, Array2::ones((2, 2)).view()).is_err());
    }

    #[test]
    fn mlp_backward_is_deterministic_and_checks_depth() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let layers = vec![random_layer(&mut rng, 4, 3), random_layer(&mut rng, 2, 4)];
        let x = Array2::from_shape_fn((6, 3), |_| rng.random_range(-1.0..1.0));
        let g = Array2::from_shape_fn((6, 2), |_| rng.random_range(-1.0..1.0));
        let run = || {
            let (_, tape) = mlp_forward(&layers, x.view(), 0.01).unwrap();
            assert_eq!(tape.len(), 2);
            backward(&layers, tape, g.view()).unwrap()
        };
        let (a, ai) = run();
        let (b, bi) = run();
        assert_eq!(a, b);
        assert_eq!(ai, bi);
        let (_, tape) = mlp_forward(&layers[..1], x.view(), 0.01).unwrap();
        assert!(backward(&layers, tape, g.view()).is_err());
    }
}
