//! The spatio-temporal motion field: an encoded `(x, y, z, t)` coordinate
//! plus a query time in, the point's displacement to that time out.
//!
//! The network is `depth` hidden layers of `width` units with LeakyReLU and
//! a final affine map to 3. The query time is concatenated to the input of
//! hidden layer `time_injection_layer` (the last hidden layer by default).
//! Layers before the injection point depend only on the source cloud, so they
//! are evaluated once per frame and shared by every query time.

mod checkpoint;
mod encoding;

pub use checkpoint::{load_field, save_field, CHECKPOINT_MAGIC};
pub use encoding::{encoded_len, encoded_len_per_scalar, positional_encode};

use ndarray::{s, Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::autodiff::{
    init_params, leaky_relu, linear_leakyrelu_forward, AdamConfig, AdamState, LayerGrads,
    LayerParams, LayerTape,
};
use crate::cloud::{InputWindow, Normalization, Point3, PointCloud, TimeAxis};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldConfig {
    /// Number of hidden layers.
    pub depth: usize,
    pub width: usize,
    pub pe_order: usize,
    pub activation_slope: f64,
    /// Layer whose input gets the query time. `None` is the last hidden
    /// layer; `Some(depth)` feeds it straight into the output map.
    pub time_injection_layer: Option<usize>,
    /// Multiplier on the output layer's initial weights.
    pub final_layer_scale: f64,
    /// Encode the query time like the input coordinates instead of raw.
    pub encode_query_time: bool,
    /// `false` feeds raw `(x, y, z, t)` to the first layer.
    pub use_encoding: bool,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            depth: 8,
            width: 512,
            pe_order: 0,
            activation_slope: 0.01,
            time_injection_layer: None,
            final_layer_scale: 1e-2,
            encode_query_time: false,
            use_encoding: true,
        }
    }
}

impl FieldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth < 2 {
            return Err(Error::InvalidConfig(format!("depth must be >= 2, got {}", self.depth)));
        }
        if self.width == 0 {
            return Err(Error::InvalidConfig("width must be >= 1".into()));
        }
        if !self.activation_slope.is_finite() {
            return Err(Error::InvalidConfig("activation_slope must be finite".into()));
        }
        if !(self.final_layer_scale >= 0.0) || !self.final_layer_scale.is_finite() {
            return Err(Error::InvalidConfig("final_layer_scale must be finite and >= 0".into()));
        }
        if self.injection_layer() > self.depth {
            return Err(Error::InvalidConfig(format!(
                "time_injection_layer {} is past the output layer {}",
                self.injection_layer(),
                self.depth
            )));
        }
        Ok(())
    }

    pub fn injection_layer(&self) -> usize {
        self.time_injection_layer.unwrap_or(self.depth - 1)
    }

    pub fn input_dim(&self) -> usize {
        if self.use_encoding {
            encoded_len(self.pe_order)
        } else {
            4
        }
    }

    pub fn query_dim(&self) -> usize {
        if self.encode_query_time {
            encoded_len_per_scalar(self.pe_order)
        } else {
            1
        }
    }

    /// `(in_dim, out_dim)` for every layer, output layer last.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let inj = self.injection_layer();
        (0..=self.depth)
            .map(|i| {
                let mut fan_in = if i == 0 { self.input_dim() } else { self.width };
                if i == inj {
                    fan_in += self.query_dim();
                }
                let out = if i == self.depth { 3 } else { self.width };
                (fan_in, out)
            })
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.layer_shapes().iter().map(|&(i, o)| i * o + o).sum()
    }
}

/// One field evaluation: a point observed at `source_time`, moved to `query_time`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacetimeSample {
    pub position: Point3,
    pub source_time: f64,
    pub query_time: f64,
}

impl SpacetimeSample {
    pub fn new(position: Point3, source_time: f64, query_time: f64) -> Result<Self> {
        if position.iter().chain([&source_time, &query_time]).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("spacetime sample".into()));
        }
        Ok(Self {
            position,
            source_time,
            query_time,
        })
    }
}

#[derive(Debug, Clone)]
pub struct NeuralField {
    pub config: FieldConfig,
    layers: Vec<LayerParams>,
    pub adam: AdamState,
    /// World to network coordinates.
    pub normalization: Normalization,
    /// World to network time.
    pub time_axis: TimeAxis,
}

#[derive(Debug)]
struct QueryTape {
    features: Array1<f64>,
    pre_activation: Option<Array2<f64>>,
    head: Vec<LayerTape>,
}

/// Everything a reverse pass over one source frame needs.
#[derive(Debug)]
pub struct FrameTape {
    trunk: Vec<LayerTape>,
    shared_input: Array2<f64>,
    injection_stamp: (u64, u64),
    queries: Vec<QueryTape>,
}

impl FrameTape {
    pub fn num_queries(&self) -> usize {
        self.queries.len()
    }
}

impl NeuralField {
    pub fn new(config: FieldConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layers = init_params(&config.layer_shapes(), seed, config.final_layer_scale)?;
        let adam = AdamState::new(AdamConfig::default(), &layers)?;
        Ok(Self {
            config,
            layers,
            adam,
            normalization: Normalization::identity(),
            time_axis: TimeAxis {
                origin: 0.0,
                step: 1.0,
            },
        })
    }

    pub(crate) fn from_parts(
        config: FieldConfig,
        layers: Vec<LayerParams>,
        adam: AdamState,
        normalization: Normalization,
        time_axis: TimeAxis,
    ) -> Result<Self> {
        config.validate()?;
        let shapes = config.layer_shapes();
        if layers.len() != shapes.len()
            || layers
                .iter()
                .zip(&shapes)
                .any(|(l, &(i, o))| l.in_dim() != i || l.out_dim() != o)
        {
            return Err(Error::Shape("layer dimensions do not match the field config".into()));
        }
        Ok(Self {
            config,
            layers,
            adam,
            normalization,
            time_axis,
        })
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    /// Parameters and optimizer state together, for an update step.
    pub fn params_and_adam(&mut self) -> (&mut [LayerParams], &mut AdamState) {
        (&mut self.layers, &mut self.adam)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(LayerParams::num_params).sum()
    }

    fn query_features(&self, t: f64) -> Array1<f64> {
        if self.config.encode_query_time {
            Array1::from(positional_encode(&[t], self.config.pe_order))
        } else {
            Array1::from(vec![t])
        }
    }

    /// Motions of `points` (network coordinates, observed at network time
    /// `source_time`) to each of `query_times`, with the tape for
    /// [`NeuralField::backward_frame`].
    pub fn forward_frame(
        &self,
        points: &[Point3],
        source_time: f64,
        query_times: &[f64],
    ) -> Result<(Vec<Vec<Point3>>, FrameTape)> {
        if points.is_empty() {
            return Err(Error::InvalidInput("field evaluated on an empty cloud".into()));
        }
        if query_times.is_empty() {
            return Err(Error::InvalidInput("no query times".into()));
        }
        let cfg = &self.config;
        let slope = cfg.activation_slope;
        let inj = cfg.injection_layer();
        let pe = cfg.use_encoding.then_some(cfg.pe_order);

        let mut h = encoding::encode_batch(points, source_time, pe);
        let mut trunk = Vec::with_capacity(inj);
        for layer in &self.layers[..inj] {
            let (out, tape) = linear_leakyrelu_forward(layer, h.view(), Some(slope))?;
            trunk.push(tape);
            h = out;
        }

        let inj_layer = &self.layers[inj];
        let h_dim = h.ncols();
        let w = inj_layer.weights();
        let mut shared = h.dot(&w.slice(s![.., ..h_dim]).t());
        shared += inj_layer.biases();
        let hidden = inj < cfg.depth;

        let mut all_motions = Vec::with_capacity(query_times.len());
        let mut queries = Vec::with_capacity(query_times.len());
        for &t in query_times {
            let features = self.query_features(t);
            let shift = w.slice(s![.., h_dim..]).dot(&features);
            let pre = &shared + &shift;
            let (mut out, pre_activation) = if hidden {
                (pre.mapv(|z| leaky_relu(z, slope)), Some(pre))
            } else {
                (pre, None)
            };
            let mut head = Vec::with_capacity(cfg.depth - inj);
            for (l, layer) in self.layers.iter().enumerate().skip(inj + 1) {
                let act = (l < cfg.depth).then_some(slope);
                let (next, tape) = linear_leakyrelu_forward(layer, out.view(), act)?;
                head.push(tape);
                out = next;
            }
            let motions: Vec<Point3> = out.rows().into_iter().map(|r| [r[0], r[1], r[2]]).collect();
            if motions.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("field output at query time {t}")));
            }
            all_motions.push(motions);
            queries.push(QueryTape {
                features,
                pre_activation,
                head,
            });
        }
        let tape = FrameTape {
            trunk,
            shared_input: h,
            injection_stamp: inj_layer.stamp(),
            queries,
        };
        Ok((all_motions, tape))
    }

    /// Parameter gradients given the loss gradient w.r.t. every motion of
    /// every query recorded in `tape`.
    pub fn backward_frame(
        &self,
        tape: FrameTape,
        motion_grads: &[Vec<Point3>],
    ) -> Result<Vec<LayerGrads>> {
        if motion_grads.len() != tape.queries.len() {
            return Err(Error::Shape(format!(
                "{} motion gradients for {} queries",
                motion_grads.len(),
                tape.queries.len()
            )));
        }
        let cfg = &self.config;
        let inj = cfg.injection_layer();
        let inj_layer = &self.layers[inj];
        if tape.injection_stamp.0 != inj_layer.stamp().0 {
            return Err(Error::Shape("tape was recorded against a different field".into()));
        }
        if tape.injection_stamp.1 != inj_layer.version() {
            return Err(Error::StaleTape {
                recorded: tape.injection_stamp.1,
                current: inj_layer.version(),
            });
        }
        let n = tape.shared_input.nrows();
        let h_dim = tape.shared_input.ncols();
        let slope = cfg.activation_slope;

        let mut grads: Vec<LayerGrads> = self.layers.iter().map(LayerGrads::zeros_like).collect();
        let mut delta_sum = Array2::<f64>::zeros((n, inj_layer.out_dim()));
        let mut query_weight_grad = Array2::<f64>::zeros((inj_layer.out_dim(), cfg.query_dim()));

        for (q, g) in tape.queries.into_iter().zip(motion_grads) {
            if g.len() != n {
                return Err(Error::Shape(format!("{} motion gradients for {n} points", g.len())));
            }
            let mut grad = Array2::from_shape_vec((n, 3), g.iter().flatten().copied().collect())
                .expect("n x 3");
            for (offset, t) in q.head.into_iter().enumerate().rev() {
                let l = inj + 1 + offset;
                let (lg, ig) = t.backward(&self.layers[l], grad.view())?;
                grads[l].accumulate(&lg);
                grad = ig;
            }
            if let Some(mut pre) = q.pre_activation {
                pre.zip_mut_with(&grad, |z, &g| *z = if *z > 0.0 { g } else { slope * g });
                grad = pre;
            }
            let col = grad.sum_axis(Axis(0));
            for (i, &c) in col.iter().enumerate() {
                for (j, &f) in q.features.iter().enumerate() {
                    query_weight_grad[[i, j]] += c * f;
                }
            }
            delta_sum += &grad;
        }

        let w_h = inj_layer.weights().slice(s![.., ..h_dim]);
        {
            let gi = &mut grads[inj];
            gi.weights
                .slice_mut(s![.., ..h_dim])
                .assign(&delta_sum.t().dot(&tape.shared_input));
            gi.weights.slice_mut(s![.., h_dim..]).assign(&query_weight_grad);
            gi.biases = delta_sum.sum_axis(Axis(0));
        }
        let mut grad = delta_sum.dot(&w_h);
        for (l, t) in tape.trunk.into_iter().enumerate().rev() {
            let (lg, ig) = t.backward(&self.layers[l], grad.view())?;
            grads[l].accumulate(&lg);
            grad = ig;
        }
        Ok(grads)
    }

    /// Motions in network coordinates, no tape kept.
    pub fn motions(&self, points: &[Point3], source_time: f64, query_time: f64) -> Result<Vec<Point3>> {
        let (mut m, _) = self.forward_frame(points, source_time, &[query_time])?;
        Ok(m.pop().expect("one query"))
    }

    /// Moves a world-coordinate `cloud` observed at world time `source_time`
    /// to world time `query_time`.
    pub fn field_forward(&self, cloud: &PointCloud, source_time: f64, query_time: f64) -> Result<PointCloud> {
        let norm = &self.normalization;
        let local: Vec<Point3> = cloud.points.iter().map(|p| norm.apply(p)).collect();
        let m = self.motions(
            &local,
            self.time_axis.normalize(source_time),
            self.time_axis.normalize(query_time),
        )?;
        let inv = 1.0 / norm.scale;
        let points = cloud
            .points
            .iter()
            .zip(&m)
            .map(|(p, d)| [p[0] + d[0] * inv, p[1] + d[1] * inv, p[2] + d[2] * inv])
            .collect();
        Ok(PointCloud::new(points, query_time))
    }

    pub fn predict_sample(&self, sample: &SpacetimeSample) -> Result<Point3> {
        let cloud = PointCloud::new(vec![sample.position], sample.source_time);
        Ok(self.field_forward(&cloud, sample.source_time, sample.query_time)?.points[0])
    }
}

pub fn field_forward(
    field: &NeuralField,
    cloud: &PointCloud,
    source_time: f64,
    query_time: f64,
) -> Result<PointCloud> {
    field.field_forward(cloud, source_time, query_time)
}

/// Input frame closest in time to `query_time`; ties go to the earlier frame.
pub fn select_reference(window: &InputWindow, query_time: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, f) in window.frames().iter().enumerate() {
        let d = (f.time - query_time).abs();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}
