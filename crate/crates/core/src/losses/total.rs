use serde::{Deserialize, Serialize};

use super::chamfer::chamfer_indexed;
use super::emd::{emd, EmdConfig};
use super::smoothness::{smoothness_with_graph, KnnGraph, DEFAULT_SMOOTH_K};
use crate::autodiff::LayerGrads;
use crate::cloud::{InputWindow, Normalization, Point3, TimeAxis};
use crate::field::NeuralField;
use crate::geometry::NeighborIndex;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    /// Chamfer weight.
    pub alpha: f64,
    /// EMD weight.
    pub beta: f64,
    /// Smoothness weight.
    pub gamma: f64,
    pub smooth_k: usize,
    pub emd: EmdConfig,
    /// Keep the `i == j` self-reconstruction pairs.
    pub include_self_pairs: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self::outdoor()
    }
}

impl LossConfig {
    /// Weights used on human-body sequences.
    pub fn indoor() -> Self {
        Self {
            alpha: 1.0,
            beta: 50.0,
            gamma: 0.0,
            smooth_k: DEFAULT_SMOOTH_K,
            emd: EmdConfig::default(),
            include_self_pairs: true,
        }
    }

    /// Weights used on driving sequences.
    pub fn outdoor() -> Self {
        Self {
            beta: 0.0,
            gamma: 1.0,
            ..Self::indoor()
        }
    }

    pub fn with_weights(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self {
            alpha,
            beta,
            gamma,
            ..Self::indoor()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let w = [self.alpha, self.beta, self.gamma];
        if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidConfig("loss weights must be finite and >= 0".into()));
        }
        if w.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidConfig("at least one loss weight must be > 0".into()));
        }
        if self.smooth_k == 0 {
            return Err(Error::InvalidConfig("smooth_k must be >= 1".into()));
        }
        if !(self.emd.epsilon > 0.0) {
            return Err(Error::InvalidConfig("emd epsilon must be > 0".into()));
        }
        Ok(())
    }
}

/// Unweighted terms of one (reference frame, target frame) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairTerm {
    pub reference: usize,
    pub target: usize,
    pub cd: f64,
    pub emd: f64,
    pub smooth: f64,
}

/// Sums of the unweighted terms over all pairs, and the weighted total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub cd: f64,
    pub emd: f64,
    pub smooth: f64,
    pub total: f64,
    pub pairs: Vec<PairTerm>,
}

/// A window in network coordinates with the per-frame search structures
/// that stay fixed across iterations.
#[derive(Debug, Clone)]
pub struct PreparedWindow {
    frames: Vec<Vec<Point3>>,
    times: Vec<f64>,
    targets: Vec<NeighborIndex>,
    graphs: Vec<Option<KnnGraph>>,
}

impl PreparedWindow {
    pub fn new(
        window: &InputWindow,
        normalization: &Normalization,
        time_axis: &TimeAxis,
        config: &LossConfig,
    ) -> Result<Self> {
        config.validate()?;
        let frames: Vec<Vec<Point3>> = window
            .frames()
            .iter()
            .map(|f| f.points.iter().map(|p| normalization.apply(p)).collect())
            .collect();
        let times = window.frames().iter().map(|f| time_axis.normalize(f.time)).collect();
        let targets = frames
            .iter()
            .map(|f| NeighborIndex::build(f))
            .collect::<Result<_>>()?;
        let graphs = frames
            .iter()
            .map(|f| {
                if config.gamma > 0.0 {
                    KnnGraph::build(f, config.smooth_k).map(Some)
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            frames,
            times,
            targets,
            graphs,
        })
    }

    pub fn frames(&self) -> &[Vec<Point3>] {
        &self.frames
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Weighted loss over every (reference, target) pair of `window`, with the
/// parameter gradients, using the field's own normalization.
pub fn total_loss(
    field: &NeuralField,
    window: &InputWindow,
    config: &LossConfig,
) -> Result<(LossBreakdown, Vec<LayerGrads>)> {
    let prepared = PreparedWindow::new(window, &field.normalization, &field.time_axis, config)?;
    total_loss_prepared(field, &prepared, config, true)
        .map(|(b, g)| (b, g.expect("gradients requested")))
}

/// [`total_loss`] on a prepared window; gradients only when `with_grads`.
pub fn total_loss_prepared(
    field: &NeuralField,
    window: &PreparedWindow,
    config: &LossConfig,
    with_grads: bool,
) -> Result<(LossBreakdown, Option<Vec<LayerGrads>>)> {
    if window.len() < 2 {
        return Err(Error::InvalidInput("the loss needs at least 2 frames".into()));
    }
    let mut breakdown = LossBreakdown {
        cd: 0.0,
        emd: 0.0,
        smooth: 0.0,
        total: 0.0,
        pairs: Vec::with_capacity(window.len() * window.len()),
    };
    let mut grads: Option<Vec<LayerGrads>> = None;

    for (i, reference) in window.frames.iter().enumerate() {
        let targets: Vec<usize> = (0..window.len())
            .filter(|&j| config.include_self_pairs || j != i)
            .collect();
        let query_times: Vec<f64> = targets.iter().map(|&j| window.times[j]).collect();
        let (motions, tape) = field.forward_frame(reference, window.times[i], &query_times)?;

        let mut motion_grads = Vec::with_capacity(targets.len());
        for (&j, m) in targets.iter().zip(&motions) {
            let predicted: Vec<Point3> = reference
                .iter()
                .zip(m)
                .map(|(p, d)| [p[0] + d[0], p[1] + d[1], p[2] + d[2]])
                .collect();
            let mut g = vec![[0.0; 3]; m.len()];
            let mut term = PairTerm {
                reference: i,
                target: j,
                cd: 0.0,
                emd: 0.0,
                smooth: 0.0,
            };
            if config.alpha > 0.0 {
                let v = chamfer_indexed(&window.targets[j], &predicted)?;
                term.cd = v.value;
                add_scaled(&mut g, &v.grad, config.alpha);
            }
            if config.beta > 0.0 {
                let v = emd(&window.frames[j], &predicted, &config.emd)?;
                term.emd = v.value;
                add_scaled(&mut g, &v.grad, config.beta);
            }
            if config.gamma > 0.0 {
                let graph = window.graphs[i]
                    .as_ref()
                    .ok_or_else(|| Error::InvalidConfig("window prepared without smoothness".into()))?;
                let v = smoothness_with_graph(graph, m)?;
                term.smooth = v.value;
                add_scaled(&mut g, &v.grad, config.gamma);
            }
            breakdown.cd += term.cd;
            breakdown.emd += term.emd;
            breakdown.smooth += term.smooth;
            breakdown.total +=
                config.alpha * term.cd + config.beta * term.emd + config.gamma * term.smooth;
            breakdown.pairs.push(term);
            motion_grads.push(g);
        }

        if with_grads {
            let frame_grads = field.backward_frame(tape, &motion_grads)?;
            match grads.as_mut() {
                None => grads = Some(frame_grads),
                Some(acc) => {
                    for (a, g) in acc.iter_mut().zip(&frame_grads) {
                        a.accumulate(g);
                    }
                }
            }
        }
    }
    if !breakdown.total.is_finite() {
        return Err(Error::NonFinite("total loss".into()));
    }
    Ok((breakdown, grads))
}

fn add_scaled(acc: &mut [Point3], g: &[Point3], w: f64) {
    for (a, b) in acc.iter_mut().zip(g) {
        for k in 0..3 {
            a[k] += w * b[k];
        }
    }
}
