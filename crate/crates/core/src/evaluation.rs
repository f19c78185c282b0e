//! Prediction metrics and the input-interval sweep.

use serde::{Deserialize, Serialize};

use crate::baselines::{explicit_interpolate, CorrespondenceSet, ExplicitOrder};
use crate::cloud::{InputWindow, PointCloud};
use crate::data::Scene;
use crate::losses::{chamfer_distance, emd_distance, EmdConfig};
use crate::optimize::{fit, interpolate, middle_pair, FitConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub cd: f64,
    /// `None` when the clouds differ in size.
    pub emd: Option<f64>,
    pub n_points: usize,
}

pub fn evaluate_pair(prediction: &PointCloud, truth: &PointCloud, emd: &EmdConfig) -> Result<PairMetrics> {
    let cd = chamfer_distance(&prediction.points, &truth.points)?;
    let emd = if prediction.len() == truth.len() {
        Some(emd_distance(&prediction.points, &truth.points, emd)?)
    } else {
        None
    };
    Ok(PairMetrics {
        cd,
        emd,
        n_points: prediction.len(),
    })
}

/// One window and the true clouds at times inside its middle gap.
#[derive(Debug, Clone)]
pub struct SweepCase {
    pub interval: f64,
    pub window: InputWindow,
    pub targets: Vec<PointCloud>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub interval: f64,
    pub field_cd: f64,
    pub field_emd: f64,
    pub linear_cd: f64,
    pub linear_emd: f64,
    pub targets: usize,
}

/// Noiseless 4-frame windows of `scene` with inputs `interval` time units
/// apart starting at `t0`, and truth at `n` equal steps inside the middle gap.
pub fn synthetic_sweep_cases(scene: &Scene, intervals: &[f64], t0: f64, n: usize) -> Result<Vec<SweepCase>> {
    intervals
        .iter()
        .map(|&iv| {
            if !(iv > 0.0) {
                return Err(Error::InvalidInput("intervals must be > 0".into()));
            }
            let frames = (0..4).map(|k| scene.ground_truth(t0 + k as f64 * iv)).collect();
            let targets = (1..=n)
                .map(|j| scene.ground_truth(t0 + iv * (1.0 + j as f64 / (n + 1) as f64)))
                .collect();
            Ok(SweepCase {
                interval: iv,
                window: InputWindow::new(frames)?,
                targets,
            })
        })
        .collect()
}

/// Fits the case's window and scores the field and the linear explicit
/// model (correspondences from the same field) against every target.
pub fn evaluate_case(case: &SweepCase, config: &FitConfig, emd: &EmdConfig) -> Result<SweepRow> {
    if case.targets.is_empty() {
        return Err(Error::InvalidInput("sweep case has no targets".into()));
    }
    let (field, _) = fit(&case.window, config)?;
    let times: Vec<f64> = case.targets.iter().map(|c| c.time).collect();
    let predicted = interpolate(&field, &case.window, &times)?;
    let corr = CorrespondenceSet::from_field(&field, &case.window)?;
    let (a, b) = middle_pair(&case.window);
    let (ta, tb) = (case.window.frames()[a].time, case.window.frames()[b].time);

    let mut row = SweepRow {
        interval: case.interval,
        field_cd: 0.0,
        field_emd: 0.0,
        linear_cd: 0.0,
        linear_emd: 0.0,
        targets: case.targets.len(),
    };
    for (truth, pred) in case.targets.iter().zip(&predicted) {
        let lin = explicit_interpolate(&corr, (truth.time - ta) / (tb - ta), ExplicitOrder::Linear)?;
        let f = evaluate_pair(pred, truth, emd)?;
        let l = evaluate_pair(&lin, truth, emd)?;
        row.field_cd += f.cd;
        row.field_emd += f.emd.unwrap_or(f64::NAN);
        row.linear_cd += l.cd;
        row.linear_emd += l.emd.unwrap_or(f64::NAN);
    }
    let n = case.targets.len() as f64;
    row.field_cd /= n;
    row.field_emd /= n;
    row.linear_cd /= n;
    row.linear_emd /= n;
    Ok(row)
}
