//! Field-driven applications: shape morphing and label propagation.

use super::labels::{transfer_labels, LabeledPointCloud};
use crate::cloud::{InputWindow, PointCloud};
use crate::field::{select_reference, NeuralField};
use crate::optimize::{equispaced_queries, fit, interpolate, FitConfig, FitReport};
use crate::{Error, Result};

/// Fits a two-frame window (`source` at 0, `target` at 1) and returns the
/// field with `steps` clouds at `1/(steps+1), ..., steps/(steps+1)`.
pub fn morph_sequence(
    source: &PointCloud,
    target: &PointCloud,
    steps: usize,
    config: &FitConfig,
) -> Result<(NeuralField, FitReport, Vec<PointCloud>)> {
    if steps == 0 {
        return Err(Error::InvalidInput("morphing needs >= 1 step".into()));
    }
    if source.len() != target.len() {
        return Err(Error::InvalidInput(format!(
            "source has {} points, target {}; resample to equal counts first",
            source.len(),
            target.len()
        )));
    }
    let window = InputWindow::new(vec![
        source.clone().with_time(0.0),
        target.clone().with_time(1.0),
    ])?;
    let (field, report) = fit(&window, config)?;
    let clouds = interpolate(&field, &window, &equispaced_queries(0.0, 1.0, steps))?;
    Ok((field, report, clouds))
}

/// Labels `unlabeled` (at its own timestamp) by fitting the labeled
/// keyframes, predicting the frame from the nearest keyframe so that each
/// predicted point keeps its keyframe label, then voting over the `k`
/// nearest predicted points.
pub fn autolabel(
    keyframes: &[LabeledPointCloud],
    unlabeled: &PointCloud,
    k: usize,
    config: &FitConfig,
) -> Result<(LabeledPointCloud, FitReport)> {
    let window = InputWindow::new(keyframes.iter().map(|l| l.cloud.clone()).collect())?;
    let (field, report) = fit(&window, config)?;
    let reference = select_reference(&window, unlabeled.time);
    let predicted = interpolate(&field, &window, &[unlabeled.time])?.remove(0);
    let carried = LabeledPointCloud::new(predicted, keyframes[reference].labels.clone())?;
    Ok((transfer_labels(&carried, unlabeled, k)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldConfig;
    use crate::losses::LossConfig;

    fn quick() -> FitConfig {
        FitConfig {
            max_iters: 3,
            field: FieldConfig {
                depth: 2,
                width: 8,
                ..FieldConfig::default()
            },
            loss: LossConfig::with_weights(1.0, 0.0, 0.0),
            ..FitConfig::default()
        }
    }

    #[test]
    fn morph_step_times() {
        let c = PointCloud::new((0..12).map(|i| [i as f64, 0.0, (i % 3) as f64]).collect(), 0.0);
        let (_, _, out) = morph_sequence(&c, &c, 1, &quick()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].time, 0.5);
        let (_, _, out) = morph_sequence(&c, &c, 3, &quick()).unwrap();
        assert_eq!(out.iter().map(|c| c.time).collect::<Vec<_>>(), vec![0.25, 0.5, 0.75]);
        assert!(morph_sequence(&c, &c, 0, &quick()).is_err());
    }

    #[test]
    fn autolabel_on_identical_geometry() {
        let c = PointCloud::new((0..20).map(|i| [i as f64, 0.0, 0.0]).collect(), 0.0);
        let labels: Vec<i32> = (0..20).map(|i| i / 10).collect();
        let key = |t: f64| LabeledPointCloud::new(c.clone().with_time(t), labels.clone()).unwrap();
        let cfg = FitConfig {
            field: FieldConfig {
                final_layer_scale: 0.0,
                ..quick().field
            },
            max_iters: 1,
            lr: 1e-12,
            ..quick()
        };
        let (out, _) = autolabel(&[key(0.0), key(2.0)], &c.clone().with_time(1.0), 1, &cfg).unwrap();
        assert_eq!(out.labels, labels);
    }
}
