//! Rigid poses, per-window ego-motion magnitudes, and hard-sample selection.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RigidPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidPose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if rotation.iter().chain(translation.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("pose".into()));
        }
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if ortho > 1e-9 || (rotation.determinant() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput("rotation is not orthonormal with det +1".into()));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Rotation by `yaw` radians about Z, then translation.
    pub fn from_yaw_translation(yaw: f64, t: [f64; 3]) -> Self {
        let (s, c) = yaw.sin_cos();
        Self {
            rotation: Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
            translation: Vector3::from(t),
        }
    }

    pub fn from_row_major_3x4(v: &[f64]) -> Result<Self> {
        if v.len() != 12 {
            return Err(Error::InvalidInput(format!("pose needs 12 values, got {}", v.len())));
        }
        let r = Matrix3::new(v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10]);
        Self::new(r, Vector3::new(v[3], v[7], v[11]))
    }

    pub fn to_row_major_3x4(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)], t[0],
            r[(1, 0)], r[(1, 1)], r[(1, 2)], t[1],
            r[(2, 0)], r[(2, 1)], r[(2, 2)], t[2],
        ]
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            translation: -(rt * self.translation),
            rotation: rt,
        }
    }

    /// `self * other`: apply `other` first.
    pub fn compose(&self, other: &RigidPose) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Pose of `to` expressed in the frame of `from`.
    pub fn relative(from: &RigidPose, to: &RigidPose) -> Self {
        from.inverse().compose(to)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TranslationMetric {
    /// `sqrt((tx^2 + ty^2 + tz^2) / 3)`.
    #[default]
    Rms,
    /// Euclidean length.
    Norm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionMagnitude {
    pub yaw_deg: f64,
    pub translation_rms: f64,
    pub translation_norm: f64,
    /// Pitch at +-90 degrees; yaw comes from the degenerate decomposition.
    pub gimbal_degenerate: bool,
}

impl MotionMagnitude {
    pub fn translation(&self, metric: TranslationMetric) -> f64 {
        match metric {
            TranslationMetric::Rms => self.translation_rms,
            TranslationMetric::Norm => self.translation_norm,
        }
    }
}

/// Absolute yaw (Z-Y-X Euler) in degrees and translation size.
pub fn motion_magnitude(pose: &RigidPose) -> MotionMagnitude {
    let r = &pose.rotation;
    let sin_pitch = -r[(2, 0)];
    let degenerate = 1.0 - sin_pitch.abs() < 1e-9;
    let yaw = if degenerate {
        // roll taken as zero
        (-r[(0, 1)]).atan2(r[(1, 1)])
    } else {
        r[(1, 0)].atan2(r[(0, 0)])
    };
    let t = &pose.translation;
    MotionMagnitude {
        yaw_deg: yaw.to_degrees().abs(),
        translation_rms: (t.norm_squared() / 3.0).sqrt(),
        translation_norm: t.norm(),
        gimbal_degenerate: degenerate,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardSampleCandidate {
    pub scene: String,
    pub window_id: usize,
    /// Frame indices of the window's inputs.
    pub frames: Vec<usize>,
    pub yaw_deg: f64,
    pub translation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionThresholds {
    pub yaw_deg: f64,
    pub translation: f64,
}

impl Default for SelectionThresholds {
    fn default() -> Self {
        Self {
            yaw_deg: 5.0,
            translation: 2.5,
        }
    }
}

impl SelectionThresholds {
    /// Larger of the two magnitudes, each in units of its threshold.
    pub fn score(&self, c: &HardSampleCandidate) -> f64 {
        (c.yaw_deg / self.yaw_deg).max(c.translation / self.translation)
    }
}

/// Candidate windows of one pose sequence: inputs `s, s+interval, ...`,
/// magnitudes are the largest over consecutive input pairs.
pub fn window_candidates(
    scene: &str,
    poses: &[RigidPose],
    frames_per_window: usize,
    interval: usize,
    stride: usize,
    metric: TranslationMetric,
) -> Result<Vec<HardSampleCandidate>> {
    if frames_per_window < 2 || interval == 0 || stride == 0 {
        return Err(Error::InvalidInput("window needs >= 2 frames, interval and stride >= 1".into()));
    }
    let span = (frames_per_window - 1) * interval;
    let mut out = Vec::new();
    let mut start = 0;
    while start + span < poses.len() {
        let frames: Vec<usize> = (0..frames_per_window).map(|k| start + k * interval).collect();
        let (mut yaw, mut trans) = (0.0f64, 0.0f64);
        for w in frames.windows(2) {
            let m = motion_magnitude(&RigidPose::relative(&poses[w[0]], &poses[w[1]]));
            yaw = yaw.max(m.yaw_deg);
            trans = trans.max(m.translation(metric));
        }
        out.push(HardSampleCandidate {
            scene: scene.to_string(),
            window_id: out.len(),
            frames,
            yaw_deg: yaw,
            translation: trans,
        });
        start += stride;
    }
    Ok(out)
}

/// Per scene, ranks candidates by [`SelectionThresholds::score`] and keeps
/// the top `top_k`, then keeps those with yaw or translation at or above
/// its threshold. Output is grouped by scene in first-appearance order,
/// best first; score ties go to the lower window id.
pub fn select_hard_samples(
    candidates: &[HardSampleCandidate],
    thresholds: &SelectionThresholds,
    top_k: usize,
) -> Vec<HardSampleCandidate> {
    let mut scenes: Vec<&str> = Vec::new();
    for c in candidates {
        if !scenes.contains(&c.scene.as_str()) {
            scenes.push(&c.scene);
        }
    }
    let mut out = Vec::new();
    for scene in scenes {
        let mut group: Vec<&HardSampleCandidate> =
            candidates.iter().filter(|c| c.scene == scene).collect();
        group.sort_by(|a, b| {
            thresholds
                .score(b)
                .total_cmp(&thresholds.score(a))
                .then(a.window_id.cmp(&b.window_id))
        });
        out.extend(
            group
                .into_iter()
                .take(top_k)
                .filter(|c| c.yaw_deg >= thresholds.yaw_deg || c.translation >= thresholds.translation)
                .cloned(),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_yaw() {
        let m = motion_magnitude(&RigidPose::identity());
        assert_eq!((m.yaw_deg, m.translation_rms), (0.0, 0.0));
        let m = motion_magnitude(&RigidPose::from_yaw_translation(10f64.to_radians(), [0.0; 3]));
        assert!((m.yaw_deg - 10.0).abs() < 1e-12);
        let m = motion_magnitude(&RigidPose::from_yaw_translation(0.0, [3.0, 0.0, 0.0]));
        assert!((m.translation_rms - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(m.translation_norm, 3.0);
    }

    #[test]
    fn gimbal_lock_is_flagged() {
        let r = Matrix3::new(0.0, 0.0, 1.0, 0.0, 1.0, 0.0, -1.0, 0.0, 0.0);
        let m = motion_magnitude(&RigidPose::new(r, Vector3::zeros()).unwrap());
        assert!(m.gimbal_degenerate);
        assert!(m.yaw_deg.is_finite());
    }

    #[test]
    fn rejects_non_rotation() {
        let r = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(RigidPose::new(r, Vector3::zeros()).is_err());
        assert!(RigidPose::new(Matrix3::identity() * 2.0, Vector3::zeros()).is_err());
    }

    #[test]
    fn inverse_consistency() {
        for yaw in [-2.0, -0.4, 0.1, 1.3, 3.0] {
            let p = RigidPose::from_yaw_translation(yaw, [1.5, -0.3, 2.0]);
            let a = motion_magnitude(&p);
            let b = motion_magnitude(&p.inverse());
            assert!((a.yaw_deg - b.yaw_deg).abs() < 1e-9);
            assert!((a.translation_rms - b.translation_rms).abs() < 1e-9);
        }
    }

    fn cand(scene: &str, id: usize, yaw: f64, t: f64) -> HardSampleCandidate {
        HardSampleCandidate {
            scene: scene.into(),
            window_id: id,
            frames: vec![],
            yaw_deg: yaw,
            translation: t,
        }
    }

    #[test]
    fn selection_examples() {
        let th = SelectionThresholds::default();
        let static_scene: Vec<_> = (0..5).map(|i| cand("a", i, 0.0, 0.0)).collect();
        assert!(select_hard_samples(&static_scene, &th, 3).is_empty());
        let mut one = static_scene.clone();
        one[2].yaw_deg = 6.0;
        let sel = select_hard_samples(&one, &th, 3);
        assert_eq!(sel.len(), 1);
        assert_eq!(sel[0].window_id, 2);
    }

    #[test]
    fn windows_from_poses() {
        let poses: Vec<RigidPose> = (0..9)
            .map(|i| RigidPose::from_yaw_translation(0.0, [i as f64, 0.0, 0.0]))
            .collect();
        let c = window_candidates("s", &poses, 4, 2, 1, TranslationMetric::Norm).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c[0].frames, vec![0, 2, 4, 6]);
        assert!((c[0].translation - 2.0).abs() < 1e-12);
    }
}
