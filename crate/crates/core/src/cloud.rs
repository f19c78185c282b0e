//! Point clouds, input windows and the window-level coordinate normalization.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Point3 = [f64; 3];

#[inline]
pub fn dist2(a: &Point3, b: &Point3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[inline]
pub fn sub(a: &Point3, b: &Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: &Point3, b: &Point3) -> Point3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: &Point3, s: f64) -> Point3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// One frame: `N` points sampled at a single timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub time: f64,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>, time: f64) -> Self {
        Self { points, time }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn is_finite(&self) -> bool {
        self.time.is_finite() && self.points.iter().flatten().all(|c| c.is_finite())
    }

    /// Axis-aligned bounds `(min, max)`; `None` for an empty cloud.
    pub fn bounds(&self) -> Option<(Point3, Point3)> {
        let first = *self.points.first()?;
        let mut lo = first;
        let mut hi = first;
        for p in &self.points[1..] {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        Some((lo, hi))
    }

    pub fn centroid(&self) -> Point3 {
        let n = self.points.len().max(1) as f64;
        let s = self
            .points
            .iter()
            .fold([0.0; 3], |acc, p| add(&acc, p));
        scale(&s, 1.0 / n)
    }
}

/// Ordered input frames with strictly increasing timestamps and a common point count.
#[derive(Debug, Clone, PartialEq)]
pub struct InputWindow {
    frames: Vec<PointCloud>,
}

impl InputWindow {
    pub fn new(frames: Vec<PointCloud>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a window needs at least 2 frames, got {}",
                frames.len()
            )));
        }
        let n = frames[0].len();
        if n == 0 {
            return Err(Error::InvalidInput("window frames must be nonempty".into()));
        }
        for (i, f) in frames.iter().enumerate() {
            if f.len() != n {
                return Err(Error::InvalidInput(format!(
                    "frame {i} has {} points, frame 0 has {n}",
                    f.len()
                )));
            }
            if !f.is_finite() {
                return Err(Error::NonFinite(format!("frame {i} contains non-finite values")));
            }
        }
        for w in frames.windows(2) {
            if w[1].time <= w[0].time {
                return Err(Error::InvalidInput(format!(
                    "timestamps must be strictly increasing ({} then {})",
                    w[0].time, w[1].time
                )));
            }
        }
        Ok(Self { frames })
    }

    /// Frames at integer times `0, 1, ..., M-1`.
    pub fn from_clouds(clouds: Vec<Vec<Point3>>) -> Result<Self> {
        Self::new(
            clouds
                .into_iter()
                .enumerate()
                .map(|(i, p)| PointCloud::new(p, i as f64))
                .collect(),
        )
    }

    pub fn frames(&self) -> &[PointCloud] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn points_per_frame(&self) -> usize {
        self.frames[0].len()
    }

    pub fn timestamps(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.time).collect()
    }

    pub fn time_axis(&self) -> TimeAxis {
        let first = self.frames[0].time;
        let last = self.frames[self.frames.len() - 1].time;
        TimeAxis {
            origin: first,
            step: (last - first) / (self.frames.len() - 1) as f64,
        }
    }

    /// Timestamps mapped onto the normalized axis (`0, 1, ..., M-1` for equal spacing).
    pub fn normalized_times(&self) -> Vec<f64> {
        let axis = self.time_axis();
        self.frames.iter().map(|f| axis.normalize(f.time)).collect()
    }
}

/// Affine map from raw timestamps to the normalized frame axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeAxis {
    pub origin: f64,
    pub step: f64,
}

impl TimeAxis {
    pub fn normalize(&self, t: f64) -> f64 {
        (t - self.origin) / self.step
    }

    pub fn denormalize(&self, t: f64) -> f64 {
        self.origin + t * self.step
    }
}

/// Isotropic shift/scale that maps a window's joint bounding box into `[-1, 1]^3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub center: Point3,
    pub scale: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Self::identity()
    }
}

impl Normalization {
    pub fn identity() -> Self {
        Self {
            center: [0.0; 3],
            scale: 1.0,
        }
    }

    pub fn fit(window: &InputWindow) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for f in window.frames() {
            if let Some((a, b)) = f.bounds() {
                for k in 0..3 {
                    lo[k] = lo[k].min(a[k]);
                    hi[k] = hi[k].max(b[k]);
                }
            }
        }
        let center = scale(&add(&lo, &hi), 0.5);
        let extent = (0..3).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
        let scale = if extent > 0.0 { 2.0 / extent } else { 1.0 };
        Self { center, scale }
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        scale(&sub(p, &self.center), self.scale)
    }

    pub fn invert(&self, p: &Point3) -> Point3 {
        add(&scale(p, 1.0 / self.scale), &self.center)
    }

    pub fn apply_cloud(&self, cloud: &PointCloud) -> PointCloud {
        PointCloud::new(cloud.points.iter().map(|p| self.apply(p)).collect(), cloud.time)
    }

    pub fn invert_cloud(&self, cloud: &PointCloud) -> PointCloud {
        PointCloud::new(cloud.points.iter().map(|p| self.invert(p)).collect(), cloud.time)
    }
}
