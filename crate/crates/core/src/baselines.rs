//! Explicit motion models over four corresponded frames, pair-frame linear
//! warping with scene flow, and fusion of several predictions.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::{sub, InputWindow, Point3, PointCloud};
use crate::field::NeuralField;
use crate::geometry::NeighborIndex;
use crate::{Error, Result};

/// Four clouds with point `i` tracking one physical point, at relative
/// times `-1, 0, 1, 2`. Slot 1 is the reference frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet {
    clouds: [Vec<Point3>; 4],
}

impl CorrespondenceSet {
    pub fn new(clouds: [Vec<Point3>; 4]) -> Result<Self> {
        let n = clouds[1].len();
        if n == 0 {
            return Err(Error::InvalidInput("empty correspondence set".into()));
        }
        if clouds.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidInput(format!(
                "correspondence clouds have counts {:?}",
                clouds.each_ref().map(Vec::len)
            )));
        }
        Ok(Self { clouds })
    }

    /// Pushes frame 1 of a 4-frame window through a fitted field to the
    /// other three input times.
    pub fn from_field(field: &NeuralField, window: &InputWindow) -> Result<Self> {
        if window.len() != 4 {
            return Err(Error::InvalidInput(format!(
                "explicit models need 4 frames, got {}",
                window.len()
            )));
        }
        let f = window.frames();
        let r = &f[1];
        let at = |k: usize| -> Result<Vec<Point3>> { Ok(field.field_forward(r, r.time, f[k].time)?.points) };
        Self::new([at(0)?, r.points.clone(), at(2)?, at(3)?])
    }

    pub fn clouds(&self) -> &[Vec<Point3>; 4] {
        &self.clouds
    }

    pub fn len(&self) -> usize {
        self.clouds[1].len()
    }

    pub fn is_empty(&self) -> bool {
        self.clouds[1].is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionDerivatives {
    pub v0: Vec<Point3>,
    pub v1: Vec<Point3>,
    pub v2: Vec<Point3>,
    pub a0: Vec<Point3>,
    pub a1: Vec<Point3>,
    pub b: Vec<Point3>,
}

fn diff(a: &[Point3], b: &[Point3]) -> Vec<Point3> {
    a.iter().zip(b).map(|(x, y)| sub(x, y)).collect()
}

pub fn motion_derivatives(corr: &CorrespondenceSet) -> MotionDerivatives {
    let [p0, p1, p2, p3] = &corr.clouds;
    let v0 = diff(p1, p0);
    let v1 = diff(p2, p1);
    let v2 = diff(p3, p2);
    let a0 = diff(&v1, &v0);
    let a1 = diff(&v2, &v1);
    let b = diff(&a1, &a0);
    MotionDerivatives {
        v0,
        v1,
        v2,
        a0,
        a1,
        b,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExplicitOrder {
    Linear,
    Quadratic,
    Cubic,
}

/// Position at relative time `t` in `(0, 1)` between slots 1 and 2.
///
/// The cubic model uses `(v0+v1+v2)/3`, `(a0+a1)/4` and `b/6` as its
/// coefficients. It is not exact on quadratic motion: on `x(t) = t^2` it
/// returns `t + t^2`.
pub fn explicit_interpolate(corr: &CorrespondenceSet, t: f64, order: ExplicitOrder) -> Result<PointCloud> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidInput(format!("t must be in (0, 1), got {t}")));
    }
    let d = motion_derivatives(corr);
    let p1 = &corr.clouds[1];
    let points = (0..p1.len())
        .map(|i| {
            let mut out = p1[i];
            for k in 0..3 {
                out[k] += match order {
                    ExplicitOrder::Linear => (d.v0[i][k] + d.v1[i][k]) / 2.0 * t,
                    ExplicitOrder::Quadratic => {
                        (d.v0[i][k] + d.v1[i][k]) / 2.0 * t + d.a0[i][k] / 2.0 * (t * t)
                    }
                    ExplicitOrder::Cubic => {
                        (d.v0[i][k] + d.v1[i][k] + d.v2[i][k]) / 3.0 * t
                            + (d.a0[i][k] + d.a1[i][k]) / 4.0 * (t * t)
                            + d.b[i][k] / 6.0 * (t * t * t)
                    }
                };
            }
            out
        })
        .collect();
    Ok(PointCloud::new(points, t))
}

/// `(p0 + t * flow_fwd, p1 + (1 - t) * flow_bwd)`.
pub fn scene_flow_warp(
    p0: &PointCloud,
    p1: &PointCloud,
    flow_fwd: &[Point3],
    flow_bwd: &[Point3],
    t: f64,
) -> Result<(PointCloud, PointCloud)> {
    if flow_fwd.len() != p0.len() || flow_bwd.len() != p1.len() {
        return Err(Error::InvalidInput(format!(
            "flow counts ({}, {}) do not match clouds ({}, {})",
            flow_fwd.len(),
            flow_bwd.len(),
            p0.len(),
            p1.len()
        )));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidInput(format!("t must be in [0, 1], got {t}")));
    }
    let warp = |c: &PointCloud, f: &[Point3], s: f64| -> Vec<Point3> {
        c.points
            .iter()
            .zip(f)
            .map(|(p, v)| [p[0] + s * v[0], p[1] + s * v[1], p[2] + s * v[2]])
            .collect()
    };
    let time = p0.time + t * (p1.time - p0.time);
    Ok((
        PointCloud::new(warp(p0, flow_fwd, t), time),
        PointCloud::new(warp(p1, flow_bwd, 1.0 - t), time),
    ))
}

/// Draws `n_out` points, picking the source cloud uniformly for every draw
/// and sampling without replacement inside each cloud (a cloud that runs
/// out drops from the draw; once all are exhausted they are reshuffled).
pub fn fuse_random(clouds: &[PointCloud], n_out: usize, seed: u64) -> Result<PointCloud> {
    if clouds.is_empty() || clouds.iter().any(PointCloud::is_empty) {
        return Err(Error::InvalidInput("fusion needs nonempty clouds".into()));
    }
    if n_out == 0 {
        return Err(Error::InvalidInput("n_out must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut orders: Vec<Vec<usize>> = Vec::new();
    let mut cursors: Vec<usize> = Vec::new();
    let mut out = Vec::with_capacity(n_out);
    while out.len() < n_out {
        let live: Vec<usize> = (0..orders.len()).filter(|&c| cursors[c] < orders[c].len()).collect();
        if live.is_empty() {
            orders = clouds
                .iter()
                .map(|c| {
                    let mut o: Vec<usize> = (0..c.len()).collect();
                    o.shuffle(&mut rng);
                    o
                })
                .collect();
            cursors = vec![0; clouds.len()];
            continue;
        }
        let c = live[rng.random_range(0..live.len())];
        out.push(clouds[c].points[orders[c][cursors[c]]]);
        cursors[c] += 1;
    }
    Ok(PointCloud::new(out, clouds[0].time))
}

/// Averages every point of the first cloud with its nearest neighbor in
/// each of the other clouds.
pub fn fuse_nn(clouds: &[PointCloud]) -> Result<PointCloud> {
    if clouds.len() < 2 {
        return Err(Error::InvalidInput("nearest-neighbor fusion needs >= 2 clouds".into()));
    }
    if clouds.iter().any(PointCloud::is_empty) {
        return Err(Error::InvalidInput("fusion of an empty cloud".into()));
    }
    let indices = clouds[1..]
        .iter()
        .map(|c| NeighborIndex::build(&c.points))
        .collect::<Result<Vec<_>>>()?;
    let m = clouds.len() as f64;
    let points = clouds[0]
        .points
        .iter()
        .map(|p| {
            let mut acc = *p;
            for idx in &indices {
                let q = idx.points()[idx.nearest(p).index];
                for k in 0..3 {
                    acc[k] += q[k];
                }
            }
            [acc[0] / m, acc[1] / m, acc[2] / m]
        })
        .collect();
    Ok(PointCloud::new(points, clouds[0].time))
}
