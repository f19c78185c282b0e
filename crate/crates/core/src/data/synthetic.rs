//! Synthetic rigid-body scenes with closed-form ground truth at any time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cloud::{Point3, PointCloud};
use crate::{Error, Result};

/// Surface sampled uniformly, centered on the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Shape {
    Box { size: [f64; 3] },
    Sphere { radius: f64 },
    /// Axis along Z.
    Cylinder { radius: f64, height: f64 },
}

impl Shape {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Shape::Box { size } => size.iter().all(|&s| s >= 0.0) && size.iter().any(|&s| s > 0.0),
            Shape::Sphere { radius } => radius > 0.0,
            Shape::Cylinder { radius, height } => radius > 0.0 && height >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("degenerate shape {self:?}")))
        }
    }

    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Vec<Point3> {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }

    fn sample_one(&self, rng: &mut impl Rng) -> Point3 {
        match *self {
            Shape::Box { size: [a, b, c] } => {
                let areas = [b * c, a * c, a * b];
                let total: f64 = areas.iter().sum();
                let mut pick = rng.random::<f64>() * total;
                let mut axis = 2;
                for (i, &ar) in areas.iter().enumerate() {
                    if pick < ar {
                        axis = i;
                        break;
                    }
                    pick -= ar;
                }
                let size = [a, b, c];
                let mut p = [0.0; 3];
                for k in 0..3 {
                    p[k] = (rng.random::<f64>() - 0.5) * size[k];
                }
                p[axis] = if rng.random::<bool>() { 0.5 } else { -0.5 } * size[axis];
                p
            }
            Shape::Sphere { radius } => loop {
                let v: [f64; 3] = [
                    StandardNormal.sample(rng),
                    StandardNormal.sample(rng),
                    StandardNormal.sample(rng),
                ];
                let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                if n > 1e-12 {
                    break [radius * v[0] / n, radius * v[1] / n, radius * v[2] / n];
                }
            },
            Shape::Cylinder { radius, height } => {
                let side = 2.0 * radius * height;
                let caps = 2.0 * radius * radius;
                let theta = rng.random::<f64>() * std::f64::consts::TAU;
                if rng.random::<f64>() * (side + caps) < side {
                    let z = (rng.random::<f64>() - 0.5) * height;
                    [radius * theta.cos(), radius * theta.sin(), z]
                } else {
                    let r = radius * rng.random::<f64>().sqrt();
                    let z = if rng.random::<bool>() { 0.5 } else { -0.5 } * height;
                    [r * theta.cos(), r * theta.sin(), z]
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Trajectory {
    Static,
    /// Displacement per axis `c0 + c1 t + c2 t^2 + c3 t^3`.
    Polynomial { coefficients: [[f64; 4]; 3] },
    /// Rotation about the vertical axis through `center` at
    /// `angular_velocity` radians per time unit.
    Arc { center: Point3, angular_velocity: f64 },
}

impl Trajectory {
    pub fn apply(&self, p: &Point3, t: f64) -> Point3 {
        match *self {
            Trajectory::Static => *p,
            Trajectory::Polynomial { coefficients } => {
                let mut out = *p;
                for (k, c) in coefficients.iter().enumerate() {
                    out[k] += c[0] + t * (c[1] + t * (c[2] + t * c[3]));
                }
                out
            }
            Trajectory::Arc {
                center,
                angular_velocity,
            } => {
                let (s, c) = (angular_velocity * t).sin_cos();
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                [center[0] + c * dx - s * dy, center[1] + s * dx + c * dy, p[2]]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodySpec {
    pub shape: Shape,
    /// Position of the shape's center at `t = 0` before the trajectory.
    pub offset: Point3,
    pub trajectory: Trajectory,
    pub points: usize,
    pub label: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub bodies: Vec<BodySpec>,
    pub frame_times: Vec<f64>,
    /// Standard deviation of isotropic Gaussian noise added per frame.
    #[serde(default)]
    pub noise_sigma: f64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.bodies.is_empty() {
            return Err(Error::InvalidConfig("scene has no bodies".into()));
        }
        for b in &self.bodies {
            b.shape.validate()?;
            if b.points == 0 {
                return Err(Error::InvalidConfig("every body needs >= 1 point".into()));
            }
        }
        if self.frame_times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidConfig("frame times must be finite".into()));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::InvalidConfig("noise_sigma must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn num_points(&self) -> usize {
        self.bodies.iter().map(|b| b.points).sum()
    }
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub spec: SceneSpec,
    /// Sampled points at `t = 0` before trajectories (offset included).
    base: Vec<Point3>,
    body_of: Vec<usize>,
    pub labels: Vec<i32>,
    pub frames: Vec<PointCloud>,
}

impl Scene {
    /// Noiseless positions at time `t`, in the same point order as the frames.
    pub fn ground_truth(&self, t: f64) -> PointCloud {
        let points = self
            .base
            .iter()
            .zip(&self.body_of)
            .map(|(p, &b)| self.spec.bodies[b].trajectory.apply(p, t))
            .collect();
        PointCloud::new(points, t)
    }

    /// Largest bounding-box edge over all frames.
    pub fn extent(&self) -> f64 {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for f in &self.frames {
            if let Some((a, b)) = f.bounds() {
                for k in 0..3 {
                    lo[k] = lo[k].min(a[k]);
                    hi[k] = hi[k].max(b[k]);
                }
            }
        }
        (0..3).map(|k| hi[k] - lo[k]).fold(0.0, f64::max)
    }
}

pub fn generate_scene(spec: &SceneSpec, seed: u64) -> Result<Scene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut base = Vec::with_capacity(spec.num_points());
    let mut body_of = Vec::with_capacity(spec.num_points());
    let mut labels = Vec::with_capacity(spec.num_points());
    for (i, b) in spec.bodies.iter().enumerate() {
        for p in b.shape.sample(b.points, &mut rng) {
            base.push([p[0] + b.offset[0], p[1] + b.offset[1], p[2] + b.offset[2]]);
            body_of.push(i);
            labels.push(b.label);
        }
    }
    let mut scene = Scene {
        spec: spec.clone(),
        base,
        body_of,
        labels,
        frames: Vec::new(),
    };
    let noise = Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    scene.frames = spec
        .frame_times
        .iter()
        .map(|&t| {
            let mut c = scene.ground_truth(t);
            if spec.noise_sigma > 0.0 {
                for p in &mut c.points {
                    for v in p.iter_mut() {
                        *v += noise.sample(&mut rng);
                    }
                }
            }
            c
        })
        .collect();
    Ok(scene)
}

/// Integer frame times `0, 1, ..., n - 1`.
pub fn integer_times(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64).collect()
}

/// Surface of the unit cube centered on the origin.
pub fn cube_surface(n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PointCloud::new(Shape::Box { size: [1.0; 3] }.sample(n, &mut rng), 0.0)
}

/// Sphere of radius 0.5 centered on the origin.
pub fn sphere_surface(n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PointCloud::new(Shape::Sphere { radius: 0.5 }.sample(n, &mut rng), 0.0)
}

/// Named scene layouts used by the generator and the test suites.
pub fn preset(name: &str, points: usize, frames: usize) -> Result<SceneSpec> {
    let unit_box = Shape::Box { size: [1.0; 3] };
    let body = |shape, offset, trajectory, points, label| BodySpec {
        shape,
        offset,
        trajectory,
        points,
        label,
    };
    let linear = |v: [f64; 3]| Trajectory::Polynomial {
        coefficients: [[0.0, v[0], 0.0, 0.0], [0.0, v[1], 0.0, 0.0], [0.0, v[2], 0.0, 0.0]],
    };
    let bodies = match name {
        "static-box" => vec![body(unit_box, [0.0; 3], Trajectory::Static, points, 0)],
        "rigid-box" => vec![body(unit_box, [0.0; 3], linear([0.1, 0.05, 0.0]), points, 0)],
        // a box orbiting a vertical axis at 10 degrees per frame
        "rotating" => vec![body(
            Shape::Box { size: [0.6, 0.3, 0.3] },
            [2.0, 0.0, 0.0],
            Trajectory::Arc {
                center: [0.0; 3],
                angular_velocity: 10f64.to_radians(),
            },
            points,
            0,
        )],
        "accelerating" => vec![body(
            unit_box,
            [0.0; 3],
            Trajectory::Polynomial {
                coefficients: [[0.0, 0.05, 0.04, 0.0], [0.0, 0.0, 0.02, 0.0], [0.0; 4]],
            },
            points,
            0,
        )],
        "constant-velocity" => vec![body(unit_box, [0.0; 3], linear([0.15, 0.0, 0.05]), points, 0)],
        "two-body" => {
            let a = points / 2;
            vec![
                body(unit_box, [-1.0, 0.0, 0.0], linear([0.1, 0.0, 0.0]), a, 1),
                body(
                    Shape::Sphere { radius: 0.5 },
                    [1.0, 0.0, 0.0],
                    linear([-0.05, 0.1, 0.0]),
                    points - a,
                    2,
                ),
            ]
        }
        other => return Err(Error::InvalidInput(format!("unknown scene preset {other:?}"))),
    };
    Ok(SceneSpec {
        bodies,
        frame_times: integer_times(frames),
        noise_sigma: 0.0,
    })
}

pub const PRESETS: &[&str] = &[
    "static-box",
    "rigid-box",
    "rotating",
    "accelerating",
    "constant-velocity",
    "two-body",
];
