//! Point cloud, label, and pose files.
//!
//! * `xyz`: one `x y z` triple per line, whitespace separated. Blank lines
//!   and lines starting with `#` are skipped.
//! * `bin`: magic `NPCIPC01`, little-endian `u32` count, then `count * 3`
//!   little-endian `f32`.
//! * `ply`: ASCII PLY whose first element is `vertex` with float properties
//!   including `x`, `y` and `z`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::poses::RigidPose;
use crate::cloud::{Point3, PointCloud};
use crate::{Error, Result};

pub const BINARY_MAGIC: &[u8; 8] = b"NPCIPC01";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CloudFormat {
    Xyz,
    Bin,
    Ply,
}

impl CloudFormat {
    pub fn extension(self) -> &'static str {
        match self {
            CloudFormat::Xyz => "xyz",
            CloudFormat::Bin => "bin",
            CloudFormat::Ply => "ply",
        }
    }

    pub fn from_path(path: &Path) -> Option<Self> {
        path.extension()?.to_str()?.parse().ok()
    }
}

impl FromStr for CloudFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "xyz" | "txt" => Ok(CloudFormat::Xyz),
            "bin" => Ok(CloudFormat::Bin),
            "ply" => Ok(CloudFormat::Ply),
            other => Err(Error::InvalidInput(format!("unknown cloud format {other:?}"))),
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_numbers<T: FromStr>(path: &Path, line_no: usize, line: &str, expect: usize) -> Result<Vec<T>> {
    let vals: Vec<&str> = line.split_whitespace().collect();
    if vals.len() != expect {
        return Err(Error::parse(
            path,
            line_no,
            format!("expected {expect} values, found {}", vals.len()),
        ));
    }
    vals.iter()
        .map(|v| {
            v.parse()
                .map_err(|_| Error::parse(path, line_no, format!("bad number {v:?}")))
        })
        .collect()
}

fn point_from(path: &Path, line_no: usize, v: &[f64]) -> Result<Point3> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::parse(path, line_no, "non-finite coordinate"));
    }
    Ok([v[0], v[1], v[2]])
}

/// Loads a cloud; the returned timestamp is 0.
pub fn load_cloud(path: &Path, format: CloudFormat) -> Result<PointCloud> {
    let points = match format {
        CloudFormat::Xyz => load_xyz(path)?,
        CloudFormat::Bin => load_bin(path)?,
        CloudFormat::Ply => load_ply(path)?,
    };
    Ok(PointCloud::new(points, 0.0))
}

/// Loads with the format taken from the file extension.
pub fn load_cloud_auto(path: &Path) -> Result<PointCloud> {
    let format = CloudFormat::from_path(path).ok_or_else(|| {
        Error::InvalidInput(format!("cannot tell the cloud format of {}", path.display()))
    })?;
    load_cloud(path, format)
}

fn load_xyz(path: &Path) -> Result<Vec<Point3>> {
    let text = read_text(path)?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: Vec<f64> = parse_numbers(path, i + 1, line, 3)?;
        points.push(point_from(path, i + 1, &v)?);
    }
    Ok(points)
}

fn load_bin(path: &Path) -> Result<Vec<Point3>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 || &bytes[..8] != BINARY_MAGIC {
        return Err(Error::parse(path, 0, "missing NPCIPC01 header"));
    }
    let count = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let body = &bytes[12..];
    if body.len() != count * 12 {
        return Err(Error::parse(
            path,
            0,
            format!("header declares {count} points, payload holds {} bytes", body.len()),
        ));
    }
    let vals: Vec<f64> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    vals.chunks_exact(3)
        .enumerate()
        .map(|(i, c)| point_from(path, i + 1, c))
        .collect()
}

fn load_ply(path: &Path) -> Result<Vec<Point3>> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    let bad = |line: usize, msg: &str| Error::parse(path, line, msg);
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(bad(1, "missing 'ply' magic line")),
    }
    let mut count = None;
    let mut props: Vec<String> = Vec::new();
    let mut in_vertex = false;
    let mut vertex_seen = false;
    let mut ended = false;
    for (i, line) in lines.by_ref() {
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["format", fmt, ..] => {
                if *fmt != "ascii" {
                    return Err(bad(i + 1, "only ascii PLY is supported"));
                }
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, n] => {
                if *name == "vertex" {
                    if vertex_seen {
                        return Err(bad(i + 1, "duplicate vertex element"));
                    }
                    if count.is_some() {
                        return Err(bad(i + 1, "vertex must be the first element"));
                    }
                    count = Some(
                        n.parse::<usize>()
                            .map_err(|_| bad(i + 1, "bad vertex count"))?,
                    );
                    vertex_seen = true;
                    in_vertex = true;
                } else {
                    if !vertex_seen {
                        return Err(bad(i + 1, "vertex must be the first element"));
                    }
                    in_vertex = false;
                }
            }
            ["property", "list", ..] => {
                if in_vertex {
                    return Err(bad(i + 1, "list properties on vertices are not supported"));
                }
            }
            ["property", _, name] => {
                if in_vertex {
                    props.push(name.to_string());
                }
            }
            ["end_header"] => {
                ended = true;
                break;
            }
            _ => return Err(bad(i + 1, &format!("unexpected header line {line:?}"))),
        }
    }
    if !ended {
        return Err(bad(0, "missing end_header"));
    }
    let count = count.ok_or_else(|| bad(0, "no vertex element"))?;
    let col = |name: &str| {
        props
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| bad(0, &format!("vertex has no {name} property")))
    };
    let (cx, cy, cz) = (col("x")?, col("y")?, col("z")?);
    let mut points = Vec::with_capacity(count);
    let mut last_line = 0;
    for (i, line) in lines.by_ref() {
        last_line = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        if points.len() == count {
            if in_vertex {
                return Err(bad(i + 1, &format!("more vertex rows than the declared {count}")));
            }
            break;
        }
        let v: Vec<f64> = parse_numbers(path, i + 1, line, props.len())?;
        points.push(point_from(path, i + 1, &[v[cx], v[cy], v[cz]])?);
    }
    if points.len() != count {
        return Err(bad(
            last_line,
            &format!("declared {count} vertices, found {}", points.len()),
        ));
    }
    Ok(points)
}

pub fn save_cloud(cloud: &PointCloud, path: &Path, format: CloudFormat) -> Result<()> {
    let bytes = match format {
        CloudFormat::Xyz => {
            let mut s = String::with_capacity(cloud.len() * 32);
            for p in &cloud.points {
                writeln!(s, "{} {} {}", p[0] as f32, p[1] as f32, p[2] as f32).expect("string");
            }
            s.into_bytes()
        }
        CloudFormat::Bin => {
            let mut b = Vec::with_capacity(12 + cloud.len() * 12);
            b.extend_from_slice(BINARY_MAGIC);
            let n = u32::try_from(cloud.len())
                .map_err(|_| Error::InvalidInput("cloud too large for the binary format".into()))?;
            b.extend_from_slice(&n.to_le_bytes());
            for v in cloud.points.iter().flatten() {
                b.extend_from_slice(&(*v as f32).to_le_bytes());
            }
            b
        }
        CloudFormat::Ply => {
            let mut s = format!(
                "ply\nformat ascii 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
                cloud.len()
            );
            for p in &cloud.points {
                writeln!(s, "{} {} {}", p[0] as f32, p[1] as f32, p[2] as f32).expect("string");
            }
            s.into_bytes()
        }
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_labels(path: &Path) -> Result<Vec<i32>> {
    let text = read_text(path)?;
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        labels.push(parse_numbers::<i32>(path, i + 1, line, 1)?[0]);
    }
    Ok(labels)
}

pub fn save_labels(labels: &[i32], path: &Path) -> Result<()> {
    let mut s = String::with_capacity(labels.len() * 3);
    for l in labels {
        writeln!(s, "{l}").expect("string");
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// One pose per line: a row-major 3x4 `[R | t]`.
pub fn load_poses(path: &Path) -> Result<Vec<RigidPose>> {
    let text = read_text(path)?;
    let mut poses = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: Vec<f64> = parse_numbers(path, i + 1, line, 12)?;
        let pose = RigidPose::from_row_major_3x4(&v)
            .map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        poses.push(pose);
    }
    Ok(poses)
}

pub fn save_poses(poses: &[RigidPose], path: &Path) -> Result<()> {
    let mut s = String::new();
    for p in poses {
        let row: Vec<String> = p.to_row_major_3x4().iter().map(|v| format!("{v:e}")).collect();
        writeln!(s, "{}", row.join(" ")).expect("string");
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}
