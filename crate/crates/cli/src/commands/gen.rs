//! `gen`: synthetic scenes with closed-form ground truth.

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args as ClapArgs;
use serde::{Deserialize, Serialize};

use neuralpci::data::{generate_scene, save_labels, SceneSpec, PRESETS};

use super::eval::load_scene_spec;
use crate::run::{absolute, OutDir};
use crate::settings::{Common, CommonArgs, ConfigFile};

#[derive(Debug, Clone, ClapArgs)]
pub struct Args {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Scene spec file (JSON or TOML).
    #[arg(long, conflicts_with = "preset")]
    pub spec: Option<PathBuf>,
    /// Built-in scene: static-box, rigid-box, rotating, accelerating,
    /// constant-velocity or two-body.
    #[arg(long)]
    pub preset: Option<String>,
    /// Points of a preset scene.
    #[arg(long)]
    pub points: Option<usize>,
    /// Frames of a preset scene, at times 0, 1, ...
    #[arg(long)]
    pub frames: Option<usize>,
    /// Ground-truth frames written between consecutive frames.
    #[arg(long)]
    pub between: Option<usize>,
    /// Noise standard deviation (overrides the scene file).
    #[arg(long)]
    pub noise: Option<f64>,
    /// Noise standard deviation as a fraction of the noiseless scene extent.
    #[arg(long, conflicts_with = "noise")]
    pub noise_rel: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub common: Common,
    pub spec: SceneSpec,
    pub source: String,
    pub between: usize,
    pub noise_rel: Option<f64>,
}

impl Settings {
    pub fn resolve(a: &Args, file: &ConfigFile) -> Result<Self> {
        let points = file.pick("points", a.points, 1024)?;
        let frames = file.pick("frames", a.frames, 4)?;
        let preset: Option<String> = file.pick_opt("preset", a.preset.clone())?;
        let spec_path: Option<PathBuf> = file.pick_opt("spec", a.spec.clone())?;
        let source = match (spec_path, preset) {
            (Some(p), None) => absolute(&[p])?[0].to_string_lossy().into_owned(),
            (None, Some(p)) if PRESETS.contains(&p.as_str()) => p,
            (None, Some(p)) => bail!("unknown preset `{p}` (one of {})", PRESETS.join(", ")),
            (None, None) => bail!("gen needs --spec or --preset"),
            (Some(_), Some(_)) => bail!("--spec and --preset are exclusive"),
        };
        let mut spec = load_scene_spec(&source, points, frames)?;
        if let Some(sigma) = file.pick_opt("noise", a.noise)? {
            spec.noise_sigma = sigma;
        }
        let s = Self {
            common: Common::resolve(&a.common, file)?,
            spec,
            source,
            between: file.pick("between", a.between, 0)?,
            noise_rel: file.pick_opt("noise-rel", a.noise_rel)?,
        };
        s.spec.validate()?;
        if s.spec.frame_times.is_empty() {
            bail!("the scene has no frames");
        }
        Ok(s)
    }

    pub fn input_paths(&self) -> Vec<PathBuf> {
        if PRESETS.contains(&self.source.as_str()) {
            vec![]
        } else {
            vec![PathBuf::from(&self.source)]
        }
    }
}

#[derive(Debug, Serialize)]
struct Listing {
    frames: Vec<(String, f64)>,
    truth: Vec<(String, f64)>,
    labels: String,
    extent: f64,
    noise_sigma: f64,
    spec: SceneSpec,
}

pub fn run(s: &Settings, out: &OutDir) -> Result<Vec<String>> {
    let mut spec = s.spec.clone();
    if let Some(rel) = s.noise_rel {
        let clean = generate_scene(&SceneSpec { noise_sigma: 0.0, ..spec.clone() }, s.common.seed)?;
        spec.noise_sigma = rel * clean.extent();
    }
    let scene = generate_scene(&spec, s.common.seed)?;
    let mut names = Vec::new();
    let mut listing = Listing {
        frames: vec![],
        truth: vec![],
        labels: "labels.txt".into(),
        extent: scene.extent(),
        noise_sigma: spec.noise_sigma,
        spec: spec.clone(),
    };
    for (i, f) in scene.frames.iter().enumerate() {
        let name = out.cloud(&format!("frame_{i:03}"), f)?;
        listing.frames.push((name.clone(), f.time));
        names.push(name);
    }
    let times = &spec.frame_times;
    let mut truth_times = Vec::new();
    for (i, &t) in times.iter().enumerate() {
        truth_times.push(t);
        if let Some(&next) = times.get(i + 1) {
            for j in 1..=s.between {
                truth_times.push(t + (next - t) * j as f64 / (s.between + 1) as f64);
            }
        }
    }
    for (k, &t) in truth_times.iter().enumerate() {
        let name = out.cloud(&format!("truth_{k:04}"), &scene.ground_truth(t))?;
        listing.truth.push((name.clone(), t));
        names.push(name);
    }
    save_labels(&scene.labels, &out.path("labels.txt")?)?;
    names.push("labels.txt".into());
    names.push(out.json("scene.json", &listing)?);
    Ok(names)
}
