//! `eval`: CD/EMD of prediction files against ground truth, or the
//! input-interval sweep on a synthetic scene.

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Args as ClapArgs;
use serde::{Deserialize, Serialize};

use neuralpci::data::{generate_scene, preset, SceneSpec};
use neuralpci::evaluation::{evaluate_case, evaluate_pair, synthetic_sweep_cases};

use crate::run::{absolute, load_frames, par_map, write_metrics, MetricRow, OutDir};
use crate::settings::{Common, CommonArgs, ConfigFile, FitArgs, FitSettings};

#[derive(Debug, Clone, ClapArgs)]
pub struct Args {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Predicted clouds.
    #[arg(long, num_args = 1..)]
    pub pred: Vec<PathBuf>,
    /// Ground-truth clouds, paired with --pred in order.
    #[arg(long, num_args = 1..)]
    pub truth: Vec<PathBuf>,
    /// Run the interval sweep instead of scoring files.
    #[arg(long)]
    pub sweep: bool,
    /// Sweep scene: a preset name or a scene spec file.
    #[arg(long)]
    pub scene: Option<String>,
    /// Sweep input intervals.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub intervals: Option<Vec<f64>>,
    /// Scored times per sweep gap.
    #[arg(long)]
    pub targets: Option<usize>,
    /// Time of the first sweep input.
    #[arg(long)]
    pub t0: Option<f64>,
    /// Points of a preset sweep scene.
    #[arg(long)]
    pub scene_points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub scene: String,
    pub scene_points: usize,
    pub intervals: Vec<f64>,
    pub targets: usize,
    pub t0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub common: Common,
    pub fit: FitSettings,
    pub pred: Vec<PathBuf>,
    pub truth: Vec<PathBuf>,
    pub sweep: Option<SweepSettings>,
}

impl Settings {
    pub fn resolve(a: &Args, file: &ConfigFile) -> Result<Self> {
        let sweep = if a.sweep || file.pick("sweep", None, false)? {
            let mut scene: String = file.pick("scene", a.scene.clone(), "accelerating".to_string())?;
            if !neuralpci::data::PRESETS.contains(&scene.as_str()) {
                scene = absolute(&[PathBuf::from(&scene)])?[0].to_string_lossy().into_owned();
            }
            let s = SweepSettings {
                scene,
                scene_points: file.pick("scene-points", a.scene_points, 512)?,
                intervals: file.pick("intervals", a.intervals.clone(), vec![1.0, 2.0, 3.0])?,
                targets: file.pick("targets", a.targets, 1)?,
                t0: file.pick("t0", a.t0, 0.0)?,
            };
            if s.targets == 0 || s.intervals.is_empty() {
                bail!("the sweep needs >= 1 interval and >= 1 target");
            }
            Some(s)
        } else {
            None
        };
        let s = Self {
            common: Common::resolve(&a.common, file)?,
            fit: FitSettings::resolve(&a.fit, file)?,
            pred: absolute(&a.pred)?,
            truth: absolute(&a.truth)?,
            sweep,
        };
        if s.sweep.is_none() {
            if s.pred.is_empty() {
                bail!("eval needs --pred/--truth pairs or --sweep");
            }
            if s.pred.len() != s.truth.len() {
                bail!("{} --pred files but {} --truth files", s.pred.len(), s.truth.len());
            }
        }
        Ok(s)
    }

    pub fn input_paths(&self) -> Vec<PathBuf> {
        let mut v: Vec<PathBuf> = self.pred.iter().chain(&self.truth).cloned().collect();
        if let Some(sw) = &self.sweep {
            if !neuralpci::data::PRESETS.contains(&sw.scene.as_str()) {
                v.push(PathBuf::from(&sw.scene));
            }
        }
        v
    }
}

pub fn load_scene_spec(scene: &str, points: usize, frames: usize) -> Result<SceneSpec> {
    if neuralpci::data::PRESETS.contains(&scene) {
        return Ok(preset(scene, points, frames)?);
    }
    let text = fs::read_to_string(scene).with_context(|| format!("reading scene spec {scene}"))?;
    if scene.ends_with(".json") {
        serde_json::from_str(&text).with_context(|| format!("parsing {scene}"))
    } else {
        toml::from_str(&text).with_context(|| format!("parsing {scene}"))
    }
}

pub fn run(s: &Settings, out: &OutDir) -> Result<Vec<String>> {
    let emd = s.fit.emd_config()?;
    let Some(sw) = &s.sweep else {
        let pred = load_frames(&s.pred, None, None, 0)?;
        let truth = load_frames(&s.truth, None, None, 0)?;
        let mut rows = Vec::new();
        for (slot, (p, t)) in pred.iter().zip(&truth).enumerate() {
            let start = Instant::now();
            let m = evaluate_pair(p, t, &emd)?;
            rows.push(MetricRow {
                window_id: 0,
                frame_slot: slot,
                cd: m.cd,
                emd: m.emd,
                n_points: m.n_points,
                iters: 0,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            });
        }
        return write_metrics(out, &rows);
    };

    let scene = generate_scene(&load_scene_spec(&sw.scene, sw.scene_points, 1)?, s.common.seed)?;
    let cases = synthetic_sweep_cases(&scene, &sw.intervals, sw.t0, sw.targets)?;
    let cfg = s.fit.fit_config(s.common.seed)?;
    let rows = par_map(s.common.jobs, &cases, |i, case| {
        eprintln!("sweep interval {}", sw.intervals[i]);
        let start = Instant::now();
        let row = evaluate_case(case, &cfg, &emd)?;
        Ok((row, start.elapsed().as_secs_f64() * 1e3))
    })?;
    let mut csv = String::from("interval,field_cd,field_emd,linear_cd,linear_emd,targets,wall_ms\n");
    let mut txt = format!("{:>9} {:>12} {:>12} {:>12} {:>12}\n", "interval", "field CD", "field EMD", "linear CD", "linear EMD");
    for (r, ms) in &rows {
        csv.push_str(&format!(
            "{},{:e},{:e},{:e},{:e},{},{:.3}\n",
            r.interval, r.field_cd, r.field_emd, r.linear_cd, r.linear_emd, r.targets, ms
        ));
        txt.push_str(&format!(
            "{:>9} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}\n",
            r.interval, r.field_cd, r.field_emd, r.linear_cd, r.linear_emd
        ));
    }
    Ok(vec![out.text("sweep.csv", &csv)?, out.text("sweep.txt", &txt)?])
}
