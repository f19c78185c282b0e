//! `select`: hard-sample windows by ego-motion magnitude from pose files.

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args as ClapArgs;
use serde::{Deserialize, Serialize};

use neuralpci::data::{load_poses, select_hard_samples, window_candidates, HardSampleCandidate, SelectionThresholds, TranslationMetric};

use crate::run::{absolute, OutDir};
use crate::settings::{Common, CommonArgs, ConfigFile};

#[derive(Debug, Clone, ClapArgs)]
pub struct Args {
    #[command(flatten)]
    pub common: CommonArgs,
    /// One pose file per scene; the scene name is the file stem.
    #[arg(long, num_args = 1..)]
    pub poses: Vec<PathBuf>,
    #[arg(long)]
    pub frames_per_window: Option<usize>,
    /// Frame spacing of a window's inputs.
    #[arg(long)]
    pub interval: Option<usize>,
    /// Spacing of window starts.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Windows kept per scene before thresholding.
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Yaw threshold in degrees.
    #[arg(long)]
    pub yaw_threshold: Option<f64>,
    /// Translation threshold.
    #[arg(long)]
    pub translation_threshold: Option<f64>,
    /// Translation magnitude: rms (over axes) or norm.
    #[arg(long)]
    pub metric: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub common: Common,
    pub poses: Vec<PathBuf>,
    pub frames_per_window: usize,
    pub interval: usize,
    pub stride: usize,
    pub top_k: usize,
    pub thresholds: SelectionThresholds,
    pub metric: TranslationMetric,
}

impl Settings {
    pub fn resolve(a: &Args, file: &ConfigFile) -> Result<Self> {
        let d = SelectionThresholds::default();
        let metric = match file.pick("metric", a.metric.clone(), "rms".to_string())?.as_str() {
            "rms" => TranslationMetric::Rms,
            "norm" => TranslationMetric::Norm,
            other => bail!("unknown translation metric `{other}`"),
        };
        let interval = file.pick("interval", a.interval, 1)?;
        let s = Self {
            common: Common::resolve(&a.common, file)?,
            poses: absolute(&a.poses)?,
            frames_per_window: file.pick("frames-per-window", a.frames_per_window, 4)?,
            interval,
            stride: file.pick("stride", a.stride, interval)?,
            top_k: file.pick("top-k", a.top_k, 10)?,
            thresholds: SelectionThresholds {
                yaw_deg: file.pick("yaw-threshold", a.yaw_threshold, d.yaw_deg)?,
                translation: file.pick("translation-threshold", a.translation_threshold, d.translation)?,
            },
            metric,
        };
        if s.poses.is_empty() {
            bail!("select needs >= 1 --poses file");
        }
        if !(s.thresholds.yaw_deg > 0.0 && s.thresholds.translation > 0.0) {
            bail!("thresholds must be > 0");
        }
        Ok(s)
    }

    pub fn input_paths(&self) -> Vec<PathBuf> {
        self.poses.clone()
    }
}

fn table(rows: &[HardSampleCandidate], th: &SelectionThresholds) -> String {
    let mut s = String::from("scene,window_id,frames,yaw_deg,translation,score\n");
    for c in rows {
        let frames: Vec<String> = c.frames.iter().map(usize::to_string).collect();
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.scene,
            c.window_id,
            frames.join(" "),
            c.yaw_deg,
            c.translation,
            th.score(c)
        ));
    }
    s
}

pub fn run(s: &Settings, out: &OutDir) -> Result<Vec<String>> {
    let mut candidates = Vec::new();
    for p in &s.poses {
        let scene = p.file_stem().map_or_else(String::new, |x| x.to_string_lossy().into_owned());
        let poses = load_poses(p)?;
        candidates.extend(window_candidates(&scene, &poses, s.frames_per_window, s.interval, s.stride, s.metric)?);
    }
    let selected = select_hard_samples(&candidates, &s.thresholds, s.top_k);
    eprintln!("selected {} of {} windows", selected.len(), candidates.len());
    Ok(vec![
        out.text("candidates.csv", &table(&candidates, &s.thresholds))?,
        out.text("selected.csv", &table(&selected, &s.thresholds))?,
    ])
}
