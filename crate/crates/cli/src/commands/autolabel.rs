//! `autolabel`: carry keyframe labels to an unlabeled intermediate frame.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use clap::Args as ClapArgs;
use serde::{Deserialize, Serialize};

use neuralpci::data::{load_cloud_auto, load_labels, resample_indices, save_labels};
use neuralpci::geometry::{autolabel, label_accuracy, LabeledPointCloud, DEFAULT_LABEL_K};
use neuralpci::optimize::middle_queries;
use neuralpci::{InputWindow, PointCloud};

use crate::run::{absolute, load_frames, OutDir};
use crate::settings::{Common, CommonArgs, ConfigFile, FitArgs, FitSettings};

#[derive(Debug, Clone, ClapArgs)]
pub struct Args {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Labeled keyframes, in time order.
    #[arg(long, num_args = 2..)]
    pub keyframes: Vec<PathBuf>,
    /// Label files of the keyframes (default: each keyframe's `.labels` sidecar).
    #[arg(long, num_args = 1..)]
    pub labels: Vec<PathBuf>,
    /// Keyframe timestamps (default 0, 1, ...).
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    /// The unlabeled frame.
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Timestamp of the unlabeled frame (default: middle of the middle gap).
    #[arg(long)]
    pub target_time: Option<f64>,
    /// Voting neighbors.
    #[arg(long)]
    pub k: Option<usize>,
    /// True labels of the target, for an accuracy report.
    #[arg(long)]
    pub truth_labels: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub common: Common,
    pub fit: FitSettings,
    pub keyframes: Vec<PathBuf>,
    pub labels: Vec<PathBuf>,
    pub times: Option<Vec<f64>>,
    pub target: PathBuf,
    pub target_time: Option<f64>,
    pub k: usize,
    pub truth_labels: Option<PathBuf>,
}

pub fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("labels")
}

impl Settings {
    pub fn resolve(a: &Args, file: &ConfigFile) -> Result<Self> {
        let keyframes = absolute(&a.keyframes)?;
        if keyframes.len() < 2 {
            bail!("autolabel needs >= 2 --keyframes");
        }
        let labels = if a.labels.is_empty() {
            keyframes.iter().map(|k| sidecar(k)).collect::<Vec<_>>()
        } else {
            a.labels.clone()
        };
        if labels.len() != keyframes.len() {
            bail!("{} label files for {} keyframes", labels.len(), keyframes.len());
        }
        for l in &labels {
            if !l.is_file() {
                bail!("missing label file {}", l.display());
            }
        }
        let Some(target) = a.target.clone() else {
            bail!("autolabel needs --target");
        };
        let truth: Option<PathBuf> = file.pick_opt("truth-labels", a.truth_labels.clone())?;
        let s = Self {
            common: Common::resolve(&a.common, file)?,
            fit: FitSettings::resolve(&a.fit, file)?,
            keyframes,
            labels: absolute(&labels)?,
            times: file.pick_opt("times", a.times.clone())?,
            target: absolute(&[target])?.remove(0),
            target_time: file.pick_opt("target-time", a.target_time)?,
            k: file.pick("k", a.k, DEFAULT_LABEL_K)?,
            truth_labels: truth.map(|t| absolute(&[t])).transpose()?.map(|mut v| v.remove(0)),
        };
        if s.k == 0 {
            bail!("--k must be >= 1");
        }
        Ok(s)
    }

    pub fn input_paths(&self) -> Vec<PathBuf> {
        let mut v: Vec<PathBuf> = self.keyframes.iter().chain(&self.labels).cloned().collect();
        v.push(self.target.clone());
        v.extend(self.truth_labels.clone());
        v
    }
}

#[derive(Debug, Serialize)]
struct Summary {
    points: usize,
    target_time: f64,
    k: usize,
    label_counts: BTreeMap<i32, usize>,
    accuracy: Option<f64>,
}

pub fn run(s: &Settings, out: &OutDir) -> Result<Vec<String>> {
    let seed = s.common.seed;
    let frames = load_frames(&s.keyframes, s.times.as_deref(), None, seed)?;
    let mut keyframes = Vec::new();
    for (i, (cloud, lp)) in frames.into_iter().zip(&s.labels).enumerate() {
        let mut labeled = LabeledPointCloud::new(cloud, load_labels(lp)?)?;
        if let Some(n) = s.fit.points {
            let idx = resample_indices(labeled.cloud.len(), n, seed.wrapping_add(i as u64))?;
            labeled = LabeledPointCloud::new(
                PointCloud::new(idx.iter().map(|&j| labeled.cloud.points[j]).collect(), labeled.cloud.time),
                idx.iter().map(|&j| labeled.labels[j]).collect(),
            )?;
        }
        keyframes.push(labeled);
    }
    let window = InputWindow::new(keyframes.iter().map(|l| l.cloud.clone()).collect())?;
    let target_time = s.target_time.unwrap_or_else(|| middle_queries(&window, 1)[0]);
    let target = load_cloud_auto(&s.target)?.with_time(target_time);

    let (labeled, report) = autolabel(&keyframes, &target, s.k, &s.fit.fit_config(seed)?)?;
    let mut names = out.fit_report("", &report)?;
    save_labels(&labeled.labels, &out.path("target.labels")?)?;
    names.push("target.labels".into());

    let accuracy = match &s.truth_labels {
        Some(p) => {
            let truth = load_labels(p)?;
            if truth.len() != labeled.labels.len() {
                bail!("{} true labels for {} target points", truth.len(), labeled.labels.len());
            }
            let acc = label_accuracy(&labeled.labels, &truth);
            eprintln!("label accuracy {acc:.4}");
            Some(acc)
        }
        None => None,
    };
    let mut label_counts = BTreeMap::new();
    for l in &labeled.labels {
        *label_counts.entry(*l).or_insert(0) += 1;
    }
    names.push(out.json(
        "autolabel.json",
        &Summary {
            points: labeled.labels.len(),
            target_time,
            k: s.k,
            label_counts,
            accuracy,
        },
    )?);
    Ok(names)
}
