//! `baseline`: explicit motion models, scene-flow warping and fusion.

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args as ClapArgs;
use serde::{Deserialize, Serialize};

use neuralpci::baselines::{explicit_interpolate, fuse_nn, fuse_random, scene_flow_warp, CorrespondenceSet, ExplicitOrder};
use neuralpci::optimize::{fit, middle_pair};
use neuralpci::InputWindow;

use crate::run::{absolute, load_frames, OutDir};
use crate::settings::{Common, CommonArgs, ConfigFile, FitArgs, FitSettings};

#[derive(Debug, Clone, ClapArgs)]
pub struct Args {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    /// explicit, scene-flow, fuse-random or fuse-nn.
    #[arg(long)]
    pub mode: Option<String>,
    /// Explicit model order: linear, quadratic or cubic.
    #[arg(long)]
    pub order: Option<String>,
    /// Four frames (explicit), two frames (scene-flow) or the clouds to fuse.
    #[arg(long, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Input timestamps (default 0, 1, ...).
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    /// Frames to produce between the middle inputs.
    #[arg(long)]
    pub n: Option<usize>,
    /// Point correspondences for explicit models: index (row i matches row
    /// i) or field (tracked by a fitted field).
    #[arg(long)]
    pub correspondence: Option<String>,
    /// Per-point flow from the first to the second input (scene-flow).
    #[arg(long)]
    pub flow_forward: Option<PathBuf>,
    /// Per-point flow from the second to the first input (scene-flow).
    #[arg(long)]
    pub flow_backward: Option<PathBuf>,
    /// Output size of fuse-random (default: the first input's size).
    #[arg(long)]
    pub fuse_points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Explicit,
    SceneFlow,
    FuseRandom,
    FuseNn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub common: Common,
    pub fit: FitSettings,
    pub mode: Mode,
    pub order: ExplicitOrder,
    pub inputs: Vec<PathBuf>,
    pub times: Option<Vec<f64>>,
    pub n: usize,
    pub correspondence: String,
    pub flow_forward: Option<PathBuf>,
    pub flow_backward: Option<PathBuf>,
    pub fuse_points: Option<usize>,
}

fn parse_mode(s: &str) -> Result<Mode> {
    Ok(match s {
        "explicit" => Mode::Explicit,
        "scene-flow" => Mode::SceneFlow,
        "fuse-random" => Mode::FuseRandom,
        "fuse-nn" => Mode::FuseNn,
        other => bail!("unknown baseline mode `{other}`"),
    })
}

fn parse_order(s: &str) -> Result<ExplicitOrder> {
    Ok(match s {
        "linear" => ExplicitOrder::Linear,
        "quadratic" => ExplicitOrder::Quadratic,
        "cubic" => ExplicitOrder::Cubic,
        other => bail!("unknown order `{other}`"),
    })
}

impl Settings {
    pub fn resolve(a: &Args, file: &ConfigFile) -> Result<Self> {
        let mode = parse_mode(&file.pick("mode", a.mode.clone(), "explicit".to_string())?)?;
        let flow = |key: &str, flag: &Option<PathBuf>| -> Result<Option<PathBuf>> {
            let p: Option<PathBuf> = file.pick_opt(key, flag.clone())?;
            Ok(match p {
                Some(p) => Some(absolute(&[p])?.remove(0)),
                None => None,
            })
        };
        let s = Self {
            common: Common::resolve(&a.common, file)?,
            fit: FitSettings::resolve(&a.fit, file)?,
            mode,
            order: parse_order(&file.pick("order", a.order.clone(), "linear".to_string())?)?,
            inputs: absolute(&a.inputs)?,
            times: file.pick_opt("times", a.times.clone())?,
            n: file.pick("n", a.n, 1)?,
            correspondence: file.pick("correspondence", a.correspondence.clone(), "index".to_string())?,
            flow_forward: flow("flow-forward", &a.flow_forward)?,
            flow_backward: flow("flow-backward", &a.flow_backward)?,
            fuse_points: file.pick_opt("fuse-points", a.fuse_points)?,
        };
        let k = s.inputs.len();
        match s.mode {
            Mode::Explicit if k != 4 => bail!("explicit models need exactly 4 --inputs, got {k}"),
            Mode::SceneFlow if k != 2 => bail!("scene-flow warping needs exactly 2 --inputs, got {k}"),
            Mode::SceneFlow if s.flow_forward.is_none() || s.flow_backward.is_none() => {
                bail!("scene-flow warping needs --flow-forward and --flow-backward")
            }
            Mode::FuseRandom | Mode::FuseNn if k < 2 => bail!("fusion needs >= 2 --inputs, got {k}"),
            _ => {}
        }
        if !matches!(s.correspondence.as_str(), "index" | "field") {
            bail!("--correspondence must be index or field");
        }
        if s.n == 0 {
            bail!("--n must be >= 1");
        }
        Ok(s)
    }

    pub fn input_paths(&self) -> Vec<PathBuf> {
        self.inputs
            .iter()
            .chain(&self.flow_forward)
            .chain(&self.flow_backward)
            .cloned()
            .collect()
    }
}

/// Fractions `1/(n+1), ..., n/(n+1)` of a gap.
fn fractions(n: usize) -> Vec<f64> {
    (1..=n).map(|k| k as f64 / (n + 1) as f64).collect()
}

pub fn run(s: &Settings, out: &OutDir) -> Result<Vec<String>> {
    let seed = s.common.seed;
    let mut names = Vec::new();
    match s.mode {
        Mode::Explicit => {
            let window = InputWindow::new(load_frames(&s.inputs, s.times.as_deref(), s.fit.points, seed)?)?;
            let corr = if s.correspondence == "field" {
                let (field, report) = fit(&window, &s.fit.fit_config(seed)?)?;
                names.extend(out.fit_report("", &report)?);
                CorrespondenceSet::from_field(&field, &window)?
            } else {
                let f = window.frames();
                CorrespondenceSet::new([0, 1, 2, 3].map(|i| f[i].points.clone()))?
            };
            let (a, b) = middle_pair(&window);
            let (ta, tb) = (window.frames()[a].time, window.frames()[b].time);
            for (k, t) in fractions(s.n).into_iter().enumerate() {
                let c = explicit_interpolate(&corr, t, s.order)?.with_time(ta + t * (tb - ta));
                names.push(out.cloud(&format!("baseline_{k:02}"), &c)?);
            }
        }
        Mode::SceneFlow => {
            let frames = load_frames(&s.inputs, s.times.as_deref(), None, seed)?;
            let paths = [s.flow_forward.clone().expect("checked"), s.flow_backward.clone().expect("checked")];
            let flows = load_frames(&paths, None, None, seed)?;
            for (k, t) in fractions(s.n).into_iter().enumerate() {
                let (fwd, bwd) = scene_flow_warp(&frames[0], &frames[1], &flows[0].points, &flows[1].points, t)?;
                names.push(out.cloud(&format!("baseline_{k:02}_forward"), &fwd)?);
                names.push(out.cloud(&format!("baseline_{k:02}_backward"), &bwd)?);
            }
        }
        Mode::FuseRandom | Mode::FuseNn => {
            let clouds = load_frames(&s.inputs, s.times.as_deref(), None, seed)?;
            let fused = if s.mode == Mode::FuseNn {
                fuse_nn(&clouds)?
            } else {
                fuse_random(&clouds, s.fuse_points.unwrap_or(clouds[0].len()), seed)?
            };
            names.push(out.cloud("fused", &fused)?);
        }
    }
    Ok(names)
}
