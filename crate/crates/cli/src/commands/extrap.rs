//! `extrap`: fit a window and predict frames past its last input.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Result};
use clap::Args as ClapArgs;
use serde::{Deserialize, Serialize};

use neuralpci::evaluation::evaluate_pair;
use neuralpci::optimize::{extrapolate, fit};
use neuralpci::InputWindow;

use crate::run::{absolute, load_frames, write_metrics, MetricRow, OutDir};
use crate::settings::{Common, CommonArgs, ConfigFile, FitArgs, FitSettings};

#[derive(Debug, Clone, ClapArgs)]
pub struct Args {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Input frames, in time order.
    #[arg(long, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Input timestamps (default 0, 1, ...).
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    /// Frames to predict, one input interval apart.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Ground-truth clouds for the predicted frames.
    #[arg(long, num_args = 1..)]
    pub truth: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub common: Common,
    pub fit: FitSettings,
    pub inputs: Vec<PathBuf>,
    pub times: Option<Vec<f64>>,
    pub horizon: usize,
    pub truth: Vec<PathBuf>,
}

impl Settings {
    pub fn resolve(a: &Args, file: &ConfigFile) -> Result<Self> {
        let s = Self {
            common: Common::resolve(&a.common, file)?,
            fit: FitSettings::resolve(&a.fit, file)?,
            inputs: absolute(&a.inputs)?,
            times: file.pick_opt("times", a.times.clone())?,
            horizon: file.pick("horizon", a.horizon, 1)?,
            truth: absolute(&a.truth)?,
        };
        if s.inputs.len() < 2 {
            bail!("extrap needs >= 2 --inputs");
        }
        if s.horizon == 0 {
            bail!("--horizon must be >= 1");
        }
        if !s.truth.is_empty() && s.truth.len() != s.horizon {
            bail!("{} --truth files for horizon {}", s.truth.len(), s.horizon);
        }
        Ok(s)
    }

    pub fn input_paths(&self) -> Vec<PathBuf> {
        self.inputs.iter().chain(&self.truth).cloned().collect()
    }
}

pub fn run(s: &Settings, out: &OutDir) -> Result<Vec<String>> {
    let seed = s.common.seed;
    let window = InputWindow::new(load_frames(&s.inputs, s.times.as_deref(), s.fit.points, seed)?)?;
    let start = Instant::now();
    let (field, report) = fit(&window, &s.fit.fit_config(seed)?)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let predicted = extrapolate(&field, &window, s.horizon)?;

    let mut names = Vec::new();
    for (k, c) in predicted.iter().enumerate() {
        names.push(out.cloud(&format!("extrap_{k:02}"), c)?);
    }
    names.extend(out.fit_report("", &report)?);
    if !s.truth.is_empty() {
        let truth = load_frames(&s.truth, None, None, 0)?;
        let emd = s.fit.emd_config()?;
        let mut rows = Vec::new();
        for (slot, (p, t)) in predicted.iter().zip(&truth).enumerate() {
            let m = evaluate_pair(p, t, &emd)?;
            rows.push(MetricRow {
                window_id: 0,
                frame_slot: slot,
                cd: m.cd,
                emd: m.emd,
                n_points: m.n_points,
                iters: report.iteration_ms.len(),
                wall_ms,
            });
        }
        names.extend(write_metrics(out, &rows)?);
    }
    Ok(names)
}
