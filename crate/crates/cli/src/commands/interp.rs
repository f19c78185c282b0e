//! `interp`: fit a window and write clouds at equally spaced times inside a gap.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Result};
use clap::Args as ClapArgs;
use serde::{Deserialize, Serialize};

use neuralpci::data::make_windows;
use neuralpci::evaluation::evaluate_pair;
use neuralpci::field::save_field;
use neuralpci::optimize::{equispaced_queries, fit, interpolate, middle_queries};
use neuralpci::{InputWindow, PointCloud};

use crate::run::{absolute, load_frames, par_map, write_metrics, MetricRow, OutDir};
use crate::settings::{Common, CommonArgs, ConfigFile, FitArgs, FitSettings};

#[derive(Debug, Clone, ClapArgs)]
pub struct Args {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Input frames of one window, in time order.
    #[arg(long, num_args = 1.., conflicts_with = "sequence")]
    pub inputs: Vec<PathBuf>,
    /// Input timestamps (default 0, 1, ...).
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    /// Frames to produce per gap.
    #[arg(long)]
    pub n: Option<usize>,
    /// Fill every gap between consecutive inputs, not just the middle one.
    #[arg(long)]
    pub all_gaps: bool,
    /// Ground-truth clouds for the produced frames, in output order.
    #[arg(long, num_args = 1..)]
    pub truth: Vec<PathBuf>,
    /// Also write the fitted field as a checkpoint.
    #[arg(long)]
    pub save_field: bool,
    /// A full sequence at integer times; every window is fitted and scored
    /// against the held-out frames of its middle gap.
    #[arg(long, num_args = 1..)]
    pub sequence: Vec<PathBuf>,
    /// Input frames per window in sequence mode.
    #[arg(long)]
    pub frames: Option<usize>,
    /// Window start spacing in sequence mode (default: the input spacing).
    #[arg(long)]
    pub stride: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub common: Common,
    pub fit: FitSettings,
    pub inputs: Vec<PathBuf>,
    pub times: Option<Vec<f64>>,
    pub n: usize,
    pub all_gaps: bool,
    pub truth: Vec<PathBuf>,
    pub save_field: bool,
    pub sequence: Vec<PathBuf>,
    pub frames: usize,
    pub stride: Option<usize>,
}

impl Settings {
    pub fn resolve(a: &Args, file: &ConfigFile) -> Result<Self> {
        let s = Self {
            common: Common::resolve(&a.common, file)?,
            fit: FitSettings::resolve(&a.fit, file)?,
            inputs: absolute(&a.inputs)?,
            times: file.pick_opt("times", a.times.clone())?,
            n: file.pick("n", a.n, 1)?,
            all_gaps: a.all_gaps || file.pick("all-gaps", None, false)?,
            truth: absolute(&a.truth)?,
            save_field: a.save_field || file.pick("save-field", None, false)?,
            sequence: absolute(&a.sequence)?,
            frames: file.pick("frames", a.frames, 4)?,
            stride: file.pick_opt("stride", a.stride)?,
        };
        if s.n == 0 {
            bail!("--n must be >= 1");
        }
        if s.sequence.is_empty() && s.inputs.len() < 2 {
            bail!("interp needs >= 2 --inputs (or a --sequence)");
        }
        Ok(s)
    }

    pub fn input_paths(&self) -> Vec<PathBuf> {
        [&self.inputs, &self.truth, &self.sequence].into_iter().flatten().cloned().collect()
    }
}

pub fn query_times(window: &InputWindow, n: usize, all_gaps: bool) -> Vec<f64> {
    if !all_gaps {
        return middle_queries(window, n);
    }
    window
        .timestamps()
        .windows(2)
        .flat_map(|w| equispaced_queries(w[0], w[1], n))
        .collect()
}

pub fn run(s: &Settings, out: &OutDir) -> Result<Vec<String>> {
    if !s.sequence.is_empty() {
        return run_sequence(s, out);
    }
    let seed = s.common.seed;
    let frames = load_frames(&s.inputs, s.times.as_deref(), s.fit.points, seed)?;
    let window = InputWindow::new(frames)?;
    let start = Instant::now();
    let (field, report) = fit(&window, &s.fit.fit_config(seed)?)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let predicted = interpolate(&field, &window, &query_times(&window, s.n, s.all_gaps))?;

    let mut names = Vec::new();
    for (k, c) in predicted.iter().enumerate() {
        names.push(out.cloud(&format!("interp_{k:02}"), c)?);
    }
    names.extend(out.fit_report("", &report)?);
    if s.save_field {
        save_field(&field, &out.path("field.npcf")?)?;
        names.push("field.npcf".into());
    }
    if !s.truth.is_empty() {
        names.extend(score(s, out, &predicted, 0, report.iteration_ms.len(), wall_ms)?);
    }
    Ok(names)
}

fn score(s: &Settings, out: &OutDir, predicted: &[PointCloud], window_id: usize, iters: usize, wall_ms: f64) -> Result<Vec<String>> {
    if s.truth.len() != predicted.len() {
        bail!("{} --truth files for {} produced frames", s.truth.len(), predicted.len());
    }
    let truth = load_frames(&s.truth, None, None, 0)?;
    let emd = s.fit.emd_config()?;
    let rows = predicted
        .iter()
        .zip(&truth)
        .enumerate()
        .map(|(slot, (p, t))| {
            let m = evaluate_pair(p, t, &emd)?;
            Ok(MetricRow {
                window_id,
                frame_slot: slot,
                cd: m.cd,
                emd: m.emd,
                n_points: m.n_points,
                iters,
                wall_ms,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_metrics(out, &rows)
}

fn run_sequence(s: &Settings, out: &OutDir) -> Result<Vec<String>> {
    let seed = s.common.seed;
    let sequence = load_frames(&s.sequence, None, s.fit.points, seed)?;
    let windows = make_windows(&sequence, s.frames, s.n, s.stride)?;
    if windows.is_empty() {
        bail!("sequence of {} frames is too short for one window", sequence.len());
    }
    let cfg = s.fit.fit_config(seed)?;
    let emd = s.fit.emd_config()?;
    let per_window = par_map(s.common.jobs, &windows, |w, sample| {
        eprintln!("window {w}: frames {:?}", sample.input_indices);
        let start = Instant::now();
        let (field, report) = fit(&sample.window, &cfg)?;
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        let times: Vec<f64> = sample.held_out.iter().map(|c| c.time).collect();
        let predicted = interpolate(&field, &sample.window, &times)?;
        let mut names = Vec::new();
        let mut rows = Vec::new();
        for (slot, (p, truth)) in predicted.iter().zip(&sample.held_out).enumerate() {
            names.push(out.cloud(&format!("w{w:03}_interp_{slot:02}"), p)?);
            let m = evaluate_pair(p, truth, &emd)?;
            rows.push(MetricRow {
                window_id: w,
                frame_slot: slot,
                cd: m.cd,
                emd: m.emd,
                n_points: m.n_points,
                iters: report.iteration_ms.len(),
                wall_ms,
            });
        }
        names.extend(out.fit_report(&format!("w{w:03}_"), &report)?);
        Ok((names, rows))
    })?;
    let mut names = Vec::new();
    let mut rows = Vec::new();
    for (n, r) in per_window {
        names.extend(n);
        rows.extend(r);
    }
    names.extend(write_metrics(out, &rows)?);
    Ok(names)
}
