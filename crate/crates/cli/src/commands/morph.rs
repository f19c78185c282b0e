//! `morph`: a sequence of clouds deforming one shape into another.

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args as ClapArgs;
use serde::{Deserialize, Serialize};

use neuralpci::geometry::morph_sequence;
use neuralpci::optimize::interpolate;
use neuralpci::InputWindow;

use crate::run::{absolute, load_frames, OutDir};
use crate::settings::{Common, CommonArgs, ConfigFile, FitArgs, FitSettings};

#[derive(Debug, Clone, ClapArgs)]
pub struct Args {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long)]
    pub source: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Intermediate clouds strictly between source and target.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Also write the field's reconstructions at times 0 and 1.
    #[arg(long)]
    pub endpoints: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub common: Common,
    pub fit: FitSettings,
    pub source: PathBuf,
    pub target: PathBuf,
    pub steps: usize,
    pub endpoints: bool,
}

impl Settings {
    pub fn resolve(a: &Args, file: &ConfigFile) -> Result<Self> {
        let (Some(source), Some(target)) = (a.source.clone(), a.target.clone()) else {
            bail!("morph needs --source and --target");
        };
        let s = Self {
            common: Common::resolve(&a.common, file)?,
            fit: FitSettings::resolve(&a.fit, file)?,
            source: absolute(&[source])?.remove(0),
            target: absolute(&[target])?.remove(0),
            steps: file.pick("steps", a.steps, 1)?,
            endpoints: a.endpoints || file.pick("endpoints", None, false)?,
        };
        if s.steps == 0 {
            bail!("--steps must be >= 1");
        }
        Ok(s)
    }

    pub fn input_paths(&self) -> Vec<PathBuf> {
        vec![self.source.clone(), self.target.clone()]
    }
}

pub fn run(s: &Settings, out: &OutDir) -> Result<Vec<String>> {
    let seed = s.common.seed;
    let clouds = load_frames(&[s.source.clone(), s.target.clone()], Some(&[0.0, 1.0]), s.fit.points, seed)?;
    let (field, report, mut frames) = morph_sequence(&clouds[0], &clouds[1], s.steps, &s.fit.fit_config(seed)?)?;
    if s.endpoints {
        let window = InputWindow::new(clouds)?;
        let mut ends = interpolate(&field, &window, &[0.0, 1.0])?;
        let last = ends.pop().expect("two endpoints");
        frames.insert(0, ends.pop().expect("two endpoints"));
        frames.push(last);
    }
    let mut names = Vec::new();
    for (k, c) in frames.iter().enumerate() {
        names.push(out.cloud(&format!("morph_{k:02}"), c)?);
    }
    names.extend(out.fit_report("", &report)?);
    Ok(names)
}
