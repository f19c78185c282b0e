pub mod autolabel;
pub mod baseline;
pub mod eval;
pub mod extrap;
pub mod gen;
pub mod interp;
pub mod morph;
pub mod select;

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use crate::manifest::{record_input, record_output, RunManifest};
use crate::run::OutDir;
use crate::settings::Common;

/// Fully resolved settings of one command; this is what a manifest stores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "settings", rename_all = "lowercase")]
pub enum Resolved {
    Interp(interp::Settings),
    Extrap(extrap::Settings),
    Baseline(baseline::Settings),
    Eval(eval::Settings),
    Autolabel(autolabel::Settings),
    Morph(morph::Settings),
    Gen(gen::Settings),
    Select(select::Settings),
}

impl Resolved {
    pub fn name(&self) -> &'static str {
        match self {
            Resolved::Interp(_) => "interp",
            Resolved::Extrap(_) => "extrap",
            Resolved::Baseline(_) => "baseline",
            Resolved::Eval(_) => "eval",
            Resolved::Autolabel(_) => "autolabel",
            Resolved::Morph(_) => "morph",
            Resolved::Gen(_) => "gen",
            Resolved::Select(_) => "select",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Resolved::Interp(s) => &s.common,
            Resolved::Extrap(s) => &s.common,
            Resolved::Baseline(s) => &s.common,
            Resolved::Eval(s) => &s.common,
            Resolved::Autolabel(s) => &s.common,
            Resolved::Morph(s) => &s.common,
            Resolved::Gen(s) => &s.common,
            Resolved::Select(s) => &s.common,
        }
    }

    pub fn input_paths(&self) -> Vec<PathBuf> {
        match self {
            Resolved::Interp(s) => s.input_paths(),
            Resolved::Extrap(s) => s.input_paths(),
            Resolved::Baseline(s) => s.input_paths(),
            Resolved::Eval(s) => s.input_paths(),
            Resolved::Autolabel(s) => s.input_paths(),
            Resolved::Morph(s) => s.input_paths(),
            Resolved::Gen(s) => s.input_paths(),
            Resolved::Select(s) => s.input_paths(),
        }
    }

    /// Runs the command into `out_dir` and writes its manifest.
    pub fn execute(&self, out_dir: &Path) -> Result<RunManifest> {
        let start = Instant::now();
        let input_paths = self.input_paths();
        let inputs = input_paths.iter().map(|p| record_input(p)).collect::<Result<Vec<_>>>()?;
        let out = OutDir::new(out_dir, self.common().cloud_format(), &input_paths)?;
        let names = match self {
            Resolved::Interp(s) => interp::run(s, &out)?,
            Resolved::Extrap(s) => extrap::run(s, &out)?,
            Resolved::Baseline(s) => baseline::run(s, &out)?,
            Resolved::Eval(s) => eval::run(s, &out)?,
            Resolved::Autolabel(s) => autolabel::run(s, &out)?,
            Resolved::Morph(s) => morph::run(s, &out)?,
            Resolved::Gen(s) => gen::run(s, &out)?,
            Resolved::Select(s) => select::run(s, &out)?,
        };
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                bail!("output {n} written twice");
            }
        }
        let manifest = RunManifest {
            command: self.name().to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.common().seed,
            config: serde_json::to_value(self)?,
            inputs,
            outputs: names.iter().map(|n| record_output(out_dir, n)).collect::<Result<_>>()?,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        manifest.write(out_dir)?;
        Ok(manifest)
    }
}
