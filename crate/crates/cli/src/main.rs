mod commands;
mod manifest;
mod run;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};

use commands::{autolabel, baseline, eval, extrap, gen, interp, morph, select, Resolved};
use manifest::{compare, Match, RunManifest};
use settings::ConfigFile;

/// Point cloud interpolation with a per-window neural motion field.
#[derive(Debug, Parser)]
#[command(name = "neuralpci", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a window and write frames inside its middle gap (or every gap).
    Interp(interp::Args),
    /// Fit a window and predict frames after its last input.
    Extrap(extrap::Args),
    /// Explicit motion models, scene-flow warping and fusion baselines.
    Baseline(baseline::Args),
    /// Score predictions against ground truth, or run the interval sweep.
    Eval(eval::Args),
    /// Propagate keyframe labels to an unlabeled frame.
    Autolabel(autolabel::Args),
    /// Morph one shape into another.
    Morph(morph::Args),
    /// Generate a synthetic scene.
    Gen(gen::Args),
    /// Select hard-sample windows from pose files.
    Select(select::Args),
    /// Re-run a manifest and check the outputs match.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn resolve(cmd: &Command) -> Result<(Resolved, PathBuf)> {
    macro_rules! layered {
        ($args:expr, $module:ident, $variant:ident) => {{
            let file = ConfigFile::load($args.common.config.as_deref())?;
            let s = $module::Settings::resolve($args, &file)?;
            file.finish()?;
            (Resolved::$variant(s), $args.common.out_dir.clone())
        }};
    }
    Ok(match cmd {
        Command::Interp(a) => layered!(a, interp, Interp),
        Command::Extrap(a) => layered!(a, extrap, Extrap),
        Command::Baseline(a) => layered!(a, baseline, Baseline),
        Command::Eval(a) => layered!(a, eval, Eval),
        Command::Autolabel(a) => layered!(a, autolabel, Autolabel),
        Command::Morph(a) => layered!(a, morph, Morph),
        Command::Gen(a) => layered!(a, gen, Gen),
        Command::Select(a) => layered!(a, select, Select),
        Command::Rerun { .. } => unreachable!("handled by the caller"),
    })
}

fn rerun(manifest: &PathBuf, out_dir: &PathBuf) -> Result<()> {
    let original = RunManifest::read(manifest)?;
    original.check_inputs()?;
    let resolved: Resolved = serde_json::from_value(original.config.clone())?;
    let again = resolved.execute(out_dir)?;
    let mut bad = 0;
    for (path, m) in compare(&original, &again) {
        let word = match m {
            Match::Identical => "identical",
            Match::TimingOnly => "identical except timing fields",
            Match::Differs => {
                bad += 1;
                "DIFFERS"
            }
            Match::Missing => {
                bad += 1;
                "MISSING"
            }
        };
        eprintln!("{path}: {word}");
    }
    if bad > 0 {
        bail!("{bad} output(s) did not reproduce");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Rerun { manifest, out_dir } => rerun(manifest, out_dir),
        cmd => resolve(cmd).and_then(|(resolved, out_dir)| {
            let m = resolved.execute(&out_dir)?;
            eprintln!("{}: wrote {} file(s) to {}", m.command, m.outputs.len(), out_dir.display());
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
