//! Output writing, frame loading and the window worker pool.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};

use neuralpci::data::{load_cloud_auto, resample, save_cloud, CloudFormat};
use neuralpci::optimize::FitReport;
use neuralpci::PointCloud;

/// Output directory guarded against overwriting any input file.
pub struct OutDir {
    dir: PathBuf,
    format: CloudFormat,
    protected: BTreeSet<PathBuf>,
}

impl OutDir {
    pub fn new(dir: &Path, format: CloudFormat, inputs: &[PathBuf]) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let protected = inputs.iter().filter_map(|p| fs::canonicalize(p).ok()).collect();
        Ok(Self {
            dir: dir.to_path_buf(),
            format,
            protected,
        })
    }

    pub fn path(&self, name: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        if let Ok(abs) = fs::canonicalize(&path) {
            if self.protected.contains(&abs) {
                bail!("refusing to overwrite input file {}", abs.display());
            }
        }
        Ok(path)
    }

    pub fn cloud(&self, stem: &str, cloud: &PointCloud) -> Result<String> {
        if !cloud.is_finite() {
            bail!("output {stem} has non-finite coordinates");
        }
        let name = format!("{stem}.{}", self.format.extension());
        save_cloud(cloud, &self.path(&name)?, self.format)?;
        Ok(name)
    }

    pub fn text(&self, name: &str, content: &str) -> Result<String> {
        let path = self.path(name)?;
        fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
        Ok(name.to_string())
    }

    pub fn json<T: serde::Serialize>(&self, name: &str, value: &T) -> Result<String> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.text(name, &s)
    }

    /// `{prefix}fit_log.tsv` and `{prefix}fit_summary.json`.
    pub fn fit_report(&self, prefix: &str, report: &FitReport) -> Result<Vec<String>> {
        let log = format!("{prefix}fit_log.tsv");
        let summary = format!("{prefix}fit_summary.json");
        report.write_log(&self.path(&log)?)?;
        report.write_summary(&self.path(&summary)?)?;
        Ok(vec![log, summary])
    }
}

/// Absolute form of every path, so manifests replay from any directory.
pub fn absolute(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    paths
        .iter()
        .map(|p| fs::canonicalize(p).with_context(|| format!("input {} not found", p.display())))
        .collect()
}

/// Loads clouds at `times` (default `0, 1, ...`), resampled to `points`
/// when given. Frame `i` is resampled with seed `seed + i`.
pub fn load_frames(paths: &[PathBuf], times: Option<&[f64]>, points: Option<usize>, seed: u64) -> Result<Vec<PointCloud>> {
    if let Some(t) = times {
        if t.len() != paths.len() {
            bail!("{} times given for {} inputs", t.len(), paths.len());
        }
    }
    paths
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let c = load_cloud_auto(p).with_context(|| format!("loading {}", p.display()))?;
            let c = c.with_time(times.map_or(i as f64, |t| t[i]));
            match points {
                Some(n) => Ok(resample(&c, n, seed.wrapping_add(i as u64))?),
                None => Ok(c),
            }
        })
        .collect()
}

/// Applies `f` to every item on `jobs` threads; results keep item order.
pub fn par_map<T, R, F>(jobs: usize, items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> Result<R> + Sync,
{
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<R>>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(i, &items[i]);
                slots.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("every item processed"))
        .collect()
}

/// One line of the metrics table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub window_id: usize,
    pub frame_slot: usize,
    pub cd: f64,
    pub emd: Option<f64>,
    pub n_points: usize,
    pub iters: usize,
    pub wall_ms: f64,
}

pub const METRICS_HEADER: &str = "window_id,frame_slot,cd,emd,n_points,iters,wall_ms";

/// `metrics.csv` plus the human-readable `metrics.txt`.
pub fn write_metrics(out: &OutDir, rows: &[MetricRow]) -> Result<Vec<String>> {
    let mut csv = format!("{METRICS_HEADER}\n");
    for r in rows {
        csv.push_str(&format!(
            "{},{},{:e},{},{},{},{:.3}\n",
            r.window_id,
            r.frame_slot,
            r.cd,
            r.emd.map_or(String::new(), |e| format!("{e:e}")),
            r.n_points,
            r.iters,
            r.wall_ms
        ));
    }
    let with_emd: Vec<f64> = rows.iter().filter_map(|r| r.emd).collect();
    let skipped = rows.len() - with_emd.len();
    if skipped > 0 {
        eprintln!("warning: {skipped} pair(s) have unequal point counts; EMD aggregate excludes them");
    }
    let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
    let cds: Vec<f64> = rows.iter().map(|r| r.cd).collect();
    let mut txt = format!("pairs      {}\nmean CD    {:e}\n", rows.len(), mean(&cds));
    txt.push_str(&format!("mean EMD   {:e} over {} pair(s)\n", mean(&with_emd), with_emd.len()));
    if skipped > 0 {
        txt.push_str(&format!("EMD skipped for {skipped} pair(s) with unequal point counts\n"));
    }
    Ok(vec![out.text("metrics.csv", &csv)?, out.text("metrics.txt", &txt)?])
}
