//! Flag / config-file / default layering and the fit settings shared by
//! every command that trains a field.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use neuralpci::data::CloudFormat;
use neuralpci::field::FieldConfig;
use neuralpci::losses::{EmdConfig, EmdMode, LossConfig};
use neuralpci::optimize::FitConfig;

/// Flat key-value settings read from `--config` (TOML, or JSON by extension).
#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, Value>,
    used: RefCell<BTreeSet<String>>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let root: Value = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        } else {
            let table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            serde_json::to_value(table)?
        };
        let Value::Object(map) = root else {
            bail!("config {} must be a key-value table", path.display());
        };
        let mut values = BTreeMap::new();
        for (k, v) in map {
            if v.is_object() {
                bail!("config key `{k}`: nested tables are not supported");
            }
            values.insert(k.replace('_', "-"), v);
        }
        Ok(Self {
            values,
            used: RefCell::default(),
        })
    }

    fn lookup<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>> {
        let Some(v) = self.values.get(key) else {
            return Ok(None);
        };
        self.used.borrow_mut().insert(key.to_string());
        // "1,50,0" style strings are accepted wherever a list is.
        let v = match v {
            Value::String(s) if s.contains(',') => {
                Value::Array(s.split(',').map(|x| Value::String(x.trim().to_string())).collect())
            }
            other => other.clone(),
        };
        let parsed = serde_json::from_value(v.clone()).or_else(|_| serde_json::from_value(coerce_numbers(v)));
        parsed.map(Some).with_context(|| format!("config key `{key}` has the wrong type"))
    }

    pub fn pick<T: DeserializeOwned>(&self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        Ok(self.pick_opt(key, flag)?.unwrap_or(default))
    }

    pub fn pick_opt<T: DeserializeOwned>(&self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        let from_file = self.lookup(key)?;
        Ok(flag.or(from_file))
    }

    /// Errors on keys no setting consumed.
    pub fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        let unknown: Vec<&str> = self
            .values
            .keys()
            .filter(|k| !used.contains(*k))
            .map(String::as_str)
            .collect();
        if !unknown.is_empty() {
            bail!("unknown config keys: {}", unknown.join(", "));
        }
        Ok(())
    }
}

fn coerce_numbers(v: Value) -> Value {
    match v {
        Value::String(s) => s
            .parse::<f64>()
            .ok()
            .and_then(|x| {
                if x.fract() == 0.0 && !s.contains(['.', 'e', 'E']) {
                    s.parse::<i64>().ok().map(Value::from)
                } else {
                    serde_json::Number::from_f64(x).map(Value::Number)
                }
            })
            .unwrap_or(Value::String(s)),
        Value::Array(a) => Value::Array(a.into_iter().map(coerce_numbers).collect()),
        other => other,
    }
}

pub fn parse_format(s: &str) -> Result<CloudFormat> {
    s.parse::<CloudFormat>().map_err(|e| anyhow::anyhow!("{e}"))
}

/// Shared flags of every command.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Master seed for initialization and sampling.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output cloud format: xyz, bin or ply.
    #[arg(long)]
    pub format: Option<String>,
    /// Directory receiving every output file and the manifest.
    #[arg(long)]
    pub out_dir: std::path::PathBuf,
    /// Worker threads for commands that process several windows.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Flat TOML or JSON file of flag defaults (flags win).
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Common {
    pub seed: u64,
    pub format: String,
    pub jobs: usize,
}

impl Common {
    pub fn resolve(args: &CommonArgs, file: &ConfigFile) -> Result<Self> {
        let c = Self {
            seed: file.pick("seed", args.seed, 0)?,
            format: file.pick("format", args.format.clone(), "xyz".to_string())?,
            jobs: file.pick("jobs", args.jobs, 1)?,
        };
        parse_format(&c.format)?;
        if c.jobs == 0 {
            bail!("--jobs must be >= 1");
        }
        Ok(c)
    }

    pub fn cloud_format(&self) -> CloudFormat {
        parse_format(&self.format).expect("validated on resolve")
    }
}

/// Optimization flags of commands that fit a field.
#[derive(Debug, Clone, Default, Args)]
pub struct FitArgs {
    /// Optimizer iterations per window.
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Per-iteration multiplicative learning-rate decay.
    #[arg(long)]
    pub lr_decay: Option<f64>,
    /// Hidden layers.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Units per hidden layer.
    #[arg(long)]
    pub width: Option<usize>,
    /// Positional encoding order (0 keeps only the first frequency).
    #[arg(long)]
    pub pe_order: Option<usize>,
    /// Encode the query time like the coordinates instead of feeding it raw.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub encode_time: Option<bool>,
    /// Loss weight preset: indoor (1,50,0) or outdoor (1,0,1).
    #[arg(long)]
    pub preset: Option<String>,
    /// Explicit CD,EMD,smoothness weights; override the preset.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    /// Neighbors in the smoothness term.
    #[arg(long)]
    pub smooth_k: Option<usize>,
    /// EMD solver: auto, exact or approximate.
    #[arg(long)]
    pub emd_mode: Option<String>,
    /// Final entropic regularization of approximate EMD.
    #[arg(long)]
    pub emd_epsilon: Option<f64>,
    /// Resample every input cloud to this many points.
    #[arg(long)]
    pub points: Option<usize>,
    /// Write one fit-log line every this many iterations.
    #[arg(long)]
    pub log_every: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub iters: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub depth: usize,
    pub width: usize,
    pub pe_order: usize,
    pub encode_time: bool,
    pub preset: String,
    pub weights: [f64; 3],
    pub smooth_k: usize,
    pub emd_mode: String,
    pub emd_epsilon: f64,
    pub points: Option<usize>,
    pub log_every: usize,
}

fn preset_loss(name: &str) -> Result<LossConfig> {
    match name {
        "indoor" => Ok(LossConfig::indoor()),
        "outdoor" => Ok(LossConfig::outdoor()),
        other => bail!("unknown preset `{other}` (expected indoor or outdoor)"),
    }
}

fn parse_emd_mode(s: &str) -> Result<EmdMode> {
    match s {
        "auto" => Ok(EmdMode::Auto),
        "exact" => Ok(EmdMode::Exact),
        "approximate" => Ok(EmdMode::Approximate),
        other => bail!("unknown EMD mode `{other}`"),
    }
}

impl FitSettings {
    pub fn resolve(args: &FitArgs, file: &ConfigFile) -> Result<Self> {
        let field = FieldConfig::default();
        let emd = EmdConfig::default();
        let preset: String = file.pick("preset", args.preset.clone(), "outdoor".to_string())?;
        let base = preset_loss(&preset)?;
        let weights: Option<Vec<f64>> = file.pick_opt("weights", args.weights.clone())?;
        let weights = match weights {
            Some(w) if w.len() == 3 => [w[0], w[1], w[2]],
            Some(w) => bail!("--weights needs 3 values, got {}", w.len()),
            None => [base.alpha, base.beta, base.gamma],
        };
        let s = Self {
            iters: file.pick("iters", args.iters, 1000)?,
            lr: file.pick("lr", args.lr, 1e-3)?,
            lr_decay: file.pick("lr-decay", args.lr_decay, 1.0)?,
            depth: file.pick("depth", args.depth, field.depth)?,
            width: file.pick("width", args.width, field.width)?,
            pe_order: file.pick("pe-order", args.pe_order, field.pe_order)?,
            encode_time: file.pick("encode-time", args.encode_time, field.encode_query_time)?,
            preset,
            weights,
            smooth_k: file.pick("smooth-k", args.smooth_k, base.smooth_k)?,
            emd_mode: file.pick("emd-mode", args.emd_mode.clone(), "auto".to_string())?,
            emd_epsilon: file.pick("emd-epsilon", args.emd_epsilon, emd.epsilon)?,
            points: file.pick_opt("points", args.points)?,
            log_every: file.pick("log-every", args.log_every, 1)?,
        };
        if s.points == Some(0) {
            bail!("--points must be >= 1");
        }
        s.fit_config(0)?.validate()?;
        Ok(s)
    }

    pub fn emd_config(&self) -> Result<EmdConfig> {
        Ok(EmdConfig {
            mode: parse_emd_mode(&self.emd_mode)?,
            epsilon: self.emd_epsilon,
            ..EmdConfig::default()
        })
    }

    pub fn fit_config(&self, seed: u64) -> Result<FitConfig> {
        let mut loss = LossConfig::with_weights(self.weights[0], self.weights[1], self.weights[2]);
        loss.smooth_k = self.smooth_k;
        loss.emd = self.emd_config()?;
        Ok(FitConfig {
            max_iters: self.iters,
            lr: self.lr,
            lr_decay: self.lr_decay,
            seed,
            loss,
            field: FieldConfig {
                depth: self.depth,
                width: self.width,
                pe_order: self.pe_order,
                encode_query_time: self.encode_time,
                ..FieldConfig::default()
            },
            log_every: self.log_every,
            ..FitConfig::default()
        })
    }
}
