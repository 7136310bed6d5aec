//! Experiment configuration: defaults, a flat `key = value` file, then flags.

use anyhow::{anyhow, bail, Context, Result};
use faultchain::agent::SearchConfig;
use faultchain::case_io::{load_case, CaseFormat};
use faultchain::grid::GridCase;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    PfwRl,
    PfwRlTe,
}

impl Baseline {
    pub fn name(self) -> &'static str {
        match self {
            Self::PfwRl => "pfw_rl",
            Self::PfwRlTe => "pfw_rl_te",
        }
    }
}

impl std::str::FromStr for Baseline {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pfw_rl" | "pfw-rl" => Ok(Self::PfwRl),
            "pfw_rl_te" | "pfw-rl-te" => Ok(Self::PfwRlTe),
            other => bail!("unknown baseline `{other}` (expected pfw_rl or pfw_rl_te)"),
        }
    }
}

/// The effective configuration of one command. Serialized verbatim into
/// every report so a run can be reproduced from its own output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub case: Option<PathBuf>,
    pub format: Option<String>,
    pub load_scale: f64,
    pub horizon: usize,
    pub iterations: usize,
    pub kappa: usize,
    pub batch: usize,
    pub explore: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub eps0: f64,
    pub threshold_mw: f64,
    pub hidden: usize,
    pub out_features: usize,
    pub hops: usize,
    pub head_width: usize,
    pub seed: u64,
    pub budget_seconds: Option<f64>,
    pub mc_repeats: usize,
    pub catalog: Option<PathBuf>,
    pub out: PathBuf,
    pub top: Option<usize>,
    pub which: Baseline,
    pub pretrain_factor: f64,
    pub pretrain_iterations: usize,
    pub pretrained: Option<PathBuf>,
    pub enumerate_large: bool,
    pub max_grad_norm: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let s = SearchConfig::default();
        Self {
            case: None,
            format: None,
            load_scale: 1.0,
            horizon: s.horizon,
            iterations: s.iterations,
            kappa: s.kappa,
            batch: s.batch,
            explore: s.explore,
            gamma: s.gamma,
            alpha: s.alpha,
            eps0: s.eps0,
            threshold_mw: s.threshold_mw,
            hidden: s.hidden,
            out_features: s.out_features,
            hops: s.hops,
            head_width: s.head_width,
            seed: s.seed,
            budget_seconds: None,
            mc_repeats: 1,
            catalog: None,
            out: PathBuf::from("out"),
            top: None,
            which: Baseline::PfwRl,
            pretrain_factor: 1.0,
            pretrain_iterations: 5000,
            pretrained: None,
            enumerate_large: false,
            max_grad_norm: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| anyhow!("bad value `{value}` for {key}: {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => bail!("bad value `{value}` for {key}: expected true or false"),
    }
}

impl ExperimentConfig {
    /// Sets one field by its flag name (dashes or underscores).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().trim_start_matches("--").replace('-', "_");
        let v = value.trim();
        let k = key.as_str();
        match k {
            "case" => self.case = Some(PathBuf::from(v)),
            "format" => self.format = Some(v.to_string()),
            "load_scale" => self.load_scale = parse(k, v)?,
            "horizon" => self.horizon = parse(k, v)?,
            "iterations" => self.iterations = parse(k, v)?,
            "kappa" => self.kappa = parse(k, v)?,
            "batch" => self.batch = parse(k, v)?,
            "explore" => self.explore = parse(k, v)?,
            "gamma" => self.gamma = parse(k, v)?,
            "alpha" => self.alpha = parse(k, v)?,
            "eps0" => self.eps0 = parse(k, v)?,
            "threshold_mw" => self.threshold_mw = parse(k, v)?,
            "hidden" => self.hidden = parse(k, v)?,
            "out_features" => self.out_features = parse(k, v)?,
            "hops" => self.hops = parse(k, v)?,
            "head_width" => self.head_width = parse(k, v)?,
            "seed" => self.seed = parse(k, v)?,
            "budget_seconds" => self.budget_seconds = Some(parse(k, v)?),
            "mc_repeats" => self.mc_repeats = parse(k, v)?,
            "catalog" => self.catalog = Some(PathBuf::from(v)),
            "out" => self.out = PathBuf::from(v),
            "top" => self.top = Some(parse(k, v)?),
            "which" => self.which = parse(k, v)?,
            "pretrain_factor" => self.pretrain_factor = parse(k, v)?,
            "pretrain_iterations" => self.pretrain_iterations = parse(k, v)?,
            "pretrained" => self.pretrained = Some(PathBuf::from(v)),
            "enumerate_large" => self.enumerate_large = parse_bool(k, v)?,
            "max_grad_norm" => self.max_grad_norm = Some(parse(k, v)?),
            _ => bail!("unknown config key `{key}`"),
        }
        Ok(())
    }

    /// Applies a flat config file: one `key = value` per line, `#` comments.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .or_else(|| line.split_once(char::is_whitespace))
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", n + 1))?;
            self.set(k, v).with_context(|| format!("line {}", n + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        self.apply_text(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.load_scale > 0.0) {
            bail!("load-scale must be positive");
        }
        if self.mc_repeats == 0 {
            bail!("mc-repeats must be at least 1");
        }
        if !(self.pretrain_factor > 0.0) {
            bail!("pretrain-factor must be positive");
        }
        for p in [&self.case, &self.catalog, &self.pretrained].into_iter().flatten() {
            if !p.exists() {
                bail!("file not found: {}", p.display());
            }
        }
        self.search_config().validate()?;
        Ok(())
    }

    pub fn search_config(&self) -> SearchConfig {
        SearchConfig {
            iterations: self.iterations,
            horizon: self.horizon,
            kappa: self.kappa,
            batch: self.batch,
            explore: self.explore,
            gamma: self.gamma,
            alpha: self.alpha,
            eps0: self.eps0,
            threshold_mw: self.threshold_mw,
            seed: self.seed,
            hidden: self.hidden,
            out_features: self.out_features,
            hops: self.hops,
            head_width: self.head_width,
            budget_seconds: self.budget_seconds,
            max_grad_norm: self.max_grad_norm,
            ..SearchConfig::default()
        }
    }

    pub fn load_case(&self) -> Result<GridCase> {
        let path = self.case.as_ref().ok_or_else(|| anyhow!("no case given (use --case)"))?;
        let format = match &self.format {
            Some(f) => f.parse::<CaseFormat>()?,
            None => CaseFormat::from_path(path)
                .ok_or_else(|| anyhow!("cannot infer the format of {}; pass --format", path.display()))?,
        };
        load_case(path, format).with_context(|| format!("loading {}", path.display()))
    }
}
