//! The `enumerate`, `train` and `baseline` commands.

use crate::config::{Baseline, ExperimentConfig};
use anyhow::{bail, Context, Result};
use faultchain::agent::{run_search, EpisodeRecord};
use faultchain::baselines::{pfw_rl_run, pfw_rl_te_run, te_pretrain, PretrainedTable};
use faultchain::env::{FaultChain, FaultChainEnv};
use faultchain::grid::GridCase;
use faultchain::grnn::save_checkpoint;
use faultchain::oracle::{count_risky, enumerate_from_env, regret_series, top_s, ChainCatalog};
use serde::{Deserialize, Serialize};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Catalogs with more leaves than this are only built on request.
pub const AUTO_ENUMERATE_LEAVES: f64 = 2e6;

/// Result of one search run; `train` and `baseline` share this schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub algorithm: String,
    pub seed: u64,
    pub iterations: usize,
    pub episodes_run: usize,
    pub discovered: usize,
    pub accumulated_tll_mw: f64,
    /// S used for the top-S reference (episodes completed in budget mode).
    pub regret_s: Option<usize>,
    pub reference_mw: Option<f64>,
    pub regret_mw: Option<f64>,
    pub regret_series_mw: Vec<f64>,
    pub exhausted: bool,
    pub budget_hit: bool,
    pub train_steps: Option<u64>,
    pub wall_clock_seconds: f64,
    pub config: ExperimentConfig,
}

#[derive(Debug, Serialize)]
pub struct EnumerationSummary {
    pub case: Option<PathBuf>,
    pub load_scale: f64,
    pub horizon: usize,
    pub chains: usize,
    pub max_tll_mw: f64,
    pub threshold_mw: f64,
    pub risky: usize,
    pub top: usize,
    pub top_sum_mw: f64,
    pub padded: usize,
}

/// Number of chains if nothing cascades: n (n−1) … (n−P+1).
pub fn estimated_leaves(n_branches: usize, horizon: usize) -> f64 {
    (0..horizon).map(|k| n_branches.saturating_sub(k) as f64).product()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn write_jsonl<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = create(path)?;
    for r in rows {
        serde_json::to_writer(&mut w, &r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn join(actions: &[usize]) -> String {
    actions.iter().map(|a| a.to_string()).collect::<Vec<_>>().join("-")
}

fn enumerate(env: &mut FaultChainEnv, verbose: bool) -> Result<ChainCatalog> {
    if !verbose {
        return Ok(enumerate_from_env(env, true, None)?);
    }
    let started = Instant::now();
    let mut progress = |done: usize, total: usize| {
        if done % 10 == 0 || done == total {
            eprintln!("enumerate: {done}/{total} first-stage branches ({:.0} s)", started.elapsed().as_secs_f64());
        }
    };
    // Large spaces drop the transition cache per subtree to bound memory.
    Ok(enumerate_from_env(env, false, Some(&mut progress))?)
}

/// Reads `--catalog` or enumerates the space when it is small enough (or
/// `--enumerate-large` is set). `None` means regret cannot be computed.
pub fn obtain_catalog(cfg: &ExperimentConfig, case: &GridCase) -> Result<Option<ChainCatalog>> {
    if let Some(path) = &cfg.catalog {
        let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let cat = ChainCatalog::read_jsonl(BufReader::new(f), cfg.horizon)
            .with_context(|| format!("reading catalog {}", path.display()))?;
        if cat.chains().iter().any(|c| c.actions.len() > cfg.horizon) {
            bail!("catalog {} holds chains longer than horizon {}", path.display(), cfg.horizon);
        }
        return Ok(Some(cat));
    }
    let leaves = estimated_leaves(case.n_branches(), cfg.horizon);
    if leaves > AUTO_ENUMERATE_LEAVES && !cfg.enumerate_large {
        eprintln!("note: chain space has ~{leaves:.0} leaves; pass --catalog or --enumerate-large for regret");
        return Ok(None);
    }
    let mut env = FaultChainEnv::new(case, cfg.load_scale, cfg.horizon)?;
    Ok(Some(enumerate(&mut env, leaves > AUTO_ENUMERATE_LEAVES)?))
}

pub fn cmd_enumerate(cfg: &ExperimentConfig) -> Result<EnumerationSummary> {
    cfg.validate()?;
    let case = cfg.load_case()?;
    let leaves = estimated_leaves(case.n_branches(), cfg.horizon);
    if leaves > AUTO_ENUMERATE_LEAVES && !cfg.enumerate_large {
        bail!("chain space has ~{leaves:.0} leaves; pass --enumerate-large to enumerate it anyway");
    }
    let mut env = FaultChainEnv::new(&case, cfg.load_scale, cfg.horizon)?;
    let cat = enumerate(&mut env, leaves > AUTO_ENUMERATE_LEAVES)?;
    fs::create_dir_all(&cfg.out)?;

    let mut w = create(&cfg.out.join("catalog.jsonl"))?;
    cat.write_jsonl(&mut w)?;
    w.flush()?;

    let top = cfg.top.unwrap_or(cfg.iterations);
    let best = top_s(&cat, top);
    let mut w = create(&cfg.out.join("top_s.csv"))?;
    writeln!(w, "rank,tll_mw,actions")?;
    for (i, c) in cat.chains().iter().take(top).enumerate() {
        writeln!(w, "{},{},{}", i + 1, c.tll_mw, join(&c.actions))?;
    }
    w.flush()?;

    let summary = EnumerationSummary {
        case: cfg.case.clone(),
        load_scale: cfg.load_scale,
        horizon: cfg.horizon,
        chains: cat.len(),
        max_tll_mw: cat.max_tll(),
        threshold_mw: cfg.threshold_mw,
        risky: count_risky(&cat, cfg.threshold_mw),
        top,
        top_sum_mw: best.sum(),
        padded: best.padded,
    };
    write_json(&cfg.out.join("summary.json"), &summary)?;
    Ok(summary)
}

struct RawRun {
    chains: Vec<FaultChain>,
    episodes: Vec<EpisodeRecord>,
    exhausted: bool,
    budget_hit: bool,
    train_steps: Option<u64>,
    episode_ms: Vec<f64>,
}

fn finish_run(
    algorithm: String,
    cfg: &ExperimentConfig,
    raw: &RawRun,
    catalog: Option<&ChainCatalog>,
    wall: f64,
    dir: &Path,
) -> Result<RunReport> {
    fs::create_dir_all(dir)?;
    write_jsonl(&dir.join("episodes.jsonl"), &raw.episodes)?;
    write_jsonl(&dir.join("chains.jsonl"), raw.chains.iter().map(|c| c.to_record()))?;
    write_json(&dir.join("timing.json"), &serde_json::json!({ "wall_clock_seconds": wall, "episode_ms": raw.episode_ms }))?;

    let discovered: Vec<Vec<usize>> = raw.chains.iter().map(|c| c.actions()).collect();
    let accumulated: f64 = raw.chains.iter().map(|c| c.tll()).sum();
    let s = if cfg.budget_seconds.is_some() { raw.episodes.len() } else { cfg.iterations };
    let (regret_s, reference, regret, series) = match catalog {
        Some(cat) => {
            let r = regret_series(cat, &discovered, s)?;
            let mut w = create(&dir.join("regret.csv"))?;
            r.write_csv(&mut w)?;
            w.flush()?;
            (Some(s), Some(r.reference_mw), Some(r.final_regret()), r.regret_mw)
        }
        None => (None, None, None, Vec::new()),
    };
    let report = RunReport {
        algorithm,
        seed: cfg.seed,
        iterations: cfg.iterations,
        episodes_run: raw.episodes.len(),
        discovered: discovered.len(),
        accumulated_tll_mw: accumulated,
        regret_s,
        reference_mw: reference,
        regret_mw: regret,
        regret_series_mw: series,
        exhausted: raw.exhausted,
        budget_hit: raw.budget_hit,
        train_steps: raw.train_steps,
        wall_clock_seconds: wall,
        config: cfg.clone(),
    };
    write_json(&dir.join("report.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Serialize)]
struct Stat {
    mean: f64,
    sd: f64,
}

fn stat(xs: &[f64]) -> Stat {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Stat { mean, sd: var.sqrt() }
}

fn write_repeat_summary(dir: &Path, reports: &[RunReport]) -> Result<()> {
    let col = |f: &dyn Fn(&RunReport) -> Option<f64>| -> Option<Stat> {
        reports.iter().map(f).collect::<Option<Vec<_>>>().map(|v| stat(&v))
    };
    let summary = serde_json::json!({
        "algorithm": reports[0].algorithm,
        "repeats": reports.len(),
        "seeds": reports.iter().map(|r| r.seed).collect::<Vec<_>>(),
        "discovered": col(&|r| Some(r.discovered as f64)),
        "accumulated_tll_mw": col(&|r| Some(r.accumulated_tll_mw)),
        "regret_mw": col(&|r| r.regret_mw),
        "wall_clock_seconds": col(&|r| Some(r.wall_clock_seconds)),
    });
    write_json(&dir.join("summary.json"), &summary)
}

/// Runs `one` for every repeat (seed + r). A single repeat writes straight
/// into `--out`; several write `rep_000`, `rep_001`, … plus a summary.
fn repeated(
    cfg: &ExperimentConfig,
    mut one: impl FnMut(&ExperimentConfig, &Path) -> Result<RunReport>,
) -> Result<Vec<RunReport>> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out)?;
    if cfg.mc_repeats == 1 {
        return Ok(vec![one(cfg, &cfg.out)?]);
    }
    let mut reports = Vec::with_capacity(cfg.mc_repeats);
    for r in 0..cfg.mc_repeats {
        let rep = ExperimentConfig { seed: cfg.seed + r as u64, mc_repeats: 1, ..cfg.clone() };
        reports.push(one(&rep, &cfg.out.join(format!("rep_{r:03}")))?);
    }
    write_repeat_summary(&cfg.out, &reports)?;
    Ok(reports)
}

pub fn cmd_train(cfg: &ExperimentConfig) -> Result<Vec<RunReport>> {
    cfg.validate()?;
    let case = cfg.load_case()?;
    let catalog = obtain_catalog(cfg, &case)?;
    repeated(cfg, |c, dir| {
        let mut env = FaultChainEnv::new(&case, c.load_scale, c.horizon)?;
        let started = Instant::now();
        let out = run_search(&mut env, &c.search_config())?;
        let wall = started.elapsed().as_secs_f64();
        fs::create_dir_all(dir)?;
        save_checkpoint(&out.params, &dir.join("checkpoint.json"))?;
        let raw = RawRun {
            chains: out.chains,
            episodes: out.episodes,
            exhausted: out.exhausted,
            budget_hit: out.budget_hit,
            train_steps: Some(out.train_steps),
            episode_ms: out.episode_ms,
        };
        finish_run(format!("grqn_k{}", c.kappa), c, &raw, catalog.as_ref(), wall, dir)
    })
}

pub fn cmd_baseline(cfg: &ExperimentConfig) -> Result<Vec<RunReport>> {
    cfg.validate()?;
    let case = cfg.load_case()?;
    let catalog = obtain_catalog(cfg, &case)?;
    let pretrained = match (cfg.which, &cfg.pretrained) {
        (Baseline::PfwRl, _) => None,
        (Baseline::PfwRlTe, Some(path)) => {
            Some(PretrainedTable::load(path).with_context(|| format!("loading table {}", path.display()))?)
        }
        (Baseline::PfwRlTe, None) => {
            let pre_cfg = ExperimentConfig { budget_seconds: None, ..cfg.clone() }.search_config();
            let t = te_pretrain(&case, cfg.pretrain_factor, cfg.pretrain_iterations, &pre_cfg)?;
            fs::create_dir_all(&cfg.out)?;
            t.save(&cfg.out.join("pretrained.json"))?;
            Some(t)
        }
    };
    repeated(cfg, |c, dir| {
        let mut env = FaultChainEnv::new(&case, c.load_scale, c.horizon)?;
        let started = Instant::now();
        let out = match &pretrained {
            None => pfw_rl_run(&mut env, &c.search_config())?,
            Some(t) => pfw_rl_te_run(&mut env, &c.search_config(), t)?,
        };
        let wall = started.elapsed().as_secs_f64();
        fs::create_dir_all(dir)?;
        PretrainedTable { q: out.table, load_factor: c.load_scale }.save(&dir.join("qtable.json"))?;
        let raw = RawRun {
            chains: out.chains,
            episodes: out.episodes,
            exhausted: out.exhausted,
            budget_hit: out.budget_hit,
            train_steps: None,
            episode_ms: out.episode_ms,
        };
        finish_run(c.which.name().to_string(), c, &raw, catalog.as_ref(), wall, dir)
    })
}
