use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use faultchain_cli::{cmd_baseline, cmd_enumerate, cmd_report, cmd_train, ExperimentConfig, RunReport};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "faultchain", version, about = "Search power-grid fault chains that shed the most load")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate every fault chain and write the catalog and top-S table.
    Enumerate(Flags),
    /// Run the recurrent graph Q-network search.
    Train(Flags),
    /// Run a tabular baseline (pfw_rl or pfw_rl_te).
    Baseline(Flags),
    /// Merge run directories into comparison tables and a regret plot.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
}

/// Every flag is optional: unset flags fall back to `--config`, then defaults.
#[derive(Args)]
struct Flags {
    /// Flat `key = value` file with the same keys as the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    case: Option<PathBuf>,
    /// matpower or json; inferred from the extension when absent.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    load_scale: Option<f64>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    kappa: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    explore: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eps0: Option<f64>,
    #[arg(long)]
    threshold_mw: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    out_features: Option<usize>,
    #[arg(long)]
    hops: Option<usize>,
    #[arg(long)]
    head_width: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    budget_seconds: Option<f64>,
    #[arg(long)]
    mc_repeats: Option<usize>,
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Rows of the top-S table (defaults to --iterations).
    #[arg(long)]
    top: Option<usize>,
    #[arg(long)]
    which: Option<String>,
    #[arg(long)]
    pretrain_factor: Option<f64>,
    #[arg(long)]
    pretrain_iterations: Option<usize>,
    /// Q-table JSON to transfer instead of pretraining.
    #[arg(long)]
    pretrained: Option<PathBuf>,
    #[arg(long)]
    enumerate_large: bool,
    #[arg(long)]
    max_grad_norm: Option<f64>,
}

impl Flags {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let overrides = [
            ("case", path(&self.case)),
            ("format", self.format.clone()),
            ("load_scale", self.load_scale.map(|v| v.to_string())),
            ("horizon", self.horizon.map(|v| v.to_string())),
            ("iterations", self.iterations.map(|v| v.to_string())),
            ("kappa", self.kappa.map(|v| v.to_string())),
            ("batch", self.batch.map(|v| v.to_string())),
            ("explore", self.explore.map(|v| v.to_string())),
            ("gamma", self.gamma.map(|v| v.to_string())),
            ("alpha", self.alpha.map(|v| v.to_string())),
            ("eps0", self.eps0.map(|v| v.to_string())),
            ("threshold_mw", self.threshold_mw.map(|v| v.to_string())),
            ("hidden", self.hidden.map(|v| v.to_string())),
            ("out_features", self.out_features.map(|v| v.to_string())),
            ("hops", self.hops.map(|v| v.to_string())),
            ("head_width", self.head_width.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("budget_seconds", self.budget_seconds.map(|v| v.to_string())),
            ("mc_repeats", self.mc_repeats.map(|v| v.to_string())),
            ("catalog", path(&self.catalog)),
            ("out", path(&self.out)),
            ("top", self.top.map(|v| v.to_string())),
            ("which", self.which.clone()),
            ("pretrain_factor", self.pretrain_factor.map(|v| v.to_string())),
            ("pretrain_iterations", self.pretrain_iterations.map(|v| v.to_string())),
            ("pretrained", path(&self.pretrained)),
            ("enumerate_large", self.enumerate_large.then(|| "true".to_string())),
            ("max_grad_norm", self.max_grad_norm.map(|v| v.to_string())),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        Ok(cfg)
    }
}

fn print_runs(reports: &[RunReport]) {
    for r in reports {
        let regret = r.regret_mw.map(|v| format!("{v:.3}")).unwrap_or_else(|| "n/a".into());
        println!(
            "{} seed={} episodes={} discovered={} accumulated_tll_mw={:.3} regret_mw={} wall_clock_s={:.1}",
            r.algorithm, r.seed, r.episodes_run, r.discovered, r.accumulated_tll_mw, regret, r.wall_clock_seconds
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Enumerate(f) => {
            let s = cmd_enumerate(&f.resolve()?)?;
            println!(
                "chains={} max_tll_mw={:.3} risky={} top{}_sum_mw={:.3}",
                s.chains, s.max_tll_mw, s.risky, s.top, s.top_sum_mw
            );
        }
        Command::Train(f) => print_runs(&cmd_train(&f.resolve()?)?),
        Command::Baseline(f) => print_runs(&cmd_baseline(&f.resolve()?)?),
        Command::Report { runs, out } => {
            for r in cmd_report(&runs, &out)? {
                let p = &r.report;
                let regret = p.regret_mw.map(|v| format!("{v:.3}")).unwrap_or_else(|| "n/a".into());
                println!(
                    "{:<24} {:<10} S={:<6} TLL={:<14.3} regret={:<14} {:.1}s",
                    r.label, p.algorithm, p.discovered, p.accumulated_tll_mw, regret, p.wall_clock_seconds
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
