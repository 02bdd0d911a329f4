use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rominv::pipeline::{
    cmd_compare, cmd_extract, cmd_generate, cmd_invert, cmd_invert_all, cmd_invert_file, cmd_train, run_all,
    PipelineConfig, PipelineError, SurrogateKind,
};
use rominv::series::Regime;

#[derive(Parser)]
#[command(name = "rominv", version, about = "Windowed LSTM surrogates and adaptive Metropolis rate inversion")]
struct Cli {
    /// Pipeline config (JSON). Flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for every stage.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write clean and noisy displacement series for each rate.
    Generate {
        #[arg(long, value_delimiter = ',')]
        rates: Option<Vec<f64>>,
        #[arg(long)]
        noise_seed: Option<u64>,
    },
    /// Build a displacement series from a directory of legacy VTK snapshots.
    Extract {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        vector: String,
        #[arg(long, default_value_t = 1.0)]
        dt: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the surrogate for one windowing approach, or both.
    Train {
        #[arg(long, default_value = "both")]
        approach: String,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run adaptive Metropolis chains.
    Invert(InvertArgs),
    /// Collect every inversion into tables and plots.
    Compare,
    /// Every stage in order.
    Run,
}

#[derive(Args)]
struct InvertArgs {
    /// Every configured rate, surrogate and sample count.
    #[arg(long, conflicts_with_all = ["rate", "data"])]
    all: bool,
    /// One pipeline cell: the rate whose noisy series is inverted.
    #[arg(long)]
    rate: Option<f64>,
    /// Surrogate for a pipeline cell.
    #[arg(long, default_value = "sliding")]
    approach: SurrogateKind,
    /// Invert this CSV instead of a pipeline cell.
    #[arg(long, requires = "data_out")]
    data: Option<PathBuf>,
    /// Trained model for `--data`; omitted means the synthetic forward model.
    #[arg(long, requires = "data")]
    model: Option<PathBuf>,
    /// Output stem for `--data`: writes `<stem>.csv` and `<stem>.json`.
    #[arg(long = "out")]
    data_out: Option<PathBuf>,
    /// Use the synthetic forward model for the pipeline surrogates.
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    q0: Option<f64>,
    /// Lower and upper rate bound, as `lo,hi`.
    #[arg(long, value_delimiter = ',')]
    bounds: Option<Vec<f64>>,
    /// Covariance adaptation interval.
    #[arg(long)]
    adapt: Option<usize>,
    /// Burn-in fraction.
    #[arg(long)]
    burn: Option<f64>,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(dir) = &cli.out_dir {
        cfg.out_dir = dir.clone();
    }
    Ok(cfg)
}

fn parse_regimes(approach: &str) -> Result<Vec<Regime>, PipelineError> {
    match approach {
        "both" => Ok(vec![Regime::Nonoverlapping, Regime::Sliding]),
        other => other.parse::<Regime>().map(|r| vec![r]).map_err(|e| PipelineError::Config(e.to_string())),
    }
}

fn invert(mut cfg: PipelineConfig, a: &InvertArgs) -> Result<(), PipelineError> {
    if let Some(v) = a.seed {
        cfg.mcmc.seed = v;
    }
    if let Some(v) = a.q0 {
        cfg.mcmc.q0 = v;
    }
    if let Some(b) = &a.bounds {
        let [lo, hi] = b[..] else {
            return Err(PipelineError::Config(format!("--bounds takes two values, got {}", b.len())));
        };
        (cfg.mcmc.q_lower, cfg.mcmc.q_upper) = (lo, hi);
    }
    if let Some(v) = a.adapt {
        cfg.mcmc.m0 = v;
    }
    if let Some(v) = a.burn {
        cfg.mcmc.burn_in_fraction = v;
    }
    if a.exact {
        cfg.exact_surrogate = true;
    }
    if let Some(n) = a.n {
        cfg.sweep = vec![n];
    }
    if let (Some(data), Some(stem)) = (&a.data, &a.data_out) {
        let mcmc = cfg.mcmc_for(a.n.unwrap_or(cfg.mcmc.n));
        let p = cmd_invert_file(
            &cfg.source,
            &mcmc,
            data,
            a.model.as_deref(),
            &stem.with_extension("csv"),
            &stem.with_extension("json"),
        )?;
        println!("posterior mean {} std {} (acceptance {:.3})", p.mean, p.std, p.acceptance_rate);
        return Ok(());
    }
    if a.all {
        for c in cmd_invert_all(&cfg)? {
            println!(
                "{} q={} n={}: mean {} rel. error {:.4}",
                c.surrogate, c.rate, c.n, c.posterior.mean, c.relative_error
            );
        }
        return Ok(());
    }
    let rate = a.rate.ok_or_else(|| PipelineError::Config("give --rate, --all or --data".into()))?;
    let kind = if a.exact { SurrogateKind::Exact } else { a.approach };
    for &n in &cfg.sweep.clone() {
        let c = cmd_invert(&cfg, rate, kind, n)?;
        println!("{kind} q={rate} n={n}: mean {} rel. error {:.4}", c.posterior.mean, c.relative_error);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::Generate { rates, noise_seed } => {
            if let Some(r) = rates {
                cfg.rates = r;
            }
            if let Some(s) = noise_seed {
                cfg.noise.seed = s;
            }
            let m = cmd_generate(&cfg)?;
            println!("wrote {} series and {}", m.data.len() * 2, cfg.layout().manifest().display());
        }
        Command::Extract { dir, vector, dt, out } => {
            let s = cmd_extract(&dir, &vector, dt, &out)?;
            println!("wrote {} samples to {}", s.len(), out.display());
        }
        Command::Train { approach, epochs, seed } => {
            for regime in parse_regimes(&approach)? {
                let tc = match regime {
                    Regime::Nonoverlapping => &mut cfg.nonoverlapping,
                    Regime::Sliding => &mut cfg.sliding,
                };
                if let Some(e) = epochs {
                    tc.epochs = e;
                }
                if let Some(s) = seed {
                    tc.seed = s;
                }
                let t = cmd_train(&cfg, regime)?;
                println!(
                    "{regime}: loss {:e} -> {:e}, model at {}",
                    t.log.initial(),
                    t.log.last(),
                    cfg.layout().model(regime).display()
                );
            }
        }
        Command::Invert(args) => invert(cfg, &args)?,
        Command::Compare => print_report(&cmd_compare(&cfg)?),
        Command::Run => print_report(&run_all(&cfg)?),
    }
    Ok(())
}

fn print_report(report: &rominv::pipeline::ComparisonReport) {
    for s in &report.summary {
        println!("{:>15} n={:<6} mean relative error {:.4}", s.surrogate.to_string(), s.n, s.mean_relative_error);
    }
    for r in &report.reconstruction {
        println!(
            "{:>15} reconstruction mse {:.3e}, boundary jump {:.3e}",
            r.approach.to_string(),
            r.mean_mse,
            r.mean_boundary_jump
        );
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
