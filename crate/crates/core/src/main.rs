use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fdsc::dataio::partition_manifest;
use fdsc::harness::experiment::{evaluate_run, metrics_csv, prepare};
use fdsc::harness::{export_views, run_experiment, sweep, sweep_csv, ExperimentConfig};
use fdsc::metrics::MetricsReport;
use fdsc::{FdscError, Result};

/// Federated deep subspace clustering simulator.
#[derive(Parser)]
#[command(name = "fdsc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config (see presets/).
    #[arg(long)]
    config: PathBuf,
    /// Override a numeric field, e.g. `--set lambda3=0`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    tau: Option<usize>,
    #[arg(long)]
    lambda3: Option<f64>,
    /// Train clients one after another instead of on the thread pool.
    #[arg(long)]
    serial: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Split the dataset and print the partition manifest as JSON.
    Partition {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one experiment.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: u64,
        /// Output directory for CSVs, manifest and checkpoints.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-cluster from the final checkpoints of a finished run.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        run_dir: PathBuf,
    },
    /// Run one experiment per value of a single parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write PCA coordinates and label-sorted affinities for a finished run.
    Export {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        run_dir: PathBuf,
    },
}

fn load(common: &Common, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    for o in &common.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| FdscError::config(format!("override {o:?} is not KEY=VALUE")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| FdscError::config(format!("override {o:?} needs a number")))?;
        cfg.set_field(k.trim(), v)?;
    }
    if let Some(m) = common.m {
        cfg.m = m;
    }
    if let Some(q) = common.q {
        cfg.q = q;
    }
    if let Some(r) = common.r {
        cfg.r = r;
    }
    if let Some(t) = common.rounds {
        cfg.rounds = t;
    }
    if let Some(t) = common.tau {
        cfg.local_epochs = t;
    }
    if let Some(l) = common.lambda3 {
        cfg.lambda3 = l;
    }
    if common.serial {
        cfg.parallel = false;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_summary(label: &str, m: &MetricsReport) {
    println!(
        "{label:<10} ACC {:6.2}  NMI {:6.2}  AMI {:6.2}  ARI {:6.2}",
        m.acc, m.nmi, m.ami, m.ari
    );
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Partition { common, seed } => {
            let cfg = load(&common, seed)?;
            let (_, shards) = prepare(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&partition_manifest(&shards))?);
        }
        Command::Train { common, seed, out } => {
            let mut cfg = load(&common, Some(seed))?;
            if out.is_some() {
                cfg.output_dir = out;
            }
            let run = run_experiment(&cfg)?;
            print!("{}", metrics_csv(&run));
            print_summary(&run.method, &run.mean);
            print_summary("kmeans", &run.baseline_mean);
            eprintln!("wall time {:.1}s, config {}", run.wall_time_secs, &run.config_hash[..12]);
        }
        Command::Evaluate { common, seed, run_dir } => {
            let cfg = load(&common, seed)?;
            let results = evaluate_run(&cfg, &run_dir)?;
            println!("client,ACC,NMI,AMI,ARI");
            for r in &results {
                let m = &r.metrics;
                println!("{},{:.4},{:.4},{:.4},{:.4}", r.client_id, m.acc, m.nmi, m.ami, m.ari);
            }
            let all: Vec<MetricsReport> = results.iter().map(|r| r.metrics).collect();
            print_summary("mean", &MetricsReport::mean(&all));
        }
        Command::Sweep {
            common,
            seed,
            axis,
            values,
            out,
        } => {
            let mut cfg = load(&common, seed)?;
            if out.is_some() {
                cfg.output_dir = out;
            }
            let rows = sweep(&cfg, &axis, &values)?;
            print!("{}", sweep_csv(&axis, &rows));
        }
        Command::Export { common, seed, run_dir } => {
            let cfg = load(&common, seed)?;
            for p in export_views(&cfg, &run_dir)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
