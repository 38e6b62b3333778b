//! Command-line runner for heterogeneous SNN experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hetsnn::analysis::halfcheetah_report;
use hetsnn::experiment::{
    fitdist, gradcheck, run_ablate, run_compare, run_directory, run_train, shapley_from_csv, stats,
    write_shapley_report, ExperimentConfig,
};

/// Environment variable that overrides the configured output directory.
const OUT_ENV: &str = "HSNN_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "hetsnn",
    version,
    about = "Heterogeneous spiking network experiments"
)]
struct Cli {
    /// Worker threads for population evaluation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `experiment.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Run directory; default `$HSNN_OUT_DIR/<name>` or `<output_dir>/<name>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one network and write its run directory.
    Train(RunArgs),
    /// Train every trainable-property mask and tabulate final rewards.
    Ablate(RunArgs),
    /// ES versus BPTT on CartPole over several horizons at equal episode budgets.
    Compare(RunArgs),
    /// Fit gamma and lognormal distributions to genome dumps or sample files.
    Fitdist {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Column to fit (default `tau_m_ms` when present, else the first).
        #[arg(long)]
        column: Option<String>,
        /// Keep only rows of this layer.
        #[arg(long)]
        layer: Option<usize>,
        #[arg(long, default_value_t = 40)]
        bins: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Shapley attribution of neuron properties from an ablation table.
    Shapley {
        /// `mask,mean[,sd]` rows, e.g. an `ablate.csv`.
        #[arg(required_unless_present = "halfcheetah")]
        input: Option<PathBuf>,
        /// Value of the empty coalition.
        #[arg(long = "empty", allow_negative_numbers = true)]
        empty: Option<f64>,
        /// Use the built-in HalfCheetah ablation table instead of a file.
        #[arg(long, conflicts_with = "input")]
        halfcheetah: bool,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Per-class firing rates of a trained classification run.
    Stats {
        /// Run directory containing `network.json` and `config.toml`.
        run: PathBuf,
        #[arg(long, default_value_t = 20)]
        per_class: usize,
        #[arg(long, default_value_t = 32)]
        neurons: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Check BPTT gradients against the Jacobian-product oracle.
    Gradcheck {
        #[arg(long, default_value_t = 200)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-8)]
        tolerance: f64,
    },
}

fn load(args: &RunArgs) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.experiment.seed = s;
    }
    if let Some(dir) = std::env::var_os(OUT_ENV).filter(|d| !d.is_empty()) {
        cfg.experiment.output_dir = PathBuf::from(dir);
    }
    cfg.validate()?;
    let dir = match &args.out {
        Some(d) => d.clone(),
        None => run_directory(&cfg),
    };
    Ok((cfg, dir))
}

fn print_csv(path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
    print!("{text}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    match cli.command {
        Command::Train(a) => {
            let (cfg, dir) = load(&a)?;
            let s = run_train(&cfg, &dir)?;
            println!("{}", serde_json::to_string_pretty(&s)?);
            eprintln!("wrote {}", dir.display());
        }
        Command::Ablate(a) => {
            let (cfg, dir) = load(&a)?;
            run_ablate(&cfg, &dir)?;
            print_csv(&dir.join("ablate.csv"))?;
        }
        Command::Compare(a) => {
            let (cfg, dir) = load(&a)?;
            run_compare(&cfg, &dir)?;
            print_csv(&dir.join("summary.csv"))?;
        }
        Command::Fitdist {
            inputs,
            column,
            layer,
            bins,
            out,
        } => {
            let paths: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
            fitdist(&paths, column.as_deref(), layer, bins, &out)?;
            print_csv(&out.join("fit.csv"))?;
        }
        Command::Shapley {
            input,
            empty,
            halfcheetah,
            out,
        } => {
            if halfcheetah {
                let report = halfcheetah_report(empty.unwrap_or(0.0));
                write_shapley_report(&report, &out)?;
            } else {
                shapley_from_csv(input.as_deref().expect("required by clap"), empty, &out)?;
            }
            print_csv(&out.join("shapley.csv"))?;
        }
        Command::Stats {
            run,
            per_class,
            neurons,
            seed,
            out,
        } => {
            stats(&run, per_class, neurons, seed, &out)?;
            print_csv(&out.join("firing.csv"))?;
        }
        Command::Gradcheck {
            cases,
            seed,
            tolerance,
        } => {
            let r = gradcheck(cases, seed, tolerance)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
            if r.failures > 0 || r.contraction_violations > 0 {
                bail!(
                    "{} of {} cases exceed {tolerance:e}; {} contraction violations",
                    r.failures,
                    r.cases,
                    r.contraction_violations
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
