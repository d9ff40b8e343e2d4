use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use wta_core::evaluation::EvalReport;
use wta_core::runner::{
    export_weight_maps, run_experiment_suite, test, train, write_reports, Checkpoint, Dataset, LayerSelector,
    RunConfig, Suite, CHECKPOINT_FILE,
};
use wta_core::{Result, WtaError};

macro_rules! config_flags {
    ($($field:ident),* $(,)?) => {
        /// Configuration: a TOML file of `key = value` pairs, overridden by flags.
        #[derive(Args, Debug, Default)]
        struct ConfigFlags {
            /// Config file
            #[arg(long, short = 'c')]
            config: Option<PathBuf>,
            /// Override any config key (repeatable)
            #[arg(long = "set", value_name = "KEY=VALUE")]
            set: Vec<String>,
            $(
                #[arg(long, value_name = "VALUE", help_heading = "Config keys")]
                $field: Option<String>,
            )*
        }

        impl ConfigFlags {
            fn overrides(&self) -> Result<Vec<(String, String)>> {
                let mut out = Vec::new();
                for kv in &self.set {
                    let (k, v) = kv
                        .split_once('=')
                        .ok_or_else(|| WtaError::config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
                    out.push((k.trim().to_string(), v.trim().to_string()));
                }
                $(
                    if let Some(v) = &self.$field {
                        out.push((stringify!($field).to_string(), v.clone()));
                    }
                )*
                Ok(out)
            }

            fn load(&self) -> Result<RunConfig> {
                let overrides = self.overrides()?;
                match &self.config {
                    Some(path) => RunConfig::load(path, &overrides),
                    None => RunConfig::from_parts("", &overrides),
                }
            }
        }
    };
}

config_flags!(
    design,
    top_down,
    seed,
    k_h,
    k_o,
    k_f,
    mu_max,
    c,
    weight_range,
    target_rate,
    psi_gain,
    psi_initial,
    psi_max,
    rate_decay,
    tau_fast,
    tau_slow,
    rate_exponent,
    window,
    init_fraction,
    train_count,
    test_count,
    duration,
    rate_hz,
    dt_ms,
    threshold,
    pairing,
    snapshots,
    checkpoint_every,
    assignment,
    assignment_count,
    output_dir,
    data_dir,
);

#[derive(Parser, Debug)]
#[command(name = "wta", version, about = "Spiking winner-take-all networks on MNIST")]
struct Cli {
    /// Log progress (repeat for more detail)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a network; resumes from <output_dir>/checkpoint.bin if present
    Train(ConfigFlags),
    /// Evaluate a trained checkpoint with plasticity disabled
    Test {
        #[command(flatten)]
        flags: ConfigFlags,
        /// Checkpoint to evaluate [default: <output_dir>/checkpoint.bin]
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Run all seeds of an experiment and aggregate the reports
    Suite {
        #[command(flatten)]
        flags: ConfigFlags,
        /// exp1 or exp2
        #[arg(long)]
        suite: String,
        /// Comma-separated seeds
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10")]
        seeds: Vec<u64>,
    },
    /// Write receptive-field images of a checkpoint's weights
    ExportWeights {
        #[arg(long)]
        checkpoint: PathBuf,
        /// all, layer<N>, or a circuit name
        #[arg(long, default_value = "all")]
        layer: String,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_data(config: &RunConfig) -> Result<Dataset> {
    let dir = config.resolve_data_dir();
    info!("loading MNIST from {}", dir.display());
    Dataset::load_mnist(&dir)
}

fn print_reports(reports: &[EvalReport]) {
    println!("{:<8} {:>9} {:>11} {:>17} {:>9}", "network", "accuracy", "confidence", "confidence_error", "abstain");
    for r in reports {
        println!(
            "{:<8} {:>9.4} {:>11.4} {:>17.4} {:>9}",
            r.meta.network, r.accuracy, r.confidence, r.confidence_error, r.abstained
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(flags) => {
            let config = flags.load()?;
            let data = load_data(&config)?;
            let cp = train(&config, &data.train)?;
            println!(
                "trained {} stimuli; checkpoint {}",
                cp.stimuli_seen,
                config.output_dir.join(CHECKPOINT_FILE).display()
            );
        }
        Command::Test { flags, checkpoint } => {
            let config = flags.load()?;
            let path = checkpoint.unwrap_or_else(|| config.output_dir.join(CHECKPOINT_FILE));
            let cp = Checkpoint::read(&path)?;
            let data = load_data(&config)?;
            let reports = test(&config, &cp, &data)?;
            write_reports(&reports, &config.output_dir)?;
            print_reports(&reports);
        }
        Command::Suite { flags, suite, seeds } => {
            let config = flags.load()?;
            let suite: Suite = suite.parse()?;
            let data = load_data(&config)?;
            let runs = run_experiment_suite(&config, suite, &seeds, &data)?;
            let failed = runs.iter().filter(|r| r.outcome.is_err()).count();
            for a in wta_core::runner::aggregate(&runs) {
                println!(
                    "{:<16} {:<4} {:<17} {:.4} ± {:.4} (n={})",
                    a.variant, a.network, a.metric, a.mean, a.stddev, a.runs
                );
            }
            if failed > 0 {
                return Err(WtaError::Runtime(format!("{failed} of {} runs failed", runs.len())));
            }
        }
        Command::ExportWeights { checkpoint, layer, out } => {
            let cp = Checkpoint::read(&checkpoint)?;
            let config = cp.config()?;
            let session = cp.restore(&config)?;
            let selector: LayerSelector = layer.parse()?;
            for path in export_weight_maps(&session.network, &selector, &out)? {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
