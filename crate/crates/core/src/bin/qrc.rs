//! `qrc` command-line front end.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qrc_core::data::SyntheticKind;
use qrc_core::experiment::{
    cmd_compare, cmd_export_qasm, cmd_run, cmd_synth, print_table, DataSource, ExperimentConfig,
    ExternalSource,
};
use qrc_core::Result;

#[derive(Parser)]
#[command(name = "qrc", version, about = "Quantum reservoir computing forecasts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON); built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate the quantum reservoir.
    Run(Common),
    /// Quantum reservoir vs echo-state network, plus external predictions.
    Compare {
        #[command(flatten)]
        common: Common,
        /// `step,truth,prediction` CSV from another model, as `path` or
        /// `variable=path`. Repeatable.
        #[arg(long)]
        external: Vec<String>,
    },
    /// Write one OpenQASM 2.0 program per timestep plus a manifest.
    ExportQasm(Common),
    /// Write a synthetic series as `t,value` CSV.
    Synth {
        #[command(flatten)]
        common: Common,
        /// sine, sum_of_sines or ramp.
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        length: Option<usize>,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.out_dir = out.clone();
    }
    config.resolve()
}

fn execute(command: Command) -> Result<()> {
    let stdout = std::io::stdout();
    match command {
        Command::Run(common) => {
            let config = load(&common)?;
            let reports = cmd_run(&config)?;
            print_table(&reports, stdout.lock())
        }
        Command::Compare { common, external } => {
            let config = load(&common)?;
            let external = external
                .iter()
                .map(|s| s.parse())
                .collect::<Result<Vec<ExternalSource>>>()?;
            let reports = cmd_compare(&config, &external)?;
            print_table(&reports, stdout.lock())
        }
        Command::ExportQasm(common) => {
            let config = load(&common)?;
            let manifest = cmd_export_qasm(&config)?;
            println!(
                "wrote {} programs to {}",
                manifest.steps.len(),
                config.out_dir.display()
            );
            Ok(())
        }
        Command::Synth {
            common,
            kind,
            length,
        } => {
            let config = load(&common)?;
            let (default_kind, default_length) = match &config.data {
                DataSource::Synthetic { shape, length } => (*shape, *length),
                _ => (SyntheticKind::SumOfSines, 244),
            };
            let kind = kind
                .as_deref()
                .map(str::parse)
                .transpose()?
                .unwrap_or(default_kind);
            let path = cmd_synth(&config, kind, length.unwrap_or(default_length))?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
