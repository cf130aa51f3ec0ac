use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use reduxcorr_cli::{
    cmd_agreement, cmd_correlate, cmd_evaluate, cmd_extract, cmd_functions, cmd_synth,
    cmd_train, RunConfig,
};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Extract,
    Correlate,
    Train,
    Evaluate,
    Agreement,
    Functions,
    Synth,
}

/// Prosodic features and reduction-prediction baselines for dialog audio.
#[derive(Debug, Parser)]
#[command(name = "reduxcorr", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// key=value run configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out` in the config)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let mut cfg = RunConfig::load(&cli.config)?;
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    let show = |files: &[PathBuf]| {
        for f in files {
            println!("{}", f.display());
        }
    };
    match cli.command {
        Command::Extract => show(&cmd_extract(&cfg)?),
        Command::Correlate => show(&cmd_correlate(&cfg)?),
        Command::Train => show(&cmd_train(&cfg)?),
        Command::Evaluate => {
            let (report, files) = cmd_evaluate(&cfg)?;
            show(&files);
            match report.r {
                Some(r) => println!("r={r:.6} n={}", report.n),
                None => println!("r=NA n={} (constant predictions)", report.n),
            }
        }
        Command::Agreement => {
            let (_, r, files) = cmd_agreement(&cfg)?;
            show(&files);
            println!("r={}", r.map_or_else(|| "NA".to_string(), |r| format!("{r:.6}")));
        }
        Command::Functions => show(&cmd_functions(&cfg)?),
        Command::Synth => show(&[cmd_synth(&cfg)?]),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("reduxcorr: {e:#}");
            ExitCode::FAILURE
        }
    }
}
