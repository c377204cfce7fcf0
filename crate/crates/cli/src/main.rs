use std::path::PathBuf;
use std::process::ExitCode;

use cauchy_cli::config::RunConfig;
use cauchy_cli::{commands, CliError, Invocation};
use clap::{Parser, Subcommand};

/// Lateral Cauchy problem reconstruction with kernel regularization.
#[derive(Parser)]
#[command(name = "cauchy", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reconstruct the field on the strip and write the solution bundle.
    Solve(Args),
    /// Apply the smoothing kernel to a `t,value` series.
    Mollify(Args),
    /// Write boundary data and the exact field of a manufactured solution.
    Manufacture(Args),
    /// Sweep the regularization parameter over `alpha_list`.
    AlphaStudy(Args),
    /// Tabulate raw and regularized mode gains over `omega_grid`.
    Probe(Args),
}

#[derive(clap::Args)]
struct Args {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reject irrational-looking q.
    #[arg(long)]
    strict_q: bool,
}

type Runner = fn(&Invocation) -> Result<(), CliError>;

fn invocation(args: &Args) -> Result<Invocation, CliError> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(base) = args.config.parent() {
        config.resolve_paths(base);
    }
    Ok(Invocation {
        config,
        out: args.out.clone(),
        strict_q: args.strict_q,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (args, run): (&Args, Runner) = match &cli.command {
        Command::Solve(a) => (a, commands::run_solve),
        Command::Mollify(a) => (a, commands::run_mollify),
        Command::Manufacture(a) => (a, commands::run_manufacture),
        Command::AlphaStudy(a) => (a, commands::run_alpha_study),
        Command::Probe(a) => (a, commands::run_probe),
    };
    match invocation(args).and_then(|inv| run(&inv)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
