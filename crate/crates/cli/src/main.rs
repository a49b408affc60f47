use clap::{Args, Parser, Subcommand};
use skewreg_cli::{run_to, CliError, ExperimentConfig, Kind};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "skewreg",
    about = "Numerical experiments for elliptic systems with skew-symmetric potentials"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in the config.
    Run(RunArgs),
    /// Run a parameter sweep (`experiment = "sweep"`).
    Sweep(RunArgs),
    /// Parse and validate a config, then print its canonical form and hash.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
    Version,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output`, then `out/`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

fn load(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    cfg.apply_overrides(args.seed, args.resolution)?;
    Ok(cfg)
}

fn execute(args: RunArgs, sweep: bool) -> Result<ExitCode, CliError> {
    let cfg = load(&args)?;
    if sweep != (cfg.experiment == Kind::Sweep) {
        return Err(CliError::Config(if sweep {
            format!("`sweep` needs experiment = \"sweep\", got \"{}\"", cfg.experiment)
        } else {
            "use the `sweep` subcommand for sweep configs".to_string()
        }));
    }
    let out = args
        .out
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let (rep, files) = run_to(&cfg, &out)?;
    if !args.quiet {
        print!("{}", rep.summary());
        for f in &files {
            println!("wrote {}", f.display());
        }
    }
    Ok(match rep.first_failure() {
        None => ExitCode::SUCCESS,
        Some(c) => {
            eprintln!("failed invariant: {} ({})", c.name, c.detail);
            ExitCode::from(1)
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => execute(a, false),
        Command::Sweep(a) => execute(a, true),
        Command::ValidateConfig { config } => ExperimentConfig::load(&config).map(|cfg| {
            print!("{}", cfg.canonical());
            println!("# config_hash={}", cfg.hash());
            ExitCode::SUCCESS
        }),
        Command::Version => {
            println!("skewreg {}", env!("CARGO_PKG_VERSION"));
            Ok(ExitCode::SUCCESS)
        }
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(e.exit_code())
    })
}
