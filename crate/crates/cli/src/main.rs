use clap::Parser;
use hotlink_cli::{load_config, reproduce_figure, run_experiment, CliError, Experiment, Figure};
use std::path::PathBuf;
use std::process::ExitCode;

/// Runs one experiment (or figure recipe) and appends its result to the
/// ledger in the output directory.
#[derive(Debug, Parser)]
#[command(name = "hotlink", version)]
struct Args {
    /// modes, kappa-sweep, chevron, cooling, retherm, transfer, bell,
    /// steady-scan, reset, or `reproduce <figure>`.
    experiment: String,
    /// Figure id for `reproduce`.
    figure: Option<String>,
    /// TOML file layered over the bundled preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; defaults to the config's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dotted override, e.g. `--set t_hot_k=1.0`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn run(args: Args) -> Result<(), CliError> {
    let cfg = load_config(args.config.as_deref(), &args.set)?;
    let out = args.out.unwrap_or_else(|| cfg.output_dir.clone());
    let entry = if args.experiment == "reproduce" {
        let fig: Figure = args
            .figure
            .ok_or_else(|| CliError::Usage("reproduce needs a figure id".into()))?
            .parse()?;
        reproduce_figure(fig, &cfg, &out)?
    } else {
        let exp: Experiment = args.experiment.parse()?;
        if let Some(extra) = args.figure {
            return Err(CliError::Usage(format!("unexpected argument `{extra}`")));
        }
        run_experiment(exp, &cfg, &out)?
    };
    println!("{}", serde_json::to_string(&entry).expect("ledger entry serialises"));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HOTLINK_LOG", "warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Usage(e.to_string().trim().to_owned());
            eprintln!("{}", err.to_json());
            return ExitCode::from(2);
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
