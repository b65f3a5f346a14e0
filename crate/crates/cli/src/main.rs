use std::path::PathBuf;
use std::process::ExitCode;

use bell_hv_lab::{run, Command, Invocation};
use clap::Parser;

#[derive(Debug, Parser)]
#[command(name = "bell-hv-lab", version, about = "Seeded experiments on hidden-variables Bell models")]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
    /// Exit with status 3 when certify's premises are not met.
    #[arg(long)]
    require_certified: bool,
}

fn init_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("BELL_HV_LAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .map_err(|_| format!("BELL_HV_LAB_THREADS must be a non-negative integer, got `{value}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            // clap uses 2 for usage errors; help and version exit 0
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let inv = Invocation {
        command: args.command,
        config_path: args.config,
        seed: args.seed,
        output_dir: args.output_dir,
        require_certified: args.require_certified,
    };
    match run(&inv) {
        Ok(outcome) => {
            println!("{}: {}", inv.command, outcome.summary);
            for file in &outcome.files {
                println!("wrote {}", file.display());
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
