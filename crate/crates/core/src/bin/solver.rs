use clap::{Parser, Subcommand};
use deltashell::config::{validate, RunConfig};
use deltashell::runner::{run, write_outputs};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "solver", about = "Birman-Schwinger spectral solver for Dirac delta-shell interactions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config without computing anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the experiment named in the config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = "SOLVER_THREADS")]
        threads: Option<usize>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => {
            let diags = validate(&config);
            if diags.is_empty() {
                println!("OK");
                ExitCode::SUCCESS
            } else {
                for d in &diags {
                    println!("{d}");
                }
                ExitCode::from(1)
            }
        }
        Command::Run { config, threads, out_dir } => {
            if let Some(n) = threads {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: cannot configure {n} threads: {e}");
                    return ExitCode::from(1);
                }
            }
            let cfg = match RunConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            let diags = cfg.diagnostics();
            if !diags.is_empty() {
                for d in &diags {
                    eprintln!("config: {d}");
                }
                return ExitCode::from(1);
            }
            let start = Instant::now();
            let report = match run(&cfg) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(if e.is_numerical() { 2 } else { 1 });
                }
            };
            for line in &report.summary {
                println!("{line}");
            }
            match write_outputs(&out_dir, &report.outputs) {
                Ok(paths) => {
                    for p in paths {
                        println!("wrote {}", p.display());
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            }
            eprintln!("elapsed {:.3} s", start.elapsed().as_secs_f64());
            ExitCode::SUCCESS
        }
    }
}
