use std::path::PathBuf;

use casimir_sphere::cli::{run_cli, RunArgs};
use clap::Parser;

/// Casimir stress on layered magnetodielectric spheres, driven by a JSON job
/// file. All physical parameters live in the config.
#[derive(Parser, Debug)]
#[command(name = "casimir-sphere", version)]
struct Args {
    /// Job description (JSON).
    #[arg(long)]
    config: PathBuf,
    /// CSV destination, overriding `output.path`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    verbose: bool,
}

fn main() {
    let a = Args::parse();
    let code = run_cli(&RunArgs {
        config: a.config,
        out: a.out,
        threads: a.threads,
        verbose: a.verbose,
    });
    std::process::exit(code);
}
