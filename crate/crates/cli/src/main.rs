use clap::Parser;

use ybcav_cli::{run_cli, Cli};

fn main() {
    let cli = Cli::parse();
    std::process::exit(run_cli(&cli));
}
