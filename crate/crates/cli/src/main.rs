use clap::Parser;
use sparse_cce_cli::commands::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
