use clap::Parser;
use sarvessel::cli::{run, Cli};

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("sarvessel: {e}");
        std::process::exit(e.exit_code());
    }
}
