use clap::Parser;
use qforest::cli::{self, Cli};

fn main() {
    let code = cli::init_threads().and_then(|()| cli::execute(Cli::parse())).unwrap_or_else(|e| {
        eprintln!("error: {e}");
        2
    });
    std::process::exit(code);
}
