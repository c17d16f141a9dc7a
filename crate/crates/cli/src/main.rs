use clap::Parser;
use weylat_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("weylat: {e}");
        std::process::exit(e.exit_code());
    }
}
