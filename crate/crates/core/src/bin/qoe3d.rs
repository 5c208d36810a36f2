use clap::Parser;
use tracing_subscriber::EnvFilter;

use qoe3d::cli::{run, Cli};

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("QOE3D_LOG").unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let json = cli.json;
    let outcome = run(cli);
    if json {
        println!("{}", outcome.report_json());
    } else if outcome.exit_code == 0 {
        println!("{}", outcome.summary);
    } else {
        eprintln!("{}", outcome.summary);
    }
    std::process::exit(outcome.exit_code);
}
