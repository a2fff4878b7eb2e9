use clap::Parser;

use tgv_cli::{commands, Cli};

fn main() {
    let cli = Cli::parse();
    tgv_core::parallel::set_threads(cli.threads);
    if let Err(e) = commands::run(cli) {
        eprintln!("error: {e}");
        let mut source = std::error::Error::source(&e);
        while let Some(cause) = source {
            eprintln!("  caused by: {cause}");
            source = cause.source();
        }
        std::process::exit(e.exit_code());
    }
}
