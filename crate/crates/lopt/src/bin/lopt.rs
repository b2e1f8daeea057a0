use clap::Parser;

fn main() {
    let cli = lopt::cli::Cli::parse();
    if let Err(e) = lopt::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
