use clap::Parser;

fn main() {
    let cli = lord_core::cli::Cli::parse();
    if let Err(e) = lord_core::cli::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
