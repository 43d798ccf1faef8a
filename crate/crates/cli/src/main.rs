use clap::Parser;

fn main() {
    let cli = tdkit_cli::Cli::parse();
    if let Err(e) = tdkit_cli::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
