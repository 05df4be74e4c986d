use clap::Parser;

fn main() {
    let cli = boxvi_cli::Cli::parse();
    if let Err(e) = boxvi_cli::run(&cli) {
        eprintln!("boxvi: {e}");
        std::process::exit(e.exit_code());
    }
}
