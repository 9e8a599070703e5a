use clap::Parser;

fn main() {
    let cli = bubblecast_cli::Cli::parse();
    if let Err(e) = bubblecast_cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
