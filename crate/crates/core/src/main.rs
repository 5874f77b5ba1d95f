use clap::Parser;

fn main() {
    let cli = evcost::cli::Cli::parse();
    std::process::exit(evcost::cli::run(cli));
}
