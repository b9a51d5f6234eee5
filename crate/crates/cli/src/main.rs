use clap::Parser;

fn main() {
    let cli = subelliptic::Cli::parse();
    std::process::exit(subelliptic::run(&cli));
}
