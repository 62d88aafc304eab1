use clap::Parser;

fn main() {
    let cli = permuta::cli::Cli::parse();
    std::process::exit(permuta::cli::run(&cli));
}
