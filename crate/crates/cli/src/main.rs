use clap::Parser;

fn main() {
    let cli = heatopt_cli::Cli::parse();
    std::process::exit(heatopt_cli::cli(cli));
}
