use clap::Parser;

fn main() {
    let cli = tgp_cli::args::Cli::parse();
    std::process::exit(tgp_cli::dispatch(cli));
}
