use clap::Parser;

fn main() {
    let cli = vdreg_cli::Cli::parse();
    std::process::exit(vdreg_cli::run(cli));
}
