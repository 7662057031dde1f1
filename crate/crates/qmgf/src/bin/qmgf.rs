use clap::Parser;

fn main() {
    let cli = qmgf::cli::Cli::parse();
    std::process::exit(qmgf::cli::run(cli));
}
