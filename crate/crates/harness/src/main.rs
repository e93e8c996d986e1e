use clap::Parser;

fn main() {
    let cli = aid_harness::cli::Cli::parse();
    std::process::exit(aid_harness::cli::run(cli));
}
