use clap::Parser;

fn main() {
    let cli = mmspeed_cli::Cli::parse();
    std::process::exit(mmspeed_cli::run(&cli));
}
