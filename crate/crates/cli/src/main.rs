use clap::Parser;

fn main() {
    let cli = qkdlab::Cli::parse();
    std::process::exit(qkdlab::exit_code(&cli));
}
