use clap::Parser;

fn main() {
    // argument errors exit with code 2 via clap
    let cli = proxsim::cli::Cli::parse();
    if let Err(error) = proxsim::cli::execute(cli) {
        eprintln!("error: {error}");
        std::process::exit(error.exit_code());
    }
}
