use clap::Parser;

fn main() -> std::process::ExitCode {
    let cli = roadscene::cli::Cli::parse();
    std::process::ExitCode::from(roadscene::cli::run(&cli))
}
