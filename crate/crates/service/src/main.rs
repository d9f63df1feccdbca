use clap::Parser;

fn main() -> std::process::ExitCode {
    let cli = emonews_service::cli::Cli::parse();
    match emonews_service::cli::run(cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::FAILURE
        }
    }
}
