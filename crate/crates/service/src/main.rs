use clap::Parser;

fn main() {
    if let Err(e) = gridpulse_service::cli::run(gridpulse_service::cli::Cli::parse()) {
        if e.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
            || e.downcast_ref::<serde_json::Error>().is_some_and(|j| j.io_error_kind() == Some(std::io::ErrorKind::BrokenPipe))
        {
            return;
        }
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
