use std::process::ExitCode;

fn main() -> ExitCode {
    if let Ok(raw) = std::env::var("FGSAN_THREADS") {
        match raw.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                {
                    eprintln!("error: thread pool: {e}");
                    return ExitCode::from(fgsan_cli::EXIT_FAILURE as u8);
                }
            }
            _ => {
                eprintln!("error: FGSAN_THREADS must be a positive integer, got '{raw}'");
                return ExitCode::from(fgsan_cli::EXIT_USAGE as u8);
            }
        }
    }
    ExitCode::from(fgsan_cli::run(std::env::args_os()) as u8)
}
