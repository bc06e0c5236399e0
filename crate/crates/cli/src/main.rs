use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = bcdm_cli::parse_args();
    match bcdm_cli::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
