use std::process::ExitCode;

use spinlabor_cli::CliError;

fn main() -> ExitCode {
    match spinlabor_cli::run(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(e)) => {
            let code = e.exit_code();
            let _ = e.print();
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("spinlabor: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
