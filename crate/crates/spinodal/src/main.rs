use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(spinodal::cli::main_with(std::env::args_os()))
}
