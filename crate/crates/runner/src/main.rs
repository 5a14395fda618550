use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(loadsel_runner::cli::main_with_args(std::env::args_os()))
}
