use std::process::ExitCode;

fn main() -> ExitCode {
    corrrise::cli::main_with_args(std::env::args_os())
}
