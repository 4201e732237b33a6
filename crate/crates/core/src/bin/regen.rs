use std::process::ExitCode;

fn main() -> ExitCode {
    regen::cli::main_with_args(std::env::args_os())
}
