use std::process::ExitCode;

fn main() -> ExitCode {
    cran_duplex::cli::main_with_args(std::env::args_os())
}
