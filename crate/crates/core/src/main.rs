use std::process::ExitCode;

fn main() -> ExitCode {
    cpgd::cli::run(std::env::args_os())
}
