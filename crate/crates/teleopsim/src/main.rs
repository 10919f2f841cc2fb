use std::process::ExitCode;

fn main() -> ExitCode {
    teleopsim::cli::main()
}
