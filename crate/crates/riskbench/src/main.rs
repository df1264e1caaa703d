use std::process::ExitCode;

fn main() -> ExitCode {
    riskbench::cli::main_with(std::env::args().collect())
}
