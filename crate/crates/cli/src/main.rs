use std::io;
use std::process::ExitCode;

fn main() -> ExitCode {
    let code = exspace_cli::main_with(std::env::args_os(), &mut io::stdout(), &mut io::stderr());
    // Program exit codes pass through; the OS keeps the low byte.
    ExitCode::from(code as u8)
}
