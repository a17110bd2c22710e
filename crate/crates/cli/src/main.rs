use std::io::{self, Write};
use std::process::ExitCode;

use clap::Parser;
use latticetok_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version exit 0, parse errors exit 2.
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let stdout = io::stdout();
    let stderr = io::stderr();
    let code = match run(&cli, &mut stdout.lock(), &mut stderr.lock()) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr.lock(), "error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
