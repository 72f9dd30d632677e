use std::process::ExitCode;

use clap::Parser;
use etdiode_cli::{Cli, EXIT_FAILURE, EXIT_OK};

fn main() -> ExitCode {
    match Cli::try_parse() {
        Ok(cli) => ExitCode::from(etdiode_cli::run(cli)),
        Err(e) => {
            // clap exits 2 on usage errors; our contract reserves 2 for monitor violations
            let code = if e.use_stderr() { EXIT_FAILURE } else { EXIT_OK };
            let _ = e.print();
            ExitCode::from(code)
        }
    }
}
