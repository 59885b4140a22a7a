//! Command-line companion to `ngcf-core`: file formats, checkpoints,
//! reports, and the `ngcf` binary's subcommands.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod dataio;
pub mod report;

use clap::Parser;

/// Process exit code for an error: 1 for configuration and shape problems,
/// 2 for data problems, 3 for numerical divergence.
pub fn exit_code(e: &ngcf_core::Error) -> i32 {
    use ngcf_core::Error;
    match e {
        Error::Config(_) | Error::Shape { .. } => 1,
        Error::Parse { .. } | Error::Data(_) | Error::ZeroDegreeNode { .. } => 2,
        Error::Diverged { .. } => 3,
    }
}

/// Parses `argv` and runs the selected subcommand, returning the process
/// exit code. Usage errors exit 1; `--help` and `--version` exit 0.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match commands::Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match cli.command.run() {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
