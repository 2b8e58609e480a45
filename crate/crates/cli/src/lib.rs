//! Command-line tools and the HTTP demo service.

pub mod app;
pub mod choices;
pub mod error;
pub mod load;
pub mod present;
pub mod serve;

use clap::Parser;

use crate::error::exit;

/// Parses `std::env::args`, runs the command and returns the exit status.
/// Failures print a single diagnostic line to stderr.
pub fn main_with_args() -> i32 {
    let cli = match app::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                exit::USAGE
            } else {
                exit::OK
            };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match app::run(cli, &mut lock) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            e.exit_code()
        }
    }
}
