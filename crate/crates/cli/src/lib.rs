//! Command-line front end: dataset generation, training, cross-validation,
//! ablation, biomarker ranking, gradient checking and plot-data export.

pub mod args;
pub mod commands;
pub mod results;

use std::ffi::OsString;

use clap::Parser;

pub use args::{Cli, Command};
pub use commands::Outcome;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Parses `argv` and runs the command, returning the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli.command) {
        Ok(Outcome::Success) => EXIT_OK,
        Ok(Outcome::Failed) => EXIT_FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_FAILURE
        }
    }
}

fn dispatch(command: &Command) -> anyhow::Result<Outcome> {
    use commands::*;
    match command {
        Command::Synth(a) => cmd_synth(a).map(|_| Outcome::Success),
        Command::Train(a) => cmd_train(a).map(|_| Outcome::Success),
        Command::Cv(a) => cmd_cv(a).map(|_| Outcome::Success),
        Command::Ablate(a) => cmd_ablate(a).map(|_| Outcome::Success),
        Command::Biomarkers(a) => cmd_biomarkers(a).map(|_| Outcome::Success),
        Command::Gradcheck(a) => cmd_gradcheck(a).map(|(_, o)| o),
        Command::PlotData(a) => cmd_plot_data(a).map(|_| Outcome::Success),
    }
}
