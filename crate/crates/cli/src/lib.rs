//! Command-line front end: argument parsing, dispatch to the library, and
//! report emission.

pub mod args;
pub mod report;
pub mod run;

pub use args::Cli;
pub use report::{CliError, Outcome};
pub use run::{command_name, dispatch};

/// Exit status for a run whose verdict is inconclusive under `--strict`.
pub const EXIT_INCONCLUSIVE: i32 = 2;

/// Runs a parsed command line and writes its report. Returns the exit status.
pub fn execute(cli: &Cli) -> Result<i32, CliError> {
    let outcome = dispatch(cli)?;
    let path = cli.common.report.as_deref();
    if cli.common.csv {
        let table = outcome.table.as_ref().ok_or_else(|| {
            CliError::Usage(format!(
                "`{}` has no tabular section",
                command_name(&cli.command)
            ))
        })?;
        report::write_csv(table, path)?;
    } else {
        let v = report::envelope(command_name(&cli.command), cli, &outcome);
        report::write_json(&v, path)?;
    }
    Ok(if cli.common.strict && outcome.inconclusive {
        EXIT_INCONCLUSIVE
    } else {
        0
    })
}
