//! Library side of the `blockstream` command: configuration, file formats and
//! the subcommand implementations.

pub mod commands;
pub mod config;
pub mod io;

/// Exit code for a successful run.
pub const EXIT_OK: u8 = 0;
/// Bad input: unreadable files, malformed rows, invalid settings.
pub const EXIT_INPUT: u8 = 2;
/// The numbers themselves failed (non-stationary parameters, overflow).
pub const EXIT_NUMERIC: u8 = 3;

pub fn exit_code(err: &anyhow::Error) -> u8 {
    let numeric = err
        .chain()
        .filter_map(|e| e.downcast_ref::<blockstream::Error>())
        .any(blockstream::Error::is_numeric);
    if numeric {
        EXIT_NUMERIC
    } else {
        EXIT_INPUT
    }
}
