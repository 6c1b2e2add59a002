//! IO companion to `lchs-vqs-core`: text file formats, the run
//! configuration with its bundled presets, and the subcommands behind the
//! `lchs-vqs` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;

pub use error::{CliError, Result};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "LCHS_VQS_THREADS";

/// Sizes the global thread pool from `threads` or [`THREADS_ENV`].
pub fn init_threads(threads: Option<usize>) -> Result<()> {
    let n = match threads {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse().map_err(|_| CliError::Config(format!("{THREADS_ENV}=`{v}` is not a count")))?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        // A second initialization in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}
