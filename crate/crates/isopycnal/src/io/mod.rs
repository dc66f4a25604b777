//! Configuration, persistence and the command-line drivers.

pub mod config;
pub mod run;
pub mod series;
pub mod snapshot;
pub mod verify;

pub use config::RunConfig;
pub use run::{exit_code, run, RunSummary};
pub use snapshot::{read_snapshot, write_snapshot, Coordinate, Snapshot};
