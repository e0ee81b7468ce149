//! Configuration files, binary snapshots and CSV time series.

pub mod config;
pub mod csv;
pub mod snapshot;

pub use config::{parse_config, RunConfig};
pub use snapshot::{read_snapshot, read_snapshot_dir, write_snapshot};
