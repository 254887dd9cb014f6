//! Configuration files, energy logs, snapshots, checkpoints and the
//! config-driven run loop used by the command-line tool.

pub mod checkpoint;
pub mod config;
pub mod csv;
pub mod run;
pub mod snapshot;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointError};
pub use config::{parse_config, print_config, ConfigError, IcSelector, RunConfig, StudyKind};
pub use csv::{energy_csv_row, energy_csv_string, truncate_energy_csv, EnergyCsvWriter, ENERGY_CSV_HEADER};
pub use run::{run_config, run_study, setup_from_config, RunError, RunSummary};
pub use snapshot::{
    decode_snapshot, encode_snapshot, export_text, read_snapshot, write_snapshot, SnapshotError,
    SnapshotHeader,
};
