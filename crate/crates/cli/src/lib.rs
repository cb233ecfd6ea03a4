//! File formats, configuration, snapshots and command implementations for
//! the `procal` binary.

pub mod commands;
pub mod config;
pub mod snapshot;
pub mod stream;
