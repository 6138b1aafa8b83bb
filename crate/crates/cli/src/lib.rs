//! Library half of the `adaptci` binary: config parsing, CSV ingestion,
//! and output serialization. Kept separate from `main` so integration
//! tests can exercise the pieces directly.

pub mod config;
pub mod ingest;
pub mod output;
