//! Operational shell around the experiment: HTTP session server, event-log
//! persistence, data ingestion, report bundles and the command line.

pub mod api;
pub mod cli;
pub mod config;
pub mod ingest;
pub mod report;
pub mod state;
pub mod store;
