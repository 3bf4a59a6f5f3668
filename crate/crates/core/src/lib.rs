//! Individual mobility patterns from check-in histories.
//!
//! The pipeline runs in four stages, one module each:
//!
//! 1. [`ingest`] parses check-in files into per-user, time-ordered histories;
//! 2. [`taxonomy`] rewrites venue categories into abstract place labels;
//! 3. [`sessionize`] cuts each user's labeled visits into per-day sequences;
//! 4. [`miner`] finds frequent sequential patterns, and [`graph`] builds the
//!    weighted mobility graph.
//!
//! [`store`] and [`service`] expose the results over HTTP; [`cli`] is the batch
//! front end.

pub mod cli;
pub mod graph;
pub mod ingest;
pub mod miner;
pub mod pipeline;
pub mod service;
pub mod sessionize;
pub mod store;
pub mod taxonomy;

pub use graph::{build_graph, MobilityGraph};
pub use ingest::{ingest_file, parse_line, CheckinRecord, IngestReport, UserHistory};
pub use miner::{count_support, mine, MinSupport, MiningConfig, SequentialPattern};
pub use pipeline::UserData;
pub use sessionize::{sessionize, SessionOptions, VisitSequence};
pub use store::DatasetStore;
pub use taxonomy::{load_taxonomy, relabel, LabelTaxonomy, LabeledVisit};
