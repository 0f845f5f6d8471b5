//! Result processing: run averaging, ranking, filtering, parsers for
//! external tool output, CSV persistence, and report emission.
//!
//! Everything here is a pure function over in-memory data apart from the
//! file writers; concurrent invocation on disjoint inputs is safe.

pub mod average;
pub mod csvio;
pub mod parsers;
pub mod rank;
pub mod report;

pub use average::{
    average_cpu, average_handshake, average_memory, average_speed, AveragedCpu,
    AveragedHandshake, AveragedMemory, AveragedSpeed,
};
pub use csvio::{
    next_run_number, read_cpu_csv, read_handshake_csv, read_memory_csv, read_speed_csv,
    write_cpu_csv, write_handshake_csv, write_memory_csv, write_speed_csv,
};
pub use parsers::{parse_liboqs_speed_csv, parse_openssl_speed};
pub use rank::{
    apply_filters_cpu, apply_filters_handshake, apply_filters_memory, apply_filters_speed,
    rank_top_n_algorithms, rank_top_n_handshake, Direction, FilterSet, RankCriterion,
    RankedAlgorithm, RankedPair,
};
pub use report::{emit_report, ReportInputs, ReportOptions};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ResultsError {
    #[error("inconsistent group: {0}")]
    InconsistentGroup(String),
    #[error("algorithm {algorithm} is missing operations under criterion {criterion}: {detail}")]
    IncompleteTriple {
        algorithm: String,
        criterion: String,
        detail: String,
    },
    #[error("malformed CSV at row {row}: {detail}")]
    MalformedCsv { row: usize, detail: String },
    #[error("malformed speed output: {0}")]
    MalformedSpeedOutput(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

impl ResultsError {
    pub fn code(&self) -> &'static str {
        match self {
            ResultsError::InconsistentGroup(_) => "INCONSISTENT_GROUP",
            ResultsError::IncompleteTriple { .. } => "INCOMPLETE_TRIPLE",
            ResultsError::MalformedCsv { .. } => "MALFORMED_CSV",
            ResultsError::MalformedSpeedOutput(_) => "MALFORMED_SPEED_OUTPUT",
            ResultsError::InvalidArgument(_) => "INVALID_ARGUMENT",
            ResultsError::Io { .. } => "IO_ERROR",
            ResultsError::Model(e) => e.code(),
        }
    }
}
