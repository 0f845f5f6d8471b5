//! pqbench: a benchmarking harness for post-quantum KEM and digital signature
//! schemes.
//!
//! The harness measures three things:
//!
//! - **Computational performance** ([`compute`]): how many times each
//!   cryptographic operation completes inside a fixed wall-clock window, plus
//!   peak memory usage extracted from Massif profiler output.
//! - **TLS performance** ([`tls`]): handshake throughput between a client and
//!   a server machine coordinated over a line-based control protocol, for both
//!   first-use and session-reuse handshakes, and per-operation throughput.
//! - **Aggregated results** ([`results`]): run averaging, top-N ranking under
//!   four criteria, filtering, and report emission, plus parsers for the raw
//!   output formats of the external tools the harness can drive.
//!
//! Algorithms are described by a data-file registry ([`model`]) and executed
//! through a pluggable [`provider`] layer: a deterministic mock provider for
//! self-contained runs and an external-process adapter for real backends.

pub mod cli;
pub mod compute;
pub mod model;
pub mod provider;
pub mod results;
pub mod timing;
pub mod tls;

use thiserror::Error;

/// Crate-wide error type; each module keeps its own error enum and this
/// aggregates them for callers that cross module boundaries (mainly the CLI).
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Provider(#[from] provider::ProviderError),
    #[error(transparent)]
    Compute(#[from] compute::ComputeError),
    #[error(transparent)]
    Tls(#[from] tls::TlsError),
    #[error(transparent)]
    Results(#[from] results::ResultsError),
}

impl Error {
    /// Stable machine-readable code for the underlying failure.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Model(e) => e.code(),
            Error::Provider(e) => e.code(),
            Error::Compute(e) => e.code(),
            Error::Tls(e) => e.code(),
            Error::Results(e) => e.code(),
        }
    }
}
