//! TLS benchmark suite: credential pre-generation, the client/server control
//! protocol, handshake throughput over real sockets, the TLS speed bench,
//! and the `s_time` output parser.
//!
//! The handshake itself is a simulation that executes real provider
//! operations in TLS-1.3-like order (KEM key exchange, transcript signature,
//! certificate transmission) with wire sizes taken from the registry, rather
//! than a full TLS stack. Session reuse presents an 8-byte token and skips
//! the signature operations and certificate bytes. Real-stack measurements
//! are ingested through [`stime::parse_s_time`].

pub mod client;
pub mod control;
pub mod credentials;
pub mod events;
pub mod handshake;
pub mod plan;
pub mod server;
pub mod session;
pub mod speed;
pub mod stime;

pub use client::{run_handshake_client, ClientReport};
pub use control::{
    decode_control, encode_control, ControlChannel, ControlMessage, MemoryControlChannel, Suite,
    PROTO_VERSION,
};
pub use credentials::{generate_credentials, load_manifest, CredentialEntry, CredentialManifest};
pub use events::{LogEntry, SessionEvent, SessionLog, Side};
pub use plan::{TestId, TestPlan};
pub use server::{run_handshake_server, ServerReport};
pub use speed::bench_tls_speed;
pub use stime::parse_s_time;

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TlsError {
    #[error("malformed control message: {0}")]
    MalformedControl(String),
    #[error("protocol version mismatch: ours {ours}, peer {theirs}")]
    VersionMismatch { ours: u32, theirs: u32 },
    #[error("control channel timed out waiting for {0}")]
    ControlTimeout(String),
    #[error("test {0} exceeded the retry budget")]
    TooManyRetries(String),
    #[error("connection refused by {0}")]
    ConnectRefused(String),
    #[error("handshake mismatch: {0}")]
    HandshakeMismatch(String),
    #[error("stream closed mid-message")]
    StreamClosed,
    #[error("frame of {0} bytes exceeds the frame cap")]
    FrameTooLarge(usize),
    #[error("malformed s_time output: {0}")]
    MalformedSTime(String),
    #[error("invalid test plan: {0}")]
    InvalidPlan(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("socket error: {0}")]
    Socket(#[from] std::io::Error),
    #[error(transparent)]
    Provider(#[from] crate::provider::ProviderError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

impl TlsError {
    pub fn code(&self) -> &'static str {
        match self {
            TlsError::MalformedControl(_) => "MALFORMED_CONTROL",
            TlsError::VersionMismatch { .. } => "VERSION_MISMATCH",
            TlsError::ControlTimeout(_) => "CONTROL_TIMEOUT",
            TlsError::TooManyRetries(_) => "TOO_MANY_RETRIES",
            TlsError::ConnectRefused(_) => "CONNECT_REFUSED",
            TlsError::HandshakeMismatch(_) => "HANDSHAKE_MISMATCH",
            TlsError::StreamClosed => "STREAM_CLOSED",
            TlsError::FrameTooLarge(_) => "FRAME_TOO_LARGE",
            TlsError::MalformedSTime(_) => "MALFORMED_S_TIME",
            TlsError::InvalidPlan(_) => "INVALID_PLAN",
            TlsError::Io { .. } | TlsError::Socket(_) => "IO_ERROR",
            TlsError::Provider(e) => e.code(),
            TlsError::Model(e) => e.code(),
        }
    }
}
