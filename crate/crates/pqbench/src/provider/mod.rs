//! Pluggable cryptographic backends.
//!
//! The benchmark engine only ever talks to the [`KemProvider`] and
//! [`SigProvider`] traits. The shipped implementation is a deterministic
//! mock ([`mock`]) whose correctness invariants (encaps/decaps agreement,
//! sign/verify round-trips, tamper detection) stand in for real scheme math;
//! real backends are reached by capturing external tool output through
//! [`adapter`] and feeding it to the parsers in [`crate::results`].

pub mod adapter;
pub mod mock;

pub use adapter::{run_command_template, CapturedOutput, ExternalAdapter, OutputKind, Substitutions};
pub use mock::{mock_kem, mock_sig, MockCostProfile, MockProviderFactory, OpCost};

use thiserror::Error;

use crate::model::AlgorithmDescriptor;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("algorithm {id} has family {family}, expected {expected}")]
    WrongFamily {
        id: String,
        family: String,
        expected: String,
    },
    #[error("failed to spawn {command:?}: {detail}")]
    SpawnFailed { command: String, detail: String },
    #[error("command {command:?} exited with status {status}: {stderr}")]
    NonzeroExit {
        command: String,
        status: i32,
        stderr: String,
    },
    #[error("provider operation failed: {0}")]
    OpFailed(String),
}

impl ProviderError {
    pub fn code(&self) -> &'static str {
        match self {
            ProviderError::WrongFamily { .. } => "WRONG_FAMILY",
            ProviderError::SpawnFailed { .. } => "SPAWN_FAILED",
            ProviderError::NonzeroExit { .. } => "NONZERO_EXIT",
            ProviderError::OpFailed(_) => "OP_PANIC",
        }
    }
}

/// Key-encapsulation operations. Output lengths follow the descriptor the
/// provider was built for; the shared secret is always 32 bytes.
pub trait KemProvider: Send {
    fn descriptor(&self) -> &AlgorithmDescriptor;
    fn keygen(&mut self) -> Result<(Vec<u8>, Vec<u8>), ProviderError>;
    fn encaps(&mut self, pk: &[u8]) -> Result<(Vec<u8>, Vec<u8>), ProviderError>;
    fn decaps(&mut self, sk: &[u8], ct: &[u8]) -> Result<Vec<u8>, ProviderError>;
}

/// Signature operations. `verify` reports failure through its return value,
/// not an error.
pub trait SigProvider: Send {
    fn descriptor(&self) -> &AlgorithmDescriptor;
    fn keypair(&mut self) -> Result<(Vec<u8>, Vec<u8>), ProviderError>;
    fn sign(&mut self, sk: &[u8], msg: &[u8]) -> Result<Vec<u8>, ProviderError>;
    fn verify(&mut self, pk: &[u8], msg: &[u8], sig: &[u8]) -> Result<bool, ProviderError>;
}

/// Builds providers on demand. The engine keeps one provider instance per
/// thread; factories must be shareable.
pub trait ProviderFactory: Send + Sync {
    fn kem(&self, desc: &AlgorithmDescriptor) -> Result<Box<dyn KemProvider>, ProviderError>;
    fn sig(&self, desc: &AlgorithmDescriptor) -> Result<Box<dyn SigProvider>, ProviderError>;
}
