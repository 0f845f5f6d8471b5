//! Test identifiers and the handshake test plan.

use std::fmt;
use std::str::FromStr;

use crate::model::{Capability, HandshakeMode, Registry};

use super::TlsError;

/// Identity of one handshake test: `<sig_id>|<kem_id>|<mode>` on the wire.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TestId {
    pub sig_id: String,
    pub kem_id: String,
    pub mode: HandshakeMode,
}

impl TestId {
    pub fn new(
        sig_id: impl Into<String>,
        kem_id: impl Into<String>,
        mode: HandshakeMode,
    ) -> Result<Self, TlsError> {
        let id = TestId {
            sig_id: sig_id.into(),
            kem_id: kem_id.into(),
            mode,
        };
        for part in [&id.sig_id, &id.kem_id] {
            if part.is_empty() {
                return Err(TlsError::InvalidPlan("empty algorithm id".into()));
            }
            if part.chars().any(|c| c.is_whitespace() || c == '|') {
                return Err(TlsError::InvalidPlan(format!(
                    "algorithm id {part:?} is not control-wire safe (whitespace or '|')"
                )));
            }
        }
        Ok(id)
    }
}

impl fmt::Display for TestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}|{}", self.sig_id, self.kem_id, self.mode)
    }
}

impl FromStr for TestId {
    type Err = TlsError;

    fn from_str(s: &str) -> Result<Self, TlsError> {
        let parts: Vec<&str> = s.split('|').collect();
        if parts.len() != 3 {
            return Err(TlsError::MalformedControl(format!(
                "test id {s:?} is not <sig>|<kem>|<mode>"
            )));
        }
        let mode = HandshakeMode::from_label(parts[2])
            .ok_or_else(|| TlsError::MalformedControl(format!("unknown mode {:?}", parts[2])))?;
        TestId::new(parts[0], parts[1], mode)
            .map_err(|e| TlsError::MalformedControl(e.to_string()))
    }
}

/// Ordered handshake tests plus window and run parameters. Every entry's
/// descriptors carry the HANDSHAKE capability and each (sig, kem, mode)
/// appears at most once; the session repeats the whole plan once per run.
#[derive(Debug, Clone, PartialEq)]
pub struct TestPlan {
    pub entries: Vec<TestId>,
    pub window_seconds: f64,
    pub num_runs: u32,
}

impl TestPlan {
    pub fn new(
        entries: Vec<TestId>,
        window_seconds: f64,
        num_runs: u32,
        registry: &Registry,
    ) -> Result<Self, TlsError> {
        if !(window_seconds > 0.0) {
            return Err(TlsError::InvalidPlan("window_seconds must be > 0".into()));
        }
        if num_runs < 1 {
            return Err(TlsError::InvalidPlan("num_runs must be >= 1".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for entry in &entries {
            if !seen.insert(entry.clone()) {
                return Err(TlsError::InvalidPlan(format!(
                    "duplicate plan entry {entry}"
                )));
            }
            for (label, id, want_kem) in [
                ("signature", &entry.sig_id, false),
                ("KEM", &entry.kem_id, true),
            ] {
                let desc = registry.find(id).ok_or_else(|| {
                    TlsError::InvalidPlan(format!("{label} algorithm {id:?} not in registry"))
                })?;
                let is_kem = desc.family == crate::model::AlgorithmFamily::Kem;
                if is_kem != want_kem {
                    return Err(TlsError::InvalidPlan(format!(
                        "{id:?} has the wrong family for its {label} slot"
                    )));
                }
                if !desc.has(Capability::Handshake) {
                    return Err(TlsError::InvalidPlan(format!(
                        "{id:?} lacks the HANDSHAKE capability"
                    )));
                }
            }
        }
        Ok(TestPlan {
            entries,
            window_seconds,
            num_runs,
        })
    }

    /// Full cartesian plan: every HANDSHAKE-capable signature crossed with
    /// every HANDSHAKE-capable KEM, in registry order, both modes per pair
    /// (first use immediately followed by session reuse).
    pub fn from_registry(
        registry: &Registry,
        window_seconds: f64,
        num_runs: u32,
    ) -> Result<Self, TlsError> {
        let mut entries = Vec::new();
        for sig in registry.signatures().filter(|d| d.has(Capability::Handshake)) {
            for kem in registry.kems().filter(|d| d.has(Capability::Handshake)) {
                for mode in [HandshakeMode::FirstUse, HandshakeMode::SessionReuse] {
                    entries.push(TestId::new(&sig.id, &kem.id, mode)?);
                }
            }
        }
        TestPlan::new(entries, window_seconds, num_runs, registry)
    }

    /// Total number of records a complete session yields.
    pub fn expected_records(&self) -> usize {
        self.entries.len() * self.num_runs as usize
    }
}
