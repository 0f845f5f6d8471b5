//! Shared domain types: the algorithm registry, run configuration, and the
//! measurement record types every other module produces or consumes.
//!
//! Everything here is immutable after load and safe to share read-only across
//! threads.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed registry: {0}")]
    MalformedRegistry(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ModelError {
    pub fn code(&self) -> &'static str {
        match self {
            ModelError::MalformedRegistry(_) => "MALFORMED_REGISTRY",
            ModelError::InvalidRecord(_) => "INVALID_RECORD",
            ModelError::InvalidConfig(_) => "INVALID_CONFIG",
            ModelError::Io { .. } => "IO_ERROR",
        }
    }
}

/// Whether a scheme encapsulates keys or signs messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AlgorithmFamily {
    #[serde(rename = "KEM")]
    Kem,
    #[serde(rename = "SIGNATURE")]
    Signature,
}

impl fmt::Display for AlgorithmFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlgorithmFamily::Kem => write!(f, "KEM"),
            AlgorithmFamily::Signature => write!(f, "SIGNATURE"),
        }
    }
}

/// Claimed NIST security category. `Unknown` covers classical baselines and
/// hybrid composites that have no single category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum SecurityLevel {
    Unknown,
    One,
    Three,
    Five,
}

impl From<SecurityLevel> for u8 {
    fn from(l: SecurityLevel) -> u8 {
        match l {
            SecurityLevel::Unknown => 0,
            SecurityLevel::One => 1,
            SecurityLevel::Three => 3,
            SecurityLevel::Five => 5,
        }
    }
}

impl TryFrom<u8> for SecurityLevel {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            0 => Ok(SecurityLevel::Unknown),
            1 => Ok(SecurityLevel::One),
            3 => Ok(SecurityLevel::Three),
            5 => Ok(SecurityLevel::Five),
            other => Err(format!("security_level must be 0, 1, 3 or 5, got {other}")),
        }
    }
}

/// Which test suites an algorithm participates in. Absence of a flag models
/// the per-algorithm exclusions of the underlying libraries (e.g. schemes
/// that generate certificates but cannot complete a TLS handshake).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Capability {
    #[serde(rename = "CPU_BENCH")]
    CpuBench,
    #[serde(rename = "MEM_BENCH")]
    MemBench,
    #[serde(rename = "HANDSHAKE")]
    Handshake,
    #[serde(rename = "SPEED")]
    Speed,
}

impl Capability {
    pub const ALL: [Capability; 4] = [
        Capability::CpuBench,
        Capability::MemBench,
        Capability::Handshake,
        Capability::Speed,
    ];
}

/// Identity, sizes, and test participation of one algorithm.
///
/// `payload_bytes` is the ciphertext size for KEMs and the signature size for
/// signature schemes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmDescriptor {
    pub id: String,
    pub family: AlgorithmFamily,
    pub security_level: SecurityLevel,
    pub public_key_bytes: u64,
    pub private_key_bytes: u64,
    pub payload_bytes: u64,
    pub standardised: bool,
    pub hybrid: bool,
    pub capabilities: BTreeSet<Capability>,
}

impl AlgorithmDescriptor {
    pub fn has(&self, cap: Capability) -> bool {
        self.capabilities.contains(&cap)
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.id.is_empty() {
            return Err(ModelError::MalformedRegistry("empty algorithm id".into()));
        }
        if self.id.chars().any(|c| c == ',' || c == '"' || c.is_control()) {
            return Err(ModelError::MalformedRegistry(format!(
                "algorithm id {:?} contains characters not allowed in result files",
                self.id
            )));
        }
        for (name, v) in [
            ("public_key_bytes", self.public_key_bytes),
            ("private_key_bytes", self.private_key_bytes),
            ("payload_bytes", self.payload_bytes),
        ] {
            if v == 0 {
                return Err(ModelError::MalformedRegistry(format!(
                    "{}: {} must be strictly positive",
                    self.id, name
                )));
            }
        }
        Ok(())
    }
}

/// One of the three per-family cryptographic operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Operation {
    Keygen,
    Encaps,
    Decaps,
    Keypair,
    Sign,
    Verify,
}

impl Operation {
    pub const KEM_OPS: [Operation; 3] = [Operation::Keygen, Operation::Encaps, Operation::Decaps];
    pub const SIG_OPS: [Operation; 3] = [Operation::Keypair, Operation::Sign, Operation::Verify];

    pub fn for_family(family: AlgorithmFamily) -> [Operation; 3] {
        match family {
            AlgorithmFamily::Kem => Self::KEM_OPS,
            AlgorithmFamily::Signature => Self::SIG_OPS,
        }
    }

    pub fn family(self) -> AlgorithmFamily {
        match self {
            Operation::Keygen | Operation::Encaps | Operation::Decaps => AlgorithmFamily::Kem,
            Operation::Keypair | Operation::Sign | Operation::Verify => AlgorithmFamily::Signature,
        }
    }

    /// Position within its family's canonical order (keygen/encaps/decaps,
    /// keypair/sign/verify). Used for row sorting.
    pub fn order_index(self) -> u8 {
        match self {
            Operation::Keygen | Operation::Keypair => 0,
            Operation::Encaps | Operation::Sign => 1,
            Operation::Decaps | Operation::Verify => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Operation::Keygen => "keygen",
            Operation::Encaps => "encaps",
            Operation::Decaps => "decaps",
            Operation::Keypair => "keypair",
            Operation::Sign => "sign",
            Operation::Verify => "verify",
        }
    }

    pub fn from_label(label: &str) -> Option<Operation> {
        match label.trim().to_ascii_lowercase().as_str() {
            "keygen" => Some(Operation::Keygen),
            "encaps" => Some(Operation::Encaps),
            "decaps" => Some(Operation::Decaps),
            "keypair" => Some(Operation::Keypair),
            "sign" => Some(Operation::Sign),
            "verify" => Some(Operation::Verify),
            _ => None,
        }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Role of this process in a TLS benchmark run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "SERVER")]
    Server,
    #[serde(rename = "CLIENT")]
    Client,
    #[serde(rename = "STANDALONE")]
    Standalone,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Server => write!(f, "SERVER"),
            Role::Client => write!(f, "CLIENT"),
            Role::Standalone => write!(f, "STANDALONE"),
        }
    }
}

/// Keep only `[A-Za-z0-9_-]`; everything else is stripped. Prevents a machine
/// identifier from escaping the output root.
pub fn sanitize_machine_id(raw: &str) -> String {
    raw.chars()
        .filter(|c| c.is_ascii_alphanumeric() || *c == '_' || *c == '-')
        .collect()
}

/// Run configuration shared by all benchmark stages.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub machine_id: String,
    pub role: Role,
    pub peer_address: Option<String>,
    pub control_port: u16,
    pub data_port: u16,
    pub num_runs: u32,
    pub cpu_window_seconds: f64,
    pub tls_window_seconds: f64,
    pub control_timeout_seconds: f64,
    pub max_retries: u32,
    pub output_root: PathBuf,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            machine_id: "default".into(),
            role: Role::Standalone,
            peer_address: None,
            control_port: 45800,
            data_port: 45801,
            num_runs: 3,
            cpu_window_seconds: 3.0,
            tls_window_seconds: 30.0,
            control_timeout_seconds: 30.0,
            max_retries: 3,
            output_root: PathBuf::from("test_data/up_results"),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.num_runs < 1 {
            return Err(ModelError::InvalidConfig("num_runs must be >= 1".into()));
        }
        for (name, v) in [
            ("cpu_window_seconds", self.cpu_window_seconds),
            ("tls_window_seconds", self.tls_window_seconds),
            ("control_timeout_seconds", self.control_timeout_seconds),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ModelError::InvalidConfig(format!("{name} must be > 0")));
            }
        }
        if sanitize_machine_id(&self.machine_id).is_empty() {
            return Err(ModelError::InvalidConfig(format!(
                "machine_id {:?} has no usable characters after sanitization",
                self.machine_id
            )));
        }
        if self.role != Role::Standalone && self.peer_address.is_none() && self.role == Role::Client
        {
            return Err(ModelError::InvalidConfig(
                "peer_address is required for the CLIENT role".into(),
            ));
        }
        Ok(())
    }

    /// Directory all of this machine's results live under.
    pub fn machine_dir(&self) -> PathBuf {
        self.output_root.join(sanitize_machine_id(&self.machine_id))
    }
}

/// Partial configuration as read from a JSON config file; every field
/// optional so file values can layer between defaults and flags.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialBenchConfig {
    pub machine_id: Option<String>,
    pub role: Option<Role>,
    pub peer_address: Option<String>,
    pub control_port: Option<u16>,
    pub data_port: Option<u16>,
    pub num_runs: Option<u32>,
    pub cpu_window_seconds: Option<f64>,
    pub tls_window_seconds: Option<f64>,
    pub control_timeout_seconds: Option<f64>,
    pub max_retries: Option<u32>,
    pub output_root: Option<PathBuf>,
}

impl PartialBenchConfig {
    pub fn from_file(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text)
            .map_err(|e| ModelError::InvalidConfig(format!("{}: {e}", path.display())))
    }

    /// Overlay `self` onto `base`; set fields win.
    pub fn apply(&self, base: &mut BenchConfig) {
        if let Some(v) = &self.machine_id {
            base.machine_id = v.clone();
        }
        if let Some(v) = self.role {
            base.role = v;
        }
        if let Some(v) = &self.peer_address {
            base.peer_address = Some(v.clone());
        }
        if let Some(v) = self.control_port {
            base.control_port = v;
        }
        if let Some(v) = self.data_port {
            base.data_port = v;
        }
        if let Some(v) = self.num_runs {
            base.num_runs = v;
        }
        if let Some(v) = self.cpu_window_seconds {
            base.cpu_window_seconds = v;
        }
        if let Some(v) = self.tls_window_seconds {
            base.tls_window_seconds = v;
        }
        if let Some(v) = self.control_timeout_seconds {
            base.control_timeout_seconds = v;
        }
        if let Some(v) = self.max_retries {
            base.max_retries = v;
        }
        if let Some(v) = &self.output_root {
            base.output_root = v.clone();
        }
    }
}

fn require_finite_nonneg(name: &str, v: f64) -> Result<(), ModelError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidRecord(format!(
            "{name} must be finite and >= 0, got {v}"
        )))
    }
}

/// One CPU measurement: (algorithm, operation, run).
#[derive(Debug, Clone, PartialEq)]
pub struct CpuOpRecord {
    pub algorithm_id: String,
    pub operation: Operation,
    pub run_index: u32,
    pub iterations: u64,
    pub mean_time_us: f64,
    pub mean_cycles: f64,
}

impl CpuOpRecord {
    pub fn new(
        algorithm_id: impl Into<String>,
        operation: Operation,
        run_index: u32,
        iterations: u64,
        mean_time_us: f64,
        mean_cycles: f64,
    ) -> Result<Self, ModelError> {
        if iterations < 1 {
            return Err(ModelError::InvalidRecord("iterations must be >= 1".into()));
        }
        require_finite_nonneg("mean_time_us", mean_time_us)?;
        require_finite_nonneg("mean_cycles", mean_cycles)?;
        Ok(CpuOpRecord {
            algorithm_id: algorithm_id.into(),
            operation,
            run_index,
            iterations,
            mean_time_us,
            mean_cycles,
        })
    }

    /// Sanity bound: the recorded per-op time multiplied out must not exceed
    /// the wall window it was measured in by more than 50%.
    pub fn check_against_window(&self, window_us: f64) -> Result<(), ModelError> {
        let total = self.mean_time_us * self.iterations as f64;
        if total > window_us * 1.5 {
            return Err(ModelError::InvalidRecord(format!(
                "{} {}: total time {total:.1}us exceeds 1.5x the {window_us:.1}us window",
                self.algorithm_id, self.operation
            )));
        }
        Ok(())
    }
}

/// One peak-memory measurement: (algorithm, operation, run).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemOpRecord {
    pub algorithm_id: String,
    pub operation: Operation,
    pub run_index: u32,
    pub heap_bytes: u64,
    pub ext_heap_bytes: u64,
    pub stack_bytes: u64,
}

impl MemOpRecord {
    pub fn new(
        algorithm_id: impl Into<String>,
        operation: Operation,
        run_index: u32,
        heap_bytes: u64,
        ext_heap_bytes: u64,
        stack_bytes: u64,
    ) -> Result<Self, ModelError> {
        Ok(MemOpRecord {
            algorithm_id: algorithm_id.into(),
            operation,
            run_index,
            heap_bytes,
            ext_heap_bytes,
            stack_bytes,
        })
    }
}

/// First handshake of a session vs. resumption with a stored session token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HandshakeMode {
    FirstUse,
    SessionReuse,
}

impl HandshakeMode {
    pub fn label(self) -> &'static str {
        match self {
            HandshakeMode::FirstUse => "first",
            HandshakeMode::SessionReuse => "reuse",
        }
    }

    pub fn from_label(s: &str) -> Option<HandshakeMode> {
        match s {
            "first" => Some(HandshakeMode::FirstUse),
            "reuse" => Some(HandshakeMode::SessionReuse),
            _ => None,
        }
    }
}

impl fmt::Display for HandshakeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// TLS connection count over one measurement window.
#[derive(Debug, Clone, PartialEq)]
pub struct HandshakeRecord {
    pub sig_algorithm_id: String,
    pub kem_algorithm_id: String,
    pub mode: HandshakeMode,
    pub run_index: u32,
    pub connections: u64,
    pub real_seconds: f64,
    pub user_connections_per_sec: f64,
}

impl HandshakeRecord {
    pub fn new(
        sig_algorithm_id: impl Into<String>,
        kem_algorithm_id: impl Into<String>,
        mode: HandshakeMode,
        run_index: u32,
        connections: u64,
        real_seconds: f64,
        user_connections_per_sec: f64,
    ) -> Result<Self, ModelError> {
        if !(real_seconds > 0.0) || !real_seconds.is_finite() {
            return Err(ModelError::InvalidRecord("real_seconds must be > 0".into()));
        }
        require_finite_nonneg("user_connections_per_sec", user_connections_per_sec)?;
        Ok(HandshakeRecord {
            sig_algorithm_id: sig_algorithm_id.into(),
            kem_algorithm_id: kem_algorithm_id.into(),
            mode,
            run_index,
            connections,
            real_seconds,
            user_connections_per_sec,
        })
    }
}

/// One throughput measurement from the TLS speed suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedRecord {
    pub algorithm_id: String,
    pub operation: Operation,
    pub run_index: u32,
    pub ops_per_second: f64,
    pub mean_op_seconds: f64,
}

impl SpeedRecord {
    pub fn new(
        algorithm_id: impl Into<String>,
        operation: Operation,
        run_index: u32,
        ops_per_second: f64,
        mean_op_seconds: f64,
    ) -> Result<Self, ModelError> {
        require_finite_nonneg("ops_per_second", ops_per_second)?;
        require_finite_nonneg("mean_op_seconds", mean_op_seconds)?;
        if ops_per_second > 0.0 {
            let implied = 1.0 / ops_per_second;
            if (mean_op_seconds - implied).abs() > 1e-6 * implied.max(mean_op_seconds) {
                return Err(ModelError::InvalidRecord(format!(
                    "mean_op_seconds {mean_op_seconds} inconsistent with {ops_per_second} ops/s"
                )));
            }
        }
        Ok(SpeedRecord {
            algorithm_id: algorithm_id.into(),
            operation,
            run_index,
            ops_per_second,
            mean_op_seconds,
        })
    }
}

/// The set of algorithms under test plus the alias table linking
/// standardised/non-standardised variants of the same base scheme.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Registry {
    pub algorithms: Vec<AlgorithmDescriptor>,
    /// algorithm id -> base scheme name; two ids sharing a base are variants
    /// of the same scheme.
    pub aliases: BTreeMap<String, String>,
}

fn normalize_id(id: &str) -> String {
    id.to_ascii_lowercase().replace(' ', "-")
}

impl Registry {
    pub fn new(algorithms: Vec<AlgorithmDescriptor>) -> Result<Self, ModelError> {
        let reg = Registry {
            algorithms,
            aliases: BTreeMap::new(),
        };
        reg.validate()?;
        Ok(reg)
    }

    fn validate(&self) -> Result<(), ModelError> {
        let mut seen = BTreeSet::new();
        for desc in &self.algorithms {
            desc.validate()?;
            if !seen.insert(desc.id.clone()) {
                return Err(ModelError::MalformedRegistry(format!(
                    "duplicate algorithm id {:?}",
                    desc.id
                )));
            }
        }
        Ok(())
    }

    /// Exact-id lookup first, then a normalized match ("FN-DSA 512" finds
    /// "FN-DSA-512").
    pub fn find(&self, id: &str) -> Option<&AlgorithmDescriptor> {
        self.algorithms
            .iter()
            .find(|d| d.id == id)
            .or_else(|| {
                let wanted = normalize_id(id);
                self.algorithms.iter().find(|d| normalize_id(&d.id) == wanted)
            })
    }

    pub fn with_capability(&self, cap: Capability) -> impl Iterator<Item = &AlgorithmDescriptor> {
        self.algorithms.iter().filter(move |d| d.has(cap))
    }

    pub fn kems(&self) -> impl Iterator<Item = &AlgorithmDescriptor> {
        self.algorithms
            .iter()
            .filter(|d| d.family == AlgorithmFamily::Kem)
    }

    pub fn signatures(&self) -> impl Iterator<Item = &AlgorithmDescriptor> {
        self.algorithms
            .iter()
            .filter(|d| d.family == AlgorithmFamily::Signature)
    }

    /// Grant every capability to the named algorithm (the runtime counterpart
    /// of rebuilding the library with an algorithm enabled).
    pub fn enable(&mut self, id: &str) -> Result<(), ModelError> {
        let wanted = normalize_id(id);
        let desc = self
            .algorithms
            .iter_mut()
            .find(|d| d.id == id || normalize_id(&d.id) == wanted)
            .ok_or_else(|| {
                ModelError::MalformedRegistry(format!("cannot enable unknown algorithm {id:?}"))
            })?;
        desc.capabilities.extend(Capability::ALL);
        Ok(())
    }
}

/// Serde shape for the object form of the registry document.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistryDoc {
    algorithms: Vec<AlgorithmDescriptor>,
    #[serde(default)]
    aliases: BTreeMap<String, String>,
}

/// Parse a registry document. The document is either a bare JSON array of
/// algorithm objects or an object `{"algorithms": [...], "aliases": {...}}`.
pub fn parse_registry(text: &str) -> Result<Registry, ModelError> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| ModelError::MalformedRegistry(format!("invalid JSON: {e}")))?;
    let (algorithms, aliases) = match value {
        serde_json::Value::Array(_) => {
            let algorithms: Vec<AlgorithmDescriptor> = serde_json::from_value(value)
                .map_err(|e| ModelError::MalformedRegistry(e.to_string()))?;
            (algorithms, BTreeMap::new())
        }
        serde_json::Value::Object(_) => {
            let doc: RegistryDoc = serde_json::from_value(value)
                .map_err(|e| ModelError::MalformedRegistry(e.to_string()))?;
            (doc.algorithms, doc.aliases)
        }
        _ => {
            return Err(ModelError::MalformedRegistry(
                "registry document must be a JSON array or object".into(),
            ))
        }
    };
    let reg = Registry { algorithms, aliases };
    reg.validate()?;
    Ok(reg)
}

pub fn load_registry(path: &Path) -> Result<Registry, ModelError> {
    let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_registry(&text)
}

/// Serialize back to the document format `parse_registry` accepts; array form
/// when there are no aliases.
pub fn registry_to_json(reg: &Registry) -> String {
    if reg.aliases.is_empty() {
        serde_json::to_string_pretty(&reg.algorithms).expect("registry serializes")
    } else {
        let doc = RegistryDoc {
            algorithms: reg.algorithms.clone(),
            aliases: reg.aliases.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("registry serializes")
    }
}

pub fn save_registry(reg: &Registry, path: &Path) -> Result<(), ModelError> {
    std::fs::write(path, registry_to_json(reg)).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn builtin(
    id: &str,
    family: AlgorithmFamily,
    level: SecurityLevel,
    pk: u64,
    sk: u64,
    payload: u64,
    standardised: bool,
    caps: &[Capability],
) -> AlgorithmDescriptor {
    AlgorithmDescriptor {
        id: id.into(),
        family,
        security_level: level,
        public_key_bytes: pk,
        private_key_bytes: sk,
        payload_bytes: payload,
        standardised,
        hybrid: false,
        capabilities: caps.iter().copied().collect(),
    }
}

/// The registry shipped with the harness: the NIST-track KEM and signature
/// parameter sets plus classical baselines, with published key/ciphertext/
/// signature sizes.
///
/// HQC starts with no capabilities (it ships disabled upstream) and can be
/// switched on with [`Registry::enable`]. ML-DSA participates in handshakes
/// but not speed tests; SLH-DSA is limited to computational benchmarks.
/// Classical baselines participate in TLS suites only.
pub fn builtin_registry() -> Registry {
    use AlgorithmFamily::{Kem, Signature};
    use Capability::{CpuBench, Handshake, MemBench, Speed};
    use SecurityLevel::{Five, One, Three, Unknown};

    let pqc_full: &[Capability] = &[CpuBench, MemBench, Handshake, Speed];
    let compute_only: &[Capability] = &[CpuBench, MemBench];
    let no_speed: &[Capability] = &[CpuBench, MemBench, Handshake];
    let tls_only: &[Capability] = &[Handshake, Speed];
    let disabled: &[Capability] = &[];

    let algorithms = vec![
        // KEMs
        builtin("ML-KEM-512", Kem, One, 800, 1632, 768, true, pqc_full),
        builtin("ML-KEM-768", Kem, Three, 1184, 2400, 1088, true, pqc_full),
        builtin("ML-KEM-1024", Kem, Five, 1568, 3168, 1568, true, pqc_full),
        builtin("HQC-128", Kem, One, 2249, 2289, 4497, false, disabled),
        builtin("HQC-192", Kem, Three, 4522, 4562, 9042, false, disabled),
        builtin("HQC-256", Kem, Five, 7245, 7285, 14485, false, disabled),
        builtin("P256-ECDH", Kem, Unknown, 65, 32, 65, true, tls_only),
        builtin("P384-ECDH", Kem, Unknown, 97, 48, 97, true, tls_only),
        builtin("P521-ECDH", Kem, Unknown, 133, 66, 133, true, tls_only),
        // Signatures
        builtin("ML-DSA-44", Signature, One, 1312, 2528, 2420, true, no_speed),
        builtin("ML-DSA-65", Signature, Three, 1952, 4000, 3293, true, no_speed),
        builtin("ML-DSA-87", Signature, Five, 2592, 4864, 4595, true, no_speed),
        builtin("FN-DSA-512", Signature, One, 897, 1281, 690, false, pqc_full),
        builtin("FN-DSA-1024", Signature, Five, 1793, 2305, 1330, false, pqc_full),
        builtin(
            "SLH-DSA-SHA2-128f",
            Signature,
            One,
            32,
            64,
            17088,
            true,
            compute_only,
        ),
        builtin(
            "SLH-DSA-SHA2-192f",
            Signature,
            Three,
            48,
            96,
            35664,
            true,
            compute_only,
        ),
        builtin(
            "SLH-DSA-SHA2-256f",
            Signature,
            Five,
            64,
            128,
            49856,
            true,
            compute_only,
        ),
        builtin("RSA-2048", Signature, Unknown, 256, 256, 256, true, tls_only),
        builtin("ECC-P256", Signature, Unknown, 64, 32, 256, true, tls_only),
    ];

    Registry {
        algorithms,
        aliases: BTreeMap::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_sizes_match_published_values() {
        let reg = builtin_registry();
        let hqc = reg.find("HQC-256").unwrap();
        assert_eq!(
            (
                hqc.public_key_bytes,
                hqc.private_key_bytes,
                hqc.payload_bytes,
                hqc.security_level
            ),
            (7245, 7285, 14485, SecurityLevel::Five)
        );
        let mldsa = reg.find("ML-DSA-87").unwrap();
        assert_eq!(
            (
                mldsa.public_key_bytes,
                mldsa.private_key_bytes,
                mldsa.payload_bytes,
                mldsa.security_level
            ),
            (2592, 4864, 4595, SecurityLevel::Five)
        );
        // Lookup with the printed (space-separated) spelling also resolves.
        let fndsa = reg.find("FN-DSA 512").unwrap();
        assert_eq!(
            (
                fndsa.public_key_bytes,
                fndsa.private_key_bytes,
                fndsa.payload_bytes,
                fndsa.security_level
            ),
            (897, 1281, 690, SecurityLevel::One)
        );
        let mlkem = reg.find("ML-KEM-512").unwrap();
        assert_eq!(
            (
                mlkem.public_key_bytes,
                mlkem.private_key_bytes,
                mlkem.payload_bytes
            ),
            (800, 1632, 768)
        );
    }

    #[test]
    fn registry_rejects_duplicate_ids() {
        let mut reg = builtin_registry();
        let dup = reg.algorithms[0].clone();
        reg.algorithms.push(dup);
        let json = registry_to_json(&reg);
        let err = parse_registry(&json).unwrap_err();
        assert_eq!(err.code(), "MALFORMED_REGISTRY");
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn registry_rejects_zero_sizes_and_unknown_fields() {
        let bad = r#"[{"id":"X","family":"KEM","security_level":1,"public_key_bytes":0,
            "private_key_bytes":1,"payload_bytes":1,"standardised":false,"hybrid":false,
            "capabilities":[]}]"#;
        assert_eq!(
            parse_registry(bad).unwrap_err().code(),
            "MALFORMED_REGISTRY"
        );

        let unknown_key = r#"[{"id":"X","family":"KEM","security_level":1,"public_key_bytes":1,
            "private_key_bytes":1,"payload_bytes":1,"standardised":false,"hybrid":false,
            "capabilities":[],"extra":true}]"#;
        assert_eq!(
            parse_registry(unknown_key).unwrap_err().code(),
            "MALFORMED_REGISTRY"
        );

        let bad_family = r#"[{"id":"X","family":"MAC","security_level":1,"public_key_bytes":1,
            "private_key_bytes":1,"payload_bytes":1,"standardised":false,"hybrid":false,
            "capabilities":[]}]"#;
        assert_eq!(
            parse_registry(bad_family).unwrap_err().code(),
            "MALFORMED_REGISTRY"
        );
    }

    #[test]
    fn empty_registry_document_is_fine() {
        let reg = parse_registry("[]").unwrap();
        assert!(reg.algorithms.is_empty());
    }

    #[test]
    fn object_form_carries_aliases() {
        let doc = r#"{"algorithms": [], "aliases": {"SPHINCS+-128f": "slh-128f"}}"#;
        let reg = parse_registry(doc).unwrap();
        assert_eq!(reg.aliases.get("SPHINCS+-128f").unwrap(), "slh-128f");
    }

    #[test]
    fn machine_id_sanitization() {
        assert_eq!(sanitize_machine_id("pi4"), "pi4");
        assert_eq!(sanitize_machine_id("../../etc"), "etc");
        assert_eq!(sanitize_machine_id("a b/c\\d"), "abcd");
        let cfg = BenchConfig {
            machine_id: "../..".into(),
            ..BenchConfig::default()
        };
        assert_eq!(cfg.validate().unwrap_err().code(), "INVALID_CONFIG");
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = BenchConfig::default();
        assert_eq!(cfg.num_runs, 3);
        assert_eq!(cfg.cpu_window_seconds, 3.0);
        assert_eq!(cfg.tls_window_seconds, 30.0);
        assert_eq!(cfg.control_timeout_seconds, 30.0);
        assert_eq!(cfg.max_retries, 3);
        assert_eq!(cfg.output_root, PathBuf::from("test_data/up_results"));
        cfg.validate().unwrap();

        let bad = BenchConfig {
            num_runs: 0,
            ..BenchConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = BenchConfig {
            tls_window_seconds: 0.0,
            ..BenchConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn records_reject_invariant_violations() {
        assert!(CpuOpRecord::new("a", Operation::Keygen, 1, 0, 1.0, 1.0).is_err());
        assert!(CpuOpRecord::new("a", Operation::Keygen, 1, 1, -1.0, 1.0).is_err());
        assert!(CpuOpRecord::new("a", Operation::Keygen, 1, 1, f64::NAN, 1.0).is_err());
        assert!(HandshakeRecord::new("s", "k", HandshakeMode::FirstUse, 1, 0, 0.0, 0.0).is_err());
        assert!(SpeedRecord::new("a", Operation::Sign, 1, 100.0, 0.5).is_err());
        assert!(SpeedRecord::new("a", Operation::Sign, 1, 100.0, 0.01).is_ok());
        assert!(SpeedRecord::new("a", Operation::Sign, 1, 0.0, 0.0).is_ok());
    }

    #[test]
    fn cpu_record_window_sanity_bound() {
        let rec = CpuOpRecord::new("a", Operation::Keygen, 1, 100, 10.0, 0.0).unwrap();
        rec.check_against_window(1000.0).unwrap();
        assert!(rec.check_against_window(500.0).is_err());
    }

    #[test]
    fn registry_round_trip_preserves_fields() {
        let reg = builtin_registry();
        let json = registry_to_json(&reg);
        let back = parse_registry(&json).unwrap();
        assert_eq!(reg, back);
    }
}
