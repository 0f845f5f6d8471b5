//! Pre-generation of handshake credentials.
//!
//! A mock certificate is a fixed 256-byte header, the signer's public key,
//! and signature-sized filler, standing in for X.509 encoding overhead with
//! sizes taken from the registry. Key and certificate contents are derived
//! deterministically from the algorithm id, laid out so the mock signature
//! provider can sign with the key file and verify against the certificate.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{AlgorithmDescriptor, Registry};
use crate::provider::mock::derived_sig_keypair;

use super::TlsError;

/// Fixed certificate header size; the mock stand-in for encoding overhead.
pub const CERT_HEADER_BYTES: usize = 256;

/// Credential files for one signature algorithm.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CredentialEntry {
    pub algorithm_id: String,
    pub certificate_file: PathBuf,
    pub certificate_bytes: u64,
    pub key_file: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CredentialManifest {
    pub entries: Vec<CredentialEntry>,
}

impl CredentialManifest {
    pub fn entry(&self, algorithm_id: &str) -> Option<&CredentialEntry> {
        self.entries.iter().find(|e| e.algorithm_id == algorithm_id)
    }
}

fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn deterministic_bytes(label: &[u8], id: &str, len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(len);
    let mut counter: u32 = 0;
    while out.len() < len {
        let mut h = Sha256::new();
        h.update(b"pqb-cred");
        h.update(label);
        h.update(id.as_bytes());
        h.update(counter.to_be_bytes());
        let digest = h.finalize();
        let take = usize::min(32, len - out.len());
        out.extend_from_slice(&digest[..take]);
        counter += 1;
    }
    out
}

/// Certificate body for a signer public key: header || pk || filler, exactly
/// `CERT_HEADER_BYTES + public_key_bytes + payload_bytes` long.
pub fn build_certificate(desc: &AlgorithmDescriptor, public_key: &[u8]) -> Vec<u8> {
    let mut cert = deterministic_bytes(b"header", &desc.id, CERT_HEADER_BYTES);
    cert.extend_from_slice(public_key);
    cert.extend_from_slice(&deterministic_bytes(
        b"filler",
        &desc.id,
        desc.payload_bytes as usize,
    ));
    cert
}

pub fn manifest_path(out_dir: &Path) -> PathBuf {
    out_dir.join("manifest.json")
}

/// Write a certificate and key file for every signature algorithm in the
/// registry, plus a manifest listing them.
pub fn generate_credentials(
    registry: &Registry,
    out_dir: &Path,
) -> Result<CredentialManifest, TlsError> {
    std::fs::create_dir_all(out_dir).map_err(|source| TlsError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut manifest = CredentialManifest::default();
    for desc in registry.signatures() {
        let (pk, sk) = derived_sig_keypair(desc, b"credentials");
        let certificate = build_certificate(desc, &pk);

        let stem = file_stem(&desc.id);
        let certificate_file = out_dir.join(format!("{stem}.crt"));
        let key_file = out_dir.join(format!("{stem}.key"));
        std::fs::write(&certificate_file, &certificate).map_err(|source| TlsError::Io {
            path: certificate_file.clone(),
            source,
        })?;
        std::fs::write(&key_file, &sk).map_err(|source| TlsError::Io {
            path: key_file.clone(),
            source,
        })?;

        manifest.entries.push(CredentialEntry {
            algorithm_id: desc.id.clone(),
            certificate_file,
            certificate_bytes: certificate.len() as u64,
            key_file,
        });
    }
    let path = manifest_path(out_dir);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, json).map_err(|source| TlsError::Io { path, source })?;
    Ok(manifest)
}

pub fn load_manifest(out_dir: &Path) -> Result<CredentialManifest, TlsError> {
    let path = manifest_path(out_dir);
    let text = std::fs::read_to_string(&path).map_err(|source| TlsError::Io {
        path: path.clone(),
        source,
    })?;
    serde_json::from_str(&text)
        .map_err(|e| TlsError::MalformedControl(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin_registry;

    #[test]
    fn certificate_sizes_follow_registry() {
        let dir = tempfile::tempdir().unwrap();
        let reg = builtin_registry();
        let manifest = generate_credentials(&reg, dir.path()).unwrap();

        // header(256) + pk(1312) + sig(2420)
        let entry = manifest.entry("ML-DSA-44").unwrap();
        assert_eq!(entry.certificate_bytes, 3988);
        let on_disk = std::fs::metadata(&entry.certificate_file).unwrap().len();
        assert_eq!(on_disk, 3988);
        let key_len = std::fs::metadata(&entry.key_file).unwrap().len();
        assert_eq!(key_len, 2528);

        // One entry per signature algorithm, none for KEMs.
        assert_eq!(manifest.entries.len(), reg.signatures().count());

        // Regenerating produces identical bytes.
        let cert1 = std::fs::read(&entry.certificate_file).unwrap();
        generate_credentials(&reg, dir.path()).unwrap();
        let cert2 = std::fs::read(&entry.certificate_file).unwrap();
        assert_eq!(cert1, cert2);

        // Round-trips through the manifest file.
        let loaded = load_manifest(dir.path()).unwrap();
        assert_eq!(loaded, manifest);
    }

    #[test]
    fn empty_registry_yields_empty_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let reg = Registry::default();
        let manifest = generate_credentials(&reg, dir.path()).unwrap();
        assert!(manifest.entries.is_empty());
    }

    #[test]
    fn unwritable_directory_is_io_error() {
        let reg = builtin_registry();
        let err = generate_credentials(&reg, Path::new("/proc/pqbench-no-such-dir")).unwrap_err();
        assert_eq!(err.code(), "IO_ERROR");
    }
}
