//! Deterministic mock KEM and signature providers.
//!
//! Outputs are a pure function of (descriptor, seed, call sequence) via a
//! SHA-256 expansion, so two providers built with equal parameters emit
//! byte-identical results. Each operation burns a configurable number of
//! [`busy_work`] units before returning, and folds the accumulator into its
//! output derivation so the work cannot be elided.
//!
//! The KEM construction embeds a per-keypair key id in the prefix of both pk
//! and sk. Encapsulation hides fresh randomness behind a pad derived from
//! that id and fills the rest of the ciphertext with a checkable expansion;
//! decapsulation recovers the randomness, re-derives the shared secret, and
//! diverges to a different secret if any ciphertext byte was altered.
//! Signatures are expansions keyed by the key id and the message hash, so a
//! single flipped byte in message or signature fails verification.

use std::cmp::min;
use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use crate::model::{AlgorithmDescriptor, AlgorithmFamily, Operation};
use crate::timing::{busy_work, VirtualClock};

use super::{KemProvider, ProviderError, ProviderFactory, SigProvider};

pub const SHARED_SECRET_BYTES: usize = 32;

/// Work and nominal cycle cost of one operation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpCost {
    /// Iterations of the mixing loop executed before the operation returns.
    pub work_units: u64,
    /// Cycles (and, at the nominal 1 GHz, nanoseconds) charged per work unit
    /// when running against a virtual clock.
    pub nominal_cycles_per_unit: f64,
}

impl Default for OpCost {
    fn default() -> Self {
        OpCost {
            work_units: 0,
            nominal_cycles_per_unit: 1.0,
        }
    }
}

/// Per-operation cost table for the mock provider.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MockCostProfile {
    costs: BTreeMap<Operation, OpCost>,
}

impl MockCostProfile {
    /// No work at all; operations are as fast as the hashing allows.
    pub fn zero() -> Self {
        Self::default()
    }

    /// Same work for every operation.
    pub fn uniform(work_units: u64) -> Self {
        let mut p = Self::default();
        for op in Operation::KEM_OPS.into_iter().chain(Operation::SIG_OPS) {
            p.set(op, work_units, 1.0);
        }
        p
    }

    /// Default desk-scale profile. Signing is deliberately the most expensive
    /// operation so session-reuse handshakes are measurably cheaper than
    /// first-use ones.
    pub fn realistic() -> Self {
        let mut p = Self::default();
        p.set(Operation::Keygen, 40_000, 4.0);
        p.set(Operation::Encaps, 30_000, 4.0);
        p.set(Operation::Decaps, 30_000, 4.0);
        p.set(Operation::Keypair, 60_000, 4.0);
        p.set(Operation::Sign, 200_000, 4.0);
        p.set(Operation::Verify, 80_000, 4.0);
        p
    }

    pub fn set(&mut self, op: Operation, work_units: u64, nominal_cycles_per_unit: f64) -> &mut Self {
        self.costs.insert(
            op,
            OpCost {
                work_units,
                nominal_cycles_per_unit,
            },
        );
        self
    }

    pub fn cost(&self, op: Operation) -> OpCost {
        self.costs.get(&op).copied().unwrap_or_default()
    }

    /// Virtual nanoseconds one call of `op` accounts for.
    pub fn virtual_ns(&self, op: Operation) -> u64 {
        let c = self.cost(op);
        (c.work_units as f64 * c.nominal_cycles_per_unit).max(0.0) as u64
    }
}

/// SHA-256 in counter mode over the concatenated context parts.
fn expand(parts: &[&[u8]], len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(len);
    let mut counter: u32 = 0;
    while out.len() < len {
        let mut h = Sha256::new();
        for p in parts {
            h.update(p);
        }
        h.update(counter.to_be_bytes());
        let digest = h.finalize();
        let take = min(32, len - out.len());
        out.extend_from_slice(&digest[..take]);
        counter += 1;
    }
    out
}

fn hash32(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

/// Length of the key-id prefix shared by pk and sk. 32 unless the descriptor
/// declares keys smaller than that.
fn key_id_len(desc: &AlgorithmDescriptor) -> usize {
    min(
        32,
        min(desc.public_key_bytes as usize, desc.private_key_bytes as usize),
    )
}

#[derive(Debug)]
struct CostEngine {
    profile: MockCostProfile,
    clock: Option<VirtualClock>,
}

impl CostEngine {
    /// Burn the configured work and charge the virtual clock. Returns the
    /// mixing accumulator for folding into outputs.
    fn run(&self, op: Operation) -> u64 {
        let acc = busy_work(self.profile.cost(op).work_units);
        if let Some(clock) = &self.clock {
            clock.advance_ns(self.profile.virtual_ns(op));
        }
        acc
    }
}

#[derive(Debug)]
pub struct MockKem {
    desc: AlgorithmDescriptor,
    seed: u64,
    calls: u64,
    cost: CostEngine,
}

impl MockKem {
    fn next_call(&mut self) -> u64 {
        let n = self.calls;
        self.calls += 1;
        n
    }
}

impl KemProvider for MockKem {
    fn descriptor(&self) -> &AlgorithmDescriptor {
        &self.desc
    }

    fn keygen(&mut self) -> Result<(Vec<u8>, Vec<u8>), ProviderError> {
        let acc = self.cost.run(Operation::Keygen);
        let n = self.next_call();
        let kp_seed = hash32(&[
            b"pqb-kem-keypair",
            &self.seed.to_be_bytes(),
            &n.to_be_bytes(),
            &acc.to_be_bytes(),
        ]);
        let key_id = hash32(&[b"pqb-kem-id", &kp_seed]);
        let idl = key_id_len(&self.desc);

        let mut pk = expand(&[b"pqb-kem-pk", &kp_seed], self.desc.public_key_bytes as usize);
        pk[..idl].copy_from_slice(&key_id[..idl]);
        let mut sk = expand(&[b"pqb-kem-sk", &kp_seed], self.desc.private_key_bytes as usize);
        sk[..idl].copy_from_slice(&key_id[..idl]);
        Ok((pk, sk))
    }

    fn encaps(&mut self, pk: &[u8]) -> Result<(Vec<u8>, Vec<u8>), ProviderError> {
        let acc = self.cost.run(Operation::Encaps);
        let n = self.next_call();
        let idl = key_id_len(&self.desc);
        if pk.len() < idl {
            return Err(ProviderError::OpFailed(format!(
                "{}: public key too short ({} bytes)",
                self.desc.id,
                pk.len()
            )));
        }
        let key_id = &pk[..idl];
        let ct_len = self.desc.payload_bytes as usize;
        let embed = min(32, ct_len);

        let randomness = expand(
            &[
                b"pqb-kem-rand",
                &self.seed.to_be_bytes(),
                &n.to_be_bytes(),
                &acc.to_be_bytes(),
            ],
            embed,
        );
        let pad = expand(&[b"pqb-kem-pad", key_id], embed);
        let mut ct = Vec::with_capacity(ct_len);
        for i in 0..embed {
            ct.push(randomness[i] ^ pad[i]);
        }
        ct.extend_from_slice(&expand(
            &[b"pqb-kem-fill", key_id, &randomness],
            ct_len - embed,
        ));
        let ss = expand(&[b"pqb-kem-ss", key_id, &randomness], SHARED_SECRET_BYTES);
        Ok((ct, ss))
    }

    fn decaps(&mut self, sk: &[u8], ct: &[u8]) -> Result<Vec<u8>, ProviderError> {
        self.cost.run(Operation::Decaps);
        let idl = key_id_len(&self.desc);
        if sk.len() < idl {
            return Err(ProviderError::OpFailed(format!(
                "{}: private key too short ({} bytes)",
                self.desc.id,
                sk.len()
            )));
        }
        let key_id = &sk[..idl];
        let embed = min(32, ct.len());
        let pad = expand(&[b"pqb-kem-pad", key_id], embed);
        let randomness: Vec<u8> = (0..embed).map(|i| ct[i] ^ pad[i]).collect();

        // Any tampering past the embedded randomness shows up here and sends
        // the result down a divergent derivation.
        let expected_fill = expand(&[b"pqb-kem-fill", key_id, &randomness], ct.len() - embed);
        let intact =
            ct.len() == self.desc.payload_bytes as usize && ct[embed..] == expected_fill[..];
        if intact {
            Ok(expand(
                &[b"pqb-kem-ss", key_id, &randomness],
                SHARED_SECRET_BYTES,
            ))
        } else {
            Ok(expand(&[b"pqb-kem-bad", key_id, ct], SHARED_SECRET_BYTES))
        }
    }
}

#[derive(Debug)]
pub struct MockSig {
    desc: AlgorithmDescriptor,
    seed: u64,
    calls: u64,
    cost: CostEngine,
}

impl MockSig {
    fn next_call(&mut self) -> u64 {
        let n = self.calls;
        self.calls += 1;
        n
    }

    fn expected_signature(&self, key_id: &[u8], msg: &[u8]) -> Vec<u8> {
        let msg_hash = hash32(&[b"pqb-sig-msg", msg]);
        expand(
            &[b"pqb-sig-sig", key_id, &msg_hash],
            self.desc.payload_bytes as usize,
        )
    }
}

impl SigProvider for MockSig {
    fn descriptor(&self) -> &AlgorithmDescriptor {
        &self.desc
    }

    fn keypair(&mut self) -> Result<(Vec<u8>, Vec<u8>), ProviderError> {
        let acc = self.cost.run(Operation::Keypair);
        let n = self.next_call();
        let kp_seed = hash32(&[
            b"pqb-sig-keypair",
            &self.seed.to_be_bytes(),
            &n.to_be_bytes(),
            &acc.to_be_bytes(),
        ]);
        let key_id = hash32(&[b"pqb-sig-id", &kp_seed]);
        let idl = key_id_len(&self.desc);

        let mut pk = expand(&[b"pqb-sig-pk", &kp_seed], self.desc.public_key_bytes as usize);
        pk[..idl].copy_from_slice(&key_id[..idl]);
        let mut sk = expand(&[b"pqb-sig-sk", &kp_seed], self.desc.private_key_bytes as usize);
        sk[..idl].copy_from_slice(&key_id[..idl]);
        Ok((pk, sk))
    }

    fn sign(&mut self, sk: &[u8], msg: &[u8]) -> Result<Vec<u8>, ProviderError> {
        self.cost.run(Operation::Sign);
        let idl = key_id_len(&self.desc);
        if sk.len() < idl {
            return Err(ProviderError::OpFailed(format!(
                "{}: private key too short ({} bytes)",
                self.desc.id,
                sk.len()
            )));
        }
        Ok(self.expected_signature(&sk[..idl], msg))
    }

    fn verify(&mut self, pk: &[u8], msg: &[u8], sig: &[u8]) -> Result<bool, ProviderError> {
        self.cost.run(Operation::Verify);
        let idl = key_id_len(&self.desc);
        if pk.len() < idl {
            return Ok(false);
        }
        Ok(self.expected_signature(&pk[..idl], msg) == sig)
    }
}

/// Build a mock KEM provider for a KEM descriptor.
pub fn mock_kem(
    desc: &AlgorithmDescriptor,
    seed: u64,
    profile: MockCostProfile,
) -> Result<MockKem, ProviderError> {
    mock_kem_with_clock(desc, seed, profile, None)
}

pub fn mock_kem_with_clock(
    desc: &AlgorithmDescriptor,
    seed: u64,
    profile: MockCostProfile,
    clock: Option<VirtualClock>,
) -> Result<MockKem, ProviderError> {
    if desc.family != AlgorithmFamily::Kem {
        return Err(ProviderError::WrongFamily {
            id: desc.id.clone(),
            family: desc.family.to_string(),
            expected: AlgorithmFamily::Kem.to_string(),
        });
    }
    Ok(MockKem {
        desc: desc.clone(),
        seed,
        calls: 0,
        cost: CostEngine { profile, clock },
    })
}

/// Build a mock signature provider for a SIGNATURE descriptor.
pub fn mock_sig(
    desc: &AlgorithmDescriptor,
    seed: u64,
    profile: MockCostProfile,
) -> Result<MockSig, ProviderError> {
    mock_sig_with_clock(desc, seed, profile, None)
}

pub fn mock_sig_with_clock(
    desc: &AlgorithmDescriptor,
    seed: u64,
    profile: MockCostProfile,
    clock: Option<VirtualClock>,
) -> Result<MockSig, ProviderError> {
    if desc.family != AlgorithmFamily::Signature {
        return Err(ProviderError::WrongFamily {
            id: desc.id.clone(),
            family: desc.family.to_string(),
            expected: AlgorithmFamily::Signature.to_string(),
        });
    }
    Ok(MockSig {
        desc: desc.clone(),
        seed,
        calls: 0,
        cost: CostEngine { profile, clock },
    })
}

/// Factory handing out mock providers with a shared seed and cost profile.
#[derive(Clone)]
pub struct MockProviderFactory {
    pub seed: u64,
    pub profile: MockCostProfile,
    pub clock: Option<VirtualClock>,
}

impl MockProviderFactory {
    pub fn new(seed: u64, profile: MockCostProfile) -> Self {
        MockProviderFactory {
            seed,
            profile,
            clock: None,
        }
    }

    pub fn with_clock(seed: u64, profile: MockCostProfile, clock: VirtualClock) -> Self {
        MockProviderFactory {
            seed,
            profile,
            clock: Some(clock),
        }
    }
}

impl ProviderFactory for MockProviderFactory {
    fn kem(&self, desc: &AlgorithmDescriptor) -> Result<Box<dyn KemProvider>, ProviderError> {
        Ok(Box::new(mock_kem_with_clock(
            desc,
            self.seed,
            self.profile.clone(),
            self.clock.clone(),
        )?))
    }

    fn sig(&self, desc: &AlgorithmDescriptor) -> Result<Box<dyn SigProvider>, ProviderError> {
        Ok(Box::new(mock_sig_with_clock(
            desc,
            self.seed,
            self.profile.clone(),
            self.clock.clone(),
        )?))
    }
}

/// Credential material deterministically derived from an algorithm id, for
/// pre-generated certificate/key files. The key id prefix is laid out exactly
/// as [`MockSig::keypair`] would, so a key file written here signs and a
/// certificate written here verifies.
pub fn derived_sig_keypair(desc: &AlgorithmDescriptor, label: &[u8]) -> (Vec<u8>, Vec<u8>) {
    let kp_seed = hash32(&[b"pqb-cred-seed", label, desc.id.as_bytes()]);
    let key_id = hash32(&[b"pqb-sig-id", &kp_seed]);
    let idl = key_id_len(desc);
    let mut pk = expand(&[b"pqb-sig-pk", &kp_seed], desc.public_key_bytes as usize);
    pk[..idl].copy_from_slice(&key_id[..idl]);
    let mut sk = expand(&[b"pqb-sig-sk", &kp_seed], desc.private_key_bytes as usize);
    sk[..idl].copy_from_slice(&key_id[..idl]);
    (pk, sk)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin_registry;
    use crate::timing::TimeSource;

    fn kem_desc(id: &str) -> AlgorithmDescriptor {
        builtin_registry().find(id).unwrap().clone()
    }

    #[test]
    fn kem_round_trip_and_sizes() {
        let desc = kem_desc("ML-KEM-512");
        let mut kem = mock_kem(&desc, 1, MockCostProfile::zero()).unwrap();
        let (pk, sk) = kem.keygen().unwrap();
        assert_eq!(pk.len(), 800);
        assert_eq!(sk.len(), 1632);
        let (ct, ss) = kem.encaps(&pk).unwrap();
        assert_eq!(ct.len(), 768);
        assert_eq!(ss.len(), SHARED_SECRET_BYTES);
        assert_eq!(kem.decaps(&sk, &ct).unwrap(), ss);
    }

    #[test]
    fn kem_tampered_ciphertext_changes_secret() {
        let desc = kem_desc("ML-KEM-512");
        let mut kem = mock_kem(&desc, 1, MockCostProfile::zero()).unwrap();
        let (pk, sk) = kem.keygen().unwrap();
        let (ct, ss) = kem.encaps(&pk).unwrap();
        // Oracle: flip each of the first 8 bytes in turn; every flip must
        // change the recovered secret.
        for i in 0..8 {
            let mut bad = ct.clone();
            bad[i] ^= 0x01;
            assert_ne!(kem.decaps(&sk, &bad).unwrap(), ss, "byte {i}");
        }
        // And a byte deep in the fill region.
        let mut bad = ct.clone();
        *bad.last_mut().unwrap() ^= 0x80;
        assert_ne!(kem.decaps(&sk, &bad).unwrap(), ss);
    }

    #[test]
    fn sig_round_trip_and_sizes() {
        let desc = builtin_registry().find("FN-DSA-512").unwrap().clone();
        let mut sig = mock_sig(&desc, 7, MockCostProfile::zero()).unwrap();
        let (pk, sk) = sig.keypair().unwrap();
        assert_eq!(pk.len(), 897);
        assert_eq!(sk.len(), 1281);
        let s = sig.sign(&sk, b"hello").unwrap();
        assert_eq!(s.len(), 690);
        assert!(sig.verify(&pk, b"hello", &s).unwrap());
    }

    #[test]
    fn sig_rejects_mutations() {
        let desc = builtin_registry().find("ML-DSA-44").unwrap().clone();
        let mut sig = mock_sig(&desc, 9, MockCostProfile::zero()).unwrap();
        let (pk, sk) = sig.keypair().unwrap();
        let msg = b"the quick brown fox".to_vec();
        let s = sig.sign(&sk, &msg).unwrap();

        // Appending a byte to the message fails.
        let mut longer = msg.clone();
        longer.push(0);
        assert!(!sig.verify(&pk, &longer, &s).unwrap());

        // Oracle: 16 random single-byte mutations of message or signature,
        // derived from a fixed walk so the test is reproducible.
        for k in 0u8..16 {
            if k % 2 == 0 {
                let mut m = msg.clone();
                let idx = (k as usize * 7) % m.len();
                m[idx] ^= 1 << (k % 8);
                assert!(!sig.verify(&pk, &m, &s).unwrap());
            } else {
                let mut bad = s.clone();
                let idx = (k as usize * 131) % bad.len();
                bad[idx] ^= 1 << (k % 8);
                assert!(!sig.verify(&pk, &msg, &bad).unwrap());
            }
        }
    }

    #[test]
    fn wrong_family_is_rejected() {
        let kem = kem_desc("ML-KEM-512");
        let sig = builtin_registry().find("ML-DSA-44").unwrap().clone();
        assert_eq!(
            mock_kem(&sig, 1, MockCostProfile::zero())
                .unwrap_err()
                .code(),
            "WRONG_FAMILY"
        );
        assert_eq!(
            mock_sig(&kem, 1, MockCostProfile::zero())
                .unwrap_err()
                .code(),
            "WRONG_FAMILY"
        );
    }

    #[test]
    fn equal_parameters_give_identical_call_sequences() {
        let desc = kem_desc("ML-KEM-768");
        let profile = MockCostProfile::uniform(10);
        let mut a = mock_kem(&desc, 42, profile.clone()).unwrap();
        let mut b = mock_kem(&desc, 42, profile).unwrap();
        for _ in 0..3 {
            let (pk_a, sk_a) = a.keygen().unwrap();
            let (pk_b, sk_b) = b.keygen().unwrap();
            assert_eq!(pk_a, pk_b);
            assert_eq!(sk_a, sk_b);
            let (ct_a, ss_a) = a.encaps(&pk_a).unwrap();
            let (ct_b, ss_b) = b.encaps(&pk_b).unwrap();
            assert_eq!(ct_a, ct_b);
            assert_eq!(ss_a, ss_b);
        }
        // Different seed diverges.
        let mut c = mock_kem(&desc, 43, MockCostProfile::uniform(10)).unwrap();
        assert_ne!(c.keygen().unwrap().0, a.keygen().unwrap().0);
    }

    #[test]
    fn derived_credentials_sign_and_verify() {
        let desc = builtin_registry().find("ML-DSA-44").unwrap().clone();
        let (pk, sk) = derived_sig_keypair(&desc, b"creds");
        assert_eq!(pk.len(), desc.public_key_bytes as usize);
        assert_eq!(sk.len(), desc.private_key_bytes as usize);
        let mut sig = mock_sig(&desc, 0, MockCostProfile::zero()).unwrap();
        let s = sig.sign(&sk, b"transcript").unwrap();
        assert!(sig.verify(&pk, b"transcript", &s).unwrap());
    }

    #[test]
    fn virtual_clock_is_charged_per_operation() {
        let clock = VirtualClock::new();
        let desc = kem_desc("ML-KEM-512");
        let mut profile = MockCostProfile::zero();
        profile.set(Operation::Keygen, 100, 4.0);
        let mut kem =
            mock_kem_with_clock(&desc, 1, profile, Some(clock.clone())).unwrap();
        kem.keygen().unwrap();
        assert_eq!(clock.now_ns(), 400);
        let (pk, _) = kem.keygen().unwrap();
        assert_eq!(clock.now_ns(), 800);
        // Zero-cost ops still advance by one so window loops terminate.
        let before = clock.now_ns();
        kem.encaps(&pk).unwrap();
        assert!(clock.now_ns() > before);
    }
}
