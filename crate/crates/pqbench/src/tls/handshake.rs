//! The simulated TLS-1.3-style handshake run over the data connection.
//!
//! Every payload is framed with a 4-byte big-endian length prefix. First
//! use:
//!
//! ```text
//! client -> server   frame(kem public key)
//! server -> client   frame(kem ciphertext)
//!                    frame(certificate)           header || sig pk || filler
//!                    frame(transcript signature)
//!                    frame(session token)          8 bytes from the secret
//! ```
//!
//! The server encapsulates against the client's key and signs the transcript
//! hash with its credential key. The client decapsulates, verifies the
//! signature with the public key extracted from the certificate, and derives
//! the session token from its own shared secret: a token match proves secret
//! agreement. Session reuse presents the stored token first (an 8-byte
//! frame, distinguishable from any public key by length), runs the KEM
//! operations, and skips both signature operations and certificate bytes.

use std::collections::HashSet;
use std::io::{Read, Write};

use sha2::{Digest, Sha256};

use crate::model::{AlgorithmDescriptor, HandshakeMode};
use crate::provider::{KemProvider, SigProvider};

use super::credentials::CERT_HEADER_BYTES;
use super::TlsError;

/// Upper bound for one framed payload; generous against the largest
/// certificate in the registry but small enough to catch corrupt prefixes.
pub const MAX_FRAME_BYTES: usize = 1 << 20;

pub const SESSION_TOKEN_BYTES: usize = 8;

pub type SessionToken = [u8; SESSION_TOKEN_BYTES];

pub fn write_frame<S: Write>(stream: &mut S, payload: &[u8]) -> Result<(), TlsError> {
    if payload.len() > MAX_FRAME_BYTES {
        return Err(TlsError::FrameTooLarge(payload.len()));
    }
    let len = (payload.len() as u32).to_be_bytes();
    stream.write_all(&len).map_err(map_stream_err)?;
    stream.write_all(payload).map_err(map_stream_err)?;
    Ok(())
}

pub fn read_frame<S: Read>(stream: &mut S) -> Result<Vec<u8>, TlsError> {
    let mut len_buf = [0u8; 4];
    read_exact(stream, &mut len_buf)?;
    let len = u32::from_be_bytes(len_buf) as usize;
    if len > MAX_FRAME_BYTES {
        return Err(TlsError::FrameTooLarge(len));
    }
    let mut payload = vec![0u8; len];
    read_exact(stream, &mut payload)?;
    Ok(payload)
}

fn read_exact<S: Read>(stream: &mut S, buf: &mut [u8]) -> Result<(), TlsError> {
    stream.read_exact(buf).map_err(map_stream_err)
}

fn map_stream_err(e: std::io::Error) -> TlsError {
    match e.kind() {
        std::io::ErrorKind::UnexpectedEof
        | std::io::ErrorKind::ConnectionReset
        | std::io::ErrorKind::BrokenPipe
        | std::io::ErrorKind::ConnectionAborted => TlsError::StreamClosed,
        _ => TlsError::Socket(e),
    }
}

fn transcript_hash(client_pk: &[u8], ciphertext: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"pqb-transcript");
    h.update(client_pk);
    h.update(ciphertext);
    h.finalize().into()
}

fn derive_token(shared_secret: &[u8], label: &[u8]) -> SessionToken {
    let mut h = Sha256::new();
    h.update(b"pqb-token");
    h.update(label);
    h.update(shared_secret);
    let digest = h.finalize();
    let mut token = [0u8; SESSION_TOKEN_BYTES];
    token.copy_from_slice(&digest[..SESSION_TOKEN_BYTES]);
    token
}

/// Extract the signer's public key from a certificate of the layout
/// `generate_credentials` writes.
pub fn certificate_public_key<'a>(
    cert: &'a [u8],
    sig_desc: &AlgorithmDescriptor,
) -> Result<&'a [u8], TlsError> {
    let pk_len = sig_desc.public_key_bytes as usize;
    let expected = CERT_HEADER_BYTES + pk_len + sig_desc.payload_bytes as usize;
    if cert.len() != expected {
        return Err(TlsError::HandshakeMismatch(format!(
            "certificate is {} bytes, expected {expected} for {}",
            cert.len(),
            sig_desc.id
        )));
    }
    Ok(&cert[CERT_HEADER_BYTES..CERT_HEADER_BYTES + pk_len])
}

/// Client side of a first-use handshake. Returns the session token for later
/// reuse; any secret disagreement or signature failure is
/// `HANDSHAKE_MISMATCH`.
pub fn client_full_handshake<S: Read + Write>(
    stream: &mut S,
    kem: &mut dyn KemProvider,
    sig: &mut dyn SigProvider,
    sig_desc: &AlgorithmDescriptor,
) -> Result<SessionToken, TlsError> {
    let (pk, sk) = kem.keygen()?;
    write_frame(stream, &pk)?;

    let ciphertext = read_frame(stream)?;
    let certificate = read_frame(stream)?;
    let signature = read_frame(stream)?;
    let server_token = read_frame(stream)?;

    let shared_secret = kem.decaps(&sk, &ciphertext)?;
    let server_pk = certificate_public_key(&certificate, sig_desc)?;
    let transcript = transcript_hash(&pk, &ciphertext);
    if !sig.verify(server_pk, &transcript, &signature)? {
        return Err(TlsError::HandshakeMismatch(
            "transcript signature failed verification".into(),
        ));
    }
    let token = derive_token(&shared_secret, b"session");
    if server_token.as_slice() != token {
        return Err(TlsError::HandshakeMismatch(
            "session token disagrees: shared secrets differ".into(),
        ));
    }
    Ok(token)
}

/// Client side of a session-reuse handshake.
pub fn client_resume_handshake<S: Read + Write>(
    stream: &mut S,
    kem: &mut dyn KemProvider,
    token: &SessionToken,
) -> Result<(), TlsError> {
    write_frame(stream, token)?;
    let accepted = read_frame(stream)?;
    if accepted.as_slice() != [1u8] {
        return Err(TlsError::HandshakeMismatch("server rejected session token".into()));
    }
    let (pk, sk) = kem.keygen()?;
    write_frame(stream, &pk)?;
    let ciphertext = read_frame(stream)?;
    let confirm = read_frame(stream)?;
    let shared_secret = kem.decaps(&sk, &ciphertext)?;
    if confirm.as_slice() != derive_token(&shared_secret, b"resume") {
        return Err(TlsError::HandshakeMismatch(
            "resume confirmation disagrees: shared secrets differ".into(),
        ));
    }
    Ok(())
}

/// Server side of one data connection. The first frame dispatches: a frame
/// of exactly [`SESSION_TOKEN_BYTES`] is a resumption offer, anything else
/// is a fresh KEM public key.
pub fn serve_connection<S: Read + Write>(
    stream: &mut S,
    kem: &mut dyn KemProvider,
    sig: &mut dyn SigProvider,
    kem_desc: &AlgorithmDescriptor,
    credential_sk: &[u8],
    certificate: &[u8],
    tokens: &mut HashSet<SessionToken>,
) -> Result<HandshakeMode, TlsError> {
    let first = read_frame(stream)?;
    if first.len() == SESSION_TOKEN_BYTES {
        let mut offered = [0u8; SESSION_TOKEN_BYTES];
        offered.copy_from_slice(&first);
        if !tokens.contains(&offered) {
            write_frame(stream, &[0u8])?;
            return Err(TlsError::HandshakeMismatch("unknown session token".into()));
        }
        write_frame(stream, &[1u8])?;
        let client_pk = read_frame(stream)?;
        let (ciphertext, shared_secret) = kem.encaps(&client_pk)?;
        write_frame(stream, &ciphertext)?;
        write_frame(stream, &derive_token(&shared_secret, b"resume"))?;
        Ok(HandshakeMode::SessionReuse)
    } else {
        if first.len() != kem_desc.public_key_bytes as usize {
            return Err(TlsError::HandshakeMismatch(format!(
                "client key is {} bytes, expected {} for {}",
                first.len(),
                kem_desc.public_key_bytes,
                kem_desc.id
            )));
        }
        let (ciphertext, shared_secret) = kem.encaps(&first)?;
        let transcript = transcript_hash(&first, &ciphertext);
        let signature = sig.sign(credential_sk, &transcript)?;
        let token = derive_token(&shared_secret, b"session");
        write_frame(stream, &ciphertext)?;
        write_frame(stream, certificate)?;
        write_frame(stream, &signature)?;
        write_frame(stream, &token)?;
        tokens.insert(token);
        Ok(HandshakeMode::FirstUse)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin_registry;
    use crate::provider::{mock_kem, mock_sig, MockCostProfile};
    use crate::tls::credentials::build_certificate;
    use crate::provider::mock::derived_sig_keypair;
    use std::net::{TcpListener, TcpStream};

    fn loopback_pair() -> (TcpStream, TcpStream) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let client = TcpStream::connect(addr).unwrap();
        let (server, _) = listener.accept().unwrap();
        (client, server)
    }

    struct Creds {
        sk: Vec<u8>,
        cert: Vec<u8>,
    }

    fn creds(sig_id: &str) -> Creds {
        let reg = builtin_registry();
        let desc = reg.find(sig_id).unwrap();
        let (pk, sk) = derived_sig_keypair(desc, b"test");
        Creds {
            sk,
            cert: build_certificate(desc, &pk),
        }
    }

    /// Spawn a server thread serving `n` connections; optionally tamper one
    /// byte of the signature frame.
    fn run_server(
        listener: TcpListener,
        sig_id: &'static str,
        kem_id: &'static str,
        n: usize,
        tamper_signature: bool,
    ) -> std::thread::JoinHandle<Vec<Result<HandshakeMode, TlsError>>> {
        std::thread::spawn(move || {
            let reg = builtin_registry();
            let kem_desc = reg.find(kem_id).unwrap().clone();
            let sig_desc = reg.find(sig_id).unwrap().clone();
            let mut kem = mock_kem(&kem_desc, 7, MockCostProfile::zero()).unwrap();
            let mut sig = mock_sig(&sig_desc, 7, MockCostProfile::zero()).unwrap();
            let c = creds(sig_id);
            let mut tokens = HashSet::new();
            let mut outcomes = Vec::new();
            for _ in 0..n {
                let (mut stream, _) = listener.accept().unwrap();
                if tamper_signature {
                    // Replay serve_connection but flip a signature byte.
                    let out = (|| {
                        let first = read_frame(&mut stream)?;
                        let (ct, ss) = kem.encaps(&first)?;
                        let transcript = transcript_hash(&first, &ct);
                        let mut signature = sig.sign(&c.sk, &transcript)?;
                        signature[0] ^= 0x01;
                        write_frame(&mut stream, &ct)?;
                        write_frame(&mut stream, &c.cert)?;
                        write_frame(&mut stream, &signature)?;
                        write_frame(&mut stream, &derive_token(&ss, b"session"))?;
                        Ok(HandshakeMode::FirstUse)
                    })();
                    outcomes.push(out);
                } else {
                    outcomes.push(serve_connection(
                        &mut stream,
                        &mut kem,
                        &mut sig,
                        &kem_desc,
                        &c.sk,
                        &c.cert,
                        &mut tokens,
                    ));
                }
            }
            outcomes
        })
    }

    #[test]
    fn first_use_succeeds_and_measures_wire_bytes() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = run_server(listener, "ML-DSA-44", "ML-KEM-512", 1, false);

        let reg = builtin_registry();
        let kem_desc = reg.find("ML-KEM-512").unwrap().clone();
        let sig_desc = reg.find("ML-DSA-44").unwrap().clone();
        let mut kem = mock_kem(&kem_desc, 3, MockCostProfile::zero()).unwrap();
        let mut sig = mock_sig(&sig_desc, 3, MockCostProfile::zero()).unwrap();

        // Wrap the stream to count client->server bytes.
        struct Counting<S> {
            inner: S,
            written: usize,
        }
        impl<S: Read> Read for Counting<S> {
            fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
                self.inner.read(buf)
            }
        }
        impl<S: Write> Write for Counting<S> {
            fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
                self.written += buf.len();
                self.inner.write(buf)
            }
            fn flush(&mut self) -> std::io::Result<()> {
                self.inner.flush()
            }
        }

        let mut stream = Counting {
            inner: TcpStream::connect(addr).unwrap(),
            written: 0,
        };
        let token = client_full_handshake(&mut stream, &mut kem, &mut sig, &sig_desc).unwrap();
        assert_eq!(token.len(), SESSION_TOKEN_BYTES);
        // 4-byte prefix plus the 800-byte ML-KEM-512 public key.
        assert_eq!(stream.written, 4 + 800);
        handle.join().unwrap();
    }

    #[test]
    fn reuse_roundtrip_and_unknown_token() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = run_server(listener, "ML-DSA-44", "ML-KEM-512", 3, false);

        let reg = builtin_registry();
        let kem_desc = reg.find("ML-KEM-512").unwrap().clone();
        let sig_desc = reg.find("ML-DSA-44").unwrap().clone();
        let mut kem = mock_kem(&kem_desc, 3, MockCostProfile::zero()).unwrap();
        let mut sig = mock_sig(&sig_desc, 3, MockCostProfile::zero()).unwrap();

        let mut s1 = TcpStream::connect(addr).unwrap();
        let token = client_full_handshake(&mut s1, &mut kem, &mut sig, &sig_desc).unwrap();

        let mut s2 = TcpStream::connect(addr).unwrap();
        client_resume_handshake(&mut s2, &mut kem, &token).unwrap();

        let mut s3 = TcpStream::connect(addr).unwrap();
        let bogus = [0xAAu8; SESSION_TOKEN_BYTES];
        let err = client_resume_handshake(&mut s3, &mut kem, &bogus).unwrap_err();
        assert_eq!(err.code(), "HANDSHAKE_MISMATCH");

        let outcomes = handle.join().unwrap();
        assert!(matches!(outcomes[0], Ok(HandshakeMode::FirstUse)));
        assert!(matches!(outcomes[1], Ok(HandshakeMode::SessionReuse)));
        assert!(outcomes[2].is_err());
    }

    #[test]
    fn tampered_signature_is_rejected() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = run_server(listener, "ML-DSA-44", "ML-KEM-512", 1, true);

        let reg = builtin_registry();
        let kem_desc = reg.find("ML-KEM-512").unwrap().clone();
        let sig_desc = reg.find("ML-DSA-44").unwrap().clone();
        let mut kem = mock_kem(&kem_desc, 3, MockCostProfile::zero()).unwrap();
        let mut sig = mock_sig(&sig_desc, 3, MockCostProfile::zero()).unwrap();

        let mut stream = TcpStream::connect(addr).unwrap();
        let err = client_full_handshake(&mut stream, &mut kem, &mut sig, &sig_desc).unwrap_err();
        assert_eq!(err.code(), "HANDSHAKE_MISMATCH");
        handle.join().unwrap();
    }

    #[test]
    fn closed_stream_is_reported() {
        let (mut client, server) = loopback_pair();
        drop(server);
        let reg = builtin_registry();
        let kem_desc = reg.find("ML-KEM-512").unwrap().clone();
        let sig_desc = reg.find("ML-DSA-44").unwrap().clone();
        let mut kem = mock_kem(&kem_desc, 3, MockCostProfile::zero()).unwrap();
        let mut sig = mock_sig(&sig_desc, 3, MockCostProfile::zero()).unwrap();
        let err = client_full_handshake(&mut client, &mut kem, &mut sig, &sig_desc).unwrap_err();
        assert_eq!(err.code(), "STREAM_CLOSED");
    }

    #[test]
    fn handshake_success_rate_over_seeds() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = run_server(listener, "FN-DSA-512", "ML-KEM-768", 100, false);

        let reg = builtin_registry();
        let kem_desc = reg.find("ML-KEM-768").unwrap().clone();
        let sig_desc = reg.find("FN-DSA-512").unwrap().clone();
        let mut successes = 0;
        for seed in 0..100u64 {
            let mut kem = mock_kem(&kem_desc, seed, MockCostProfile::zero()).unwrap();
            let mut sig = mock_sig(&sig_desc, seed, MockCostProfile::zero()).unwrap();
            let mut stream = TcpStream::connect(addr).unwrap();
            if client_full_handshake(&mut stream, &mut kem, &mut sig, &sig_desc).is_ok() {
                successes += 1;
            }
        }
        assert_eq!(successes, 100);
        handle.join().unwrap();
    }
}
