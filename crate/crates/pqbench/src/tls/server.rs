//! Socket-level handshake server: hosts the control session on the control
//! port and serves simulated handshakes on the data port while a test window
//! is open.
//!
//! Two threads: the control thread runs the session state machine, the data
//! thread accepts connections. They share the active-test slot behind a
//! mutex; the data thread serves only while the slot is populated (between
//! GO and the client's RESULT).

use std::collections::HashSet;
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use crate::model::{AlgorithmDescriptor, BenchConfig, Registry};
use crate::provider::{KemProvider, ProviderFactory, SigProvider};

use super::credentials::CredentialManifest;
use super::events::SessionLog;
use super::handshake::{serve_connection, SessionToken};
use super::plan::{TestId, TestPlan};
use super::session::{run_server_session, ServeStats, ServerSessionReport, SessionConfig, TestServer};
use super::TlsError;

pub type ServerReport = ServerSessionReport;

struct ActiveTest {
    kem: Box<dyn KemProvider>,
    sig: Box<dyn SigProvider>,
    kem_desc: AlgorithmDescriptor,
    credential_sk: Vec<u8>,
    certificate: Vec<u8>,
    tokens: HashSet<SessionToken>,
    stats: ServeStats,
}

/// Serves data connections for the currently active test.
pub struct SocketTestServer {
    registry: Registry,
    manifest: CredentialManifest,
    factory: Arc<dyn ProviderFactory>,
    active: Arc<Mutex<Option<ActiveTest>>>,
    stop: Arc<AtomicBool>,
    worker: Option<std::thread::JoinHandle<()>>,
}

impl SocketTestServer {
    pub fn bind(
        addr: &str,
        registry: Registry,
        manifest: CredentialManifest,
        factory: Arc<dyn ProviderFactory>,
        io_timeout: Duration,
    ) -> Result<Self, TlsError> {
        let listener = TcpListener::bind(addr).map_err(TlsError::Socket)?;
        listener.set_nonblocking(true).map_err(TlsError::Socket)?;
        let active: Arc<Mutex<Option<ActiveTest>>> = Arc::new(Mutex::new(None));
        let stop = Arc::new(AtomicBool::new(false));

        let worker_active = Arc::clone(&active);
        let worker_stop = Arc::clone(&stop);
        let worker = std::thread::spawn(move || {
            data_loop(listener, worker_active, worker_stop, io_timeout);
        });

        Ok(SocketTestServer {
            registry,
            manifest,
            factory,
            active,
            stop,
            worker: Some(worker),
        })
    }

    fn lookup(&self, test: &TestId) -> Result<ActiveTest, TlsError> {
        let kem_desc = self
            .registry
            .find(&test.kem_id)
            .ok_or_else(|| TlsError::InvalidPlan(format!("unknown KEM {:?}", test.kem_id)))?
            .clone();
        let sig_desc = self
            .registry
            .find(&test.sig_id)
            .ok_or_else(|| TlsError::InvalidPlan(format!("unknown signature {:?}", test.sig_id)))?
            .clone();
        let entry = self.manifest.entry(&sig_desc.id).ok_or_else(|| {
            TlsError::InvalidPlan(format!("no credentials for {:?}", sig_desc.id))
        })?;
        let credential_sk =
            std::fs::read(&entry.key_file).map_err(|source| TlsError::Io {
                path: entry.key_file.clone(),
                source,
            })?;
        let certificate =
            std::fs::read(&entry.certificate_file).map_err(|source| TlsError::Io {
                path: entry.certificate_file.clone(),
                source,
            })?;
        Ok(ActiveTest {
            kem: self.factory.kem(&kem_desc)?,
            sig: self.factory.sig(&sig_desc)?,
            kem_desc,
            credential_sk,
            certificate,
            tokens: HashSet::new(),
            stats: ServeStats::default(),
        })
    }
}

impl TestServer for SocketTestServer {
    fn start(&mut self, test: &TestId) -> Result<(), TlsError> {
        let active = self.lookup(test)?;
        *self.active.lock().expect("active slot poisoned") = Some(active);
        Ok(())
    }

    fn stop(&mut self) -> Result<ServeStats, TlsError> {
        let taken = self.active.lock().expect("active slot poisoned").take();
        Ok(taken.map(|t| t.stats).unwrap_or_default())
    }
}

impl Drop for SocketTestServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(worker) = self.worker.take() {
            let _ = worker.join();
        }
    }
}

fn data_loop(
    listener: TcpListener,
    active: Arc<Mutex<Option<ActiveTest>>>,
    stop: Arc<AtomicBool>,
    io_timeout: Duration,
) {
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((mut stream, _peer)) => {
                let _ = stream.set_read_timeout(Some(io_timeout));
                let _ = stream.set_write_timeout(Some(io_timeout));
                let mut guard = active.lock().expect("active slot poisoned");
                if let Some(test) = guard.as_mut() {
                    let ActiveTest {
                        kem,
                        sig,
                        kem_desc,
                        credential_sk,
                        certificate,
                        tokens,
                        stats,
                    } = test;
                    match serve_connection(
                        &mut stream,
                        kem.as_mut(),
                        sig.as_mut(),
                        kem_desc,
                        credential_sk,
                        certificate,
                        tokens,
                    ) {
                        Ok(_) => stats.served += 1,
                        Err(_) => stats.failures += 1,
                    }
                }
                // No active test: drop the connection.
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                std::thread::sleep(Duration::from_millis(2));
            }
            Err(_) => std::thread::sleep(Duration::from_millis(2)),
        }
    }
}

fn accept_with_deadline(
    listener: &TcpListener,
    deadline: Duration,
) -> Result<TcpStream, TlsError> {
    let start = Instant::now();
    listener.set_nonblocking(true).map_err(TlsError::Socket)?;
    loop {
        match listener.accept() {
            Ok((stream, _)) => {
                stream.set_nonblocking(false).map_err(TlsError::Socket)?;
                return Ok(stream);
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                if start.elapsed() >= deadline {
                    return Err(TlsError::ControlTimeout("control connection".into()));
                }
                std::thread::sleep(Duration::from_millis(5));
            }
            Err(e) => return Err(TlsError::Socket(e)),
        }
    }
}

/// Host one handshake benchmarking session: accept a control connection on
/// the configured port, agree the protocol version, and serve the plan
/// derived from the registry until DONE.
pub fn run_handshake_server(
    config: &BenchConfig,
    registry: &Registry,
    manifest: &CredentialManifest,
    factory: Arc<dyn ProviderFactory>,
) -> Result<ServerReport, TlsError> {
    config.validate()?;
    let plan = TestPlan::from_registry(registry, config.tls_window_seconds, config.num_runs)?;
    let timeout = Duration::from_secs_f64(config.control_timeout_seconds);

    let control_listener =
        TcpListener::bind(("0.0.0.0", config.control_port)).map_err(TlsError::Socket)?;
    let mut data_server = SocketTestServer::bind(
        &format!("0.0.0.0:{}", config.data_port),
        registry.clone(),
        manifest.clone(),
        factory,
        timeout,
    )?;

    let accept_deadline = timeout * (config.max_retries + 1);
    let control = accept_with_deadline(&control_listener, accept_deadline)?;
    let mut chan = super::control::TcpControlChannel::new(control)?;

    let session_cfg = SessionConfig {
        machine_id: config.machine_id.clone(),
        control_timeout: timeout,
        window: Duration::from_secs_f64(config.tls_window_seconds),
        max_retries: config.max_retries,
    };
    let log = SessionLog::new();
    run_server_session(&mut chan, &session_cfg, &plan, &mut data_server, &log)
}
