//! Socket-level handshake client: drives the control session and measures
//! sequential handshake throughput against the server's data port.

use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::model::{BenchConfig, HandshakeMode, HandshakeRecord, Registry};
use crate::provider::ProviderFactory;

use super::credentials::CredentialManifest;
use super::events::SessionLog;
use super::handshake::{client_full_handshake, client_resume_handshake, SessionToken};
use super::plan::{TestId, TestPlan};
use super::session::{
    run_client_session, ClientTestResult, SessionConfig, TestRunner, WindowMeasurement,
};
use super::TlsError;

/// Everything the client learned from one session.
#[derive(Debug, Clone, Default)]
pub struct ClientReport {
    pub records: Vec<HandshakeRecord>,
    pub outcomes: Vec<ClientTestResult>,
    pub skipped: Vec<TestId>,
    pub peer_machine_id: String,
}

/// User-mode CPU seconds consumed by this process so far.
fn user_cpu_seconds() -> f64 {
    let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
    let rc = unsafe { libc::getrusage(libc::RUSAGE_SELF, &mut usage) };
    if rc != 0 {
        return 0.0;
    }
    usage.ru_utime.tv_sec as f64 + usage.ru_utime.tv_usec as f64 / 1e6
}

/// Measures one window by opening sequential data connections.
struct SocketTestRunner {
    registry: Registry,
    factory: Arc<dyn ProviderFactory>,
    data_addr: SocketAddr,
    window: Duration,
    io_timeout: Duration,
}

impl SocketTestRunner {
    fn connect(&self) -> Result<TcpStream, TlsError> {
        let stream = TcpStream::connect_timeout(&self.data_addr, self.io_timeout)
            .map_err(|_| TlsError::ConnectRefused(self.data_addr.to_string()))?;
        stream.set_read_timeout(Some(self.io_timeout)).ok();
        stream.set_write_timeout(Some(self.io_timeout)).ok();
        stream.set_nodelay(true).ok();
        Ok(stream)
    }
}

impl TestRunner for SocketTestRunner {
    fn run_window(&mut self, test: &TestId, _run: u32) -> Result<WindowMeasurement, TlsError> {
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
        let mut kem = self.factory.kem(&kem_desc)?;
        let mut sig = self.factory.sig(&sig_desc)?;

        let start = Instant::now();
        let cpu_start = user_cpu_seconds();
        let mut connections: u64 = 0;
        let mut failures: u64 = 0;
        let mut token: Option<SessionToken> = None;

        while start.elapsed() < self.window {
            let mut stream = match self.connect() {
                Ok(s) => s,
                Err(_) => {
                    failures += 1;
                    std::thread::sleep(Duration::from_millis(1));
                    continue;
                }
            };
            match test.mode {
                HandshakeMode::FirstUse => {
                    match client_full_handshake(&mut stream, kem.as_mut(), sig.as_mut(), &sig_desc)
                    {
                        Ok(_) => connections += 1,
                        Err(_) => failures += 1,
                    }
                }
                HandshakeMode::SessionReuse => match token {
                    // The uncounted initial handshake that establishes the
                    // session token, as s_time-style reuse testing does.
                    None => match client_full_handshake(
                        &mut stream,
                        kem.as_mut(),
                        sig.as_mut(),
                        &sig_desc,
                    ) {
                        Ok(t) => token = Some(t),
                        Err(_) => failures += 1,
                    },
                    Some(t) => match client_resume_handshake(&mut stream, kem.as_mut(), &t) {
                        Ok(()) => connections += 1,
                        Err(_) => failures += 1,
                    },
                },
            }
        }

        let real_seconds = start.elapsed().as_secs_f64();
        let cpu = (user_cpu_seconds() - cpu_start).max(1e-6);
        Ok(WindowMeasurement {
            connections,
            failures,
            real_seconds,
            user_connections_per_sec: connections as f64 / cpu,
        })
    }
}

fn peer_parts(config: &BenchConfig) -> Result<(String, u16), TlsError> {
    let peer = config
        .peer_address
        .as_deref()
        .ok_or_else(|| TlsError::InvalidPlan("peer_address required for the client role".into()))?;
    match peer.rsplit_once(':') {
        Some((host, port)) => {
            let port: u16 = port
                .parse()
                .map_err(|_| TlsError::InvalidPlan(format!("bad peer port in {peer:?}")))?;
            Ok((host.to_string(), port))
        }
        None => Ok((peer.to_string(), config.control_port)),
    }
}

fn resolve(host: &str, port: u16) -> Result<SocketAddr, TlsError> {
    (host, port)
        .to_socket_addrs()
        .map_err(TlsError::Socket)?
        .next()
        .ok_or_else(|| TlsError::ConnectRefused(format!("{host}:{port} did not resolve")))
}

fn connect_control(addr: SocketAddr, config: &BenchConfig) -> Result<TcpStream, TlsError> {
    let timeout = Duration::from_secs_f64(config.control_timeout_seconds);
    let mut last_err = None;
    for attempt in 0..=config.max_retries {
        match TcpStream::connect_timeout(&addr, timeout) {
            Ok(stream) => return Ok(stream),
            Err(e) => {
                last_err = Some(e);
                if attempt < config.max_retries {
                    std::thread::sleep(Duration::from_millis(200 * (attempt as u64 + 1)));
                }
            }
        }
    }
    Err(TlsError::ConnectRefused(format!(
        "{addr} after {} attempts: {}",
        config.max_retries + 1,
        last_err.map(|e| e.to_string()).unwrap_or_default()
    )))
}

/// Run the client side of a handshake benchmarking session and return one
/// record per completed (test, run).
pub fn run_handshake_client(
    config: &BenchConfig,
    registry: &Registry,
    manifest: &CredentialManifest,
    plan: &TestPlan,
    factory: Arc<dyn ProviderFactory>,
) -> Result<ClientReport, TlsError> {
    config.validate()?;
    // Fail fast if credentials are missing for any planned signature.
    for entry in &plan.entries {
        if manifest.entry(&entry.sig_id).is_none() {
            return Err(TlsError::InvalidPlan(format!(
                "no pre-generated credentials for {:?}",
                entry.sig_id
            )));
        }
    }

    let (host, control_port) = peer_parts(config)?;
    let control_addr = resolve(&host, control_port)?;
    let data_addr = resolve(&host, config.data_port)?;

    let control = connect_control(control_addr, config)?;
    let mut chan = super::control::TcpControlChannel::new(control)?;

    let timeout = Duration::from_secs_f64(config.control_timeout_seconds);
    let session_cfg = SessionConfig {
        machine_id: config.machine_id.clone(),
        control_timeout: timeout,
        window: Duration::from_secs_f64(plan.window_seconds),
        max_retries: config.max_retries,
    };
    let mut runner = SocketTestRunner {
        registry: registry.clone(),
        factory,
        data_addr,
        window: Duration::from_secs_f64(plan.window_seconds),
        io_timeout: timeout,
    };
    let log = SessionLog::new();
    let session = run_client_session(&mut chan, &session_cfg, registry, &mut runner, &log)?;

    let mut records = Vec::with_capacity(session.results.len());
    for r in &session.results {
        records.push(HandshakeRecord::new(
            r.test.sig_id.clone(),
            r.test.kem_id.clone(),
            r.test.mode,
            r.run,
            r.measurement.connections,
            r.measurement.real_seconds,
            r.measurement.user_connections_per_sec,
        )?);
    }
    Ok(ClientReport {
        records,
        outcomes: session.results,
        skipped: session.skipped,
        peer_machine_id: session.peer_machine_id,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peer_parsing() {
        let mut cfg = BenchConfig {
            peer_address: Some("10.0.0.2:9999".into()),
            ..BenchConfig::default()
        };
        assert_eq!(peer_parts(&cfg).unwrap(), ("10.0.0.2".into(), 9999));
        cfg.peer_address = Some("localhost".into());
        assert_eq!(
            peer_parts(&cfg).unwrap(),
            ("localhost".into(), cfg.control_port)
        );
    }

    #[test]
    fn absent_server_is_connect_refused() {
        let addr: SocketAddr = "127.0.0.1:1".parse().unwrap();
        let cfg = BenchConfig {
            control_timeout_seconds: 0.05,
            max_retries: 1,
            ..BenchConfig::default()
        };
        let err = connect_control(addr, &cfg).unwrap_err();
        assert_eq!(err.code(), "CONNECT_REFUSED");
    }
}
