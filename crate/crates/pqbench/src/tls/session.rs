//! Server and client session state machines over an abstract control
//! channel.
//!
//! The server drives the plan: per test it sends READY, waits for GO, serves
//! handshakes until the client reports RESULT, acknowledges with its own
//! RESULT, and moves on. A failed attempt (lost message, timeout) triggers
//! RETRY and a fresh READY, up to `max_retries` per test, after which the
//! server sends ERR and skips the test.
//!
//! The client never starts a measurement window before it has received READY
//! for the test, which gives the safety property that a window start always
//! follows the server's READY. Measurements are held tentatively until the
//! server acknowledges (or provably progresses past) the test, so a lost
//! RESULT leads to a clean re-measurement instead of a duplicate record.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use crate::model::Registry;

use super::control::{ControlChannel, ControlMessage, Suite};
use super::events::{SessionEvent, SessionLog, Side};
use super::plan::{TestId, TestPlan};
use super::TlsError;

/// Serves handshake connections while a test window is open.
pub trait TestServer {
    fn start(&mut self, test: &TestId) -> Result<(), TlsError>;
    fn stop(&mut self) -> Result<ServeStats, TlsError>;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ServeStats {
    pub served: u64,
    pub failures: u64,
}

/// Runs one measurement window on the client.
pub trait TestRunner {
    fn run_window(&mut self, test: &TestId, run: u32) -> Result<WindowMeasurement, TlsError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowMeasurement {
    pub connections: u64,
    pub failures: u64,
    pub real_seconds: f64,
    pub user_connections_per_sec: f64,
}

impl WindowMeasurement {
    pub fn payload(&self) -> String {
        format!(
            "connections={} failures={} real={:.6} user_cps={:.6}",
            self.connections, self.failures, self.real_seconds, self.user_connections_per_sec
        )
    }
}

/// Session parameters shared by both sides.
#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub machine_id: String,
    pub control_timeout: Duration,
    pub window: Duration,
    pub max_retries: u32,
}

impl SessionConfig {
    fn result_wait(&self) -> Duration {
        self.window + self.control_timeout
    }

    /// Upper bound on peer silence before the client gives up.
    fn client_idle(&self) -> Duration {
        self.window + 2 * self.control_timeout
    }
}

#[derive(Debug, Clone, Default)]
pub struct ServerSessionReport {
    pub completed: Vec<(TestId, u32)>,
    pub skipped: Vec<TestId>,
    pub retries: u32,
    pub served_connections: u64,
    pub peer_machine_id: String,
}

enum AttemptOutcome {
    Completed,
    TimedOut,
}

/// Drive the server side of a handshake session to completion.
pub fn run_server_session<C: ControlChannel>(
    chan: &mut C,
    cfg: &SessionConfig,
    plan: &TestPlan,
    server: &mut dyn TestServer,
    log: &Arc<SessionLog>,
) -> Result<ServerSessionReport, TlsError> {
    let mut report = ServerSessionReport::default();

    // HELLO exchange. The client speaks first.
    let hello_deadline = cfg.control_timeout * (cfg.max_retries + 1);
    let msg = chan.recv_timeout(hello_deadline)?;
    match msg {
        ControlMessage::Hello {
            proto_version,
            machine_id,
        } => {
            log.record(Side::Server, SessionEvent::RecvHello);
            if proto_version != super::PROTO_VERSION {
                let err = TlsError::VersionMismatch {
                    ours: super::PROTO_VERSION,
                    theirs: proto_version,
                };
                chan.send(&ControlMessage::Err {
                    code: "VERSION_MISMATCH".into(),
                    detail: format!("server speaks version {}", super::PROTO_VERSION),
                })?;
                log.record(
                    Side::Server,
                    SessionEvent::SentErr {
                        code: "VERSION_MISMATCH".into(),
                    },
                );
                return Err(err);
            }
            report.peer_machine_id = machine_id;
            chan.send(&ControlMessage::Hello {
                proto_version: super::PROTO_VERSION,
                machine_id: cfg.machine_id.clone(),
            })?;
            log.record(Side::Server, SessionEvent::SentHello);
        }
        other => {
            return Err(TlsError::MalformedControl(format!(
                "expected HELLO, got {}",
                other.verb()
            )))
        }
    }

    for run in 1..=plan.num_runs {
        for test in &plan.entries {
            match run_server_test(chan, cfg, test, run, server, log, &mut report)? {
                TestResult::Completed => {
                    report.completed.push((test.clone(), run));
                    log.record(
                        Side::Server,
                        SessionEvent::TestCompleted {
                            test: test.clone(),
                            run,
                        },
                    );
                }
                TestResult::Skipped => {
                    report.skipped.push(test.clone());
                    log.record(Side::Server, SessionEvent::TestSkipped { test: test.clone() });
                }
            }
        }
    }

    chan.send(&ControlMessage::Done {
        suite: Suite::Handshake,
    })?;
    log.record(Side::Server, SessionEvent::SentDone);
    // Best-effort wait for the client's DONE; its loss is harmless.
    loop {
        match chan.recv_timeout(cfg.control_timeout) {
            Ok(ControlMessage::Done { .. }) => {
                log.record(Side::Server, SessionEvent::RecvDone);
                break;
            }
            Ok(_) => continue,
            Err(_) => break,
        }
    }
    Ok(report)
}

enum TestResult {
    Completed,
    Skipped,
}

fn run_server_test<C: ControlChannel>(
    chan: &mut C,
    cfg: &SessionConfig,
    test: &TestId,
    _run: u32,
    server: &mut dyn TestServer,
    log: &Arc<SessionLog>,
    report: &mut ServerSessionReport,
) -> Result<TestResult, TlsError> {
    for attempt in 1..=cfg.max_retries + 1 {
        if attempt > 1 {
            let retry_no = attempt - 1;
            chan.send(&ControlMessage::Retry {
                test_id: test.clone(),
                attempt: retry_no,
            })?;
            log.record(
                Side::Server,
                SessionEvent::SentRetry {
                    test: test.clone(),
                    attempt: retry_no,
                },
            );
            report.retries += 1;
        }
        log.record(
            Side::Server,
            SessionEvent::SentReady {
                test: test.clone(),
                attempt,
            },
        );
        chan.send(&ControlMessage::Ready {
            suite: Suite::Handshake,
            test_id: test.clone(),
        })?;

        match await_go(chan, cfg, test, log)? {
            AttemptOutcome::TimedOut => continue,
            AttemptOutcome::Completed => {}
        }

        server.start(test)?;
        let outcome = await_result(chan, cfg, test, log);
        let stats = server.stop()?;
        match outcome? {
            AttemptOutcome::TimedOut => continue,
            AttemptOutcome::Completed => {
                report.served_connections += stats.served;
                chan.send(&ControlMessage::Result {
                    test_id: test.clone(),
                    payload: format!("served={} failures={}", stats.served, stats.failures),
                })?;
                log.record(Side::Server, SessionEvent::SentResult { test: test.clone() });
                return Ok(TestResult::Completed);
            }
        }
    }

    chan.send(&ControlMessage::Err {
        code: "TOO_MANY_RETRIES".into(),
        detail: test.to_string(),
    })?;
    log.record(
        Side::Server,
        SessionEvent::SentErr {
            code: "TOO_MANY_RETRIES".into(),
        },
    );
    Ok(TestResult::Skipped)
}

fn await_go<C: ControlChannel>(
    chan: &mut C,
    cfg: &SessionConfig,
    test: &TestId,
    log: &Arc<SessionLog>,
) -> Result<AttemptOutcome, TlsError> {
    loop {
        match chan.recv_timeout(cfg.control_timeout) {
            Ok(ControlMessage::Go { test_id }) if test_id == *test => {
                log.record(Side::Server, SessionEvent::RecvGo { test: test.clone() });
                return Ok(AttemptOutcome::Completed);
            }
            // Duplicate HELLO: our reply was lost. Re-answer and re-announce.
            Ok(ControlMessage::Hello { proto_version, .. })
                if proto_version == super::PROTO_VERSION =>
            {
                chan.send(&ControlMessage::Hello {
                    proto_version: super::PROTO_VERSION,
                    machine_id: cfg.machine_id.clone(),
                })?;
                chan.send(&ControlMessage::Ready {
                    suite: Suite::Handshake,
                    test_id: test.clone(),
                })?;
            }
            // Stale GO or RESULT from an earlier attempt; keep waiting.
            Ok(_) => continue,
            Err(TlsError::ControlTimeout(_)) => return Ok(AttemptOutcome::TimedOut),
            Err(e) => return Err(e),
        }
    }
}

fn await_result<C: ControlChannel>(
    chan: &mut C,
    cfg: &SessionConfig,
    test: &TestId,
    log: &Arc<SessionLog>,
) -> Result<AttemptOutcome, TlsError> {
    loop {
        match chan.recv_timeout(cfg.result_wait()) {
            Ok(ControlMessage::Result { test_id, .. }) if test_id == *test => {
                log.record(Side::Server, SessionEvent::RecvResult { test: test.clone() });
                return Ok(AttemptOutcome::Completed);
            }
            Ok(_) => continue,
            Err(TlsError::ControlTimeout(_)) => return Ok(AttemptOutcome::TimedOut),
            Err(e) => return Err(e),
        }
    }
}

/// One measured test on the client.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientTestResult {
    pub test: TestId,
    pub run: u32,
    pub measurement: WindowMeasurement,
}

#[derive(Debug, Clone, Default)]
pub struct ClientSessionReport {
    pub results: Vec<ClientTestResult>,
    pub skipped: Vec<TestId>,
    pub peer_machine_id: String,
}

/// Drive the client side of a session: follow the server's READY
/// announcements, measure, report, and commit measurements once the server
/// provably moved past them.
pub fn run_client_session<C: ControlChannel>(
    chan: &mut C,
    cfg: &SessionConfig,
    registry: &Registry,
    runner: &mut dyn TestRunner,
    log: &Arc<SessionLog>,
) -> Result<ClientSessionReport, TlsError> {
    let mut report = ClientSessionReport::default();

    // HELLO exchange, retried in case either direction lost the line.
    let mut hello_ok = false;
    for _ in 0..=cfg.max_retries {
        chan.send(&ControlMessage::Hello {
            proto_version: super::PROTO_VERSION,
            machine_id: cfg.machine_id.clone(),
        })?;
        log.record(Side::Client, SessionEvent::SentHello);
        match chan.recv_timeout(cfg.control_timeout) {
            Ok(ControlMessage::Hello {
                proto_version,
                machine_id,
            }) => {
                if proto_version != super::PROTO_VERSION {
                    return Err(TlsError::VersionMismatch {
                        ours: super::PROTO_VERSION,
                        theirs: proto_version,
                    });
                }
                log.record(Side::Client, SessionEvent::RecvHello);
                report.peer_machine_id = machine_id;
                hello_ok = true;
                break;
            }
            Ok(ControlMessage::Err { code, detail }) => {
                log.record(Side::Client, SessionEvent::RecvErr { code: code.clone() });
                if code == "VERSION_MISMATCH" {
                    return Err(TlsError::VersionMismatch {
                        ours: super::PROTO_VERSION,
                        theirs: 0,
                    });
                }
                return Err(TlsError::MalformedControl(format!("peer error {code}: {detail}")));
            }
            Ok(_) => continue, // early READY before our HELLO settled; server re-sends
            Err(TlsError::ControlTimeout(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    if !hello_ok {
        return Err(TlsError::ControlTimeout("HELLO reply".into()));
    }

    // Tentative measurement awaiting server acknowledgement.
    let mut tentative: Option<ClientTestResult> = None;
    // How many times each test id has been measured; the occurrence number is
    // the run index.
    let mut occurrences: HashMap<TestId, u32> = HashMap::new();

    let commit = |tentative: &mut Option<ClientTestResult>,
                      report: &mut ClientSessionReport| {
        if let Some(t) = tentative.take() {
            log.record(
                Side::Client,
                SessionEvent::RecordCommitted {
                    test: t.test.clone(),
                    run: t.run,
                },
            );
            report.results.push(t);
        }
    };

    loop {
        let msg = chan.recv_timeout(cfg.client_idle())?;
        match msg {
            ControlMessage::Ready { test_id, .. } => {
                log.record(Side::Client, SessionEvent::RecvReady { test: test_id.clone() });
                // A new announcement proves the previous exchange finished.
                commit(&mut tentative, &mut report);
                validate_test(&test_id, registry)?;
                let run = {
                    let n = occurrences.entry(test_id.clone()).or_insert(0);
                    *n += 1;
                    *n
                };
                chan.send(&ControlMessage::Go {
                    test_id: test_id.clone(),
                })?;
                log.record(Side::Client, SessionEvent::SentGo { test: test_id.clone() });
                log.record(
                    Side::Client,
                    SessionEvent::WindowStart {
                        test: test_id.clone(),
                        run,
                    },
                );
                let measurement = runner.run_window(&test_id, run)?;
                log.record(
                    Side::Client,
                    SessionEvent::WindowEnd {
                        test: test_id.clone(),
                        run,
                    },
                );
                chan.send(&ControlMessage::Result {
                    test_id: test_id.clone(),
                    payload: measurement.payload(),
                })?;
                log.record(Side::Client, SessionEvent::SentResult { test: test_id.clone() });
                tentative = Some(ClientTestResult {
                    test: test_id,
                    run,
                    measurement,
                });
            }
            ControlMessage::Result { test_id, .. } => {
                log.record(Side::Client, SessionEvent::RecvResult { test: test_id.clone() });
                if tentative.as_ref().map(|t| &t.test) == Some(&test_id) {
                    commit(&mut tentative, &mut report);
                }
            }
            ControlMessage::Retry { test_id, .. } => {
                log.record(Side::Client, SessionEvent::RecvRetry { test: test_id.clone() });
                if tentative.as_ref().map(|t| &t.test) == Some(&test_id) {
                    // Our RESULT was lost; the measurement will be redone.
                    let t = tentative.take().expect("checked above");
                    log.record(
                        Side::Client,
                        SessionEvent::RecordDiscarded {
                            test: t.test.clone(),
                            run: t.run,
                        },
                    );
                    if let Some(n) = occurrences.get_mut(&t.test) {
                        *n -= 1;
                    }
                } else {
                    // Progress on a different test implies the tentative one
                    // completed on the server.
                    commit(&mut tentative, &mut report);
                }
            }
            ControlMessage::Err { code, detail } => {
                log.record(Side::Client, SessionEvent::RecvErr { code: code.clone() });
                match code.as_str() {
                    "TOO_MANY_RETRIES" => {
                        if let Ok(test) = detail.parse::<TestId>() {
                            if tentative.as_ref().map(|t| &t.test) == Some(&test) {
                                tentative = None;
                            }
                            report.skipped.push(test);
                        }
                    }
                    "VERSION_MISMATCH" => {
                        return Err(TlsError::VersionMismatch {
                            ours: super::PROTO_VERSION,
                            theirs: 0,
                        })
                    }
                    _ => {
                        return Err(TlsError::MalformedControl(format!(
                            "peer error {code}: {detail}"
                        )))
                    }
                }
            }
            ControlMessage::Done { .. } => {
                log.record(Side::Client, SessionEvent::RecvDone);
                commit(&mut tentative, &mut report);
                chan.send(&ControlMessage::Done {
                    suite: Suite::Handshake,
                })?;
                log.record(Side::Client, SessionEvent::SentDone);
                return Ok(report);
            }
            ControlMessage::Hello { .. } | ControlMessage::Go { .. } => {
                // Duplicate or reflected traffic; ignore.
            }
        }
    }
}

fn validate_test(test: &TestId, registry: &Registry) -> Result<(), TlsError> {
    use crate::model::Capability;
    for (id, label) in [(&test.sig_id, "signature"), (&test.kem_id, "KEM")] {
        let desc = registry.find(id).ok_or_else(|| {
            TlsError::InvalidPlan(format!("announced {label} algorithm {id:?} not in registry"))
        })?;
        if !desc.has(Capability::Handshake) {
            return Err(TlsError::InvalidPlan(format!(
                "announced {label} algorithm {id:?} lacks HANDSHAKE capability"
            )));
        }
    }
    Ok(())
}

/// Test server that only tracks state transitions; used by protocol tests.
#[derive(Default)]
pub struct StubServer {
    pub active: Option<TestId>,
    pub starts: u64,
}

impl TestServer for StubServer {
    fn start(&mut self, test: &TestId) -> Result<(), TlsError> {
        self.active = Some(test.clone());
        self.starts += 1;
        Ok(())
    }

    fn stop(&mut self) -> Result<ServeStats, TlsError> {
        self.active = None;
        Ok(ServeStats {
            served: 1,
            failures: 0,
        })
    }
}

/// Test runner returning a fixed measurement instantly.
pub struct StubRunner {
    pub connections: u64,
}

impl TestRunner for StubRunner {
    fn run_window(&mut self, _test: &TestId, _run: u32) -> Result<WindowMeasurement, TlsError> {
        Ok(WindowMeasurement {
            connections: self.connections,
            failures: 0,
            real_seconds: 0.001,
            user_connections_per_sec: self.connections as f64,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_registry, HandshakeMode};
    use crate::tls::control::{FaultFn, MemoryControlChannel};

    fn plan_of(n: usize) -> (Registry, TestPlan) {
        let registry = builtin_registry();
        let sigs = ["ML-DSA-44", "ML-DSA-65", "ML-DSA-87", "FN-DSA-512"];
        let mut entries = Vec::new();
        for i in 0..n {
            entries.push(
                TestId::new(
                    sigs[i % sigs.len()],
                    "ML-KEM-512",
                    if i / sigs.len() % 2 == 0 {
                        HandshakeMode::FirstUse
                    } else {
                        HandshakeMode::SessionReuse
                    },
                )
                .unwrap(),
            );
        }
        let plan = TestPlan::new(entries, 0.001, 1, &registry).unwrap();
        (registry, plan)
    }

    fn cfg() -> SessionConfig {
        SessionConfig {
            machine_id: "test".into(),
            control_timeout: Duration::from_millis(100),
            window: Duration::from_millis(1),
            max_retries: 3,
        }
    }

    /// Run a full in-memory session with optional fault scripts; returns the
    /// two reports and the shared log.
    pub(crate) fn run_session(
        plan: &TestPlan,
        registry: &Registry,
        server_fault: Option<FaultFn>,
        client_fault: Option<FaultFn>,
    ) -> (
        Result<ServerSessionReport, TlsError>,
        Result<ClientSessionReport, TlsError>,
        Arc<SessionLog>,
    ) {
        let log = SessionLog::new();
        let (mut server_chan, mut client_chan) =
            MemoryControlChannel::pair(server_fault, client_fault);
        let server_log = Arc::clone(&log);
        let server_plan = plan.clone();
        let server_cfg = cfg();
        let handle = std::thread::spawn(move || {
            let mut server = StubServer::default();
            run_server_session(
                &mut server_chan,
                &server_cfg,
                &server_plan,
                &mut server,
                &server_log,
            )
        });
        let mut runner = StubRunner { connections: 5 };
        let client_res = run_client_session(&mut client_chan, &cfg(), registry, &mut runner, &log);
        let server_res = handle.join().expect("server thread");
        (server_res, client_res, log)
    }

    #[test]
    fn clean_session_completes_plan() {
        let (registry, plan) = plan_of(4);
        let (server, client, _log) = run_session(&plan, &registry, None, None);
        let server = server.unwrap();
        let client = client.unwrap();
        assert_eq!(server.completed.len(), 4);
        assert!(server.skipped.is_empty());
        assert_eq!(server.retries, 0);
        assert_eq!(client.results.len(), 4);
    }

    #[test]
    fn version_mismatch_aborts_before_tests() {
        let (registry, plan) = plan_of(2);
        let log = SessionLog::new();
        let (mut server_chan, mut client_chan) = MemoryControlChannel::pair(None, None);
        let server_log = Arc::clone(&log);
        let server_plan = plan.clone();
        let handle = std::thread::spawn(move || {
            let mut server = StubServer::default();
            run_server_session(&mut server_chan, &cfg(), &server_plan, &mut server, &server_log)
        });
        // Hand-roll a client that claims version 2.
        client_chan
            .send(&ControlMessage::Hello {
                proto_version: 2,
                machine_id: "bad".into(),
            })
            .unwrap();
        let reply = client_chan.recv_timeout(Duration::from_secs(1)).unwrap();
        assert!(matches!(reply, ControlMessage::Err { ref code, .. } if code == "VERSION_MISMATCH"));
        let server_err = handle.join().unwrap().unwrap_err();
        assert_eq!(server_err.code(), "VERSION_MISMATCH");
        assert_eq!(log.count(|e| matches!(e.event, SessionEvent::WindowStart { .. })), 0);
        drop(registry);
    }

    #[test]
    fn lost_go_is_retried_once_and_plan_completes() {
        let (registry, plan) = plan_of(4);
        let mut dropped = false;
        let drop_one_go: FaultFn = Box::new(move |_, msg| {
            if !dropped && matches!(msg, ControlMessage::Go { .. }) {
                dropped = true;
                true
            } else {
                false
            }
        });
        let (server, client, log) = run_session(&plan, &registry, None, Some(drop_one_go));
        let server = server.unwrap();
        let client = client.unwrap();
        assert_eq!(server.completed.len(), 4, "all tests completed");
        assert_eq!(server.retries, 1, "exactly one retry");
        assert_eq!(client.results.len(), 4);
        assert_eq!(
            log.count(|e| matches!(e.event, SessionEvent::SentRetry { .. })),
            1
        );
    }

    #[test]
    fn lost_ready_and_lost_result_recover() {
        for victim in ["READY", "RESULT"] {
            let (registry, plan) = plan_of(3);
            let mut dropped = false;
            let victim = victim.to_string();
            let wanted = victim.clone();
            let fault: FaultFn = Box::new(move |_, msg| {
                if !dropped && msg.verb() == wanted {
                    dropped = true;
                    true
                } else {
                    false
                }
            });
            // READY drops on the server->client direction; client RESULT on
            // the other. Install the script on both sides as appropriate.
            let (server, client, _log) = if victim == "READY" {
                let (registry2, plan2) = (&registry, &plan);
                run_session(plan2, registry2, Some(fault), None)
            } else {
                run_session(&plan, &registry, None, Some(fault))
            };
            let server = server.unwrap();
            let client = client.unwrap();
            assert_eq!(server.completed.len(), 3, "victim={victim}");
            assert_eq!(client.results.len(), 3, "victim={victim}");
            // No duplicate records.
            let mut seen = std::collections::HashSet::new();
            for r in &client.results {
                assert!(seen.insert((r.test.clone(), r.run)), "duplicate record");
            }
        }
    }

    #[test]
    fn window_never_starts_before_matching_ready() {
        let (registry, plan) = plan_of(4);
        let mut count = 0u64;
        // Drop every third server message to stir reordering of attempts.
        let chaos: FaultFn = Box::new(move |_, msg| {
            count += 1;
            count % 3 == 0 && msg.verb() != "DONE" && msg.verb() != "HELLO"
        });
        let (_server, _client, log) = run_session(&plan, &registry, Some(chaos), None);
        let entries = log.entries();
        for e in &entries {
            if let SessionEvent::WindowStart { test, .. } = &e.event {
                let ready_before = entries.iter().any(|r| {
                    r.seq < e.seq
                        && r.side == Side::Server
                        && matches!(&r.event, SessionEvent::SentReady { test: t, .. } if t == test)
                });
                assert!(ready_before, "window for {test} started without READY");
            }
        }
    }

    #[test]
    fn exhausted_retries_skip_the_test() {
        let (registry, plan) = plan_of(2);
        // Swallow every GO for the first test id: the server must give up on
        // it and still complete the second test.
        let first = plan.entries[0].clone();
        let fault: FaultFn = Box::new(move |_, msg| {
            matches!(msg, ControlMessage::Go { test_id } if *test_id == first)
        });
        let (server, client, _log) = run_session(&plan, &registry, None, Some(fault));
        let server = server.unwrap();
        let client = client.unwrap();
        assert_eq!(server.completed.len(), 1);
        assert_eq!(server.skipped.len(), 1);
        assert_eq!(server.skipped[0], plan.entries[0]);
        assert_eq!(client.results.len(), 1);
        assert_eq!(client.skipped.len(), 1);
    }
}
