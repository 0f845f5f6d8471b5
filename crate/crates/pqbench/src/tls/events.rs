//! Shared session event log.
//!
//! Both sides of a session record what they send, receive, and measure. For
//! in-memory protocol tests one log is shared by server and client, so the
//! global sequence numbers give a cross-side ordering to assert safety
//! properties against (a client measurement window must never start before
//! the server sent READY for that test).

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use super::plan::TestId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Server,
    Client,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SessionEvent {
    SentHello,
    RecvHello,
    SentReady { test: TestId, attempt: u32 },
    RecvReady { test: TestId },
    SentGo { test: TestId },
    RecvGo { test: TestId },
    WindowStart { test: TestId, run: u32 },
    WindowEnd { test: TestId, run: u32 },
    SentResult { test: TestId },
    RecvResult { test: TestId },
    SentRetry { test: TestId, attempt: u32 },
    RecvRetry { test: TestId },
    SentErr { code: String },
    RecvErr { code: String },
    SentDone,
    RecvDone,
    TestCompleted { test: TestId, run: u32 },
    TestSkipped { test: TestId },
    RecordCommitted { test: TestId, run: u32 },
    RecordDiscarded { test: TestId, run: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub seq: u64,
    pub side: Side,
    pub event: SessionEvent,
}

#[derive(Debug, Default)]
pub struct SessionLog {
    seq: AtomicU64,
    entries: Mutex<Vec<LogEntry>>,
}

impl SessionLog {
    pub fn new() -> Arc<SessionLog> {
        Arc::new(SessionLog::default())
    }

    pub fn record(&self, side: Side, event: SessionEvent) {
        let seq = self.seq.fetch_add(1, Ordering::SeqCst);
        self.entries
            .lock()
            .expect("session log poisoned")
            .push(LogEntry { seq, side, event });
    }

    pub fn entries(&self) -> Vec<LogEntry> {
        self.entries.lock().expect("session log poisoned").clone()
    }

    pub fn count(&self, pred: impl Fn(&LogEntry) -> bool) -> usize {
        self.entries().iter().filter(|e| pred(e)).count()
    }
}
