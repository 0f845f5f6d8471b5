//! The control protocol wire format and channel implementations.
//!
//! Messages are single UTF-8 lines terminated by `\n`, fields separated by
//! single spaces, at most [`MAX_LINE_BYTES`] bytes. The trailing field of
//! `RESULT` and `ERR` runs to the end of the line and may contain spaces but
//! no leading/trailing whitespace or newlines.
//!
//! Channels: [`TcpControlChannel`] for real sessions and
//! [`MemoryControlChannel`] for in-process testing with scripted message
//! drops (fault injection).

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::time::Duration;


use super::plan::TestId;
use super::TlsError;

/// Current control protocol version.
pub const PROTO_VERSION: u32 = 1;

/// Longest accepted control line, including the newline.
pub const MAX_LINE_BYTES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Handshake,
    Speed,
}

impl Suite {
    fn token(self) -> &'static str {
        match self {
            Suite::Handshake => "HANDSHAKE",
            Suite::Speed => "SPEED",
        }
    }

    fn from_token(s: &str) -> Option<Suite> {
        match s {
            "HANDSHAKE" => Some(Suite::Handshake),
            "SPEED" => Some(Suite::Speed),
            _ => None,
        }
    }
}

/// One message of the coordination protocol.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlMessage {
    Hello { proto_version: u32, machine_id: String },
    Ready { suite: Suite, test_id: TestId },
    Go { test_id: TestId },
    Result { test_id: TestId, payload: String },
    Retry { test_id: TestId, attempt: u32 },
    Done { suite: Suite },
    Err { code: String, detail: String },
}

impl ControlMessage {
    /// Short name for logging and fault scripting.
    pub fn verb(&self) -> &'static str {
        match self {
            ControlMessage::Hello { .. } => "HELLO",
            ControlMessage::Ready { .. } => "READY",
            ControlMessage::Go { .. } => "GO",
            ControlMessage::Result { .. } => "RESULT",
            ControlMessage::Retry { .. } => "RETRY",
            ControlMessage::Done { .. } => "DONE",
            ControlMessage::Err { .. } => "ERR",
        }
    }
}

/// Encode a message as one line of text (no trailing newline).
pub fn encode_control(msg: &ControlMessage) -> String {
    match msg {
        ControlMessage::Hello {
            proto_version,
            machine_id,
        } => format!("HELLO {proto_version} {machine_id}"),
        ControlMessage::Ready { suite, test_id } => {
            format!("READY {} {test_id}", suite.token())
        }
        ControlMessage::Go { test_id } => format!("GO {test_id}"),
        ControlMessage::Result { test_id, payload } => {
            if payload.is_empty() {
                format!("RESULT {test_id}")
            } else {
                format!("RESULT {test_id} {payload}")
            }
        }
        ControlMessage::Retry { test_id, attempt } => format!("RETRY {test_id} {attempt}"),
        ControlMessage::Done { suite } => format!("DONE {}", suite.token()),
        ControlMessage::Err { code, detail } => {
            if detail.is_empty() {
                format!("ERR {code}")
            } else {
                format!("ERR {code} {detail}")
            }
        }
    }
}

fn bad(line: &str, why: impl std::fmt::Display) -> TlsError {
    TlsError::MalformedControl(format!("{why} in {line:?}"))
}

/// Decode one line. Unknown verbs, wrong field counts and non-numeric fields
/// are `MALFORMED_CONTROL`; sessions route such failures into their ERR
/// handling path.
pub fn decode_control(line: &str) -> Result<ControlMessage, TlsError> {
    if line.len() > MAX_LINE_BYTES {
        return Err(TlsError::MalformedControl(format!(
            "line of {} bytes exceeds {MAX_LINE_BYTES}",
            line.len()
        )));
    }
    let line = line.trim_end_matches(['\r', '\n']);
    let mut parts = line.splitn(2, ' ');
    let verb = parts.next().unwrap_or("");
    let rest = parts.next().unwrap_or("");
    let fields: Vec<&str> = if rest.is_empty() {
        Vec::new()
    } else {
        rest.split(' ').collect()
    };

    match verb {
        "HELLO" => {
            if fields.len() != 2 {
                return Err(bad(line, "HELLO takes 2 fields"));
            }
            let proto_version: u32 = fields[0]
                .parse()
                .map_err(|_| bad(line, "non-numeric proto_version"))?;
            Ok(ControlMessage::Hello {
                proto_version,
                machine_id: fields[1].to_string(),
            })
        }
        "READY" => {
            if fields.len() != 2 {
                return Err(bad(line, "READY takes 2 fields"));
            }
            let suite =
                Suite::from_token(fields[0]).ok_or_else(|| bad(line, "unknown suite"))?;
            Ok(ControlMessage::Ready {
                suite,
                test_id: fields[1].parse()?,
            })
        }
        "GO" => {
            if fields.len() != 1 {
                return Err(bad(line, "GO takes 1 field"));
            }
            Ok(ControlMessage::Go {
                test_id: fields[0].parse()?,
            })
        }
        "RESULT" => {
            if fields.is_empty() {
                return Err(bad(line, "RESULT takes at least 1 field"));
            }
            let test_id: TestId = fields[0].parse()?;
            let payload = rest[fields[0].len()..].trim_start().to_string();
            Ok(ControlMessage::Result { test_id, payload })
        }
        "RETRY" => {
            if fields.len() != 2 {
                return Err(bad(line, "RETRY takes 2 fields"));
            }
            let attempt: u32 = fields[1]
                .parse()
                .map_err(|_| bad(line, "non-numeric attempt"))?;
            Ok(ControlMessage::Retry {
                test_id: fields[0].parse()?,
                attempt,
            })
        }
        "DONE" => {
            if fields.len() != 1 {
                return Err(bad(line, "DONE takes 1 field"));
            }
            let suite =
                Suite::from_token(fields[0]).ok_or_else(|| bad(line, "unknown suite"))?;
            Ok(ControlMessage::Done { suite })
        }
        "ERR" => {
            if fields.is_empty() {
                return Err(bad(line, "ERR takes at least 1 field"));
            }
            let code = fields[0].to_string();
            let detail = rest[fields[0].len()..].trim_start().to_string();
            Ok(ControlMessage::Err { code, detail })
        }
        other => Err(bad(line, format!("unknown verb {other:?}"))),
    }
}

/// Bidirectional ordered message channel with per-receive deadlines.
pub trait ControlChannel {
    fn send(&mut self, msg: &ControlMessage) -> Result<(), TlsError>;
    /// Receive the next message, waiting at most `timeout`. A timeout is
    /// `CONTROL_TIMEOUT`; a closed peer is `STREAM_CLOSED`.
    fn recv_timeout(&mut self, timeout: Duration) -> Result<ControlMessage, TlsError>;
}

/// Control channel over a TCP stream, one message per line.
pub struct TcpControlChannel {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl TcpControlChannel {
    pub fn new(stream: TcpStream) -> Result<Self, TlsError> {
        stream.set_nodelay(true).ok();
        let writer = stream.try_clone().map_err(TlsError::Socket)?;
        Ok(TcpControlChannel {
            reader: BufReader::new(stream),
            writer,
        })
    }
}

impl ControlChannel for TcpControlChannel {
    fn send(&mut self, msg: &ControlMessage) -> Result<(), TlsError> {
        let mut line = encode_control(msg);
        line.push('\n');
        self.writer
            .write_all(line.as_bytes())
            .map_err(TlsError::Socket)
    }

    fn recv_timeout(&mut self, timeout: Duration) -> Result<ControlMessage, TlsError> {
        self.reader
            .get_ref()
            .set_read_timeout(Some(timeout.max(Duration::from_millis(1))))
            .map_err(TlsError::Socket)?;
        let mut line = String::new();
        match self.reader.read_line(&mut line) {
            Ok(0) => Err(TlsError::StreamClosed),
            Ok(_) => decode_control(&line),
            Err(e)
                if e.kind() == std::io::ErrorKind::WouldBlock
                    || e.kind() == std::io::ErrorKind::TimedOut =>
            {
                Err(TlsError::ControlTimeout("control message".into()))
            }
            Err(e) => Err(TlsError::Socket(e)),
        }
    }
}

/// Decide the fate of the `n`-th message (0-based) sent through one direction
/// of an in-memory channel. Returning `true` drops the message silently.
pub type FaultFn = Box<dyn FnMut(u64, &ControlMessage) -> bool + Send>;

/// In-memory control channel endpoint for protocol testing.
pub struct MemoryControlChannel {
    tx: Sender<String>,
    rx: Receiver<String>,
    fault: Option<FaultFn>,
    sent: u64,
}

impl MemoryControlChannel {
    /// A connected pair. `a_fault` scripts drops of messages sent by the
    /// first endpoint, `b_fault` by the second.
    pub fn pair(
        a_fault: Option<FaultFn>,
        b_fault: Option<FaultFn>,
    ) -> (MemoryControlChannel, MemoryControlChannel) {
        let (a_tx, b_rx) = channel();
        let (b_tx, a_rx) = channel();
        (
            MemoryControlChannel {
                tx: a_tx,
                rx: a_rx,
                fault: a_fault,
                sent: 0,
            },
            MemoryControlChannel {
                tx: b_tx,
                rx: b_rx,
                fault: b_fault,
                sent: 0,
            },
        )
    }
}

impl ControlChannel for MemoryControlChannel {
    fn send(&mut self, msg: &ControlMessage) -> Result<(), TlsError> {
        let n = self.sent;
        self.sent += 1;
        if let Some(f) = &mut self.fault {
            if f(n, msg) {
                return Ok(()); // dropped on the floor
            }
        }
        // A disconnected peer behaves like a closed stream on the next recv,
        // not a send failure.
        let _ = self.tx.send(encode_control(msg));
        Ok(())
    }

    fn recv_timeout(&mut self, timeout: Duration) -> Result<ControlMessage, TlsError> {
        match self.rx.recv_timeout(timeout) {
            Ok(line) => decode_control(&line),
            Err(RecvTimeoutError::Timeout) => {
                Err(TlsError::ControlTimeout("control message".into()))
            }
            Err(RecvTimeoutError::Disconnected) => Err(TlsError::StreamClosed),
        }
    }
}
