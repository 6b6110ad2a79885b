//! Client side of the newline-delimited JSON wire protocol.
//!
//! Requests are `{"id", "context"}` lines. The peer answers each with either
//! `{"id", "text"}` or `{"id", "error"}`, in any order. Unknown keys are
//! ignored. A frame that is not one of these, or that names an id nobody is
//! waiting for, poisons the connection.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, BackendRequest, BackendResponse};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

/// Where a remote backend lives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    /// `tcp://host:port`
    Tcp(String),
    /// `stdio:program arg...`, a child process speaking on stdin/stdout.
    Stdio(Vec<String>),
}

impl std::str::FromStr for Endpoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Some(addr) = s.strip_prefix("tcp://") {
            if addr.is_empty() {
                return Err("empty tcp address".into());
            }
            Ok(Endpoint::Tcp(addr.to_string()))
        } else if let Some(cmd) = s.strip_prefix("stdio:") {
            let argv: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
            if argv.is_empty() {
                return Err("empty stdio command".into());
            }
            Ok(Endpoint::Stdio(argv))
        } else {
            Err(format!("endpoint `{s}` must start with tcp:// or stdio:"))
        }
    }
}

#[derive(Serialize)]
struct RequestFrame<'a> {
    id: &'a str,
    context: &'a str,
}

#[derive(Deserialize)]
struct ResponseFrame {
    id: String,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    error: Option<String>,
}

type Reply = Result<String, BackendError>;

#[derive(Default)]
struct Shared {
    pending: HashMap<String, Sender<Reply>>,
    /// Ids whose caller gave up; a late answer for one is dropped.
    abandoned: HashSet<String>,
    poisoned: Option<BackendError>,
}

impl Shared {
    fn poison(&mut self, err: BackendError) {
        for (_, tx) in self.pending.drain() {
            let _ = tx.send(Err(err.clone()));
        }
        self.poisoned.get_or_insert(err);
    }
}

struct Inner {
    writer: Mutex<Box<dyn Write + Send>>,
    shared: Arc<Mutex<Shared>>,
    child: Mutex<Option<Child>>,
    label: String,
}

impl Drop for Inner {
    fn drop(&mut self) {
        if let Some(mut child) = self.child.lock().ok().and_then(|mut c| c.take()) {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// A connection to an external generator. Clones share the connection, and
/// several requests may be in flight at once.
#[derive(Clone)]
pub struct RemoteBackend {
    inner: Arc<Inner>,
    timeout: Duration,
}

impl std::fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("endpoint", &self.inner.label)
            .field("timeout", &self.timeout)
            .finish()
    }
}

impl RemoteBackend {
    pub fn connect(endpoint: &Endpoint, timeout: Duration) -> Result<Self, BackendError> {
        match endpoint {
            Endpoint::Tcp(addr) => {
                let stream = TcpStream::connect(addr).map_err(|e| BackendError::Unavailable(format!("{addr}: {e}")))?;
                let _ = stream.set_nodelay(true);
                let reader = stream
                    .try_clone()
                    .map_err(|e| BackendError::Unavailable(e.to_string()))?;
                Ok(Self::start(
                    Box::new(stream),
                    reader,
                    None,
                    format!("tcp://{addr}"),
                    timeout,
                ))
            }
            Endpoint::Stdio(argv) => {
                let mut child = Command::new(&argv[0])
                    .args(&argv[1..])
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()
                    .map_err(|e| BackendError::Unavailable(format!("{}: {e}", argv[0])))?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                Ok(Self::start(
                    Box::new(stdin),
                    stdout,
                    Some(child),
                    format!("stdio:{}", argv.join(" ")),
                    timeout,
                ))
            }
        }
    }

    fn start<R: Read + Send + 'static>(
        writer: Box<dyn Write + Send>,
        reader: R,
        child: Option<Child>,
        label: String,
        timeout: Duration,
    ) -> Self {
        let shared = Arc::new(Mutex::new(Shared::default()));
        let reader_shared = Arc::clone(&shared);
        std::thread::spawn(move || read_frames(BufReader::new(reader), &reader_shared));
        RemoteBackend {
            inner: Arc::new(Inner {
                writer: Mutex::new(writer),
                shared,
                child: Mutex::new(child),
                label,
            }),
            timeout,
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.inner.label
    }

    /// Sends one request and waits for the frame with the same id.
    pub fn remote_generate(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let start = Instant::now();
        let (tx, rx) = mpsc::channel();
        {
            let mut shared = self.inner.shared.lock().expect("remote state");
            if let Some(err) = &shared.poisoned {
                return Err(err.clone());
            }
            if shared.pending.contains_key(&request.id) {
                return Err(BackendError::ProtocolViolation(format!(
                    "id {} is already in flight",
                    request.id
                )));
            }
            shared.abandoned.remove(&request.id);
            shared.pending.insert(request.id.clone(), tx);
        }
        let mut line = serde_json::to_string(&RequestFrame {
            id: &request.id,
            context: &request.context,
        })
        .expect("request frame serializes");
        line.push('\n');
        let written = {
            let mut w = self.inner.writer.lock().expect("remote writer");
            w.write_all(line.as_bytes()).and_then(|_| w.flush())
        };
        if let Err(e) = written {
            let err = BackendError::Unavailable(format!("{}: {e}", self.inner.label));
            self.inner.shared.lock().expect("remote state").poison(err.clone());
            return Err(err);
        }
        match rx.recv_timeout(self.timeout) {
            Ok(Ok(text)) => Ok(BackendResponse {
                id: request.id.clone(),
                text,
                latency: start.elapsed(),
            }),
            Ok(Err(e)) => Err(e),
            Err(RecvTimeoutError::Timeout) => {
                let mut shared = self.inner.shared.lock().expect("remote state");
                shared.pending.remove(&request.id);
                shared.abandoned.insert(request.id.clone());
                Err(BackendError::Timeout {
                    id: request.id.clone(),
                    after: self.timeout,
                })
            }
            Err(RecvTimeoutError::Disconnected) => {
                let shared = self.inner.shared.lock().expect("remote state");
                Err(shared
                    .poisoned
                    .clone()
                    .unwrap_or_else(|| BackendError::Unavailable(self.inner.label.clone())))
            }
        }
    }
}

fn read_frames<R: BufRead>(reader: R, shared: &Mutex<Shared>) {
    for line in reader.lines() {
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                shared
                    .lock()
                    .expect("remote state")
                    .poison(BackendError::Unavailable(e.to_string()));
                return;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        let mut state = shared.lock().expect("remote state");
        let frame: ResponseFrame = match serde_json::from_str(&line) {
            Ok(f) => f,
            Err(e) => {
                state.poison(BackendError::ProtocolViolation(format!("malformed frame: {e}")));
                return;
            }
        };
        let reply = match (frame.text, frame.error) {
            (_, Some(message)) => Err(BackendError::Remote {
                id: frame.id.clone(),
                message,
            }),
            (Some(text), None) => Ok(text),
            (None, None) => {
                state.poison(BackendError::ProtocolViolation(format!(
                    "frame for {} has neither text nor error",
                    frame.id
                )));
                return;
            }
        };
        if let Some(tx) = state.pending.remove(&frame.id) {
            let _ = tx.send(reply);
        } else if !state.abandoned.remove(&frame.id) {
            state.poison(BackendError::ProtocolViolation(format!(
                "response for unknown id {}",
                frame.id
            )));
            return;
        }
    }
    shared
        .lock()
        .expect("remote state")
        .poison(BackendError::Unavailable("peer closed the connection".into()));
}

impl Backend for RemoteBackend {
    fn name(&self) -> &str {
        "remote"
    }

    fn generate(&mut self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        self.remote_generate(request)
    }
}
