//! Running an adapter in a supervised worker process.
//!
//! The supervisor starts `PROGRAM ARGS... worker --adapter NAME --op OP`,
//! writes the request to the child's stdin and reads one JSON response
//! from its stdout. A child that dies, exits non-zero or answers with
//! garbage is reported as a crash; one that overruns the budget is killed.

use std::fmt;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::{Child, Command, ExitStatus, Stdio};
use std::str::FromStr;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{wire, AdapterCatalog, Backend, BackendDescriptor, BackendKind, CheckedError, Failure};
use crate::model::{JsonNumber, JsonValue};

const POLL_INTERVAL: Duration = Duration::from_millis(2);
const STDERR_TAIL: usize = 400;

/// How to start a worker process.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkerCommand {
    pub program: PathBuf,
    pub args: Vec<String>,
}

impl WorkerCommand {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        Self {
            program: program.into(),
            args: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkerOp {
    Parse,
    Serialize,
}

impl fmt::Display for WorkerOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WorkerOp::Parse => "parse",
            WorkerOp::Serialize => "serialize",
        })
    }
}

impl FromStr for WorkerOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "parse" => Ok(WorkerOp::Parse),
            "serialize" => Ok(WorkerOp::Serialize),
            other => Err(format!("unknown worker op {other:?}")),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
enum Response {
    Value { tokens: Vec<String> },
    Null,
    Text { text: String },
    Checked { kind: String, message: String },
}

/// An adapter whose calls each run in a fresh worker process.
pub struct SubprocessBackend {
    inner: Arc<dyn Backend>,
    adapter: String,
    worker: WorkerCommand,
}

impl SubprocessBackend {
    /// `inner` supplies the descriptor and number tags; its parse and
    /// serialize are only ever called inside the worker.
    pub fn new(inner: Arc<dyn Backend>, worker: WorkerCommand) -> Self {
        let adapter = match &inner.descriptor().kind {
            BackendKind::External { adapter } => adapter.clone(),
            BackendKind::Builtin { .. } => inner.descriptor().id.clone(),
        };
        Self { inner, adapter, worker }
    }

    fn call(&self, op: WorkerOp, request: Vec<u8>, budget: Option<Duration>) -> Result<Response, Failure> {
        let mut child = Command::new(&self.worker.program)
            .args(&self.worker.args)
            .args(["worker", "--adapter", &self.adapter, "--op", &op.to_string()])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Failure::Crash(format!("could not start worker: {e}")))?;

        let mut stdin = child.stdin.take().expect("stdin is piped");
        let writer = thread::spawn(move || {
            // A worker that dies early closes the pipe; its exit status says why.
            let _ = stdin.write_all(&request);
        });
        let stdout = drain(child.stdout.take().expect("stdout is piped"));
        let stderr = drain(child.stderr.take().expect("stderr is piped"));

        // On timeout the pipe threads are left behind: a grandchild may
        // still hold the pipes open.
        let status = wait(&mut child, budget)?;
        let _ = writer.join();
        let stdout = stdout.join().unwrap_or_default();
        let stderr = stderr.join().unwrap_or_default();

        let diagnostic = || {
            let text = String::from_utf8_lossy(&stderr);
            let tail: String = {
                let trimmed = text.trim_end();
                let skip = trimmed.chars().count().saturating_sub(STDERR_TAIL);
                trimmed.chars().skip(skip).collect()
            };
            format!("worker {}: {}", describe(status), tail)
        };
        if !status.success() {
            return Err(Failure::Crash(diagnostic()));
        }
        serde_json::from_slice(&stdout).map_err(|e| Failure::Crash(format!("{} (bad response: {e})", diagnostic())))
    }
}

fn drain(mut source: impl Read + Send + 'static) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = source.read_to_end(&mut buf);
        buf
    })
}

fn wait(child: &mut Child, budget: Option<Duration>) -> Result<ExitStatus, Failure> {
    let Some(budget) = budget else {
        return child.wait().map_err(|e| Failure::Crash(format!("lost worker: {e}")));
    };
    let deadline = Instant::now() + budget;
    loop {
        match child.try_wait() {
            Ok(Some(status)) => return Ok(status),
            Ok(None) if Instant::now() >= deadline => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(Failure::Timeout);
            }
            Ok(None) => thread::sleep(POLL_INTERVAL),
            Err(e) => return Err(Failure::Crash(format!("lost worker: {e}"))),
        }
    }
}

#[cfg(unix)]
fn describe(status: ExitStatus) -> String {
    use std::os::unix::process::ExitStatusExt;
    match status.signal() {
        Some(sig) => format!("killed by signal {sig}"),
        None => status.to_string(),
    }
}

#[cfg(not(unix))]
fn describe(status: ExitStatus) -> String {
    status.to_string()
}

impl Backend for SubprocessBackend {
    fn descriptor(&self) -> &BackendDescriptor {
        self.inner.descriptor()
    }

    fn parse(&self, input: &str, budget: Option<Duration>) -> Result<Option<JsonValue>, Failure> {
        match self.call(WorkerOp::Parse, input.as_bytes().to_vec(), budget)? {
            Response::Value { tokens } => wire::decode(&tokens)
                .map(Some)
                .map_err(|e| Failure::Crash(format!("undecodable worker value: {e}"))),
            Response::Null => Ok(None),
            Response::Checked { kind, message } => Err(Failure::Checked(CheckedError { kind, message })),
            Response::Text { .. } => Err(Failure::Crash("worker answered a parse with text".into())),
        }
    }

    fn serialize(&self, value: &JsonValue, budget: Option<Duration>) -> Result<String, Failure> {
        let request = serde_json::to_vec(&wire::encode(value)).expect("token lists always serialize");
        match self.call(WorkerOp::Serialize, request, budget)? {
            Response::Text { text } => Ok(text),
            Response::Checked { kind, message } => Err(Failure::Checked(CheckedError { kind, message })),
            _ => Err(Failure::Crash("worker answered a serialize without text".into())),
        }
    }

    fn number_tag(&self, number: &JsonNumber) -> String {
        self.inner.number_tag(number)
    }
}

/// Worker side of the protocol: reads one request from `input`, runs it
/// on the named adapter in this process and writes the response to
/// `output`. Crashes inside the adapter take the process down, which is
/// what the supervisor observes.
pub fn serve_worker(
    catalog: &AdapterCatalog,
    adapter: &str,
    op: WorkerOp,
    mut input: impl Read,
    mut output: impl Write,
) -> io::Result<()> {
    let backend = catalog
        .instantiate_in_process(adapter)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
    let mut request = Vec::new();
    input.read_to_end(&mut request)?;
    let invalid = |e: String| io::Error::new(io::ErrorKind::InvalidData, e);

    let result = match op {
        WorkerOp::Parse => {
            let text = String::from_utf8(request).map_err(|e| invalid(e.to_string()))?;
            backend.parse(&text, None).map(|v| match v {
                Some(v) => Response::Value { tokens: wire::encode(&v) },
                None => Response::Null,
            })
        }
        WorkerOp::Serialize => {
            let tokens: Vec<String> = serde_json::from_slice(&request).map_err(|e| invalid(e.to_string()))?;
            let value = wire::decode(&tokens).map_err(invalid)?;
            backend.serialize(&value, None).map(|text| Response::Text { text })
        }
    };
    let response = match result {
        Ok(r) => r,
        Err(Failure::Checked(CheckedError { kind, message })) => Response::Checked { kind, message },
        Err(Failure::Crash(msg)) => panic!("adapter crashed: {msg}"),
        Err(Failure::Timeout) => panic!("adapter timed out"),
    };
    serde_json::to_writer(&mut output, &response)?;
    output.flush()
}
