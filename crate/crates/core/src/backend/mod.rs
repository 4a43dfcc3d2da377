//! Uniform invocation of parser backends.
//!
//! Every call runs on a dedicated thread with a large stack. Panics are
//! caught and reported as [`Outcome::Crash`]; a call that outlives its
//! budget is reported as [`Outcome::Timeout`] and left to finish in the
//! background. Adapters that can abort the whole process run behind
//! [`SubprocessBackend`].

mod builtin;
mod external;
mod registry;
mod subprocess;
pub mod wire;

use std::any::Any;
use std::panic::{self, AssertUnwindSafe};
use std::sync::mpsc;
use std::sync::{Arc, Once};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::engine::LenienceConfig;
use crate::model::{JsonNumber, JsonValue};

pub use builtin::BuiltinBackend;
pub use external::{AdapterCatalog, AdapterInfo, Isolation, SerdeJsonBackend};
pub use registry::{BackendRegistry, RegistryError};
pub use subprocess::{serve_worker, SubprocessBackend, WorkerCommand, WorkerOp};

/// Per-invocation budget used when the caller does not pick one.
pub const DEFAULT_BUDGET: Duration = Duration::from_secs(10);

/// Stack size of invocation threads.
pub const INVOKE_STACK_BYTES: usize = 64 * 1024 * 1024;

/// Name given to invocation threads.
pub const INVOKE_THREAD_NAME: &str = "polyjson-invoke";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub id: String,
    #[serde(flatten)]
    pub kind: BackendKind,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BackendKind {
    Builtin { config: LenienceConfig },
    External { adapter: String },
}

/// A failure the backend anticipated and reported through its error channel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckedError {
    pub kind: String,
    pub message: String,
}

impl CheckedError {
    pub fn new(kind: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            message: message.into(),
        }
    }
}

/// How a backend call may fail short of producing a result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Failure {
    Checked(CheckedError),
    Crash(String),
    Timeout,
}

impl From<CheckedError> for Failure {
    fn from(e: CheckedError) -> Self {
        Failure::Checked(e)
    }
}

/// A parser implementation under test.
///
/// `parse` returns `Ok(None)` when the backend reports success without a
/// document, the way some libraries hand back a null reference.
pub trait Backend: Send + Sync {
    fn descriptor(&self) -> &BackendDescriptor;

    fn parse(&self, input: &str, budget: Option<Duration>) -> Result<Option<JsonValue>, Failure>;

    fn serialize(&self, value: &JsonValue, budget: Option<Duration>) -> Result<String, Failure>;

    /// Backends that are not safe to call concurrently return true; the
    /// harness then runs their calls one at a time.
    fn is_serial(&self) -> bool {
        false
    }

    /// Representation tag for a number this backend produced.
    fn number_tag(&self, number: &JsonNumber) -> String {
        number.kind().as_str().to_owned()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome<T> {
    Value(T),
    NullObject,
    CheckedError(CheckedError),
    Crash(String),
    Timeout,
}

impl<T> Outcome<T> {
    pub fn variant_name(&self) -> &'static str {
        match self {
            Outcome::Value(_) => "value",
            Outcome::NullObject => "null-object",
            Outcome::CheckedError(_) => "checked-error",
            Outcome::Crash(_) => "crash",
            Outcome::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Invocation<T> {
    pub outcome: Outcome<T>,
    pub elapsed: Duration,
}

pub fn invoke_parse(
    backend: &Arc<dyn Backend>,
    input: &str,
    budget: Option<Duration>,
) -> Invocation<JsonValue> {
    let backend = Arc::clone(backend);
    let input = input.to_owned();
    isolate(budget, move || match backend.parse(&input, budget) {
        Ok(Some(v)) => Outcome::Value(v),
        Ok(None) => Outcome::NullObject,
        Err(f) => failure_outcome(f),
    })
}

pub fn invoke_serialize(
    backend: &Arc<dyn Backend>,
    value: &JsonValue,
    budget: Option<Duration>,
) -> Invocation<String> {
    let backend = Arc::clone(backend);
    let value = value.clone();
    isolate(budget, move || match backend.serialize(&value, budget) {
        Ok(text) => Outcome::Value(text),
        Err(f) => failure_outcome(f),
    })
}

fn failure_outcome<T>(f: Failure) -> Outcome<T> {
    match f {
        Failure::Checked(e) => Outcome::CheckedError(e),
        Failure::Crash(msg) => Outcome::Crash(msg),
        Failure::Timeout => Outcome::Timeout,
    }
}

fn isolate<T, F>(budget: Option<Duration>, call: F) -> Invocation<T>
where
    T: Send + 'static,
    F: FnOnce() -> Outcome<T> + Send + 'static,
{
    let (tx, rx) = mpsc::channel();
    let start = Instant::now();
    let spawned = thread::Builder::new()
        .name(INVOKE_THREAD_NAME.into())
        .stack_size(INVOKE_STACK_BYTES)
        .spawn(move || {
            let result = panic::catch_unwind(AssertUnwindSafe(call));
            // The receiver is gone after a timeout; nothing left to report.
            let _ = tx.send(result);
        });
    if let Err(e) = spawned {
        return Invocation {
            outcome: Outcome::Crash(format!("could not start invocation thread: {e}")),
            elapsed: start.elapsed(),
        };
    }
    let received = match budget {
        Some(limit) => rx.recv_timeout(limit).map_err(|e| matches!(e, mpsc::RecvTimeoutError::Timeout)),
        None => rx.recv().map_err(|_| false),
    };
    let outcome = match received {
        Ok(Ok(outcome)) => outcome,
        Ok(Err(payload)) => Outcome::Crash(panic_message(payload.as_ref())),
        Err(true) => Outcome::Timeout,
        Err(false) => Outcome::Crash("invocation thread vanished".into()),
    };
    Invocation {
        outcome,
        elapsed: start.elapsed(),
    }
}

pub(crate) fn panic_message(payload: &(dyn Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_owned()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic with non-text payload".to_owned()
    }
}

/// Installs a panic hook that stays silent for panics on invocation
/// threads and defers to the previous hook everywhere else. Idempotent.
pub fn quiet_invocation_panics() {
    static INSTALL: Once = Once::new();
    INSTALL.call_once(|| {
        let previous = panic::take_hook();
        panic::set_hook(Box::new(move |info| {
            if thread::current().name() != Some(INVOKE_THREAD_NAME) {
                previous(info);
            }
        }));
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::builtin_registry;

    struct Scripted {
        descriptor: BackendDescriptor,
        parse: fn(&str) -> Result<Option<JsonValue>, Failure>,
    }

    impl Backend for Scripted {
        fn descriptor(&self) -> &BackendDescriptor {
            &self.descriptor
        }
        fn parse(&self, input: &str, _: Option<Duration>) -> Result<Option<JsonValue>, Failure> {
            (self.parse)(input)
        }
        fn serialize(&self, _: &JsonValue, _: Option<Duration>) -> Result<String, Failure> {
            Ok("null".into())
        }
    }

    fn scripted(parse: fn(&str) -> Result<Option<JsonValue>, Failure>) -> Arc<dyn Backend> {
        Arc::new(Scripted {
            descriptor: BackendDescriptor {
                id: "scripted".into(),
                kind: BackendKind::External { adapter: "scripted".into() },
                version: "0".into(),
            },
            parse,
        })
    }

    fn builtin(id: &str) -> Arc<dyn Backend> {
        let d = builtin_registry().into_iter().find(|d| d.id == id).unwrap();
        Arc::new(BuiltinBackend::new(d).unwrap())
    }

    #[test]
    fn outcomes_are_reified() {
        quiet_invocation_panics();
        let strict = builtin("strict");
        let ok = invoke_parse(&strict, "[1]", Some(DEFAULT_BUDGET));
        assert_eq!(ok.outcome, Outcome::Value(JsonValue::Array(vec![1.into()])));
        match invoke_parse(&strict, "[1,]", None).outcome {
            Outcome::CheckedError(e) => assert_eq!(e.kind, "syntax"),
            other => panic!("{other:?}"),
        }
        let deep = "[".repeat(1000);
        let crash = invoke_parse(&builtin("crasher-deep"), &deep, Some(DEFAULT_BUDGET));
        assert!(matches!(crash.outcome, Outcome::Crash(_)), "{:?}", crash.outcome);
        assert_eq!(
            invoke_serialize(&strict, &JsonValue::Null, None).outcome,
            Outcome::Value("null".into())
        );
    }

    #[test]
    fn null_object_panic_and_timeout() {
        quiet_invocation_panics();
        assert_eq!(invoke_parse(&scripted(|_| Ok(None)), "{}", None).outcome, Outcome::NullObject);
        match invoke_parse(&scripted(|_| panic!("boom")), "{}", None).outcome {
            Outcome::Crash(msg) => assert!(msg.contains("boom")),
            other => panic!("{other:?}"),
        }
        let slow = scripted(|_| {
            thread::sleep(Duration::from_millis(500));
            Ok(None)
        });
        let r = invoke_parse(&slow, "{}", Some(Duration::from_millis(20)));
        assert_eq!(r.outcome, Outcome::Timeout);
        assert!(r.elapsed < Duration::from_millis(400));
    }

    #[test]
    fn descriptor_file_form() {
        let d = &builtin_registry()[0];
        let text = serde_json::to_string(d).unwrap();
        assert!(text.contains(r#""kind":"builtin""#), "{text}");
        assert_eq!(&serde_json::from_str::<BackendDescriptor>(&text).unwrap(), d);
        let ext = BackendDescriptor {
            id: "serde_json".into(),
            kind: BackendKind::External { adapter: "serde_json".into() },
            version: "1".into(),
        };
        let text = serde_json::to_string(&ext).unwrap();
        assert_eq!(serde_json::from_str::<BackendDescriptor>(&text).unwrap(), ext);
    }
}
