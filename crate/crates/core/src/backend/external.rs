//! Adapters over third-party parser libraries.
//!
//! The `serde_json` adapters map the library's document model as follows:
//!
//! | native            | `JsonValue`                          |
//! |-------------------|--------------------------------------|
//! | `Number` (i64)    | `Int64`                              |
//! | `Number` (u64)    | `Int64` in range, `BigInt` above it  |
//! | `Number` (f64)    | `Float64`                            |
//! | `Object`          | `Object`, keys sorted (`BTreeMap`)   |
//! | other variants    | the obvious counterpart              |
//!
//! The mapping is lossless in both directions for every value the library
//! can hold. Numbers it cannot hold (`BigInt` beyond u64, `BigDecimal`,
//! `RawLexeme`) fail serialization with a checked `print` error.

use std::sync::Arc;
use std::time::Duration;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::Deserialize;

use super::{Backend, BackendDescriptor, BackendKind, CheckedError, Failure, SubprocessBackend, WorkerCommand};
use crate::model::{JsonNumber, JsonObject, JsonValue};

const SERDE_JSON_VERSION: &str = "1";

/// `serde_json::Value` behind the backend interface.
#[derive(Debug, Clone)]
pub struct SerdeJsonBackend {
    descriptor: BackendDescriptor,
    unbounded: bool,
}

impl SerdeJsonBackend {
    /// The library with its default nesting limit of 128.
    pub fn bounded() -> Self {
        Self::with(SerdeJsonBackend::BOUNDED, false)
    }

    /// The library with its recursion limit switched off. Deep input
    /// exhausts the stack and aborts the process, so this adapter must run
    /// in a worker process.
    pub fn unbounded() -> Self {
        Self::with(SerdeJsonBackend::UNBOUNDED, true)
    }

    pub const BOUNDED: &'static str = "serde_json";
    pub const UNBOUNDED: &'static str = "serde_json-unbounded";

    fn with(name: &str, unbounded: bool) -> Self {
        Self {
            descriptor: BackendDescriptor {
                id: name.to_owned(),
                kind: BackendKind::External { adapter: name.to_owned() },
                version: SERDE_JSON_VERSION.to_owned(),
            },
            unbounded,
        }
    }
}

impl Backend for SerdeJsonBackend {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    fn parse(&self, input: &str, _budget: Option<Duration>) -> Result<Option<JsonValue>, Failure> {
        let mut de = serde_json::Deserializer::from_str(input);
        if self.unbounded {
            de.disable_recursion_limit();
        }
        let native = serde_json::Value::deserialize(&mut de)
            .and_then(|v| de.end().map(|_| v))
            .map_err(|e| CheckedError::new(format!("{:?}", e.classify()).to_lowercase(), e.to_string()))?;
        Ok(Some(from_native(native)))
    }

    fn serialize(&self, value: &JsonValue, _budget: Option<Duration>) -> Result<String, Failure> {
        let native = to_native(value)?;
        serde_json::to_string(&native).map_err(|e| Failure::Checked(CheckedError::new("print", e.to_string())))
    }

    fn number_tag(&self, number: &JsonNumber) -> String {
        match number {
            JsonNumber::Int64(_) => "i64".into(),
            JsonNumber::BigInt(_) => "u64".into(),
            JsonNumber::Float64(_) => "f64".into(),
            other => other.kind().as_str().to_owned(),
        }
    }
}

fn from_native(native: serde_json::Value) -> JsonValue {
    use serde_json::Value as N;
    match native {
        N::Null => JsonValue::Null,
        N::Bool(b) => JsonValue::Bool(b),
        N::String(s) => JsonValue::Str(s),
        N::Number(n) => JsonValue::Num(if let Some(i) = n.as_i64() {
            JsonNumber::Int64(i)
        } else if let Some(u) = n.as_u64() {
            JsonNumber::BigInt(BigInt::from(u))
        } else {
            JsonNumber::Float64(n.as_f64().expect("serde_json numbers are i64, u64 or f64"))
        }),
        N::Array(items) => JsonValue::Array(items.into_iter().map(from_native).collect()),
        N::Object(map) => JsonValue::Object(JsonObject::new(
            map.into_iter().map(|(k, v)| (k, from_native(v))).collect(),
        )),
    }
}

fn to_native(value: &JsonValue) -> Result<serde_json::Value, Failure> {
    use serde_json::Value as N;
    let unrepresentable =
        |what: &str| Failure::Checked(CheckedError::new("print", format!("serde_json cannot hold {what}")));
    Ok(match value {
        JsonValue::Null => N::Null,
        JsonValue::Bool(b) => N::Bool(*b),
        JsonValue::Str(s) => N::String(s.clone()),
        JsonValue::Num(JsonNumber::Int64(i)) => N::from(*i),
        JsonValue::Num(JsonNumber::BigInt(b)) => N::from(b.to_u64().ok_or_else(|| unrepresentable("this integer"))?),
        JsonValue::Num(JsonNumber::Float64(f)) => {
            N::Number(serde_json::Number::from_f64(*f).ok_or_else(|| unrepresentable("a non-finite float"))?)
        }
        JsonValue::Num(n) => return Err(unrepresentable(n.kind().as_str())),
        JsonValue::Array(items) => N::Array(items.iter().map(to_native).collect::<Result<_, _>>()?),
        JsonValue::Object(obj) => N::Object(
            obj.pairs
                .iter()
                .map(|(k, v)| Ok((k.clone(), to_native(v)?)))
                .collect::<Result<_, Failure>>()?,
        ),
    })
}

/// Where an adapter's calls execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Isolation {
    /// On an invocation thread inside the harness process.
    InProcess,
    /// In a supervised worker process.
    Subprocess,
}

/// Catalog metadata for one adapter.
#[derive(Clone)]
pub struct AdapterInfo {
    pub name: String,
    pub version: String,
    pub isolation: Isolation,
    pub constructor: fn() -> Arc<dyn Backend>,
}

impl std::fmt::Debug for AdapterInfo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AdapterInfo")
            .field("name", &self.name)
            .field("version", &self.version)
            .field("isolation", &self.isolation)
            .finish()
    }
}

/// Named adapter constructors, registered at startup.
#[derive(Debug, Clone, Default)]
pub struct AdapterCatalog {
    adapters: Vec<AdapterInfo>,
}

impl AdapterCatalog {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The adapters shipped with this crate.
    pub fn standard() -> Self {
        let mut catalog = Self::empty();
        catalog.register(AdapterInfo {
            name: SerdeJsonBackend::BOUNDED.into(),
            version: SERDE_JSON_VERSION.into(),
            isolation: Isolation::InProcess,
            constructor: || Arc::new(SerdeJsonBackend::bounded()),
        });
        catalog.register(AdapterInfo {
            name: SerdeJsonBackend::UNBOUNDED.into(),
            version: SERDE_JSON_VERSION.into(),
            isolation: Isolation::Subprocess,
            constructor: || Arc::new(SerdeJsonBackend::unbounded()),
        });
        catalog
    }

    /// Adds an adapter, replacing any earlier one of the same name.
    pub fn register(&mut self, info: AdapterInfo) {
        self.adapters.retain(|a| a.name != info.name);
        self.adapters.push(info);
    }

    pub fn get(&self, name: &str) -> Option<&AdapterInfo> {
        self.adapters.iter().find(|a| a.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.adapters.iter().map(|a| a.name.as_str())
    }

    /// Builds the adapter for use by the harness. Subprocess adapters need
    /// a worker command; without one they are refused.
    pub fn instantiate(&self, name: &str, worker: Option<&WorkerCommand>) -> Result<Arc<dyn Backend>, String> {
        let info = self.get(name).ok_or_else(|| format!("unknown adapter {name:?}"))?;
        match info.isolation {
            Isolation::InProcess => Ok((info.constructor)()),
            Isolation::Subprocess => {
                let worker = worker.ok_or_else(|| format!("adapter {name:?} needs a worker process"))?;
                Ok(Arc::new(SubprocessBackend::new((info.constructor)(), worker.clone())))
            }
        }
    }

    /// Builds the adapter to run inside a worker process.
    pub fn instantiate_in_process(&self, name: &str) -> Result<Arc<dyn Backend>, String> {
        self.get(name)
            .map(|info| (info.constructor)())
            .ok_or_else(|| format!("unknown adapter {name:?}"))
    }
}
