//! Multi-version parsing: run several backends on one document, group
//! their results by equivalence and let a strategy decide.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use crate::backend::{invoke_parse, Backend, BackendRegistry, Outcome};
use crate::model::{canonical_serialize, equivalent, JsonObject, JsonValue, SerializeStyle};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum MvStrategy {
    /// Accept exactly what the designated backend accepts.
    StrictFirst { backend: String },
    /// Accept a value supported by more than half of all backends.
    #[default]
    Majority,
    /// Accept the value of the first listed backend that produced one.
    FirstAccepting { order: Vec<String> },
    /// Accept only when every backend produced the same value; any
    /// rejection or crash rejects.
    UnanimousReject,
}

impl fmt::Display for MvStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MvStrategy::StrictFirst { backend } => write!(f, "strict-first:{backend}"),
            MvStrategy::Majority => f.write_str("majority"),
            MvStrategy::FirstAccepting { order } => write!(f, "first-accepting:{}", order.join(",")),
            MvStrategy::UnanimousReject => f.write_str("unanimous-reject"),
        }
    }
}

impl FromStr for MvStrategy {
    type Err = String;

    /// `majority`, `unanimous-reject`, `strict-first[:ID]` (default id
    /// `strict`) or `first-accepting:ID,ID,...`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        match (name, arg) {
            ("majority", None) => Ok(MvStrategy::Majority),
            ("unanimous-reject", None) => Ok(MvStrategy::UnanimousReject),
            ("strict-first", None) => Ok(MvStrategy::StrictFirst {
                backend: "strict".into(),
            }),
            ("strict-first", Some(id)) if !id.is_empty() => Ok(MvStrategy::StrictFirst { backend: id.into() }),
            ("first-accepting", Some(list)) if list.split(',').all(|id| !id.is_empty()) => {
                Ok(MvStrategy::FirstAccepting {
                    order: list.split(',').map(str::to_owned).collect(),
                })
            }
            _ => Err(format!(
                "unknown strategy {s:?}; expected majority, unanimous-reject, strict-first[:ID] or first-accepting:ID,..."
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    Accepted(JsonValue),
    Rejected,
}

/// Backends whose values are pairwise equivalent.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Value produced by the lowest-id member.
    pub representative: JsonValue,
    /// Member ids, ascending.
    pub backends: Vec<String>,
}

/// Why a backend produced no value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub backend: String,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MvResult {
    pub strategy: MvStrategy,
    pub decision: Decision,
    /// Ordered by lowest member id.
    pub clusters: Vec<Cluster>,
    pub rejecting: Vec<Failure>,
    pub crashing: Vec<Failure>,
    pub divergent: bool,
}

impl MvResult {
    pub fn is_accepted(&self) -> bool {
        matches!(self.decision, Decision::Accepted(_))
    }

    pub fn rejecting_ids(&self) -> Vec<&str> {
        self.rejecting.iter().map(|f| f.backend.as_str()).collect()
    }

    pub fn crashing_ids(&self) -> Vec<&str> {
        self.crashing.iter().map(|f| f.backend.as_str()).collect()
    }

    /// The decision document in strict JSON.
    pub fn to_json(&self) -> String {
        let text = |s: &str| JsonValue::Str(s.to_owned());
        let ids = |ids: &[String]| JsonValue::Array(ids.iter().map(|i| text(i)).collect());
        let failures = |fs: &[Failure]| {
            JsonValue::Array(
                fs.iter()
                    .map(|f| {
                        JsonValue::Object(JsonObject::new(vec![
                            ("backend".into(), text(&f.backend)),
                            ("kind".into(), text(&f.kind)),
                            ("message".into(), text(&f.message)),
                        ]))
                    })
                    .collect(),
            )
        };
        let mut pairs = vec![
            ("strategy".into(), text(&self.strategy.to_string())),
            (
                "decision".into(),
                text(if self.is_accepted() { "accepted" } else { "rejected" }),
            ),
        ];
        if let Decision::Accepted(v) = &self.decision {
            pairs.push(("value".into(), v.clone()));
        }
        pairs.push(("divergent".into(), JsonValue::Bool(self.divergent)));
        pairs.push((
            "clusters".into(),
            JsonValue::Array(
                self.clusters
                    .iter()
                    .map(|c| {
                        JsonValue::Object(JsonObject::new(vec![
                            ("backends".into(), ids(&c.backends)),
                            ("representative".into(), c.representative.clone()),
                        ]))
                    })
                    .collect(),
            ),
        ));
        pairs.push(("rejecting".into(), failures(&self.rejecting)));
        pairs.push(("crashing".into(), failures(&self.crashing)));
        canonical_serialize(&JsonValue::Object(JsonObject::new(pairs)), &SerializeStyle::default())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MvError {
    #[error("no backends")]
    NoBackends,
    #[error("strategy names backend {0:?}, which is not in the selection")]
    UnknownBackend(String),
}

impl MvStrategy {
    /// Checks that every backend the strategy names takes part.
    pub fn validate(&self, registry: &BackendRegistry) -> Result<(), MvError> {
        let named: &[String] = match self {
            MvStrategy::StrictFirst { backend } => std::slice::from_ref(backend),
            MvStrategy::FirstAccepting { order } => order,
            MvStrategy::Majority | MvStrategy::UnanimousReject => &[],
        };
        match named.iter().find(|id| registry.get(id).is_none()) {
            Some(id) => Err(MvError::UnknownBackend(id.clone())),
            None => Ok(()),
        }
    }
}

enum Verdict {
    Value(JsonValue),
    Rejected(String, String),
    Crashed(String),
}

/// Parses `input` with every backend concurrently and applies `strategy`.
pub fn mv_parse(
    input: &str,
    registry: &BackendRegistry,
    strategy: &MvStrategy,
    budget: Option<Duration>,
) -> Result<MvResult, MvError> {
    if registry.is_empty() {
        return Err(MvError::NoBackends);
    }
    strategy.validate(registry)?;
    let mut backends: Vec<&Arc<dyn Backend>> = registry.iter().collect();
    backends.sort_by(|a, b| a.descriptor().id.cmp(&b.descriptor().id));
    let is_null_literal = input.trim_matches([' ', '\t', '\n', '\r']) == "null";

    let verdicts: Vec<Verdict> = thread::scope(|scope| {
        let handles: Vec<_> = backends
            .iter()
            .map(|b| scope.spawn(move || invoke_parse(b, input, budget).outcome))
            .collect();
        handles
            .into_iter()
            .map(|h| match h.join() {
                Ok(Outcome::Value(v)) => Verdict::Value(v),
                Ok(Outcome::NullObject) if is_null_literal => Verdict::Value(JsonValue::Null),
                Ok(Outcome::NullObject) => Verdict::Rejected("null-object".into(), "no value produced".into()),
                Ok(Outcome::CheckedError(e)) => Verdict::Rejected(e.kind, e.message),
                Ok(Outcome::Crash(msg)) => Verdict::Crashed(msg),
                Ok(Outcome::Timeout) => Verdict::Crashed("timeout".into()),
                Err(_) => Verdict::Crashed("invocation panicked".into()),
            })
            .collect()
    });

    let mut clusters: Vec<Cluster> = Vec::new();
    let mut rejecting = Vec::new();
    let mut crashing = Vec::new();
    for (backend, verdict) in backends.iter().zip(verdicts) {
        let id = backend.descriptor().id.clone();
        match verdict {
            Verdict::Value(v) => match clusters.iter_mut().find(|c| equivalent(&c.representative, &v)) {
                Some(c) => c.backends.push(id),
                None => clusters.push(Cluster {
                    representative: v,
                    backends: vec![id],
                }),
            },
            Verdict::Rejected(kind, message) => rejecting.push(Failure {
                backend: id,
                kind,
                message,
            }),
            Verdict::Crashed(message) => crashing.push(Failure {
                backend: id,
                kind: "crash".into(),
                message,
            }),
        }
    }

    let n = backends.len();
    let cluster_of = |id: &str| clusters.iter().find(|c| c.backends.iter().any(|b| b == id));
    let chosen: Option<&Cluster> = match strategy {
        MvStrategy::Majority => clusters.iter().find(|c| 2 * c.backends.len() > n),
        MvStrategy::StrictFirst { backend } => cluster_of(backend),
        MvStrategy::FirstAccepting { order } => order.iter().find_map(|id| cluster_of(id)),
        MvStrategy::UnanimousReject => match clusters.as_slice() {
            [only] if only.backends.len() == n => Some(only),
            _ => None,
        },
    };
    let decision = match chosen {
        Some(c) => Decision::Accepted(c.representative.clone()),
        None => Decision::Rejected,
    };
    let divergent = clusters.len() > 1 || (!clusters.is_empty() && (!rejecting.is_empty() || !crashing.is_empty()));
    Ok(MvResult {
        strategy: strategy.clone(),
        decision,
        clusters,
        rejecting,
        crashing,
        divergent,
    })
}
