//! Shared generators and scripted backends for the integration tests.
#![allow(dead_code)]

use std::sync::Arc;
use std::time::Duration;

use num_bigint::BigInt;
use polyjson::backend::{Backend, BackendDescriptor, BackendKind, CheckedError, Failure};
use polyjson::corpus::Label;
use polyjson::harness::{classify, BehaviorRecord, FineLabel, OutcomeClass, ReportHeader, RunConfig, RunReport, Step, StepTimings};
use polyjson::model::{JsonNumber, JsonObject, JsonValue, ObjectOrder};
use proptest::prelude::*;

pub fn arb_key() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => "[a-h]{1,3}",
        1 => any::<String>().prop_map(|s| s.chars().take(6).collect()),
    ]
}

pub fn arb_string() -> impl Strategy<Value = String> {
    prop_oneof![
        3 => "[ -~]{0,8}",
        1 => any::<String>().prop_map(|s| s.chars().take(8).collect()),
        1 => Just("\u{2064}\u{7}\"\\/\n".to_owned()),
    ]
}

/// Numbers in every representation except raw lexemes, each in the form a
/// strict parser would pick for its own rendering.
pub fn arb_number() -> impl Strategy<Value = JsonNumber> {
    prop_oneof![
        any::<i64>().prop_map(JsonNumber::Int64),
        (any::<bool>(), 0u64..u64::MAX, 1u32..40).prop_map(|(neg, low, high)| {
            let mut b = BigInt::from(i64::MAX) + 1u32 + BigInt::from(low) * BigInt::from(high);
            if neg {
                b = -b - 1u32;
            }
            JsonNumber::BigInt(b)
        }),
        any::<f64>()
            .prop_filter("finite", |f| f.is_finite())
            .prop_map(JsonNumber::Float64),
        ("-?[1-9][0-9]{0,3}\\.[0-9]{24,30}[1-9]").prop_map(|lex| {
            JsonNumber::BigDecimal(polyjson::model::Decimal::parse(&lex).expect("generated lexeme is a number"))
        }),
    ]
}

pub fn arb_scalar() -> impl Strategy<Value = JsonValue> {
    prop_oneof![
        Just(JsonValue::Null),
        any::<bool>().prop_map(JsonValue::Bool),
        arb_number().prop_map(JsonValue::Num),
        arb_string().prop_map(JsonValue::Str),
    ]
}

fn unique_pairs(pairs: Vec<(String, JsonValue)>) -> Vec<(String, JsonValue)> {
    let mut seen = std::collections::HashSet::new();
    pairs.into_iter().filter(|(k, _)| seen.insert(k.clone())).collect()
}

fn tree(leaf: BoxedStrategy<JsonValue>) -> impl Strategy<Value = JsonValue> {
    leaf.prop_recursive(4, 48, 6, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..6).prop_map(JsonValue::Array),
            prop::collection::vec((arb_key(), inner), 0..6)
                .prop_map(|pairs| JsonValue::Object(JsonObject::new(unique_pairs(pairs)))),
        ]
    })
}

/// Documents with unique keys and every number representation.
pub fn arb_value() -> impl Strategy<Value = JsonValue> {
    tree(arb_scalar().boxed())
}

/// Containers built only from values every built-in variant reads the
/// same way: small integers, plain strings, literals.
pub fn arb_plain_document() -> impl Strategy<Value = JsonValue> {
    let leaf = prop_oneof![
        Just(JsonValue::Null),
        any::<bool>().prop_map(JsonValue::Bool),
        any::<i32>().prop_map(|i| JsonValue::from(i64::from(i))),
        "[a-z ]{0,6}".prop_map(JsonValue::Str),
    ];
    tree(leaf.boxed()).prop_filter("top level is a container", JsonValue::is_container)
}

/// Copy of `v` with every object's pairs in a different order.
pub fn reorder(v: &JsonValue, seed: u64) -> JsonValue {
    match v {
        JsonValue::Array(items) => JsonValue::Array(items.iter().map(|i| reorder(i, seed)).collect()),
        JsonValue::Object(o) => {
            let mut out = JsonObject::new(o.pairs.iter().map(|(k, i)| (k.clone(), reorder(i, seed))).collect());
            out.shuffle(seed);
            out.order = ObjectOrder::Insertion;
            JsonValue::Object(out)
        }
        other => other.clone(),
    }
}

type ParseScript = dyn Fn(&str) -> Result<Option<JsonValue>, Failure> + Send + Sync;
type SerializeScript = dyn Fn(&JsonValue) -> Result<String, Failure> + Send + Sync;

/// A backend whose every call is answered by a closure.
pub struct Scripted {
    descriptor: BackendDescriptor,
    parse: Box<ParseScript>,
    serialize: Box<SerializeScript>,
}

impl Scripted {
    pub fn make(
        id: &str,
        parse: impl Fn(&str) -> Result<Option<JsonValue>, Failure> + Send + Sync + 'static,
        serialize: impl Fn(&JsonValue) -> Result<String, Failure> + Send + Sync + 'static,
    ) -> Arc<dyn Backend> {
        Arc::new(Self {
            descriptor: BackendDescriptor {
                id: id.to_owned(),
                kind: BackendKind::External {
                    adapter: "scripted".into(),
                },
                version: "0".into(),
            },
            parse: Box::new(parse),
            serialize: Box::new(serialize),
        })
    }

    /// Parses every input to `value`.
    pub fn constant(id: &str, value: Option<JsonValue>) -> Arc<dyn Backend> {
        Self::make(id, move |_| Ok(value.clone()), |_| Ok("null".into()))
    }

    pub fn rejecting(id: &str) -> Arc<dyn Backend> {
        Self::make(id, |_| Err(checked("syntax")), |_| Err(checked("print")))
    }

    pub fn panicking(id: &str) -> Arc<dyn Backend> {
        Self::make(id, |_| panic!("scripted crash"), |_| panic!("scripted crash"))
    }
}

impl Backend for Scripted {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    fn parse(&self, input: &str, _budget: Option<Duration>) -> Result<Option<JsonValue>, Failure> {
        (self.parse)(input)
    }

    fn serialize(&self, value: &JsonValue, _budget: Option<Duration>) -> Result<String, Failure> {
        (self.serialize)(value)
    }
}

pub fn checked(kind: &str) -> Failure {
    Failure::Checked(CheckedError::new(kind, "scripted"))
}

pub fn fine_for(label: Label, class: OutcomeClass, pick: usize) -> FineLabel {
    let options: Vec<FineLabel> = FineLabel::for_label(label)
        .iter()
        .copied()
        .filter(|f| classify(label, *f) == Some(class))
        .collect();
    options[pick % options.len()]
}

pub fn record(backend: &str, file: usize, label: Label, fine: FineLabel) -> BehaviorRecord {
    BehaviorRecord {
        backend_id: backend.to_owned(),
        file_id: format!("{file:064x}"),
        file_path: format!("file-{file}.json"),
        label,
        fine,
        outcome: classify(label, fine).expect("fine label belongs to the label"),
        step: Step::Parse1,
        elapsed_us: StepTimings::default(),
        detail: None,
    }
}

pub fn report(records: Vec<BehaviorRecord>) -> RunReport {
    let mut ids: Vec<String> = Vec::new();
    for r in &records {
        if !ids.contains(&r.backend_id) {
            ids.push(r.backend_id.clone());
        }
    }
    let registry = ids
        .into_iter()
        .map(|id| BackendDescriptor {
            id,
            kind: BackendKind::External {
                adapter: "synthetic".into(),
            },
            version: "0".into(),
        })
        .collect();
    RunReport {
        header: ReportHeader {
            registry,
            corpus_hash: String::new(),
            corpus_entries: 0,
            config: RunConfig {
                seed: 0,
                workers: 1,
                budget_ms: None,
            },
        },
        records,
    }
}

/// A report holding one backend per outcome vector, over the same files.
pub fn report_from_classes(label: Label, vectors: &[(&str, Vec<OutcomeClass>)]) -> RunReport {
    let mut records = Vec::new();
    for (id, classes) in vectors {
        for (file, class) in classes.iter().enumerate() {
            records.push(record(id, file, label, fine_for(label, *class, file)));
        }
    }
    report(records)
}

pub fn arb_class() -> impl Strategy<Value = OutcomeClass> {
    prop::sample::select(OutcomeClass::ALL.to_vec())
}
