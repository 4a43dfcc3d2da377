//! Observes how each backend represents numbers and object order by
//! running small probe documents through parse and serialize.

use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use serde::Serialize;

use crate::backend::{invoke_parse, invoke_serialize, Backend, Outcome};
use crate::engine::{parse, LenienceConfig, NumberPolicy};
use crate::model::{equivalent, JsonNumber, JsonValue};
use crate::number::ExactDecimal;

pub const LONG_DECIMAL: &str = "0.4e00669999999999999999999999999999999999999999999999999999999999999999999999999999999999999999999999999999999999999999999999969999999006";

/// The numeric probe set: 32-bit and 64-bit integer boundaries, binary
/// float extremes, and spellings that admit several renderings.
pub const NUMBER_PROBES: [&str; 11] = [
    "-2147483648",
    "2147483647",
    "4.9E-324",
    "2.2250738585072014E-308",
    "1.7976931348623157E308",
    "9223372036854775807",
    "9223372036854775808",
    "-0",
    "1E22",
    "1e+2",
    LONG_DECIMAL,
];

/// Object with eight keys out of lexicographic order.
pub const ORDERING_PROBE: &str = r#"{"h":0,"c":1,"f":2,"a":3,"g":4,"b":5,"e":6,"d":7}"#;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ProbeRoundTrip {
    /// Serialized text equals the input.
    EQ,
    /// Different text, same value.
    EV,
    /// The value changed on the way through.
    #[serde(rename = "lossy")]
    Lossy,
    /// Parse or serialize failed.
    #[serde(rename = "error")]
    Error,
}

impl ProbeRoundTrip {
    pub fn as_str(self) -> &'static str {
        match self {
            ProbeRoundTrip::EQ => "EQ",
            ProbeRoundTrip::EV => "EV",
            ProbeRoundTrip::Lossy => "lossy",
            ProbeRoundTrip::Error => "error",
        }
    }
}

impl fmt::Display for ProbeRoundTrip {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProbeRow {
    pub lexeme: String,
    /// Representation tag, absent when the probe did not parse.
    pub tag: Option<String>,
    pub round_trip: ProbeRoundTrip,
    /// Serialized form of the probe document, when serialization ran.
    pub output: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OrderingProbe {
    pub round_trip: ProbeRoundTrip,
    /// Keys in the order the backend wrote them.
    pub keys: Vec<String>,
}

impl OrderingProbe {
    pub fn preserves_insertion_order(&self) -> bool {
        self.keys.iter().map(String::as_str).eq(["h", "c", "f", "a", "g", "b", "e", "d"])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProbeReport {
    pub backend_id: String,
    pub rows: Vec<ProbeRow>,
    pub ordering: OrderingProbe,
}

/// Reads the single number out of `[n]` as written by some backend,
/// keeping its exact decimal value.
fn exact_single(text: &str) -> Option<ExactDecimal> {
    let config = LenienceConfig {
        number_policy: NumberPolicy::Raw,
        ..LenienceConfig::strict()
    };
    match parse(text, &config).ok()? {
        JsonValue::Array(items) if items.len() == 1 => match &items[0] {
            JsonValue::Num(JsonNumber::RawLexeme(lexeme)) => ExactDecimal::from_lexeme(lexeme),
            _ => None,
        },
        _ => None,
    }
}

fn probe_number(backend: &Arc<dyn Backend>, lexeme: &str, budget: Option<Duration>) -> ProbeRow {
    let input = format!("[{lexeme}]");
    let error = |tag, output| ProbeRow {
        lexeme: lexeme.to_owned(),
        tag,
        round_trip: ProbeRoundTrip::Error,
        output,
    };
    let value = match invoke_parse(backend, &input, budget).outcome {
        Outcome::Value(v) => v,
        _ => return error(None, None),
    };
    let tag = match &value {
        JsonValue::Array(items) if items.len() == 1 => match &items[0] {
            JsonValue::Num(n) => backend.number_tag(n),
            _ => return error(None, None),
        },
        _ => return error(None, None),
    };
    let text = match invoke_serialize(backend, &value, budget).outcome {
        Outcome::Value(text) => text,
        _ => return error(Some(tag), None),
    };
    let original = ExactDecimal::from_lexeme(lexeme).expect("probe lexemes are valid numbers");
    let round_trip = if text == input {
        ProbeRoundTrip::EQ
    } else {
        match exact_single(&text) {
            Some(v) if v == original => ProbeRoundTrip::EV,
            Some(_) => ProbeRoundTrip::Lossy,
            None => ProbeRoundTrip::Error,
        }
    };
    ProbeRow {
        lexeme: lexeme.to_owned(),
        tag: Some(tag),
        round_trip,
        output: Some(text),
    }
}

fn probe_ordering(backend: &Arc<dyn Backend>, budget: Option<Duration>) -> OrderingProbe {
    let failed = OrderingProbe {
        round_trip: ProbeRoundTrip::Error,
        keys: Vec::new(),
    };
    let Outcome::Value(value) = invoke_parse(backend, ORDERING_PROBE, budget).outcome else {
        return failed;
    };
    let Outcome::Value(text) = invoke_serialize(backend, &value, budget).outcome else {
        return failed;
    };
    let Ok(JsonValue::Object(written)) = parse(&text, &LenienceConfig::strict()) else {
        return failed;
    };
    let keys = written.pairs.iter().map(|(k, _)| k.clone()).collect();
    let original = parse(ORDERING_PROBE, &LenienceConfig::strict()).expect("probe is valid");
    let round_trip = if text == ORDERING_PROBE {
        ProbeRoundTrip::EQ
    } else if equivalent(&original, &JsonValue::Object(written)) {
        ProbeRoundTrip::EV
    } else {
        ProbeRoundTrip::Lossy
    };
    OrderingProbe { round_trip, keys }
}

/// Runs every probe against `backend`; failures are recorded per row.
pub fn probe_number_types(backend: &Arc<dyn Backend>, budget: Option<Duration>) -> ProbeReport {
    ProbeReport {
        backend_id: backend.descriptor().id.clone(),
        rows: NUMBER_PROBES.iter().map(|l| probe_number(backend, l, budget)).collect(),
        ordering: probe_ordering(backend, budget),
    }
}

/// One row per (backend, probe): `backend,lexeme,tag,round_trip`.
pub fn probes_to_csv(reports: &[ProbeReport]) -> String {
    let mut out = String::from("backend,lexeme,tag,round_trip\n");
    for r in reports {
        for row in &r.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.backend_id,
                row.lexeme,
                row.tag.as_deref().unwrap_or(""),
                row.round_trip
            ));
        }
    }
    out
}

/// One row per backend: `backend,round_trip,insertion_order,keys`.
pub fn ordering_to_csv(reports: &[ProbeReport]) -> String {
    let mut out = String::from("backend,round_trip,insertion_order,keys\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.backend_id,
            r.ordering.round_trip,
            r.ordering.preserves_insertion_order(),
            r.ordering.keys.join(" ")
        ));
    }
    out
}
