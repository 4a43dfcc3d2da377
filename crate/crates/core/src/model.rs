//! In-memory JSON documents, the equivalence relation used to compare two
//! parse results, and deterministic serialization.
//!
//! Numbers keep track of *how* they are represented, not only of their
//! value: two documents that hold the same number in different
//! representations (an `Int64` and a `Float64`, say) are not equivalent.

use std::fmt;

use num_bigint::BigInt;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::number::{format_f64, ExactDecimal};

#[derive(Debug, Clone, PartialEq)]
pub enum JsonValue {
    Object(JsonObject),
    Array(Vec<JsonValue>),
    Str(String),
    Num(JsonNumber),
    Bool(bool),
    Null,
}

impl JsonValue {
    pub fn is_container(&self) -> bool {
        matches!(self, JsonValue::Object(_) | JsonValue::Array(_))
    }

    /// Nesting depth: scalars are 0, `[]` is 1, `[[1]]` is 2.
    pub fn depth(&self) -> usize {
        let mut max = 0;
        let mut stack = vec![(self, 0usize)];
        while let Some((v, d)) = stack.pop() {
            match v {
                JsonValue::Array(items) => {
                    max = max.max(d + 1);
                    stack.extend(items.iter().map(|i| (i, d + 1)));
                }
                JsonValue::Object(obj) => {
                    max = max.max(d + 1);
                    stack.extend(obj.pairs.iter().map(|(_, i)| (i, d + 1)));
                }
                _ => {}
            }
        }
        max
    }
}

impl From<JsonNumber> for JsonValue {
    fn from(n: JsonNumber) -> Self {
        JsonValue::Num(n)
    }
}

impl From<&str> for JsonValue {
    fn from(s: &str) -> Self {
        JsonValue::Str(s.to_owned())
    }
}

impl From<i64> for JsonValue {
    fn from(i: i64) -> Self {
        JsonValue::Num(JsonNumber::Int64(i))
    }
}

impl From<bool> for JsonValue {
    fn from(b: bool) -> Self {
        JsonValue::Bool(b)
    }
}

/// How the pairs of an object were ordered when it was built.
///
/// `Shuffled` models hash-map backed implementations: pairs are permuted by
/// a keyed hash of their names, which is stable for a given seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ObjectOrder {
    #[default]
    Insertion,
    Shuffled {
        seed: u64,
    },
}

impl fmt::Display for ObjectOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectOrder::Insertion => f.write_str("insertion"),
            ObjectOrder::Shuffled { seed } => write!(f, "shuffled:{seed}"),
        }
    }
}

impl std::str::FromStr for ObjectOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "insertion" {
            return Ok(ObjectOrder::Insertion);
        }
        match s.strip_prefix("shuffled:").map(str::parse) {
            Some(Ok(seed)) => Ok(ObjectOrder::Shuffled { seed }),
            _ => Err(format!("invalid object order {s:?}, expected \"insertion\" or \"shuffled:<seed>\"")),
        }
    }
}

impl Serialize for ObjectOrder {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ObjectOrder {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct JsonObject {
    pub pairs: Vec<(String, JsonValue)>,
    pub order: ObjectOrder,
}

impl JsonObject {
    pub fn new(pairs: Vec<(String, JsonValue)>) -> Self {
        Self {
            pairs,
            order: ObjectOrder::Insertion,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// First value stored under `key`.
    pub fn get(&self, key: &str) -> Option<&JsonValue> {
        self.pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    /// Reorders pairs by a seeded hash of their keys and tags the object as
    /// shuffled. Pairs sharing a key keep their relative order.
    pub fn shuffle(&mut self, seed: u64) {
        self.pairs
            .sort_by_cached_key(|(k, _)| (shuffle_rank(seed, k), k.clone()));
        self.order = ObjectOrder::Shuffled { seed };
    }
}

// FNV-1a over the key, finalized with splitmix64 so that nearby seeds give
// unrelated permutations.
fn shuffle_rank(seed: u64, key: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for b in key.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Arbitrary-precision decimal that remembers the numeral it was read
/// from. Serialization writes the numeral back verbatim; comparisons go
/// through the exact value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decimal {
    lexeme: String,
    value: ExactDecimal,
}

impl Decimal {
    pub fn parse(lexeme: &str) -> Option<Self> {
        let value = ExactDecimal::from_lexeme(lexeme)?;
        Some(Self {
            lexeme: lexeme.to_owned(),
            value,
        })
    }

    pub fn lexeme(&self) -> &str {
        &self.lexeme
    }

    pub fn value(&self) -> &ExactDecimal {
        &self.value
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum JsonNumber {
    /// Integral numeral within the signed 64-bit range.
    Int64(i64),
    /// Integral numeral outside the signed 64-bit range.
    BigInt(BigInt),
    /// Finite binary64 float. Never NaN or infinite.
    Float64(f64),
    BigDecimal(Decimal),
    /// The numeral exactly as it appeared in the input.
    RawLexeme(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NumberKind {
    Int64,
    BigInt,
    Float64,
    BigDecimal,
    RawLexeme,
}

impl NumberKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NumberKind::Int64 => "Int64",
            NumberKind::BigInt => "BigInt",
            NumberKind::Float64 => "Float64",
            NumberKind::BigDecimal => "BigDecimal",
            NumberKind::RawLexeme => "RawLexeme",
        }
    }
}

impl fmt::Display for NumberKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl JsonNumber {
    pub fn kind(&self) -> NumberKind {
        match self {
            JsonNumber::Int64(_) => NumberKind::Int64,
            JsonNumber::BigInt(_) => NumberKind::BigInt,
            JsonNumber::Float64(_) => NumberKind::Float64,
            JsonNumber::BigDecimal(_) => NumberKind::BigDecimal,
            JsonNumber::RawLexeme(_) => NumberKind::RawLexeme,
        }
    }

    /// Same representation and equal value. Floats compare numerically, so
    /// `-0.0` matches `0.0`.
    pub fn equivalent(&self, other: &JsonNumber) -> bool {
        match (self, other) {
            (JsonNumber::Int64(a), JsonNumber::Int64(b)) => a == b,
            (JsonNumber::BigInt(a), JsonNumber::BigInt(b)) => a == b,
            (JsonNumber::Float64(a), JsonNumber::Float64(b)) => a == b,
            (JsonNumber::BigDecimal(a), JsonNumber::BigDecimal(b)) => a.value == b.value,
            (JsonNumber::RawLexeme(a), JsonNumber::RawLexeme(b)) => {
                a == b || ExactDecimal::from_lexeme(a) == ExactDecimal::from_lexeme(b)
            }
            _ => false,
        }
    }

    /// Exact decimal value, when the representation has one.
    pub fn exact_value(&self) -> Option<ExactDecimal> {
        match self {
            JsonNumber::Int64(i) => ExactDecimal::from_lexeme(&i.to_string()),
            JsonNumber::BigInt(b) => ExactDecimal::from_lexeme(&b.to_string()),
            JsonNumber::Float64(f) => ExactDecimal::from_f64(*f),
            JsonNumber::BigDecimal(d) => Some(d.value.clone()),
            JsonNumber::RawLexeme(s) => ExactDecimal::from_lexeme(s),
        }
    }
}

/// Structural equivalence of two documents.
///
/// Arrays match element-wise in order; objects match when they hold the
/// same keys with equivalent values, whatever the pair order; strings and
/// literals match exactly; numbers match per [`JsonNumber::equivalent`].
pub fn equivalent(a: &JsonValue, b: &JsonValue) -> bool {
    let mut pending = vec![(a, b)];
    while let Some((x, y)) = pending.pop() {
        match (x, y) {
            (JsonValue::Object(p), JsonValue::Object(q)) => {
                if p.pairs.len() != q.pairs.len() {
                    return false;
                }
                let mut ps: Vec<_> = p.pairs.iter().collect();
                let mut qs: Vec<_> = q.pairs.iter().collect();
                ps.sort_by(|l, r| l.0.cmp(&r.0));
                qs.sort_by(|l, r| l.0.cmp(&r.0));
                for (l, r) in ps.into_iter().zip(qs) {
                    if l.0 != r.0 {
                        return false;
                    }
                    pending.push((&l.1, &r.1));
                }
            }
            (JsonValue::Array(p), JsonValue::Array(q)) => {
                if p.len() != q.len() {
                    return false;
                }
                pending.extend(p.iter().zip(q));
            }
            (JsonValue::Str(s), JsonValue::Str(t)) => {
                if s != t {
                    return false;
                }
            }
            (JsonValue::Num(m), JsonValue::Num(n)) => {
                if !m.equivalent(n) {
                    return false;
                }
            }
            (JsonValue::Bool(s), JsonValue::Bool(t)) => {
                if s != t {
                    return false;
                }
            }
            (JsonValue::Null, JsonValue::Null) => {}
            _ => return false,
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ExponentMarker {
    #[serde(rename = "E")]
    Upper,
    #[default]
    #[serde(rename = "e")]
    Lower,
}

impl ExponentMarker {
    pub fn as_char(self) -> char {
        match self {
            ExponentMarker::Upper => 'E',
            ExponentMarker::Lower => 'e',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KeyOrder {
    #[default]
    Insertion,
    Lexicographic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EscapePolicy {
    /// Escape only quote, backslash and control characters.
    #[default]
    Minimal,
    /// Additionally escape every non-ASCII character as `\uXXXX`.
    AsciiOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SerializeStyle {
    pub exponent_marker: ExponentMarker,
    pub key_order: KeyOrder,
    pub escape_policy: EscapePolicy,
}

/// Writes `value` as strict JSON text.
///
/// Integers render as plain digits, floats as their shortest round-trip
/// decimal, and `BigDecimal`/`RawLexeme` numbers as their stored numeral.
pub fn canonical_serialize(value: &JsonValue, style: &SerializeStyle) -> String {
    let mut out = String::new();
    Writer {
        style,
        drop_null_entries: false,
    }
    .value(&mut out, value);
    out
}

pub(crate) struct Writer<'a> {
    pub style: &'a SerializeStyle,
    pub drop_null_entries: bool,
}

impl Writer<'_> {
    pub fn value(&self, out: &mut String, value: &JsonValue) {
        match value {
            JsonValue::Null => out.push_str("null"),
            JsonValue::Bool(true) => out.push_str("true"),
            JsonValue::Bool(false) => out.push_str("false"),
            JsonValue::Num(n) => self.number(out, n),
            JsonValue::Str(s) => self.string(out, s),
            JsonValue::Array(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    self.value(out, item);
                }
                out.push(']');
            }
            JsonValue::Object(obj) => {
                let mut pairs: Vec<&(String, JsonValue)> = obj
                    .pairs
                    .iter()
                    .filter(|(_, v)| !(self.drop_null_entries && *v == JsonValue::Null))
                    .collect();
                if self.style.key_order == KeyOrder::Lexicographic {
                    pairs.sort_by(|l, r| l.0.cmp(&r.0));
                }
                out.push('{');
                for (i, (k, v)) in pairs.into_iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    self.string(out, k);
                    out.push(':');
                    self.value(out, v);
                }
                out.push('}');
            }
        }
    }

    fn number(&self, out: &mut String, n: &JsonNumber) {
        match n {
            JsonNumber::Int64(i) => out.push_str(&i.to_string()),
            JsonNumber::BigInt(b) => out.push_str(&b.to_string()),
            JsonNumber::Float64(f) => out.push_str(&format_f64(*f, self.style.exponent_marker.as_char())),
            JsonNumber::BigDecimal(d) => out.push_str(&d.lexeme),
            JsonNumber::RawLexeme(s) => out.push_str(s),
        }
    }

    fn string(&self, out: &mut String, s: &str) {
        out.push('"');
        for ch in s.chars() {
            match ch {
                '"' => out.push_str("\\\""),
                '\\' => out.push_str("\\\\"),
                '\u{08}' => out.push_str("\\b"),
                '\u{0C}' => out.push_str("\\f"),
                '\n' => out.push_str("\\n"),
                '\r' => out.push_str("\\r"),
                '\t' => out.push_str("\\t"),
                c if (c as u32) < 0x20 => push_unicode_escape(out, c as u16),
                c if !c.is_ascii() && self.style.escape_policy == EscapePolicy::AsciiOnly => {
                    let mut units = [0u16; 2];
                    for unit in c.encode_utf16(&mut units) {
                        push_unicode_escape(out, *unit);
                    }
                }
                c => out.push(c),
            }
        }
        out.push('"');
    }
}

fn push_unicode_escape(out: &mut String, unit: u16) {
    use std::fmt::Write;
    let _ = write!(out, "\\u{unit:04x}");
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obj(pairs: &[(&str, JsonValue)]) -> JsonValue {
        JsonValue::Object(JsonObject::new(
            pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        ))
    }

    #[test]
    fn object_pair_order_is_ignored() {
        let a = obj(&[("a", 1.into()), ("b", 2.into())]);
        let b = obj(&[("b", 2.into()), ("a", 1.into())]);
        assert!(equivalent(&a, &b));
    }

    #[test]
    fn array_order_matters() {
        let a = JsonValue::Array(vec![1.into(), 2.into()]);
        let b = JsonValue::Array(vec![2.into(), 1.into()]);
        assert!(!equivalent(&a, &b));
    }

    #[test]
    fn number_representation_matters() {
        let i = JsonValue::Num(JsonNumber::Int64(1));
        let f = JsonValue::Num(JsonNumber::Float64(1.0));
        assert!(!equivalent(&i, &f));
        let neg = JsonValue::Num(JsonNumber::Float64(-0.0));
        let pos = JsonValue::Num(JsonNumber::Float64(0.0));
        assert!(equivalent(&neg, &pos));
    }

    #[test]
    fn decimals_and_lexemes_compare_by_value() {
        let a = JsonNumber::BigDecimal(Decimal::parse("1.50").unwrap());
        let b = JsonNumber::BigDecimal(Decimal::parse("15e-1").unwrap());
        assert!(a.equivalent(&b));
        let r = JsonNumber::RawLexeme("1E22".into());
        let s = JsonNumber::RawLexeme("1e+22".into());
        assert!(r.equivalent(&s));
        assert!(!r.equivalent(&JsonNumber::RawLexeme("1e21".into())));
    }

    #[test]
    fn missing_and_extra_keys() {
        let a = obj(&[("a", 1.into())]);
        let b = obj(&[("a", 1.into()), ("b", 1.into())]);
        let c = obj(&[("c", 1.into())]);
        assert!(!equivalent(&a, &b));
        assert!(!equivalent(&a, &c));
    }

    #[test]
    fn serialize_basics() {
        let s = SerializeStyle::default();
        assert_eq!(canonical_serialize(&5.into(), &s), "5");
        assert_eq!(canonical_serialize(&JsonValue::Str("\u{7}".into()), &s), "\"\\u0007\"");
        assert_eq!(
            canonical_serialize(&obj(&[("b", 1.into()), ("a", 2.into())]), &s),
            r#"{"b":1,"a":2}"#
        );
        let lex = SerializeStyle {
            key_order: KeyOrder::Lexicographic,
            ..s
        };
        assert_eq!(
            canonical_serialize(&obj(&[("b", 1.into()), ("a", 2.into())]), &lex),
            r#"{"a":2,"b":1}"#
        );
    }

    #[test]
    fn escapes() {
        let s = SerializeStyle::default();
        let v = JsonValue::Str("q\"b\\n\n\t\u{1f}\u{7f}é😀/".into());
        assert_eq!(canonical_serialize(&v, &s), "\"q\\\"b\\\\n\\n\\t\\u001f\u{7f}é😀/\"");
        let ascii = SerializeStyle {
            escape_policy: EscapePolicy::AsciiOnly,
            ..s
        };
        assert_eq!(
            canonical_serialize(&JsonValue::Str("é😀".into()), &ascii),
            "\"\\u00e9\\ud83d\\ude00\""
        );
    }

    #[test]
    fn numbers_render_per_representation() {
        let s = SerializeStyle {
            exponent_marker: ExponentMarker::Upper,
            ..Default::default()
        };
        let big: BigInt = "9223372036854775808".parse().unwrap();
        assert_eq!(canonical_serialize(&JsonNumber::BigInt(big).into(), &s), "9223372036854775808");
        assert_eq!(canonical_serialize(&JsonNumber::Float64(1e22).into(), &s), "1E22");
        let d = Decimal::parse("0.10000000000000000001").unwrap();
        assert_eq!(canonical_serialize(&JsonNumber::BigDecimal(d).into(), &s), "0.10000000000000000001");
        assert_eq!(canonical_serialize(&JsonNumber::RawLexeme("1E+2".into()).into(), &s), "1E+2");
    }

    #[test]
    fn shuffle_is_deterministic_and_seeded() {
        let keys: Vec<String> = (b'a'..=b'h').map(|c| (c as char).to_string()).collect();
        let make = || JsonObject::new(keys.iter().map(|k| (k.clone(), JsonValue::Null)).collect());
        let mut a = make();
        let mut b = make();
        a.shuffle(7);
        b.shuffle(7);
        assert_eq!(a, b);
        assert_eq!(a.order, ObjectOrder::Shuffled { seed: 7 });
        let orders: std::collections::HashSet<Vec<String>> = (0..8u64)
            .map(|seed| {
                let mut o = make();
                o.shuffle(seed);
                o.pairs.into_iter().map(|(k, _)| k).collect()
            })
            .collect();
        assert!(orders.len() > 1);
    }

    #[test]
    fn object_order_text_form() {
        assert_eq!("insertion".parse::<ObjectOrder>().unwrap(), ObjectOrder::Insertion);
        assert_eq!("shuffled:42".parse::<ObjectOrder>().unwrap(), ObjectOrder::Shuffled { seed: 42 });
        assert!("shuffled".parse::<ObjectOrder>().is_err());
        assert_eq!(ObjectOrder::Shuffled { seed: 9 }.to_string(), "shuffled:9");
    }

    #[test]
    fn depth() {
        assert_eq!(JsonValue::Null.depth(), 0);
        assert_eq!(JsonValue::Array(vec![]).depth(), 1);
        assert_eq!(JsonValue::Array(vec![JsonValue::Array(vec![1.into()])]).depth(), 2);
    }
}
