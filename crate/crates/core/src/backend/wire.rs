//! Flat token encoding of [`JsonValue`] for the worker protocol.
//!
//! A document becomes a sequence of short strings, one per node boundary,
//! so arbitrarily deep values cross the process boundary without recursive
//! encoders or decoders. Every number variant is carried exactly; floats
//! travel as their bit pattern.
//!
//! | token        | meaning                               |
//! |--------------|---------------------------------------|
//! | `[` / `]`    | array open / close                    |
//! | `{ORDER`/`}` | object open (with order tag) / close  |
//! | `kKEY`       | member key                            |
//! | `sTEXT`      | string                                |
//! | `n` `t` `f`  | null, true, false                     |
//! | `iDIGITS`    | `Int64`                               |
//! | `bDIGITS`    | `BigInt`                              |
//! | `dHEX16`     | `Float64` bits                        |
//! | `DLEXEME`    | `BigDecimal`                          |
//! | `rLEXEME`    | `RawLexeme`                           |

use crate::model::{Decimal, JsonNumber, JsonObject, JsonValue, ObjectOrder};
use crate::number::is_json_number;

pub fn encode(value: &JsonValue) -> Vec<String> {
    enum Item<'a> {
        Value(&'a JsonValue),
        Key(&'a str),
        Close(&'static str),
    }
    let mut out = Vec::new();
    let mut stack = vec![Item::Value(value)];
    while let Some(item) = stack.pop() {
        let v = match item {
            Item::Key(k) => {
                out.push(format!("k{k}"));
                continue;
            }
            Item::Close(t) => {
                out.push(t.to_owned());
                continue;
            }
            Item::Value(v) => v,
        };
        match v {
            JsonValue::Null => out.push("n".into()),
            JsonValue::Bool(true) => out.push("t".into()),
            JsonValue::Bool(false) => out.push("f".into()),
            JsonValue::Str(s) => out.push(format!("s{s}")),
            JsonValue::Num(JsonNumber::Int64(i)) => out.push(format!("i{i}")),
            JsonValue::Num(JsonNumber::BigInt(b)) => out.push(format!("b{b}")),
            JsonValue::Num(JsonNumber::Float64(f)) => out.push(format!("d{:016x}", f.to_bits())),
            JsonValue::Num(JsonNumber::BigDecimal(d)) => out.push(format!("D{}", d.lexeme())),
            JsonValue::Num(JsonNumber::RawLexeme(r)) => out.push(format!("r{r}")),
            JsonValue::Array(items) => {
                out.push("[".into());
                stack.push(Item::Close("]"));
                stack.extend(items.iter().rev().map(Item::Value));
            }
            JsonValue::Object(obj) => {
                out.push(format!("{{{}", obj.order));
                stack.push(Item::Close("}"));
                for (k, v) in obj.pairs.iter().rev() {
                    stack.push(Item::Value(v));
                    stack.push(Item::Key(k));
                }
            }
        }
    }
    out
}

pub fn decode(tokens: &[String]) -> Result<JsonValue, String> {
    enum Frame {
        Array(Vec<JsonValue>),
        Object(ObjectOrder, Vec<(String, JsonValue)>, Option<String>),
    }
    let mut stack: Vec<Frame> = Vec::new();
    let mut iter = tokens.iter().enumerate();
    while let Some((at, token)) = iter.next() {
        let bad = |why: &str| format!("token {at} ({token:?}): {why}");
        let (tag, body) = token.split_at(token.chars().next().map_or(0, char::len_utf8));
        let value = match tag {
            "[" => {
                stack.push(Frame::Array(Vec::new()));
                continue;
            }
            "{" => {
                let order = body.parse().map_err(|_| bad("unknown object order"))?;
                stack.push(Frame::Object(order, Vec::new(), None));
                continue;
            }
            "k" => match stack.last_mut() {
                Some(Frame::Object(_, _, key @ None)) => {
                    *key = Some(body.to_owned());
                    continue;
                }
                _ => return Err(bad("key outside an object")),
            },
            "]" => match stack.pop() {
                Some(Frame::Array(items)) => JsonValue::Array(items),
                _ => return Err(bad("unbalanced array close")),
            },
            "}" => match stack.pop() {
                Some(Frame::Object(order, pairs, None)) => JsonValue::Object(JsonObject { pairs, order }),
                _ => return Err(bad("unbalanced object close")),
            },
            "n" => JsonValue::Null,
            "t" => JsonValue::Bool(true),
            "f" => JsonValue::Bool(false),
            "s" => JsonValue::Str(body.to_owned()),
            "i" => JsonValue::Num(JsonNumber::Int64(body.parse().map_err(|_| bad("bad Int64"))?)),
            "b" => JsonValue::Num(JsonNumber::BigInt(body.parse().map_err(|_| bad("bad BigInt"))?)),
            "d" => JsonValue::Num(JsonNumber::Float64(f64::from_bits(
                u64::from_str_radix(body, 16).map_err(|_| bad("bad float bits"))?,
            ))),
            "D" => JsonValue::Num(JsonNumber::BigDecimal(Decimal::parse(body).ok_or_else(|| bad("bad decimal"))?)),
            "r" if is_json_number(body) => JsonValue::Num(JsonNumber::RawLexeme(body.to_owned())),
            _ => return Err(bad("unknown token")),
        };
        match stack.last_mut() {
            None => {
                return match iter.next() {
                    None => Ok(value),
                    Some((at, _)) => Err(format!("token {at}: content after the root value")),
                }
            }
            Some(Frame::Array(items)) => items.push(value),
            Some(Frame::Object(_, pairs, key)) => match key.take() {
                Some(k) => pairs.push((k, value)),
                None => return Err(bad("object member without a key")),
            },
        }
    }
    Err("token stream ended inside a value".into())
}
