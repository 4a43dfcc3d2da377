use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::ToPrimitive;

use super::config::{DepthOverflow, DuplicateKeys, LenienceConfig, LonelyValues, NumberPolicy, OverflowMode};
use crate::model::{Decimal, JsonNumber, JsonObject, JsonValue, ObjectOrder};
use crate::number::{f64_is_lossless, scan_number};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParseErrorKind {
    Syntax,
    NumberOverflow,
    DuplicateKey,
    DepthExceeded,
    TrailingContent,
    LonelyValueRejected,
}

impl ParseErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ParseErrorKind::Syntax => "syntax",
            ParseErrorKind::NumberOverflow => "number-overflow",
            ParseErrorKind::DuplicateKey => "duplicate-key",
            ParseErrorKind::DepthExceeded => "depth-exceeded",
            ParseErrorKind::TrailingContent => "trailing-content",
            ParseErrorKind::LonelyValueRejected => "lonely-value-rejected",
        }
    }
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A rejection reported through the parser's error channel.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{kind} error at byte {offset}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    /// Offset of the first byte that could not be accepted. Never past the
    /// end of the input.
    pub offset: usize,
    pub message: String,
}

/// Parses `input` under `config`.
///
/// With `depth_overflow = crash`, exceeding the depth limit panics instead
/// of returning an error. Callers that need to survive that must isolate
/// the call (see `backend::invoke_parse`).
pub fn parse(input: &str, config: &LenienceConfig) -> Result<JsonValue, ParseError> {
    Parser {
        src: input,
        bytes: input.as_bytes(),
        pos: 0,
        config,
    }
    .document()
}

enum Frame {
    Array(Vec<JsonValue>),
    Object {
        pairs: Vec<(String, JsonValue)>,
        index: HashMap<String, usize>,
        key: String,
        key_offset: usize,
    },
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    config: &'a LenienceConfig,
}

impl Parser<'_> {
    fn document(mut self) -> Result<JsonValue, ParseError> {
        self.skip_ws()?;
        let Some(first) = self.peek() else {
            return Err(self.error(ParseErrorKind::Syntax, "empty document"));
        };
        if self.config.lonely_values == LonelyValues::Rfc4627 && first != b'[' && first != b'{' {
            return Err(self.error(
                ParseErrorKind::LonelyValueRejected,
                "top-level value must be an object or an array",
            ));
        }
        let root = self.value_tree()?;
        self.skip_ws()?;
        if self.pos < self.bytes.len() {
            return Err(self.error(ParseErrorKind::TrailingContent, "unexpected data after the top-level value"));
        }
        Ok(root)
    }

    fn value_tree(&mut self) -> Result<JsonValue, ParseError> {
        let mut stack: Vec<Frame> = Vec::new();
        'value: loop {
            let mut value = match self.peek() {
                Some(b'[') => {
                    self.enter(stack.len())?;
                    self.pos += 1;
                    self.skip_ws()?;
                    if self.peek() == Some(b']') {
                        self.pos += 1;
                        JsonValue::Array(Vec::new())
                    } else {
                        stack.push(Frame::Array(Vec::new()));
                        continue 'value;
                    }
                }
                Some(b'{') => {
                    self.enter(stack.len())?;
                    self.pos += 1;
                    self.skip_ws()?;
                    if self.peek() == Some(b'}') {
                        self.pos += 1;
                        self.finish_object(Vec::new())
                    } else {
                        let (key, key_offset) = self.member_key()?;
                        stack.push(Frame::Object {
                            pairs: Vec::new(),
                            index: HashMap::new(),
                            key,
                            key_offset,
                        });
                        continue 'value;
                    }
                }
                Some(_) => self.scalar()?,
                None => return Err(self.eof("expected a value")),
            };

            // Fold the finished value into enclosing containers until one
            // of them asks for another value.
            loop {
                let Some(mut frame) = stack.pop() else {
                    return Ok(value);
                };
                match &mut frame {
                    Frame::Array(items) => {
                        items.push(value);
                        self.skip_ws()?;
                        match self.peek() {
                            Some(b',') => {
                                self.pos += 1;
                                self.skip_ws()?;
                                if self.config.allow_trailing_commas && self.peek() == Some(b']') {
                                    self.pos += 1;
                                    let Frame::Array(items) = frame else { unreachable!() };
                                    value = JsonValue::Array(items);
                                    continue;
                                }
                                stack.push(frame);
                                continue 'value;
                            }
                            Some(b']') => {
                                self.pos += 1;
                                let Frame::Array(items) = frame else { unreachable!() };
                                value = JsonValue::Array(items);
                            }
                            Some(_) => return Err(self.error(ParseErrorKind::Syntax, "expected ',' or ']'")),
                            None => return Err(self.eof("unterminated array")),
                        }
                    }
                    Frame::Object {
                        pairs,
                        index,
                        key,
                        key_offset,
                    } => {
                        let key = std::mem::take(key);
                        match index.get(&key) {
                            Some(&at) => match self.config.duplicate_keys {
                                DuplicateKeys::KeepLast => pairs[at].1 = value,
                                DuplicateKeys::KeepFirst => {}
                                DuplicateKeys::Reject => {
                                    return Err(ParseError {
                                        kind: ParseErrorKind::DuplicateKey,
                                        offset: *key_offset,
                                        message: format!("duplicate key {key:?}"),
                                    })
                                }
                            },
                            None => {
                                index.insert(key.clone(), pairs.len());
                                pairs.push((key, value));
                            }
                        }
                        self.skip_ws()?;
                        match self.peek() {
                            Some(b',') => {
                                self.pos += 1;
                                self.skip_ws()?;
                                if self.config.allow_trailing_commas && self.peek() == Some(b'}') {
                                    self.pos += 1;
                                    let Frame::Object { pairs, .. } = frame else { unreachable!() };
                                    value = self.finish_object(pairs);
                                    continue;
                                }
                                let (next, next_offset) = self.member_key()?;
                                if let Frame::Object { key, key_offset, .. } = &mut frame {
                                    *key = next;
                                    *key_offset = next_offset;
                                }
                                stack.push(frame);
                                continue 'value;
                            }
                            Some(b'}') => {
                                self.pos += 1;
                                let Frame::Object { pairs, .. } = frame else { unreachable!() };
                                value = self.finish_object(pairs);
                            }
                            Some(_) => return Err(self.error(ParseErrorKind::Syntax, "expected ',' or '}'")),
                            None => return Err(self.eof("unterminated object")),
                        }
                    }
                }
            }
        }
    }

    fn enter(&self, open: usize) -> Result<(), ParseError> {
        let limit = self.config.depth_limit;
        if open < limit {
            return Ok(());
        }
        match self.config.depth_overflow {
            DepthOverflow::CheckedError => Err(self.error(
                ParseErrorKind::DepthExceeded,
                &format!("nesting deeper than {limit} levels"),
            )),
            DepthOverflow::Crash => panic!("parser stack exhausted: nesting deeper than {limit} levels"),
        }
    }

    fn finish_object(&self, pairs: Vec<(String, JsonValue)>) -> JsonValue {
        let mut obj = JsonObject::new(pairs);
        if let ObjectOrder::Shuffled { seed } = self.config.object_order {
            obj.shuffle(seed);
        }
        JsonValue::Object(obj)
    }

    /// Reads a member name and the following colon, leaving the cursor at
    /// the start of the member value.
    fn member_key(&mut self) -> Result<(String, usize), ParseError> {
        let offset = self.pos;
        let key = match self.peek() {
            Some(b'"') => self.string()?,
            Some(b) if self.config.allow_unquoted_keys && (b.is_ascii_alphabetic() || b == b'_' || b == b'$') => {
                let start = self.pos;
                while matches!(self.peek(), Some(b) if b.is_ascii_alphanumeric() || b == b'_' || b == b'$') {
                    self.pos += 1;
                }
                self.src[start..self.pos].to_owned()
            }
            Some(_) => return Err(self.error(ParseErrorKind::Syntax, "expected a string key")),
            None => return Err(self.eof("expected a string key")),
        };
        self.skip_ws()?;
        match self.peek() {
            Some(b':') => self.pos += 1,
            Some(_) => return Err(self.error(ParseErrorKind::Syntax, "expected ':'")),
            None => return Err(self.eof("expected ':'")),
        }
        self.skip_ws()?;
        Ok((key, offset))
    }

    fn scalar(&mut self) -> Result<JsonValue, ParseError> {
        match self.peek() {
            Some(b'"') => Ok(JsonValue::Str(self.string()?)),
            Some(b't') => self.literal("true", JsonValue::Bool(true)),
            Some(b'f') => self.literal("false", JsonValue::Bool(false)),
            Some(b'n') => self.literal("null", JsonValue::Null),
            Some(b'-' | b'0'..=b'9') => self.number(),
            _ => Err(self.error(ParseErrorKind::Syntax, "unexpected character")),
        }
    }

    fn literal(&mut self, word: &str, value: JsonValue) -> Result<JsonValue, ParseError> {
        let rest = &self.bytes[self.pos..];
        let matched = rest.iter().zip(word.as_bytes()).take_while(|(a, b)| a == b).count();
        if matched == word.len() {
            self.pos += matched;
            Ok(value)
        } else if self.pos + matched == self.bytes.len() {
            self.pos += matched;
            Err(self.eof("truncated literal"))
        } else {
            self.pos += matched;
            Err(self.error(ParseErrorKind::Syntax, &format!("invalid literal, expected {word}")))
        }
    }

    fn number(&mut self) -> Result<JsonValue, ParseError> {
        let start = self.pos;
        if self.config.allow_hex_numbers {
            if let Some(v) = self.hex_number()? {
                return Ok(v);
            }
        }
        let (shape, len) = match scan_number(&self.bytes[start..]) {
            Ok(found) => found,
            Err(at) => {
                self.pos = start + at;
                return Err(if self.pos == self.bytes.len() {
                    self.eof("truncated number")
                } else {
                    self.error(ParseErrorKind::Syntax, "malformed number")
                });
            }
        };
        self.pos = start + len;
        let lexeme = &self.src[start..self.pos];
        self.classify(lexeme, shape.is_integral(), start).map(JsonValue::Num)
    }

    fn hex_number(&mut self) -> Result<Option<JsonValue>, ParseError> {
        let start = self.pos;
        let mut p = start;
        let negative = self.bytes.get(p) == Some(&b'-');
        if negative {
            p += 1;
        }
        if self.bytes.get(p) != Some(&b'0') || !matches!(self.bytes.get(p + 1), Some(b'x' | b'X')) {
            return Ok(None);
        }
        p += 2;
        let digits = p;
        while matches!(self.bytes.get(p), Some(b) if b.is_ascii_hexdigit()) {
            p += 1;
        }
        self.pos = p;
        if p == digits {
            return Err(if p == self.bytes.len() {
                self.eof("truncated hex number")
            } else {
                self.error(ParseErrorKind::Syntax, "hex number without digits")
            });
        }
        let mut value = BigInt::parse_bytes(&self.bytes[digits..p], 16).expect("hex digits were checked");
        if negative {
            value = -value;
        }
        self.integer_from_big(value, start).map(|n| Some(JsonValue::Num(n)))
    }

    fn classify(&self, lexeme: &str, integral: bool, start: usize) -> Result<JsonNumber, ParseError> {
        let config = self.config;
        if config.number_policy == NumberPolicy::Raw {
            return Ok(JsonNumber::RawLexeme(lexeme.to_owned()));
        }
        if integral {
            if lexeme == "-0" {
                return Ok(JsonNumber::Float64(-0.0));
            }
            if let Ok(i) = lexeme.parse::<i64>() {
                return Ok(JsonNumber::Int64(i));
            }
            let big: BigInt = lexeme.parse().expect("integral lexeme is a valid integer");
            return self.integer_from_big(big, start);
        }
        let float: f64 = lexeme.parse().expect("number grammar is accepted by the float parser");
        match config.number_policy {
            NumberPolicy::Extended => {
                if f64_is_lossless(lexeme, float) {
                    Ok(JsonNumber::Float64(float))
                } else {
                    Ok(JsonNumber::BigDecimal(Decimal::parse(lexeme).expect("lexeme matched the grammar")))
                }
            }
            NumberPolicy::Lossy64 => {
                if float.is_finite() {
                    Ok(JsonNumber::Float64(float))
                } else {
                    match config.overflow_mode {
                        OverflowMode::Error => Err(self.overflow(start, lexeme)),
                        OverflowMode::RoundSilently => Ok(JsonNumber::Float64(f64::MAX.copysign(float))),
                    }
                }
            }
            NumberPolicy::Raw => unreachable!(),
        }
    }

    fn integer_from_big(&self, value: BigInt, start: usize) -> Result<JsonNumber, ParseError> {
        if self.config.number_policy == NumberPolicy::Raw {
            return Ok(JsonNumber::RawLexeme(value.to_string()));
        }
        if let Some(i) = value.to_i64() {
            return Ok(JsonNumber::Int64(i));
        }
        match self.config.number_policy {
            NumberPolicy::Extended => Ok(JsonNumber::BigInt(value)),
            NumberPolicy::Raw => unreachable!(),
            NumberPolicy::Lossy64 => match self.config.overflow_mode {
                OverflowMode::Error => Err(self.overflow(start, &self.src[start..self.pos])),
                OverflowMode::RoundSilently => {
                    let f = value.to_f64().filter(|f| f.is_finite());
                    Ok(JsonNumber::Float64(f.unwrap_or_else(|| {
                        f64::MAX.copysign(if value.sign() == num_bigint::Sign::Minus { -1.0 } else { 1.0 })
                    })))
                }
            },
        }
    }

    fn overflow(&self, start: usize, lexeme: &str) -> ParseError {
        ParseError {
            kind: ParseErrorKind::NumberOverflow,
            offset: start,
            message: format!("{lexeme} does not fit a 64-bit representation"),
        }
    }

    fn string(&mut self) -> Result<String, ParseError> {
        debug_assert_eq!(self.peek(), Some(b'"'));
        self.pos += 1;
        let mut out = String::new();
        loop {
            let run = self.pos;
            while let Some(&b) = self.bytes.get(self.pos) {
                if b == b'"' || b == b'\\' || b < 0x20 {
                    break;
                }
                self.pos += 1;
            }
            // The scan only stops on ASCII bytes, so `run..pos` is on char
            // boundaries.
            out.push_str(&self.src[run..self.pos]);
            match self.peek() {
                None => return Err(self.eof("unterminated string")),
                Some(b'"') => {
                    self.pos += 1;
                    return Ok(out);
                }
                Some(b'\\') => {
                    self.pos += 1;
                    self.escape(&mut out)?;
                }
                Some(_) => {
                    return Err(self.error(ParseErrorKind::Syntax, "unescaped control character in string"));
                }
            }
        }
    }

    fn escape(&mut self, out: &mut String) -> Result<(), ParseError> {
        let simple = match self.peek() {
            None => return Err(self.eof("unterminated escape")),
            Some(b'"') => '"',
            Some(b'\\') => '\\',
            Some(b'/') => '/',
            Some(b'b') => '\u{08}',
            Some(b'f') => '\u{0C}',
            Some(b'n') => '\n',
            Some(b'r') => '\r',
            Some(b't') => '\t',
            Some(b'u') => return self.unicode_escape(out),
            Some(_) => return self.invalid_escape(out),
        };
        out.push(simple);
        self.pos += 1;
        Ok(())
    }

    fn unicode_escape(&mut self, out: &mut String) -> Result<(), ParseError> {
        let Some(unit) = self.hex4(self.pos + 1)? else {
            return self.invalid_escape(out);
        };
        self.pos += 5;
        if (0xD800..0xDC00).contains(&unit) {
            if self.bytes.get(self.pos) == Some(&b'\\') && self.bytes.get(self.pos + 1) == Some(&b'u') {
                if let Some(low) = self.hex4(self.pos + 2)? {
                    if (0xDC00..0xE000).contains(&low) {
                        let c = 0x10000 + ((u32::from(unit) - 0xD800) << 10) + (u32::from(low) - 0xDC00);
                        out.push(char::from_u32(c).expect("surrogate pair decodes to a scalar value"));
                        self.pos += 6;
                        return Ok(());
                    }
                }
            }
            out.push(char::REPLACEMENT_CHARACTER);
        } else if (0xDC00..0xE000).contains(&unit) {
            out.push(char::REPLACEMENT_CHARACTER);
        } else {
            out.push(char::from_u32(u32::from(unit)).expect("non-surrogate BMP unit"));
        }
        Ok(())
    }

    /// Four hex digits at `at`, `None` if some are not hex digits.
    fn hex4(&self, at: usize) -> Result<Option<u16>, ParseError> {
        let mut unit = 0u16;
        for i in 0..4 {
            match self.bytes.get(at + i) {
                Some(b) if b.is_ascii_hexdigit() => {
                    unit = unit * 16 + (*b as char).to_digit(16).expect("hex digit") as u16;
                }
                Some(_) => return Ok(None),
                None => {
                    return Err(ParseError {
                        kind: ParseErrorKind::Syntax,
                        offset: self.bytes.len(),
                        message: "unexpected end of input in unicode escape".into(),
                    })
                }
            }
        }
        Ok(Some(unit))
    }

    fn invalid_escape(&mut self, out: &mut String) -> Result<(), ParseError> {
        if !self.config.allow_invalid_escapes {
            return Err(self.error(ParseErrorKind::Syntax, "invalid escape sequence"));
        }
        let c = self.src[self.pos..].chars().next().expect("caller checked a byte is present");
        if (c as u32) < 0x20 {
            return Err(self.error(ParseErrorKind::Syntax, "unescaped control character in string"));
        }
        out.push(c);
        self.pos += c.len_utf8();
        Ok(())
    }

    fn skip_ws(&mut self) -> Result<(), ParseError> {
        loop {
            match self.peek() {
                Some(b' ' | b'\t' | b'\n' | b'\r') => self.pos += 1,
                Some(b'/') if self.config.allow_comments => match self.bytes.get(self.pos + 1) {
                    Some(b'/') => {
                        self.pos += 2;
                        while !matches!(self.peek(), None | Some(b'\n')) {
                            self.pos += 1;
                        }
                    }
                    Some(b'*') => {
                        let body = self.pos + 2;
                        match self.src[body..].find("*/") {
                            Some(end) => self.pos = body + end + 2,
                            None => {
                                self.pos = self.bytes.len();
                                return Err(self.eof("unterminated comment"));
                            }
                        }
                    }
                    _ => return Ok(()),
                },
                _ => return Ok(()),
            }
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn error(&self, kind: ParseErrorKind, message: &str) -> ParseError {
        ParseError {
            kind,
            offset: self.pos,
            message: message.to_owned(),
        }
    }

    fn eof(&self, message: &str) -> ParseError {
        ParseError {
            kind: ParseErrorKind::Syntax,
            offset: self.bytes.len(),
            message: format!("unexpected end of input: {message}"),
        }
    }
}
