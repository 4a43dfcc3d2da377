use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::ObjectOrder;

/// Largest accepted `depth_limit`. Serialization and drop of parsed values
/// recurse once per nesting level, so this bounds their stack use.
pub const MAX_DEPTH_LIMIT: usize = 10_000;

pub const DEFAULT_DEPTH_LIMIT: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LonelyValues {
    /// Any value may be the top-level value.
    Rfc8259,
    /// Only an object or an array may be the top-level value.
    Rfc4627,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DuplicateKeys {
    KeepLast,
    KeepFirst,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NumberPolicy {
    /// `Int64` and `Float64` only.
    Lossy64,
    /// `Int64`/`Float64` where exact, `BigInt`/`BigDecimal` otherwise.
    Extended,
    /// Keep every numeral as a `RawLexeme`.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverflowMode {
    Error,
    RoundSilently,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DepthOverflow {
    CheckedError,
    /// Abort the parse with a panic, standing in for an unchecked failure
    /// such as stack exhaustion.
    Crash,
}

/// One point in the space of parser behaviors.
///
/// Every field is named in the config file form; a document that omits a
/// field or carries an unknown one is rejected.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LenienceConfig {
    pub allow_trailing_commas: bool,
    pub allow_unquoted_keys: bool,
    pub allow_hex_numbers: bool,
    pub allow_comments: bool,
    pub allow_invalid_escapes: bool,
    pub lonely_values: LonelyValues,
    pub duplicate_keys: DuplicateKeys,
    pub number_policy: NumberPolicy,
    pub overflow_mode: OverflowMode,
    pub object_order: ObjectOrder,
    pub drop_null_entries_on_serialize: bool,
    pub depth_limit: usize,
    pub depth_overflow: DepthOverflow,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid config document: {0}")]
    Format(#[from] serde_json::Error),
    #[error("depth_limit must be in 1..={MAX_DEPTH_LIMIT}, got {0}")]
    DepthLimit(usize),
    #[error("backend {0} is not a built-in variant")]
    NotBuiltin(String),
}

impl LenienceConfig {
    /// The RFC 8259 reference behavior.
    pub fn strict() -> Self {
        Self {
            allow_trailing_commas: false,
            allow_unquoted_keys: false,
            allow_hex_numbers: false,
            allow_comments: false,
            allow_invalid_escapes: false,
            lonely_values: LonelyValues::Rfc8259,
            duplicate_keys: DuplicateKeys::KeepLast,
            number_policy: NumberPolicy::Extended,
            overflow_mode: OverflowMode::Error,
            object_order: ObjectOrder::Insertion,
            drop_null_entries_on_serialize: false,
            depth_limit: DEFAULT_DEPTH_LIMIT,
            depth_overflow: DepthOverflow::CheckedError,
        }
    }

    /// Strict with every input-widening flag switched on.
    pub fn permissive() -> Self {
        Self {
            allow_trailing_commas: true,
            allow_unquoted_keys: true,
            allow_hex_numbers: true,
            allow_comments: true,
            allow_invalid_escapes: true,
            ..Self::strict()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.depth_limit == 0 || self.depth_limit > MAX_DEPTH_LIMIT {
            return Err(ConfigError::DepthLimit(self.depth_limit));
        }
        Ok(())
    }

    /// Reads the flat JSON config form.
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config always serializes")
    }
}

impl Default for LenienceConfig {
    fn default() -> Self {
        Self::strict()
    }
}

impl fmt::Display for LonelyValues {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LonelyValues::Rfc8259 => "rfc8259",
            LonelyValues::Rfc4627 => "rfc4627",
        })
    }
}
