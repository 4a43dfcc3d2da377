use super::config::{LenienceConfig, LonelyValues};
use crate::model::{JsonValue, SerializeStyle, Writer};

/// A value the configured serializer refuses to print.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot serialize: {message}")]
pub struct SerializeError {
    pub message: String,
}

/// Serializes `value` the way a backend built from `config` would.
///
/// Output uses the default [`SerializeStyle`]: stored pair order, lowercase
/// exponent marker, minimal escaping.
pub fn serialize(value: &JsonValue, config: &LenienceConfig) -> Result<String, SerializeError> {
    if config.lonely_values == LonelyValues::Rfc4627 && !value.is_container() {
        return Err(SerializeError {
            message: "top-level value must be an object or an array".into(),
        });
    }
    let mut out = String::new();
    Writer {
        style: &SerializeStyle::default(),
        drop_null_entries: config.drop_null_entries_on_serialize,
    }
    .value(&mut out, value);
    Ok(out)
}
