//! The strict reference parser and serializer, and the family of lenient
//! variants obtained by turning individual [`LenienceConfig`] knobs.

mod config;
mod parser;
mod serializer;

pub use config::{
    ConfigError, DepthOverflow, DuplicateKeys, LenienceConfig, LonelyValues, NumberPolicy, OverflowMode,
    DEFAULT_DEPTH_LIMIT, MAX_DEPTH_LIMIT,
};
pub use parser::{parse, ParseError, ParseErrorKind};
pub use serializer::{serialize, SerializeError};

use crate::backend::{BackendDescriptor, BackendKind};
use crate::model::ObjectOrder;

pub const DEFAULT_SHUFFLE_SEED: u64 = 42;

/// Nesting limit of the `crasher-deep` variant.
pub const CRASHER_DEPTH_LIMIT: usize = 64;

/// Version reported for every built-in backend.
pub const BUILTIN_VERSION: &str = env!("CARGO_PKG_VERSION");

/// The default built-in variants, in registry order. Each one is the strict
/// configuration with one behavior axis changed.
pub fn builtin_presets(seed: u64) -> Vec<(&'static str, LenienceConfig)> {
    let strict = LenienceConfig::strict;
    vec![
        ("strict", strict()),
        (
            "strict-4627",
            LenienceConfig {
                lonely_values: LonelyValues::Rfc4627,
                ..strict()
            },
        ),
        (
            "trailing-comma",
            LenienceConfig {
                allow_trailing_commas: true,
                ..strict()
            },
        ),
        (
            "unquoted-keys",
            LenienceConfig {
                allow_unquoted_keys: true,
                ..strict()
            },
        ),
        (
            "hex-numbers",
            LenienceConfig {
                allow_hex_numbers: true,
                ..strict()
            },
        ),
        (
            "comments",
            LenienceConfig {
                allow_comments: true,
                ..strict()
            },
        ),
        (
            "invalid-escapes",
            LenienceConfig {
                allow_invalid_escapes: true,
                ..strict()
            },
        ),
        (
            "lossy64-checked",
            LenienceConfig {
                number_policy: NumberPolicy::Lossy64,
                overflow_mode: OverflowMode::Error,
                ..strict()
            },
        ),
        (
            "lossy64-rounding",
            LenienceConfig {
                number_policy: NumberPolicy::Lossy64,
                overflow_mode: OverflowMode::RoundSilently,
                ..strict()
            },
        ),
        (
            "reject-duplicates",
            LenienceConfig {
                duplicate_keys: DuplicateKeys::Reject,
                ..strict()
            },
        ),
        (
            "null-dropper",
            LenienceConfig {
                drop_null_entries_on_serialize: true,
                ..strict()
            },
        ),
        (
            "shuffled-keys",
            LenienceConfig {
                object_order: ObjectOrder::Shuffled { seed },
                ..strict()
            },
        ),
        (
            "crasher-deep",
            LenienceConfig {
                depth_limit: CRASHER_DEPTH_LIMIT,
                depth_overflow: DepthOverflow::Crash,
                ..strict()
            },
        ),
    ]
}

/// Variants that can be selected by name but are left out of the default
/// registry because they change the representation of every number or the
/// value of ordinary documents.
pub fn extra_presets() -> Vec<(&'static str, LenienceConfig)> {
    vec![
        (
            "raw-numbers",
            LenienceConfig {
                number_policy: NumberPolicy::Raw,
                ..LenienceConfig::strict()
            },
        ),
        (
            "keep-first",
            LenienceConfig {
                duplicate_keys: DuplicateKeys::KeepFirst,
                ..LenienceConfig::strict()
            },
        ),
        ("permissive", LenienceConfig::permissive()),
    ]
}

pub fn builtin_registry() -> Vec<BackendDescriptor> {
    builtin_registry_with_seed(DEFAULT_SHUFFLE_SEED)
}

pub fn builtin_registry_with_seed(seed: u64) -> Vec<BackendDescriptor> {
    builtin_presets(seed)
        .into_iter()
        .map(|(id, config)| BackendDescriptor {
            id: id.to_owned(),
            kind: BackendKind::Builtin { config },
            version: BUILTIN_VERSION.to_owned(),
        })
        .collect()
}

/// Looks up a default or extra preset by name.
pub fn preset(name: &str, seed: u64) -> Option<LenienceConfig> {
    builtin_presets(seed)
        .into_iter()
        .chain(extra_presets())
        .find(|(id, _)| *id == name)
        .map(|(_, config)| config)
}
