use std::time::Duration;

use super::{Backend, BackendDescriptor, BackendKind, CheckedError, Failure};
use crate::engine::{self, ConfigError, LenienceConfig};
use crate::model::JsonValue;

/// A variant of the reference engine.
#[derive(Debug, Clone)]
pub struct BuiltinBackend {
    descriptor: BackendDescriptor,
    config: LenienceConfig,
}

impl BuiltinBackend {
    /// Fails when the descriptor is not a built-in one or its config is out
    /// of range.
    pub fn new(descriptor: BackendDescriptor) -> Result<Self, ConfigError> {
        let BackendKind::Builtin { config } = &descriptor.kind else {
            return Err(ConfigError::NotBuiltin(descriptor.id.clone()));
        };
        config.validate()?;
        let config = config.clone();
        Ok(Self { descriptor, config })
    }

    pub fn config(&self) -> &LenienceConfig {
        &self.config
    }
}

impl Backend for BuiltinBackend {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    fn parse(&self, input: &str, _budget: Option<Duration>) -> Result<Option<JsonValue>, Failure> {
        engine::parse(input, &self.config)
            .map(Some)
            .map_err(|e| Failure::Checked(CheckedError::new(e.kind.as_str(), e.to_string())))
    }

    fn serialize(&self, value: &JsonValue, _budget: Option<Duration>) -> Result<String, Failure> {
        engine::serialize(value, &self.config).map_err(|e| Failure::Checked(CheckedError::new("print", e.message)))
    }
}
