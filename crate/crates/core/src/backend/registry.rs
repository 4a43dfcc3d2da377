use std::path::Path;
use std::sync::Arc;

use super::{AdapterCatalog, Backend, BackendDescriptor, BackendKind, BuiltinBackend, WorkerCommand};
use crate::engine::{self, LenienceConfig, BUILTIN_VERSION, DEFAULT_SHUFFLE_SEED};

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("duplicate backend id {0:?}")]
    DuplicateId(String),
    #[error("unknown built-in variant {0:?}")]
    UnknownBuiltin(String),
    #[error("{0}")]
    Adapter(String),
    #[error("bad backend selector {0:?}: expected builtin:*, builtin:<id>, external:<name> or config:<path>")]
    Selector(String),
    #[error("cannot load backend config {path}: {message}")]
    Config { path: String, message: String },
    #[error("empty backend selection")]
    Empty,
}

/// The backends taking part in a run. Ids are unique; order is the order
/// of registration. Immutable once handed to the harness.
#[derive(Clone, Default)]
pub struct BackendRegistry {
    backends: Vec<Arc<dyn Backend>>,
}

impl std::fmt::Debug for BackendRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.backends.iter().map(|b| &b.descriptor().id)).finish()
    }
}

impl BackendRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// All default built-in variants with the default shuffle seed.
    pub fn builtin() -> Self {
        Self::builtin_with_seed(DEFAULT_SHUFFLE_SEED)
    }

    pub fn builtin_with_seed(seed: u64) -> Self {
        let mut r = Self::new();
        for d in engine::builtin_registry_with_seed(seed) {
            r.push(Arc::new(BuiltinBackend::new(d).expect("presets are valid")))
                .expect("preset ids are unique");
        }
        r
    }

    /// Built-in variants picked by id, in the given order. Extra presets
    /// outside the default set are accepted too.
    pub fn builtin_subset(ids: &[&str], seed: u64) -> Result<Self, RegistryError> {
        let mut r = Self::new();
        for id in ids {
            r.push_builtin(id, seed)?;
        }
        Ok(r)
    }

    pub fn push(&mut self, backend: Arc<dyn Backend>) -> Result<(), RegistryError> {
        let id = &backend.descriptor().id;
        if self.get(id).is_some() {
            return Err(RegistryError::DuplicateId(id.clone()));
        }
        self.backends.push(backend);
        Ok(())
    }

    fn push_builtin(&mut self, id: &str, seed: u64) -> Result<(), RegistryError> {
        let config = engine::preset(id, seed).ok_or_else(|| RegistryError::UnknownBuiltin(id.to_owned()))?;
        self.push_config(id, config)
    }

    fn push_config(&mut self, id: &str, config: LenienceConfig) -> Result<(), RegistryError> {
        let descriptor = BackendDescriptor {
            id: id.to_owned(),
            kind: BackendKind::Builtin { config },
            version: BUILTIN_VERSION.to_owned(),
        };
        let backend = BuiltinBackend::new(descriptor).map_err(|e| RegistryError::Config {
            path: id.to_owned(),
            message: e.to_string(),
        })?;
        self.push(Arc::new(backend))
    }

    /// Resolves selectors such as `builtin:*`, `builtin:strict`,
    /// `external:serde_json` or `config:path/to/variant.json` (the file
    /// stem becomes the id).
    pub fn from_selectors<S: AsRef<str>>(
        selectors: &[S],
        seed: u64,
        catalog: &AdapterCatalog,
        worker: Option<&WorkerCommand>,
    ) -> Result<Self, RegistryError> {
        let mut r = Self::new();
        for selector in selectors {
            let selector = selector.as_ref();
            let (scheme, name) = selector
                .split_once(':')
                .ok_or_else(|| RegistryError::Selector(selector.to_owned()))?;
            match (scheme, name) {
                ("builtin", "*") => {
                    for (id, _) in engine::builtin_presets(seed) {
                        r.push_builtin(id, seed)?;
                    }
                }
                ("builtin", id) if !id.is_empty() => r.push_builtin(id, seed)?,
                ("external", "*") => {
                    let names: Vec<String> = catalog.names().map(str::to_owned).collect();
                    for name in names {
                        if let Ok(b) = catalog.instantiate(&name, worker) {
                            r.push(b)?;
                        }
                    }
                }
                ("external", name) if !name.is_empty() => {
                    r.push(catalog.instantiate(name, worker).map_err(RegistryError::Adapter)?)?
                }
                ("config", path) if !path.is_empty() => {
                    let path = Path::new(path);
                    let load_err = |message: String| RegistryError::Config {
                        path: path.display().to_string(),
                        message,
                    };
                    let text = std::fs::read_to_string(path).map_err(|e| load_err(e.to_string()))?;
                    let config = LenienceConfig::from_json_str(&text).map_err(|e| load_err(e.to_string()))?;
                    let id = path
                        .file_stem()
                        .and_then(|s| s.to_str())
                        .ok_or_else(|| load_err("file name is not valid text".into()))?;
                    r.push_config(id, config)?;
                }
                _ => return Err(RegistryError::Selector(selector.to_owned())),
            }
        }
        if r.is_empty() {
            return Err(RegistryError::Empty);
        }
        Ok(r)
    }

    pub fn get(&self, id: &str) -> Option<&Arc<dyn Backend>> {
        self.backends.iter().find(|b| b.descriptor().id == id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<dyn Backend>> {
        self.backends.iter()
    }

    pub fn descriptors(&self) -> Vec<BackendDescriptor> {
        self.backends.iter().map(|b| b.descriptor().clone()).collect()
    }

    pub fn ids(&self) -> Vec<String> {
        self.backends.iter().map(|b| b.descriptor().id.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.backends.len()
    }

    pub fn is_empty(&self) -> bool {
        self.backends.is_empty()
    }

    /// Checks that ids are unique across `self` and `other`, then appends.
    pub fn extend(&mut self, other: BackendRegistry) -> Result<(), RegistryError> {
        for b in other.backends {
            self.push(b)?;
        }
        Ok(())
    }

    #[cfg(test)]
    fn unique_ids(&self) -> bool {
        let ids: std::collections::HashSet<_> = self.backends.iter().map(|b| &b.descriptor().id).collect();
        ids.len() == self.backends.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selectors() {
        let catalog = AdapterCatalog::standard();
        let all = BackendRegistry::from_selectors(&["builtin:*"], 42, &catalog, None).unwrap();
        assert_eq!(all.ids(), BackendRegistry::builtin().ids());
        assert!(all.unique_ids());

        let some =
            BackendRegistry::from_selectors(&["builtin:strict", "builtin:raw-numbers", "external:serde_json"], 1, &catalog, None)
                .unwrap();
        assert_eq!(some.ids(), ["strict", "raw-numbers", "serde_json"]);

        for bad in [&["strict"][..], &["builtin:"], &["builtin:nope"], &["builtin:strict", "builtin:strict"], &[]] {
            assert!(BackendRegistry::from_selectors(bad, 1, &catalog, None).is_err(), "{bad:?}");
        }
        assert!(BackendRegistry::from_selectors(&["external:serde_json-unbounded"], 1, &catalog, None).is_err());
        let ext = BackendRegistry::from_selectors(&["external:*"], 1, &catalog, None).unwrap();
        assert_eq!(ext.ids(), ["serde_json"]);
    }

    #[test]
    fn config_selector_reads_a_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("my-variant.json");
        std::fs::write(&path, LenienceConfig::permissive().to_json_string()).unwrap();
        let sel = format!("config:{}", path.display());
        let r = BackendRegistry::from_selectors(&[sel.as_str()], 0, &AdapterCatalog::standard(), None).unwrap();
        assert_eq!(r.ids(), ["my-variant"]);
        std::fs::write(&path, "{}").unwrap();
        assert!(BackendRegistry::from_selectors(&[sel.as_str()], 0, &AdapterCatalog::standard(), None).is_err());
    }
}
