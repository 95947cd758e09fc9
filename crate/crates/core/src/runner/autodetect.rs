//! Manifest-driven extension loading.
//!
//! When `FLAKEGUARD_AUTODETECT=true`, the extensions listed in an
//! `extensions.manifest` file (one name per line) are instantiated from an
//! [`ExtensionCatalog`] and installed without touching test code.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use super::{Extension, RunnerError};

pub const AUTODETECT_ENV: &str = "FLAKEGUARD_AUTODETECT";
pub const MANIFEST_FILE: &str = "extensions.manifest";

type Factory = Box<dyn Fn() -> Arc<dyn Extension> + Send + Sync>;

/// Named extension factories available for autodetection.
#[derive(Default)]
pub struct ExtensionCatalog {
    factories: BTreeMap<String, Factory>,
}

impl ExtensionCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register<F>(&mut self, name: &str, factory: F) -> Result<(), RunnerError>
    where
        F: Fn() -> Arc<dyn Extension> + Send + Sync + 'static,
    {
        if self.factories.contains_key(name) {
            return Err(RunnerError::DuplicateExtension(name.to_string()));
        }
        self.factories.insert(name.to_string(), Box::new(factory));
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    /// Instantiates the named extensions, keeping their order.
    pub fn instantiate<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<Arc<dyn Extension>>, RunnerError> {
        names
            .iter()
            .map(|n| {
                let n = n.as_ref();
                self.factories
                    .get(n)
                    .map(|f| f())
                    .ok_or_else(|| RunnerError::UnknownExtension(n.to_string()))
            })
            .collect()
    }
}

/// Extension names from manifest text; blank lines and `#` comments are ignored.
pub fn parse_manifest(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn load_manifest(path: &Path) -> Result<Vec<String>, RunnerError> {
    let text = fs::read_to_string(path).map_err(|source| RunnerError::Manifest {
        path: path.display().to_string(),
        source,
    })?;
    Ok(parse_manifest(&text))
}

pub fn autodetect_enabled() -> bool {
    std::env::var(AUTODETECT_ENV).is_ok_and(|v| v.trim().eq_ignore_ascii_case("true"))
}

/// Loads `dir/extensions.manifest` when `enabled`; returns no extensions otherwise.
pub fn autodetect_extensions(
    enabled: bool,
    dir: &Path,
    catalog: &ExtensionCatalog,
) -> Result<Vec<Arc<dyn Extension>>, RunnerError> {
    if !enabled {
        return Ok(Vec::new());
    }
    let names = load_manifest(&dir.join(MANIFEST_FILE))?;
    catalog.instantiate(&names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TestOutcome;
    use crate::runner::{ExecutionContext, ExtensionError};

    struct Named(&'static str);

    impl Extension for Named {
        fn name(&self) -> &str {
            self.0
        }

        fn intercept(&self, raw: &TestOutcome, _: &ExecutionContext) -> Result<TestOutcome, ExtensionError> {
            Ok(raw.clone())
        }
    }

    fn catalog() -> ExtensionCatalog {
        let mut c = ExtensionCatalog::new();
        c.register("alpha", || Arc::new(Named("alpha"))).unwrap();
        c.register("beta", || Arc::new(Named("beta"))).unwrap();
        c
    }

    #[test]
    fn manifest_parsing() {
        let names = parse_manifest("# installed\nbeta\n\n  alpha  # trailing\n");
        assert_eq!(names, ["beta", "alpha"]);
    }

    #[test]
    fn loads_in_manifest_order() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(MANIFEST_FILE), "beta\nalpha\n").unwrap();
        let exts = autodetect_extensions(true, dir.path(), &catalog()).unwrap();
        let names: Vec<_> = exts.iter().map(|e| e.name().to_string()).collect();
        assert_eq!(names, ["beta", "alpha"]);
    }

    #[test]
    fn disabled_autodetect_ignores_manifest() {
        let dir = tempfile::tempdir().unwrap();
        assert!(autodetect_extensions(false, dir.path(), &catalog()).unwrap().is_empty());
    }

    #[test]
    fn errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            autodetect_extensions(true, dir.path(), &catalog()),
            Err(RunnerError::Manifest { .. })
        ));
        fs::write(dir.path().join(MANIFEST_FILE), "gamma\n").unwrap();
        assert!(matches!(
            autodetect_extensions(true, dir.path(), &catalog()),
            Err(RunnerError::UnknownExtension(n)) if n == "gamma"
        ));
        let mut c = catalog();
        assert!(matches!(
            c.register("alpha", || Arc::new(Named("alpha"))),
            Err(RunnerError::DuplicateExtension(_))
        ));
    }
}
