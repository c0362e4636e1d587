//! Name-keyed registries for interchangeable strategies.
//!
//! Each strategy family (amplitude backends, learning-rate schedules, depth
//! models, fitness evaluators) exposes a function returning a populated
//! [`Registry`] of factories. Callers resolve a factory by the name found in
//! a config file or on the command line.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub struct Registry<F> {
    kind: &'static str,
    entries: BTreeMap<&'static str, F>,
}

impl<F> Registry<F> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    /// Registers `factory` under `name`, replacing any previous entry.
    pub fn register(&mut self, name: &'static str, factory: F) -> &mut Self {
        self.entries.insert(name, factory);
        self
    }

    pub fn with(mut self, name: &'static str, factory: F) -> Self {
        self.register(name, factory);
        self
    }

    pub fn get(&self, name: &str) -> Result<&F> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::UnknownStrategy {
                kind: self.kind,
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}
