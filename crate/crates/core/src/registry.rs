//! Name-keyed registries of interchangeable strategies.
//!
//! Training schedules and sequence aligners are both looked up by the name
//! given in a run config; each registry owns a factory per name.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

type Factory<T, C> = Box<dyn Fn(&C) -> Result<Box<T>> + Send + Sync>;

/// Maps a strategy name to a factory that builds it from a config `C`.
pub struct Registry<T: ?Sized, C> {
    kind: &'static str,
    factories: BTreeMap<String, Factory<T, C>>,
}

impl<T: ?Sized, C> Registry<T, C> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            factories: BTreeMap::new(),
        }
    }

    /// Registers `factory` under `name`, replacing any previous entry.
    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&C) -> Result<Box<T>> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    /// Registered names in sorted order.
    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn build(&self, name: &str, config: &C) -> Result<Box<T>> {
        match self.factories.get(name) {
            Some(factory) => factory(config),
            None => Err(Error::UnknownName {
                kind: self.kind,
                name: name.to_string(),
                available: self.names().join(", "),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    trait Greeter {
        fn greet(&self) -> String;
    }

    struct Hello(String);

    impl Greeter for Hello {
        fn greet(&self) -> String {
            format!("hello {}", self.0)
        }
    }

    #[test]
    fn builds_registered_and_rejects_unknown() {
        let mut reg: Registry<dyn Greeter, String> = Registry::new("greeter");
        reg.register("hello", |who: &String| Ok(Box::new(Hello(who.clone()))));
        assert!(reg.contains("hello"));
        let g = reg.build("hello", &"world".to_string()).unwrap();
        assert_eq!(g.greet(), "hello world");
        let err = reg.build("nope", &String::new()).err().unwrap();
        assert!(err.to_string().contains("available: hello"));
    }
}
