//! Pluggable query engines. The built-in "reference" engine translates to
//! SQL and runs it on the loaded database; others can be registered.

use std::collections::BTreeMap;
use std::sync::Arc;

use rusqlite::Connection;

use crate::error::{Error, Result};
use crate::frontends::Query;
use crate::schema::RelationalArtifacts;

use super::execute::execute;
use super::results::ResultSet;
use super::sql::translate_query;

/// What an engine gets to work with after loading.
pub struct EngineInput<'a> {
    pub artifacts: &'a RelationalArtifacts,
    pub conn: &'a Connection,
    pub db_url: &'a str,
}

pub trait EngineAdapter: Send + Sync {
    fn accepts(&self, input: &EngineInput<'_>) -> bool;

    fn translate_and_run(&self, q: &Query, input: &EngineInput<'_>) -> Result<ResultSet>;
}

/// Translate with the built-in translator and execute on the connection.
pub struct ReferenceAdapter;

impl EngineAdapter for ReferenceAdapter {
    fn accepts(&self, _: &EngineInput<'_>) -> bool {
        true
    }

    fn translate_and_run(&self, q: &Query, input: &EngineInput<'_>) -> Result<ResultSet> {
        let sql = translate_query(q, &input.artifacts.mapping, &input.artifacts.ddl)?;
        execute(input.conn, &sql)
    }
}

pub const REFERENCE: &str = "reference";

#[derive(Clone)]
pub struct AdapterRegistry {
    adapters: BTreeMap<String, Arc<dyn EngineAdapter>>,
}

impl Default for AdapterRegistry {
    fn default() -> Self {
        let mut r = AdapterRegistry {
            adapters: BTreeMap::new(),
        };
        r.register(REFERENCE, Arc::new(ReferenceAdapter));
        r
    }
}

impl std::fmt::Debug for AdapterRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.adapters.keys()).finish()
    }
}

impl AdapterRegistry {
    pub fn register(&mut self, name: &str, adapter: Arc<dyn EngineAdapter>) {
        self.adapters.insert(name.to_string(), adapter);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.adapters.keys().map(String::as_str)
    }

    /// Runs `q` on the named engine. Errors from the built-in engine keep
    /// their kind; errors from registered engines are wrapped.
    pub fn run_external(&self, name: &str, q: &Query, input: &EngineInput<'_>) -> Result<ResultSet> {
        let adapter = self
            .adapters
            .get(name)
            .ok_or_else(|| Error::Adapter("unregistered".into()))?;
        if !adapter.accepts(input) {
            return Err(Error::Adapter(format!("{name}: artifacts not accepted")));
        }
        match adapter.translate_and_run(q, input) {
            Err(e) if name != REFERENCE => Err(Error::Adapter(format!("{name}: {e}"))),
            r => r,
        }
    }
}
