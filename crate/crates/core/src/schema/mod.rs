//! Relational backend: schema synthesis, index selection, loading and
//! mapping translation.

pub mod ddl;
pub mod index;
pub mod load;
pub mod translate;

use serde::Serialize;

pub use ddl::{sanitize, synthesize_schema, ColumnDef, DdlScript, DdlStatement, SchemaOptions, TableDef};
pub use index::{decide_indexes, selectivity, IndexDecision, DEFAULT_TAU};
pub use load::{load, LoadEntry, LoadManifest};
pub use translate::translate_mappings;

/// Everything the query engine needs after loading.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RelationalArtifacts {
    pub ddl: DdlScript,
    pub indexes: Vec<IndexDecision>,
    pub manifest: LoadManifest,
    pub mapping: crate::model::MappingDocument,
}
