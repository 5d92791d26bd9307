//! Parsers for the textual inputs.

pub mod csv;
pub mod mapping;
pub mod metadata;
pub mod sparql;
pub mod ssg;

pub use self::csv::{read_source, read_sources, scan_header, write_source, HeaderScan};
pub use mapping::{parse_mapping, parse_mapping_with, serialize_mapping};
pub use metadata::{parse_metadata, serialize_metadata};
pub use sparql::{parse_query, BinOp, Expr, OptionalGroup, OrderKey, Projection, Query, TriplePattern, VarOrTerm};
pub use ssg::{build_ssgs, SsgSet, StarGroup};
