//! Domain types shared by every stage of the pipeline.
//!
//! Nothing in here performs I/O. Values are built by the parsers in
//! [`crate::frontends`] (or directly in tests) and are treated as immutable
//! snapshots: every transformation returns new values.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
pub const XSD: &str = "http://www.w3.org/2001/XMLSchema#";

/// A CSV cell. `None` is an absent value, which only arises through null
/// substitution; the reader never produces it.
pub type Cell = Option<String>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TabularSource {
    pub path: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl TabularSource {
    pub fn new(path: impl Into<String>, columns: Vec<String>, rows: Vec<Vec<Cell>>) -> Result<Self> {
        let path = path.into();
        let mut seen = BTreeSet::new();
        for c in &columns {
            if !seen.insert(c.as_str()) {
                return Err(Error::DuplicateColumn {
                    path,
                    column: c.clone(),
                });
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(Error::RaggedRow {
                    path,
                    row: i + 1,
                    found: row.len(),
                    expected: columns.len(),
                });
            }
        }
        Ok(TabularSource { path, columns, rows })
    }

    /// Builds a source from string literals; handy in tests and fixtures.
    pub fn from_strs(path: &str, columns: &[&str], rows: &[&[&str]]) -> Result<Self> {
        TabularSource::new(
            path,
            columns.iter().map(|c| c.to_string()).collect(),
            rows.iter()
                .map(|r| r.iter().map(|c| Some(c.to_string())).collect())
                .collect(),
        )
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn stem(&self) -> &str {
        path_stem(&self.path)
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    /// Values of one column, in row order.
    pub fn column_values(&self, name: &str) -> Option<impl Iterator<Item = &Cell>> {
        let idx = self.column_index(name)?;
        Some(self.rows.iter().map(move |r| &r[idx]))
    }
}

/// File name without directories or extension: `gtfs/routes.csv` -> `routes`.
pub fn path_stem(path: &str) -> &str {
    let file = path.rsplit(['/', '\\']).next().unwrap_or(path);
    match file.rfind('.') {
        Some(0) | None => file,
        Some(dot) => &file[..dot],
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TemplatePart {
    Text(String),
    Column(String),
}

/// A string template such as `http://ex.org/stop/$(stop_id)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Template {
    pub parts: Vec<TemplatePart>,
}

impl Template {
    pub fn parse(text: &str) -> Result<Self> {
        let mut parts = Vec::new();
        let mut rest = text;
        while let Some(start) = rest.find("$(") {
            if start > 0 {
                parts.push(TemplatePart::Text(rest[..start].to_string()));
            }
            let after = &rest[start + 2..];
            let end = after.find(')').ok_or_else(|| Error::Syntax {
                line: 0,
                column: 0,
                message: format!("unterminated column reference in template `{text}`"),
            })?;
            let col = &after[..end];
            if col.is_empty() {
                return Err(Error::Syntax {
                    line: 0,
                    column: 0,
                    message: format!("empty column reference in template `{text}`"),
                });
            }
            parts.push(TemplatePart::Column(col.to_string()));
            rest = &after[end + 1..];
        }
        if !rest.is_empty() {
            parts.push(TemplatePart::Text(rest.to_string()));
        }
        Ok(Template { parts })
    }

    pub fn constant(text: &str) -> Self {
        Template {
            parts: vec![TemplatePart::Text(text.to_string())],
        }
    }

    pub fn column(name: &str) -> Self {
        Template {
            parts: vec![TemplatePart::Column(name.to_string())],
        }
    }

    pub fn columns(&self) -> impl Iterator<Item = &str> {
        self.parts.iter().filter_map(|p| match p {
            TemplatePart::Column(c) => Some(c.as_str()),
            TemplatePart::Text(_) => None,
        })
    }

    pub fn is_constant(&self) -> bool {
        self.columns().next().is_none()
    }

    /// Renders the template; `None` if any referenced column is absent.
    pub fn render<'a>(&self, mut lookup: impl FnMut(&str) -> Option<&'a str>) -> Option<String> {
        let mut out = String::new();
        for part in &self.parts {
            match part {
                TemplatePart::Text(t) => out.push_str(t),
                TemplatePart::Column(c) => out.push_str(lookup(c)?),
            }
        }
        Some(out)
    }

    /// Two templates produce equal strings exactly when their column values
    /// agree position by position.
    pub fn same_shape(&self, other: &Template) -> bool {
        self.parts.len() == other.parts.len()
            && self.parts.iter().zip(&other.parts).all(|(a, b)| match (a, b) {
                (TemplatePart::Text(x), TemplatePart::Text(y)) => x == y,
                (TemplatePart::Column(_), TemplatePart::Column(_)) => true,
                _ => false,
            })
            && !self.has_adjacent_columns()
    }

    fn has_adjacent_columns(&self) -> bool {
        self.parts
            .windows(2)
            .any(|w| matches!(w, [TemplatePart::Column(_), TemplatePart::Column(_)]))
    }

    /// Inverts the template against a concrete string, returning the column
    /// values that would render it. Ambiguous inversions (two adjacent
    /// column parts) are not attempted.
    pub fn invert(&self, value: &str) -> Option<Vec<(String, String)>> {
        if self.has_adjacent_columns() {
            return None;
        }
        let mut out = Vec::new();
        let mut rest = value;
        let mut iter = self.parts.iter().peekable();
        while let Some(part) = iter.next() {
            match part {
                TemplatePart::Text(t) => rest = rest.strip_prefix(t.as_str())?,
                TemplatePart::Column(c) => {
                    let end = match iter.peek() {
                        Some(TemplatePart::Text(next)) => rest.find(next.as_str())?,
                        _ => rest.len(),
                    };
                    out.push((c.clone(), rest[..end].to_string()));
                    rest = &rest[end..];
                }
            }
        }
        rest.is_empty().then_some(out)
    }

    pub fn rename_columns(&mut self, mut f: impl FnMut(&str) -> String) {
        for part in &mut self.parts {
            if let TemplatePart::Column(c) = part {
                *c = f(c);
            }
        }
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for part in &self.parts {
            match part {
                TemplatePart::Text(t) => f.write_str(t)?,
                TemplatePart::Column(c) => write!(f, "$({c})")?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TermKind {
    Iri,
    Literal,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JoinCondition {
    pub child: String,
    pub parent: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FunctionArg {
    Column(String),
    Constant(String),
    Call(FunctionCall),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FunctionCall {
    pub function_name: String,
    pub args: Vec<FunctionArg>,
}

impl FunctionCall {
    pub fn columns(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_columns(&mut out);
        out
    }

    fn collect_columns<'a>(&'a self, out: &mut Vec<&'a str>) {
        for arg in &self.args {
            match arg {
                FunctionArg::Column(c) => out.push(c),
                FunctionArg::Constant(_) => {}
                FunctionArg::Call(inner) => inner.collect_columns(out),
            }
        }
    }

    pub fn rename_columns(&mut self, f: &mut impl FnMut(&str) -> String) {
        for arg in &mut self.args {
            match arg {
                FunctionArg::Column(c) => *c = f(c),
                FunctionArg::Constant(_) => {}
                FunctionArg::Call(inner) => inner.rename_columns(f),
            }
        }
    }
}

/// The object side of a predicate-object rule.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectMap {
    /// Literal taken straight from a column.
    Reference(String),
    Template {
        template: Template,
        kind: TermKind,
    },
    Function(FunctionCall),
    /// Object produced by joining with a parent triples map. The object is
    /// the parent's subject, or a literal from one of the parent's columns
    /// when `project` is set.
    Join {
        parent: String,
        condition: JoinCondition,
        project: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PredicateObjectMap {
    pub predicate: String,
    pub object: ObjectMap,
    pub datatype: Option<String>,
}

impl PredicateObjectMap {
    /// Columns of the owning map's source referenced by this rule.
    pub fn local_columns(&self) -> Vec<&str> {
        match &self.object {
            ObjectMap::Reference(c) => vec![c.as_str()],
            ObjectMap::Template { template, .. } => template.columns().collect(),
            ObjectMap::Function(call) => call.columns(),
            ObjectMap::Join { condition, .. } => vec![condition.child.as_str()],
        }
    }

    pub fn join(&self) -> Option<(&str, &JoinCondition)> {
        match &self.object {
            ObjectMap::Join { parent, condition, .. } => Some((parent.as_str(), condition)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriplesMap {
    pub id: String,
    pub source_path: String,
    pub subject: Template,
    pub class_iri: Option<String>,
    pub poms: Vec<PredicateObjectMap>,
}

impl TriplesMap {
    /// Predicates this map can produce; `rdf:type` counts when a class is set.
    pub fn predicates(&self) -> BTreeSet<&str> {
        let mut set: BTreeSet<&str> = self.poms.iter().map(|p| p.predicate.as_str()).collect();
        if self.class_iri.is_some() {
            set.insert(RDF_TYPE);
        }
        set
    }

    /// Columns of this map's own source it reads, in first-use order.
    pub fn referenced_columns(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let mut push = |c: &str| {
            if !out.iter().any(|x| x == c) {
                out.push(c.to_string());
            }
        };
        self.subject.columns().for_each(&mut push);
        for pom in &self.poms {
            pom.local_columns().into_iter().for_each(&mut push);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MappingDocument {
    pub triples_maps: Vec<TriplesMap>,
}

impl MappingDocument {
    pub fn get(&self, id: &str) -> Option<&TriplesMap> {
        self.triples_maps.iter().find(|t| t.id == id)
    }

    pub fn get_mut(&mut self, id: &str) -> Option<&mut TriplesMap> {
        self.triples_maps.iter_mut().find(|t| t.id == id)
    }

    /// Distinct logical source paths in first-use order.
    pub fn source_paths(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for tm in &self.triples_maps {
            if !out.contains(&tm.source_path) {
                out.push(tm.source_path.clone());
            }
        }
        out
    }

    /// Columns of `path` referenced by any map, including parent-side join
    /// columns of maps living on that path.
    pub fn referenced_columns(&self, path: &str) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let mut push = |c: &str| {
            if !out.iter().any(|x| x == c) {
                out.push(c.to_string());
            }
        };
        for tm in self.triples_maps.iter().filter(|t| t.source_path == path) {
            tm.referenced_columns().iter().for_each(|c| push(c));
        }
        for tm in &self.triples_maps {
            for pom in &tm.poms {
                if let ObjectMap::Join {
                    parent,
                    condition,
                    project,
                } = &pom.object
                {
                    if self.get(parent).is_some_and(|p| p.source_path == path) {
                        push(&condition.parent);
                        if let Some(col) = project {
                            push(col);
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Datatype {
    #[default]
    String,
    Integer,
    Decimal,
    Double,
    Date,
    Time,
    Datetime,
    Boolean,
}

impl Datatype {
    pub const ALL: [Datatype; 8] = [
        Datatype::String,
        Datatype::Integer,
        Datatype::Decimal,
        Datatype::Double,
        Datatype::Date,
        Datatype::Time,
        Datatype::Datetime,
        Datatype::Boolean,
    ];

    /// Parses a CSVW `base` name. Derived XSD integer types fold into
    /// `integer`; unknown names return `None`.
    pub fn from_base(name: &str) -> Option<Self> {
        let local = name.rsplit(['#', ':']).next().unwrap_or(name);
        Some(match local {
            "string" | "normalizedString" | "token" | "anyURI" => Datatype::String,
            "integer" | "int" | "long" | "short" | "byte" | "nonNegativeInteger" | "positiveInteger"
            | "negativeInteger" | "nonPositiveInteger" | "unsignedInt" | "unsignedLong" | "unsignedShort"
            | "unsignedByte" => Datatype::Integer,
            "decimal" => Datatype::Decimal,
            "double" | "float" | "number" => Datatype::Double,
            "date" => Datatype::Date,
            "time" => Datatype::Time,
            "datetime" | "dateTime" => Datatype::Datetime,
            "boolean" => Datatype::Boolean,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Datatype::String => "string",
            Datatype::Integer => "integer",
            Datatype::Decimal => "decimal",
            Datatype::Double => "double",
            Datatype::Date => "date",
            Datatype::Time => "time",
            Datatype::Datetime => "datetime",
            Datatype::Boolean => "boolean",
        }
    }

    pub fn xsd_iri(self) -> String {
        let local = match self {
            Datatype::Datetime => "dateTime",
            other => other.name(),
        };
        format!("{XSD}{local}")
    }

    pub fn from_xsd(iri: &str) -> Option<Self> {
        iri.strip_prefix(XSD).and_then(Datatype::from_base)
    }

    pub fn sql_type(self) -> &'static str {
        match self {
            Datatype::String => "VARCHAR",
            Datatype::Integer => "INTEGER",
            Datatype::Decimal => "DECIMAL",
            Datatype::Double => "DOUBLE PRECISION",
            Datatype::Date => "DATE",
            Datatype::Time => "TIME",
            Datatype::Datetime => "TIMESTAMP",
            Datatype::Boolean => "BOOLEAN",
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, Datatype::Integer | Datatype::Decimal | Datatype::Double)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMetadata {
    pub name: String,
    pub datatype: Datatype,
    /// True when the document declared a datatype explicitly.
    pub datatype_declared: bool,
    pub format: Option<String>,
    pub required: bool,
    pub default: Option<String>,
    /// Explicit `null` markers; empty when the key is absent.
    pub null_markers: Vec<String>,
    pub separator: Option<char>,
    pub minimum: Option<f64>,
    pub maximum: Option<f64>,
}

impl ColumnMetadata {
    pub fn new(name: impl Into<String>) -> Self {
        ColumnMetadata {
            name: name.into(),
            datatype: Datatype::String,
            datatype_declared: false,
            format: None,
            required: false,
            default: None,
            null_markers: Vec::new(),
            separator: None,
            minimum: None,
            maximum: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForeignKey {
    pub columns: Vec<String>,
    pub referenced_table: String,
    pub referenced_columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMetadata {
    pub url: String,
    pub columns: Vec<ColumnMetadata>,
    pub primary_key: Option<Vec<String>>,
    pub foreign_keys: Vec<ForeignKey>,
    pub row_titles: Option<Vec<String>>,
    pub delimiter: Option<char>,
}

impl TableMetadata {
    pub fn new(url: impl Into<String>) -> Self {
        TableMetadata {
            url: url.into(),
            columns: Vec::new(),
            primary_key: None,
            foreign_keys: Vec::new(),
            row_titles: None,
            delimiter: None,
        }
    }

    pub fn column(&self, name: &str) -> Option<&ColumnMetadata> {
        self.columns.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetadataDocument {
    pub tables: Vec<TableMetadata>,
}

impl MetadataDocument {
    pub fn table(&self, url: &str) -> Option<&TableMetadata> {
        self.tables.iter().find(|t| t.url == url)
    }

    pub fn column(&self, url: &str, column: &str) -> Option<&ColumnMetadata> {
        self.table(url).and_then(|t| t.column(column))
    }
}

/// Tabular sources, ontology vocabulary, mappings and metadata.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VirtualTabularDataset {
    pub sources: Vec<TabularSource>,
    pub ontology_terms: BTreeSet<String>,
    pub mapping: MappingDocument,
    pub metadata: MetadataDocument,
}

impl VirtualTabularDataset {
    pub fn source(&self, path: &str) -> Option<&TabularSource> {
        self.sources.iter().find(|s| s.path == path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_roundtrip_and_render() {
        let t = Template::parse("http://ex.org/stop/$(stop_id)-$(seq)").unwrap();
        assert_eq!(t.columns().collect::<Vec<_>>(), vec!["stop_id", "seq"]);
        assert_eq!(t.to_string(), "http://ex.org/stop/$(stop_id)-$(seq)");
        let rendered = t.render(|c| match c {
            "stop_id" => Some("S1"),
            "seq" => Some("3"),
            _ => None,
        });
        assert_eq!(rendered.as_deref(), Some("http://ex.org/stop/S1-3"));
        assert_eq!(t.render(|_| None), None);
    }

    #[test]
    fn template_inversion() {
        let t = Template::parse("http://ex.org/stop/$(a)-$(b)").unwrap();
        assert_eq!(
            t.invert("http://ex.org/stop/x-y"),
            Some(vec![("a".into(), "x".into()), ("b".into(), "y".into())])
        );
        assert_eq!(t.invert("http://other/x-y"), None);
        let adjacent = Template::parse("$(a)$(b)").unwrap();
        assert_eq!(adjacent.invert("xy"), None);
    }

    #[test]
    fn unterminated_template_is_an_error() {
        assert!(Template::parse("http://x/$(id").is_err());
        assert!(Template::parse("http://x/$()").is_err());
    }

    #[test]
    fn ragged_rows_rejected() {
        let err = TabularSource::new("a.csv", vec!["x".into(), "y".into()], vec![vec![Some("1".into())]]).unwrap_err();
        assert!(matches!(err, Error::RaggedRow { row: 1, .. }));
    }

    #[test]
    fn stems() {
        assert_eq!(path_stem("gtfs/routes.csv"), "routes");
        assert_eq!(path_stem("routes"), "routes");
        assert_eq!(path_stem(".hidden"), ".hidden");
    }

    #[test]
    fn datatype_names() {
        assert_eq!(Datatype::from_base("int"), Some(Datatype::Integer));
        assert_eq!(Datatype::from_base("dateTime"), Some(Datatype::Datetime));
        assert_eq!(Datatype::from_base("gYear"), None);
        assert_eq!(
            Datatype::from_xsd("http://www.w3.org/2001/XMLSchema#decimal"),
            Some(Datatype::Decimal)
        );
        for dt in Datatype::ALL {
            assert_eq!(Datatype::from_xsd(&dt.xsd_iri()), Some(dt));
        }
    }
}
