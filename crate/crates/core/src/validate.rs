//! Structural checks over a parsed dataset.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::functions::FunctionRegistry;
use crate::model::{ObjectMap, VirtualTabularDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub location: String,
    pub message: String,
}

impl Diagnostic {
    pub fn error(location: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            location: location.into(),
            message: message.into(),
        }
    }

    pub fn warning(location: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            location: location.into(),
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{sev}: {}: {}", self.location, self.message)
    }
}

/// Checks the dataset invariants. Only the source headers matter, so the
/// sources may be header-only scans. An empty result means the dataset is
/// well formed.
pub fn validate_vtd(vtd: &VirtualTabularDataset, registry: &FunctionRegistry) -> Vec<Diagnostic> {
    let mut out = Vec::new();

    let mut source_count: BTreeMap<&str, usize> = BTreeMap::new();
    for s in &vtd.sources {
        *source_count.entry(s.path.as_str()).or_default() += 1;
    }
    for (path, n) in &source_count {
        if *n > 1 {
            out.push(Diagnostic::error(*path, format!("source listed {n} times")));
        }
    }
    let columns_of = |path: &str| -> Option<BTreeSet<&str>> {
        vtd.source(path).map(|s| s.columns.iter().map(String::as_str).collect())
    };

    let mut ids = BTreeSet::new();
    for tm in &vtd.mapping.triples_maps {
        let loc = format!("mapping `{}`", tm.id);
        if !ids.insert(tm.id.as_str()) {
            out.push(Diagnostic::error(&loc, "duplicate triples map id"));
        }
        let Some(cols) = columns_of(&tm.source_path) else {
            out.push(Diagnostic::error(
                &loc,
                format!("logical source `{}` not found", tm.source_path),
            ));
            continue;
        };
        for c in tm.subject.columns() {
            if !cols.contains(c) {
                out.push(Diagnostic::error(
                    &loc,
                    format!("subject references unknown column `{c}` of {}", tm.source_path),
                ));
            }
        }
        for pom in &tm.poms {
            let ploc = format!("{loc} predicate <{}>", pom.predicate);
            for c in pom.local_columns() {
                if !cols.contains(c) {
                    out.push(Diagnostic::error(
                        &ploc,
                        format!("unknown column `{c}` of {}", tm.source_path),
                    ));
                }
            }
            match &pom.object {
                ObjectMap::Function(call) => {
                    if let Some(name) = registry.first_unknown(call) {
                        out.push(Diagnostic::error(&ploc, format!("unknown function `{name}`")));
                    }
                }
                ObjectMap::Join {
                    parent,
                    condition,
                    project,
                } => match vtd.mapping.get(parent) {
                    None => out.push(Diagnostic::error(
                        &ploc,
                        format!("join parent `{parent}` is not a triples map"),
                    )),
                    Some(p) => {
                        if let Some(pcols) = columns_of(&p.source_path) {
                            for c in std::iter::once(&condition.parent).chain(project) {
                                if !pcols.contains(c.as_str()) {
                                    out.push(Diagnostic::error(
                                        &ploc,
                                        format!("unknown parent column `{c}` of {}", p.source_path),
                                    ));
                                }
                            }
                        }
                    }
                },
                _ => {}
            }
        }
    }

    let mut tables = BTreeSet::new();
    for t in &vtd.metadata.tables {
        let loc = format!("metadata `{}`", t.url);
        if !tables.insert(t.url.as_str()) {
            out.push(Diagnostic::error(&loc, "more than one table entry for this path"));
        }
        let known: BTreeSet<&str> = match columns_of(&t.url) {
            Some(cols) => cols,
            None => {
                out.push(Diagnostic::error(&loc, "table url does not name a source"));
                continue;
            }
        };
        for c in &t.columns {
            if !known.contains(c.name.as_str()) {
                out.push(Diagnostic::error(&loc, format!("unknown column `{}`", c.name)));
            }
            if c.separator.is_some() && c.datatype != crate::model::Datatype::String {
                out.push(Diagnostic::error(
                    &loc,
                    format!("column `{}` has a separator but is not a string", c.name),
                ));
            }
            if let (Some(lo), Some(hi)) = (c.minimum, c.maximum) {
                if lo > hi {
                    out.push(Diagnostic::error(
                        &loc,
                        format!("column `{}` has minimum {lo} above maximum {hi}", c.name),
                    ));
                }
            }
        }
        for c in t.primary_key.iter().flatten() {
            if !known.contains(c.as_str()) {
                out.push(Diagnostic::error(&loc, format!("unknown column `{c}` in primary key")));
            }
        }
        for fk in &t.foreign_keys {
            for c in &fk.columns {
                if !known.contains(c.as_str()) {
                    out.push(Diagnostic::error(&loc, format!("unknown column `{c}` in foreign key")));
                }
            }
            match columns_of(&fk.referenced_table) {
                None => out.push(Diagnostic::error(
                    &loc,
                    format!("foreign key references unknown table `{}`", fk.referenced_table),
                )),
                Some(rcols) => {
                    for c in &fk.referenced_columns {
                        if !rcols.contains(c.as_str()) {
                            out.push(Diagnostic::error(
                                &loc,
                                format!("unknown column `{c}` of referenced table `{}`", fk.referenced_table),
                            ));
                        }
                    }
                }
            }
            if fk.columns.len() != fk.referenced_columns.len() {
                out.push(Diagnostic::error(
                    &loc,
                    "foreign key column counts differ between the two sides",
                ));
            }
        }
    }
    out
}
