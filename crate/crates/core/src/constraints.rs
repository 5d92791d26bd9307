//! Constraint extraction from mappings and metadata.
//!
//! Every constraint names the stage that applies it through
//! [`ConstraintKind::phase`]; a [`ConstraintSet`] is kept sorted by phase.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Datatype, FunctionCall, MappingDocument, MetadataDocument, ObjectMap, TriplesMap};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Target {
    pub source: String,
    pub columns: Vec<String>,
}

impl Target {
    pub fn new(source: impl Into<String>, columns: Vec<String>) -> Self {
        Target {
            source: source.into(),
            columns,
        }
    }

    pub fn column(source: impl Into<String>, column: impl Into<String>) -> Self {
        Target::new(source, vec![column.into()])
    }

    pub fn is_column(&self, source: &str, column: &str) -> bool {
        self.source == source && self.columns.len() == 1 && self.columns[0] == column
    }
}

/// Cell rewrites applied by the substitution step, in the order listed.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Substitution {
    NullToAbsent { markers: Vec<String> },
    AbsentToDefault { value: String },
    Reformat { datatype: Datatype, pattern: String },
}

impl Substitution {
    pub fn order(&self) -> u8 {
        match self {
            Substitution::NullToAbsent { .. } => 0,
            Substitution::AbsentToDefault { .. } => 1,
            Substitution::Reformat { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum ConstraintKind {
    PrimaryKey,
    ForeignKey {
        referenced_table: String,
        referenced_columns: Vec<String>,
    },
    NotNull,
    Datatype {
        datatype: Datatype,
        /// False when inferred from a mapping datatype hint.
        declared: bool,
    },
    Format {
        datatype: Datatype,
        pattern: String,
    },
    Range {
        minimum: Option<f64>,
        maximum: Option<f64>,
    },
    Default {
        value: String,
    },
    NullMarkers {
        markers: Vec<String>,
    },
    Separator2NF {
        separator: char,
    },
    /// Two maps share a source and overlap only on join columns: the
    /// `moved` map gets its own source, `kept` stays on the original.
    MultiEntity3NF {
        moved: String,
        kept: String,
    },
    Substitution(Substitution),
    CreateColumn {
        triples_map: String,
        pom_index: usize,
        column: String,
        call: FunctionCall,
        datatype: Option<Datatype>,
    },
    IndexCandidate,
}

impl ConstraintKind {
    /// Application phase: 0 split, 1 cut, 2 substitution, 3 create,
    /// 4 schema, 5 indexes.
    pub fn phase(&self) -> u8 {
        match self {
            ConstraintKind::Separator2NF { .. } => 0,
            ConstraintKind::MultiEntity3NF { .. } => 1,
            ConstraintKind::Substitution(_) => 2,
            ConstraintKind::CreateColumn { .. } => 3,
            ConstraintKind::IndexCandidate => 5,
            _ => 4,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ConstraintKind::PrimaryKey => "PrimaryKey",
            ConstraintKind::ForeignKey { .. } => "ForeignKey",
            ConstraintKind::NotNull => "NotNull",
            ConstraintKind::Datatype { .. } => "Datatype",
            ConstraintKind::Format { .. } => "Format",
            ConstraintKind::Range { .. } => "Range",
            ConstraintKind::Default { .. } => "Default",
            ConstraintKind::NullMarkers { .. } => "NullMarkers",
            ConstraintKind::Separator2NF { .. } => "Separator2NF",
            ConstraintKind::MultiEntity3NF { .. } => "MultiEntity3NF",
            ConstraintKind::Substitution(_) => "Substitution",
            ConstraintKind::CreateColumn { .. } => "CreateColumn",
            ConstraintKind::IndexCandidate => "IndexCandidate",
        }
    }

    /// Column-level constraints follow their column when a table is split
    /// or cut.
    pub fn is_column_level(&self) -> bool {
        matches!(
            self,
            ConstraintKind::NotNull
                | ConstraintKind::Datatype { .. }
                | ConstraintKind::Format { .. }
                | ConstraintKind::Range { .. }
                | ConstraintKind::Default { .. }
                | ConstraintKind::NullMarkers { .. }
                | ConstraintKind::Substitution(_)
                | ConstraintKind::IndexCandidate
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constraint {
    #[serde(flatten)]
    pub kind: ConstraintKind,
    pub target: Target,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ConstraintSet {
    pub constraints: Vec<Constraint>,
}

impl ConstraintSet {
    pub fn new(mut constraints: Vec<Constraint>) -> Self {
        constraints.sort_by_key(|c| c.kind.phase());
        ConstraintSet { constraints }
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Constraint> {
        self.constraints.iter()
    }

    pub fn push(&mut self, c: Constraint) {
        let phase = c.kind.phase();
        let at = self
            .constraints
            .iter()
            .position(|x| x.kind.phase() > phase)
            .unwrap_or(self.constraints.len());
        self.constraints.insert(at, c);
    }

    pub fn for_source<'a>(&'a self, source: &'a str) -> impl Iterator<Item = &'a Constraint> + 'a {
        self.constraints.iter().filter(move |c| c.target.source == source)
    }

    pub fn for_column<'a>(&'a self, source: &'a str, column: &'a str) -> impl Iterator<Item = &'a Constraint> + 'a {
        self.constraints
            .iter()
            .filter(move |c| c.target.is_column(source, column))
    }

    pub fn primary_key(&self, source: &str) -> Option<&[String]> {
        self.constraints
            .iter()
            .find(|c| c.target.source == source && c.kind == ConstraintKind::PrimaryKey)
            .map(|c| c.target.columns.as_slice())
    }

    /// Declared datatype first, then one inferred from a mapping hint.
    pub fn datatype(&self, source: &str, column: &str) -> Option<Datatype> {
        let mut inferred = None;
        for c in self.for_column(source, column) {
            if let ConstraintKind::Datatype { datatype, declared } = c.kind {
                if declared {
                    return Some(datatype);
                }
                inferred.get_or_insert(datatype);
            }
        }
        inferred
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("constraints always serialize")
    }
}

/// Columns a map needs from its own source, including columns read on its
/// behalf by joins that name it as parent.
pub fn columns_needed_by(tm: &TriplesMap, m: &MappingDocument) -> BTreeSet<String> {
    let mut cols: BTreeSet<String> = tm.referenced_columns().into_iter().collect();
    for other in &m.triples_maps {
        for pom in &other.poms {
            if let ObjectMap::Join {
                parent,
                condition,
                project,
            } = &pom.object
            {
                if parent == &tm.id {
                    cols.insert(condition.parent.clone());
                    if let Some(p) = project {
                        cols.insert(p.clone());
                    }
                }
            }
        }
    }
    cols
}

/// Derives the constraint set from the mapping and metadata documents.
pub fn extract_constraints(m: &MappingDocument, md: &MetadataDocument) -> Result<ConstraintSet> {
    let mut out = Vec::new();
    let mut seen_tables = BTreeSet::new();

    for t in &md.tables {
        if !seen_tables.insert(t.url.as_str()) {
            return Err(Error::ConflictingConstraint(format!(
                "more than one metadata entry (and primary key) for {}",
                t.url
            )));
        }
        if let Some(pk) = &t.primary_key {
            out.push(Constraint {
                kind: ConstraintKind::PrimaryKey,
                target: Target::new(&t.url, pk.clone()),
            });
        }
        for fk in &t.foreign_keys {
            if fk.columns.len() != fk.referenced_columns.len() {
                return Err(Error::ConflictingConstraint(format!(
                    "foreign key of {} has {} columns but references {}",
                    t.url,
                    fk.columns.len(),
                    fk.referenced_columns.len()
                )));
            }
            if let Some(rt) = md.table(&fk.referenced_table) {
                let declared: BTreeSet<&str> = rt
                    .columns
                    .iter()
                    .map(|c| c.name.as_str())
                    .chain(rt.row_titles.iter().flatten().map(String::as_str))
                    .collect();
                if !declared.is_empty() {
                    if let Some(c) = fk.referenced_columns.iter().find(|c| !declared.contains(c.as_str())) {
                        return Err(Error::ConflictingConstraint(format!(
                            "foreign key of {} references column `{c}` absent from {}",
                            t.url, fk.referenced_table
                        )));
                    }
                }
            }
            out.push(Constraint {
                kind: ConstraintKind::ForeignKey {
                    referenced_table: fk.referenced_table.clone(),
                    referenced_columns: fk.referenced_columns.clone(),
                },
                target: Target::new(&t.url, fk.columns.clone()),
            });
        }
        for c in &t.columns {
            let target = || Target::column(&t.url, &c.name);
            if c.datatype_declared {
                out.push(Constraint {
                    kind: ConstraintKind::Datatype {
                        datatype: c.datatype,
                        declared: true,
                    },
                    target: target(),
                });
            }
            if let Some(f) = &c.format {
                if c.datatype != Datatype::String {
                    out.push(Constraint {
                        kind: ConstraintKind::Format {
                            datatype: c.datatype,
                            pattern: f.clone(),
                        },
                        target: target(),
                    });
                    out.push(Constraint {
                        kind: ConstraintKind::Substitution(Substitution::Reformat {
                            datatype: c.datatype,
                            pattern: f.clone(),
                        }),
                        target: target(),
                    });
                }
            }
            if c.required {
                out.push(Constraint {
                    kind: ConstraintKind::NotNull,
                    target: target(),
                });
            }
            if let Some(d) = &c.default {
                out.push(Constraint {
                    kind: ConstraintKind::Default { value: d.clone() },
                    target: target(),
                });
                out.push(Constraint {
                    kind: ConstraintKind::Substitution(Substitution::AbsentToDefault { value: d.clone() }),
                    target: target(),
                });
            }
            if !c.null_markers.is_empty() {
                out.push(Constraint {
                    kind: ConstraintKind::NullMarkers {
                        markers: c.null_markers.clone(),
                    },
                    target: target(),
                });
                out.push(Constraint {
                    kind: ConstraintKind::Substitution(Substitution::NullToAbsent {
                        markers: c.null_markers.clone(),
                    }),
                    target: target(),
                });
            }
            if c.minimum.is_some() || c.maximum.is_some() {
                out.push(Constraint {
                    kind: ConstraintKind::Range {
                        minimum: c.minimum,
                        maximum: c.maximum,
                    },
                    target: target(),
                });
            }
            if let Some(sep) = c.separator {
                out.push(Constraint {
                    kind: ConstraintKind::Separator2NF { separator: sep },
                    target: target(),
                });
            }
        }
    }

    // Datatypes inferred from mapping hints where metadata is silent.
    let mut inferred: BTreeSet<(String, String)> = BTreeSet::new();
    for tm in &m.triples_maps {
        for pom in &tm.poms {
            let (ObjectMap::Reference(col), Some(hint)) = (&pom.object, &pom.datatype) else {
                continue;
            };
            let Some(dt) = Datatype::from_xsd(hint) else {
                continue;
            };
            let declared = md.column(&tm.source_path, col).is_some_and(|c| c.datatype_declared);
            if declared || !inferred.insert((tm.source_path.clone(), col.clone())) {
                continue;
            }
            out.push(Constraint {
                kind: ConstraintKind::Datatype {
                    datatype: dt,
                    declared: false,
                },
                target: Target::column(&tm.source_path, col),
            });
        }
    }

    check_separator_usage(m, md)?;
    out.extend(multi_entity(m));

    let mut k = 0;
    for tm in &m.triples_maps {
        for (i, pom) in tm.poms.iter().enumerate() {
            if let ObjectMap::Function(call) = &pom.object {
                k += 1;
                out.push(Constraint {
                    kind: ConstraintKind::CreateColumn {
                        triples_map: tm.id.clone(),
                        pom_index: i,
                        column: format!("_fn_{k}"),
                        call: call.clone(),
                        datatype: pom.datatype.as_deref().and_then(Datatype::from_xsd),
                    },
                    target: Target::new(
                        &tm.source_path,
                        call.columns().into_iter().map(str::to_string).collect(),
                    ),
                });
            }
        }
    }

    let mut candidates = BTreeSet::new();
    for tm in &m.triples_maps {
        for pom in &tm.poms {
            let Some((parent, cond)) = pom.join() else {
                continue;
            };
            let Some(p) = m.get(parent) else {
                return Err(Error::DanglingParentMap {
                    triples_map: tm.id.clone(),
                    parent: parent.to_string(),
                });
            };
            for target in [
                Target::column(&tm.source_path, &cond.child),
                Target::column(&p.source_path, &cond.parent),
            ] {
                if candidates.insert(target.clone()) {
                    out.push(Constraint {
                        kind: ConstraintKind::IndexCandidate,
                        target,
                    });
                }
            }
        }
    }

    Ok(ConstraintSet::new(out))
}

/// Multi-valued columns may only feed plain column references.
fn check_separator_usage(m: &MappingDocument, md: &MetadataDocument) -> Result<()> {
    let is_multi = |path: &str, col: &str| md.column(path, col).is_some_and(|c| c.separator.is_some());
    for tm in &m.triples_maps {
        let bad = |col: &str, role: &str| {
            Err(Error::ConflictingConstraint(format!(
                "multi-valued column `{col}` of {} is used in {role} of `{}`; only plain references are supported",
                tm.source_path, tm.id
            )))
        };
        for c in tm.subject.columns() {
            if is_multi(&tm.source_path, c) {
                return bad(c, "the subject");
            }
        }
        for pom in &tm.poms {
            match &pom.object {
                ObjectMap::Reference(_) => {}
                ObjectMap::Template { template, .. } => {
                    for c in template.columns() {
                        if is_multi(&tm.source_path, c) {
                            return bad(c, "a template");
                        }
                    }
                }
                ObjectMap::Function(call) => {
                    for c in call.columns() {
                        if is_multi(&tm.source_path, c) {
                            return bad(c, "a function");
                        }
                    }
                }
                ObjectMap::Join { parent, condition, .. } => {
                    if is_multi(&tm.source_path, &condition.child) {
                        return bad(&condition.child, "a join condition");
                    }
                    if let Some(p) = m.get(parent) {
                        if is_multi(&p.source_path, &condition.parent) {
                            return bad(&condition.parent, "a join condition");
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

fn multi_entity(m: &MappingDocument) -> Vec<Constraint> {
    let mut out = Vec::new();
    let mut moved_already = BTreeSet::new();
    let tms = &m.triples_maps;
    for (i, a) in tms.iter().enumerate() {
        for b in &tms[i + 1..] {
            if a.source_path != b.source_path {
                continue;
            }
            let a_cols: BTreeSet<String> = a.referenced_columns().into_iter().collect();
            let b_cols: BTreeSet<String> = b.referenced_columns().into_iter().collect();
            let shared: BTreeSet<String> = a_cols.intersection(&b_cols).cloned().collect();
            if shared.is_empty() || (a_cols == shared && b_cols == shared) {
                continue;
            }
            // Join references between the two maps, and which one is the parent.
            let mut refs = BTreeSet::new();
            let mut parent_of: BTreeMap<&str, &str> = BTreeMap::new();
            for (child, parent) in [(a, b), (b, a)] {
                for pom in &child.poms {
                    if let Some((p, cond)) = pom.join() {
                        if p == parent.id {
                            refs.insert(cond.child.clone());
                            refs.insert(cond.parent.clone());
                            parent_of.entry(parent.id.as_str()).or_insert(child.id.as_str());
                        }
                    }
                }
            }
            if !shared.is_subset(&refs) {
                continue;
            }
            let (moved, kept) = if parent_of.contains_key(b.id.as_str()) {
                (b, a)
            } else {
                (a, b)
            };
            if !moved_already.insert(moved.id.clone()) {
                continue;
            }
            out.push(Constraint {
                kind: ConstraintKind::MultiEntity3NF {
                    moved: moved.id.clone(),
                    kept: kept.id.clone(),
                },
                target: Target::new(&a.source_path, shared.into_iter().collect()),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontends::{parse_mapping, parse_metadata};

    const ROUTES: &str = r#"
prefixes:
  gtfs: http://vocab.gtfs.org/terms#
mappings:
  routes:
    sources: [[routes.csv~csv]]
    s: http://ex.org/route/$(route_id)
    po:
      - [a, gtfs:Route]
      - [gtfs:shortName, $(route_short_name)]
      - p: gtfs:routeType
        o:
          mapping: route_type
          condition:
            function: equal
            parameters: [[str1, $(route_type)], [str2, $(route_type)]]
  route_type:
    sources: [[routes.csv~csv]]
    s: http://ex.org/route_type/$(route_type)
    po:
      - [a, gtfs:RouteType]
      - p: http://www.w3.org/2000/01/rdf-schema#label
        o:
          function: lookup_table
          parameters: [[k, $(route_type)], [t, "0=Tram;1=Subway"]]
"#;

    #[test]
    fn primary_key_from_metadata() {
        let (md, _) =
            parse_metadata(r#"{"tables":[{"url":"stops.csv","tableSchema":{"primaryKey":"stop_id"}}]}"#).unwrap();
        let c = extract_constraints(&MappingDocument::default(), &md).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.constraints[0].kind, ConstraintKind::PrimaryKey);
        assert_eq!(c.primary_key("stops.csv"), Some(&["stop_id".to_string()][..]));
    }

    #[test]
    fn empty_inputs_give_empty_set() {
        let m = parse_mapping(
            "mappings:\n  m:\n    sources: [[a.csv~csv]]\n    s: http://x/$(id)\n    po:\n      - [http://x/p, $(v)]\n",
        )
        .unwrap();
        assert!(extract_constraints(&m, &MetadataDocument::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn route_type_is_a_separate_entity() {
        let m = parse_mapping(ROUTES).unwrap();
        let c = extract_constraints(&m, &MetadataDocument::default()).unwrap();
        let multi: Vec<_> = c
            .iter()
            .filter(|c| matches!(c.kind, ConstraintKind::MultiEntity3NF { .. }))
            .collect();
        assert_eq!(multi.len(), 1);
        assert_eq!(
            multi[0].kind,
            ConstraintKind::MultiEntity3NF {
                moved: "route_type".into(),
                kept: "routes".into()
            }
        );
        assert_eq!(multi[0].target.columns, vec!["route_type"]);
        let creates = c
            .iter()
            .filter(|c| matches!(c.kind, ConstraintKind::CreateColumn { .. }))
            .count();
        assert_eq!(creates, 1);
        let phases: Vec<u8> = c.iter().map(|c| c.kind.phase()).collect();
        assert!(phases.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn fk_to_undeclared_column_conflicts() {
        let (md, _) = parse_metadata(
            r#"{"tables":[
              {"url":"a.csv","tableSchema":{"columns":[{"name":"r"}],"foreignKeys":[{"columnReference":"r","reference":{"resource":"b.csv","columnReference":"nope"}}]}},
              {"url":"b.csv","tableSchema":{"columns":[{"name":"id"}]}}
            ]}"#,
        )
        .unwrap();
        assert!(matches!(
            extract_constraints(&MappingDocument::default(), &md),
            Err(Error::ConflictingConstraint(_))
        ));
    }

    #[test]
    fn separator_in_subject_conflicts() {
        let m = parse_mapping(
            "mappings:\n  m:\n    sources: [[a.csv~csv]]\n    s: http://x/$(id)\n    po:\n      - [http://x/p, $(v)]\n",
        )
        .unwrap();
        let (md, _) =
            parse_metadata(r#"{"tables":[{"url":"a.csv","tableSchema":{"columns":[{"name":"id","separator":";"}]}}]}"#)
                .unwrap();
        assert!(matches!(
            extract_constraints(&m, &md),
            Err(Error::ConflictingConstraint(_))
        ));
    }

    #[test]
    fn hints_fill_in_missing_datatypes() {
        let m = parse_mapping(
            "mappings:\n  m:\n    sources: [[a.csv~csv]]\n    s: http://x/$(id)\n    po:\n      - [http://x/p, $(v), xsd:integer]\n",
        )
        .unwrap();
        let c = extract_constraints(&m, &MetadataDocument::default()).unwrap();
        assert_eq!(c.datatype("a.csv", "v"), Some(Datatype::Integer));
    }
}
