//! Normalization: splitting multi-valued columns and cutting tables that
//! hold more than one entity.

use std::collections::hash_map::{Entry, HashMap};
use std::collections::BTreeSet;

use crate::constraints::{Constraint, ConstraintKind, Substitution, Target};
use crate::error::{Error, Result};
use crate::model::{path_stem, Cell, JoinCondition, ObjectMap, TabularSource, Template, TriplesMap};

use super::selection::columns_only_needed_by;
use super::Workspace;

pub const SURROGATE: &str = "surrogate_id";

/// Path of a file derived from `path`, in the same directory.
pub fn sibling_path(path: &str, file_stem: &str) -> String {
    let dir = match path.rfind(['/', '\\']) {
        Some(i) => &path[..=i],
        None => "",
    };
    format!("{dir}{file_stem}.csv")
}

/// Splits a multi-valued column. The parent keeps every row with the cell
/// replaced by the 1-based ordinal of the row's first occurrence; the child
/// holds one row per token of each distinct row.
///
/// Whole-cell null markers, the empty string and a default are resolved
/// before tokenizing. Empty tokens are dropped.
pub fn split(
    source: &TabularSource,
    column: &str,
    separator: char,
    markers: &[String],
    default: Option<&str>,
) -> Result<(TabularSource, TabularSource)> {
    let idx = source
        .column_index(column)
        .ok_or_else(|| Error::Invalid(format!("split column `{column}` is not in {}", source.path)))?;
    let child_path = sibling_path(&source.path, &format!("{}__{column}", source.stem()));
    let mut parent = source.clone();
    let mut child_rows = Vec::new();
    // Identical rows share an id so duplicate removal still sees them as equal.
    let mut ids: HashMap<Vec<Cell>, String> = HashMap::new();
    for (i, row) in parent.rows.iter_mut().enumerate() {
        let id = match ids.entry(row.clone()) {
            Entry::Occupied(e) => {
                row[idx] = Some(e.get().clone());
                continue;
            }
            Entry::Vacant(e) => e.insert((i + 1).to_string()).clone(),
        };
        let cell = row[idx].take().filter(|v| !v.is_empty() && !markers.contains(v));
        if let Some(v) = cell.as_deref().or(default) {
            for token in v.split(separator).filter(|t| !t.is_empty()) {
                child_rows.push(vec![Some(id.clone()), Some(token.to_string())]);
            }
        }
        row[idx] = Some(id);
    }
    let child = TabularSource::new(child_path, vec![SURROGATE.to_string(), column.to_string()], child_rows)?;
    Ok((parent, child))
}

/// Moves `columns` to a new source, all rows kept; duplicates are removed
/// later. Returns (reduced original, new source).
pub fn cut(
    source: &TabularSource,
    moved_columns: &BTreeSet<String>,
    dropped_columns: &BTreeSet<String>,
    new_path: &str,
) -> Result<(TabularSource, TabularSource)> {
    let keep = |names: &dyn Fn(&str) -> bool| -> Vec<usize> {
        (0..source.columns.len())
            .filter(|&i| names(&source.columns[i]))
            .collect()
    };
    let build = |path: &str, idx: &[usize]| {
        TabularSource::new(
            path,
            idx.iter().map(|&i| source.columns[i].clone()).collect(),
            source
                .rows
                .iter()
                .map(|r| idx.iter().map(|&i| r[i].clone()).collect())
                .collect(),
        )
    };
    let moved_idx = keep(&|c| moved_columns.contains(c));
    let kept_idx = keep(&|c| !dropped_columns.contains(c));
    Ok((build(&source.path, &kept_idx)?, build(new_path, &moved_idx)?))
}

fn snake_case(name: &str) -> String {
    let mut out = String::new();
    let mut prev_lower = false;
    for ch in name.chars() {
        if ch.is_uppercase() {
            if prev_lower {
                out.push('_');
            }
            out.extend(ch.to_lowercase());
            prev_lower = false;
        } else if ch.is_alphanumeric() {
            out.push(ch);
            prev_lower = true;
        } else {
            if !out.ends_with('_') && !out.is_empty() {
                out.push('_');
            }
            prev_lower = false;
        }
    }
    out.trim_end_matches('_').to_string()
}

fn local_name(iri: &str) -> &str {
    iri.rsplit(['#', '/', ':']).next().unwrap_or(iri)
}

impl Workspace {
    fn source_index(&self, path: &str) -> Result<usize> {
        self.sources
            .iter()
            .position(|s| s.path == path)
            .ok_or_else(|| Error::Invalid(format!("no source {path} to normalize")))
    }

    fn path_taken(&self, path: &str) -> bool {
        self.sources.iter().any(|s| s.path == path)
    }

    /// Applies a `Separator2NF` constraint.
    pub fn apply_split(&mut self, c: &Constraint) -> Result<()> {
        let ConstraintKind::Separator2NF { separator } = c.kind else {
            return Ok(());
        };
        let path = c.target.source.clone();
        let col = c.target.columns[0].clone();
        let i = self.source_index(&path)?;
        let mut markers = Vec::new();
        let mut default = None;
        for k in self.constraints.for_column(&path, &col) {
            match &k.kind {
                ConstraintKind::NullMarkers { markers: m } => markers.extend(m.iter().cloned()),
                ConstraintKind::Default { value } => default = Some(value.clone()),
                _ => {}
            }
        }
        let (parent, child) = split(&self.sources[i], &col, separator, &markers, default.as_deref())?;
        if self.path_taken(&child.path) {
            return Err(Error::NameCollision(child.path));
        }
        let child_path = child.path.clone();
        self.sources[i] = parent;
        self.sources.insert(i + 1, child);

        let tm_id = format!("split__{}__{col}", path_stem(&path));
        if self.mapping.get(&tm_id).is_some() {
            return Err(Error::NameCollision(tm_id));
        }
        for tm in self.mapping.triples_maps.iter_mut().filter(|t| t.source_path == path) {
            for pom in &mut tm.poms {
                if pom.object == ObjectMap::Reference(col.clone()) {
                    pom.object = ObjectMap::Join {
                        parent: tm_id.clone(),
                        condition: JoinCondition {
                            child: col.clone(),
                            parent: SURROGATE.to_string(),
                        },
                        project: Some(col.clone()),
                    };
                }
            }
        }
        self.mapping.triples_maps.push(TriplesMap {
            id: tm_id,
            source_path: child_path.clone(),
            subject: Template::parse(&format!("urn:tabular-obda:{}:{col}:$({SURROGATE})", path_stem(&path)))?,
            class_iri: None,
            poms: Vec::new(),
        });

        // Whole-cell defaults are spent; the rest follows the values.
        let mut rest = Vec::new();
        for mut k in std::mem::take(&mut self.constraints.constraints) {
            if k.target.is_column(&path, &col) {
                match &k.kind {
                    ConstraintKind::Default { .. }
                    | ConstraintKind::Substitution(Substitution::AbsentToDefault { .. }) => continue,
                    ConstraintKind::PrimaryKey | ConstraintKind::ForeignKey { .. } => {
                        log::warn!("dropping key on multi-valued column {col} of {path}");
                        continue;
                    }
                    ConstraintKind::Separator2NF { .. } => continue,
                    kind if kind.is_column_level() => {
                        k.target = Target::column(&child_path, &col);
                    }
                    _ => {}
                }
            }
            rest.push(k);
        }
        self.constraints.constraints = rest;
        for target in [Target::column(&child_path, SURROGATE), Target::column(&path, &col)] {
            self.constraints.push(Constraint {
                kind: ConstraintKind::IndexCandidate,
                target,
            });
        }
        self.record(&child_path, &[&path], format!("split {col} on `{separator}`"));
        self.record(&path, &[], format!("split {col} out to {child_path}"));
        Ok(())
    }

    /// Applies a `MultiEntity3NF` constraint.
    pub fn apply_cut(&mut self, c: &Constraint) -> Result<()> {
        let ConstraintKind::MultiEntity3NF { moved, .. } = &c.kind else {
            return Ok(());
        };
        let tm = self
            .mapping
            .get(moved)
            .ok_or_else(|| Error::Invalid(format!("unknown triples map {moved}")))?
            .clone();
        let path = tm.source_path.clone();
        let i = self.source_index(&path)?;
        let moved_cols = crate::constraints::columns_needed_by(&tm, &self.mapping);
        let dropped = columns_only_needed_by(&tm, &self.mapping);

        let mut new_path = tm
            .class_iri
            .as_deref()
            .map(|c| sibling_path(&path, &snake_case(local_name(c))))
            .filter(|p| !p.ends_with("/.csv") && p != ".csv");
        if new_path.as_ref().is_none_or(|p| self.path_taken(p)) {
            new_path = Some(sibling_path(&path, &format!("{}__{}", path_stem(&path), tm.id)));
        }
        let new_path = new_path.expect("set above");
        if self.path_taken(&new_path) {
            return Err(Error::NameCollision(new_path));
        }

        let (reduced, created) = cut(&self.sources[i], &moved_cols, &dropped, &new_path)?;
        self.sources[i] = reduced;
        self.sources.insert(i + 1, created);
        self.mapping.get_mut(moved).expect("checked above").source_path = new_path.clone();

        let mut rest = Vec::new();
        for k in std::mem::take(&mut self.constraints.constraints) {
            let on_original = k.target.source == path;
            match &k.kind {
                ConstraintKind::CreateColumn { triples_map, .. } if triples_map == moved => {
                    rest.push(Constraint {
                        target: Target::new(&new_path, k.target.columns.clone()),
                        ..k
                    });
                }
                kind if on_original && kind.is_column_level() => {
                    let col = &k.target.columns[0];
                    if moved_cols.contains(col) {
                        rest.push(Constraint {
                            kind: k.kind.clone(),
                            target: Target::column(&new_path, col),
                        });
                    }
                    if !dropped.contains(col) {
                        rest.push(k);
                    }
                }
                ConstraintKind::PrimaryKey | ConstraintKind::ForeignKey { .. }
                    if on_original && k.target.columns.iter().any(|c| dropped.contains(c)) =>
                {
                    log::warn!("dropping key on {path}: its columns moved to {new_path}");
                }
                _ => rest.push(k),
            }
        }
        self.constraints.constraints = rest;
        self.record(&new_path, &[&path], format!("cut out entity of {moved}"));
        self.record(&path, &[], format!("moved {moved} to {new_path}"));
        Ok(())
    }
}
