//! Bulk loading of prepared sources into the engine.

use std::collections::{HashMap, HashSet};

use rusqlite::{params_from_iter, Connection};
use serde::Serialize;

use crate::constraints::{ConstraintKind, ConstraintSet};
use crate::error::{Error, Result};
use crate::model::TabularSource;
use crate::pipeline::Policy;
use crate::values::{self, format_f64, SqlValue};

use super::ddl::{quote, DdlScript, TableDef};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoadEntry {
    pub table: String,
    pub source: String,
    pub rows_loaded: usize,
    pub rows_skipped: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadManifest {
    pub entries: Vec<LoadEntry>,
}

impl LoadManifest {
    pub fn rows_loaded(&self) -> usize {
        self.entries.iter().map(|e| e.rows_loaded).sum()
    }
}

impl rusqlite::ToSql for SqlValue {
    fn to_sql(&self) -> rusqlite::Result<rusqlite::types::ToSqlOutput<'_>> {
        use rusqlite::types::{ToSqlOutput, Value};
        Ok(ToSqlOutput::Owned(match self {
            SqlValue::Null => Value::Null,
            SqlValue::Text(s) => Value::Text(s.clone()),
            SqlValue::Integer(i) => Value::Integer(*i),
            SqlValue::Real(f) => Value::Real(*f),
        }))
    }
}

fn key_part(v: &SqlValue) -> Option<String> {
    match v {
        SqlValue::Null => None,
        SqlValue::Text(s) => Some(s.clone()),
        SqlValue::Integer(i) => Some(i.to_string()),
        SqlValue::Real(f) => Some(format_f64(*f)),
    }
}

fn key(row: &[SqlValue], idx: &[usize]) -> Option<Vec<String>> {
    idx.iter().map(|&i| key_part(&row[i])).collect()
}

fn violation(policy: Policy, table: &str, row: usize, constraint: String) -> Result<()> {
    match policy {
        Policy::Error => Err(Error::ConstraintViolation {
            table: table.to_string(),
            row,
            constraint,
        }),
        Policy::Warn => {
            log::warn!("{table} row {row}: {constraint}");
            Ok(())
        }
    }
}

/// Converts and checks one source. Returns typed rows (with their 1-based
/// source row numbers) and the number of skipped rows.
/// A converted row with its 1-based source row number.
type NumberedRow = (usize, Vec<SqlValue>);

fn convert(
    t: &TableDef,
    s: &TabularSource,
    constraints: &ConstraintSet,
    policy: Policy,
) -> Result<(Vec<NumberedRow>, usize)> {
    let src_idx: Vec<usize> = t
        .columns
        .iter()
        .map(|c| {
            s.column_index(&c.source_column)
                .ok_or_else(|| Error::Invalid(format!("column `{}` missing from {}", c.source_column, s.path)))
        })
        .collect::<Result<_>>()?;
    let ranges: Vec<(Option<f64>, Option<f64>)> = t
        .columns
        .iter()
        .map(|c| {
            constraints
                .for_column(&s.path, &c.source_column)
                .find_map(|k| match k.kind {
                    ConstraintKind::Range { minimum, maximum } => Some((minimum, maximum)),
                    _ => None,
                })
                .unwrap_or((None, None))
        })
        .collect();
    let pk_idx: Vec<usize> = t
        .primary_key
        .iter()
        .flatten()
        .filter_map(|p| t.columns.iter().position(|c| &c.name == p))
        .collect();

    let mut rows = Vec::with_capacity(s.rows.len());
    let mut skipped = 0;
    let mut keys = HashSet::new();
    'rows: for (r, raw) in s.rows.iter().enumerate() {
        let rn = r + 1;
        let mut out = Vec::with_capacity(t.columns.len());
        for (ci, c) in t.columns.iter().enumerate() {
            let cell = raw[src_idx[ci]].as_deref().filter(|v| !v.is_empty());
            let mut v = match cell {
                None => SqlValue::Null,
                Some(v) => match values::to_sql(v, c.datatype) {
                    Ok(x) => x,
                    Err(message) => {
                        if policy == Policy::Error {
                            return Err(Error::FormatViolation {
                                path: s.path.clone(),
                                row: rn,
                                column: c.source_column.clone(),
                                value: v.to_string(),
                                message,
                            });
                        }
                        log::warn!("{} row {rn} {}: {message}", s.path, c.source_column);
                        SqlValue::Null
                    }
                },
            };
            let (lo, hi) = ranges[ci];
            if lo.is_some() || hi.is_some() {
                let n = match &v {
                    SqlValue::Integer(i) => Some(*i as f64),
                    SqlValue::Real(f) => Some(*f),
                    SqlValue::Text(t) => values::numeric(t),
                    SqlValue::Null => None,
                };
                if let Some(n) = n {
                    if lo.is_some_and(|lo| n < lo) || hi.is_some_and(|hi| n > hi) {
                        if policy == Policy::Error {
                            return Err(Error::FormatViolation {
                                path: s.path.clone(),
                                row: rn,
                                column: c.source_column.clone(),
                                value: cell.unwrap_or_default().to_string(),
                                message: format!("outside range [{lo:?}, {hi:?}]"),
                            });
                        }
                        log::warn!("{} row {rn} {}: value out of range", s.path, c.source_column);
                        v = SqlValue::Null;
                    }
                }
            }
            if c.not_null && v == SqlValue::Null {
                violation(policy, &t.name, rn, format!("NOT NULL on {}", c.name))?;
                skipped += 1;
                continue 'rows;
            }
            out.push(v);
        }
        if !pk_idx.is_empty() {
            if let Some(k) = key(&out, &pk_idx) {
                if !keys.insert(k.clone()) {
                    violation(policy, &t.name, rn, format!("duplicate primary key ({})", k.join(", ")))?;
                    skipped += 1;
                    continue;
                }
            }
        }
        rows.push((rn, out));
    }
    Ok((rows, skipped))
}

/// Creates the tables, loads every source in one transaction, then builds
/// indexes. Foreign keys are checked here rather than by the engine.
pub fn load(
    conn: &mut Connection,
    ddl: &DdlScript,
    sources: &[TabularSource],
    constraints: &ConstraintSet,
    policy: Policy,
) -> Result<LoadManifest> {
    // Keys are checked here; warn mode must be able to keep orphans.
    conn.execute_batch("PRAGMA foreign_keys = OFF")
        .map_err(|e| Error::engine(e, "PRAGMA foreign_keys = OFF"))?;
    let tx = conn.transaction().map_err(|e| Error::engine(e, "BEGIN"))?;
    let mut manifest = LoadManifest::default();
    let mut pk_sets: HashMap<String, HashSet<Vec<String>>> = HashMap::new();
    for t in ddl.tables() {
        let sql = t.to_sql();
        tx.execute_batch(&sql).map_err(|e| Error::engine(e, &sql))?;
        let s = sources
            .iter()
            .find(|s| s.path == t.source_path)
            .ok_or_else(|| Error::UnmappedSource(t.source_path.clone()))?;
        let (mut rows, mut skipped) = convert(t, s, constraints, policy)?;

        let pk_idx: Vec<usize> = t
            .primary_key
            .iter()
            .flatten()
            .filter_map(|p| t.columns.iter().position(|c| &c.name == p))
            .collect();
        if !pk_idx.is_empty() {
            let set = rows.iter().filter_map(|(_, r)| key(r, &pk_idx)).collect();
            pk_sets.insert(t.name.clone(), set);
        }
        for fk in &t.foreign_keys {
            let idx: Vec<usize> = fk
                .columns
                .iter()
                .filter_map(|c| t.columns.iter().position(|x| &x.name == c))
                .collect();
            let parent = pk_sets.get(&fk.table);
            // Warn mode keeps orphan rows; the engine does not enforce keys.
            for (rn, r) in &rows {
                let Some(k) = key(r, &idx) else { continue };
                if !parent.is_some_and(|p| p.contains(&k)) {
                    violation(
                        policy,
                        &t.name,
                        *rn,
                        format!("foreign key ({}) not found in {}", k.join(", "), fk.table),
                    )?;
                }
            }
        }

        let cols: Vec<String> = t.columns.iter().map(|c| quote(&c.name)).collect();
        let marks: Vec<String> = (1..=cols.len()).map(|i| format!("?{i}")).collect();
        let insert = format!(
            "INSERT INTO {} ({}) VALUES ({})",
            quote(&t.name),
            cols.join(", "),
            marks.join(", ")
        );
        {
            let mut stmt = tx.prepare(&insert).map_err(|e| Error::engine(e, &insert))?;
            for (rn, r) in rows.drain(..) {
                if let Err(e) = stmt.execute(params_from_iter(r.iter())) {
                    if policy == Policy::Error {
                        return Err(Error::engine(e, &insert));
                    }
                    log::warn!("{} row {rn}: {e}", t.name);
                    skipped += 1;
                }
            }
        }
        let loaded = s.row_count() - skipped;
        manifest.entries.push(LoadEntry {
            table: t.name.clone(),
            source: t.source_path.clone(),
            rows_loaded: loaded,
            rows_skipped: skipped,
        });
    }
    for i in ddl.indexes() {
        let sql = i.to_sql();
        tx.execute_batch(&sql).map_err(|e| Error::engine(e, &sql))?;
    }
    tx.commit().map_err(|e| Error::engine(e, "COMMIT"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{Constraint, Target};
    use crate::model::Datatype;
    use crate::schema::ddl::{synthesize_schema, SchemaOptions};

    fn setup(policy: Policy) -> Result<(Connection, LoadManifest)> {
        let routes = TabularSource::from_strs("routes.csv", &["id", "n"], &[&["R1", "1"], &["R2", ""], &["R1", "3"]])?;
        let trips = TabularSource::from_strs("trips.csv", &["t", "route"], &[&["T1", "R1"], &["T2", "R9"]])?;
        let cs = ConstraintSet::new(vec![
            Constraint {
                kind: ConstraintKind::PrimaryKey,
                target: Target::column("routes.csv", "id"),
            },
            Constraint {
                kind: ConstraintKind::Datatype {
                    datatype: Datatype::Integer,
                    declared: true,
                },
                target: Target::column("routes.csv", "n"),
            },
            Constraint {
                kind: ConstraintKind::ForeignKey {
                    referenced_table: "routes.csv".into(),
                    referenced_columns: vec!["id".into()],
                },
                target: Target::column("trips.csv", "route"),
            },
        ]);
        let sources = vec![trips, routes];
        let ddl = synthesize_schema(&sources, &cs, SchemaOptions::default())?;
        let mut conn = Connection::open_in_memory().unwrap();
        let m = load(&mut conn, &ddl, &sources, &cs, policy)?;
        Ok((conn, m))
    }

    #[test]
    fn strict_mode_reports_duplicate_key() {
        assert!(matches!(
            setup(Policy::Error),
            Err(Error::ConstraintViolation { row: 3, .. })
        ));
    }

    #[test]
    fn warn_mode_skips_and_keeps_orphans() {
        let (conn, m) = setup(Policy::Warn).unwrap();
        assert_eq!(m.entries[0].table, "routes");
        assert_eq!(m.entries[0].rows_loaded, 2);
        assert_eq!(m.entries[0].rows_skipped, 1);
        assert_eq!(m.entries[1].rows_loaded, 2);
        let n: Option<i64> = conn
            .query_row("SELECT \"n\" FROM \"routes\" WHERE \"id\" = 'R1'", [], |r| r.get(0))
            .unwrap();
        assert_eq!(n, Some(1));
        let null: Option<i64> = conn
            .query_row("SELECT \"n\" FROM \"routes\" WHERE \"id\" = 'R2'", [], |r| r.get(0))
            .unwrap();
        assert_eq!(null, None);
    }
}
