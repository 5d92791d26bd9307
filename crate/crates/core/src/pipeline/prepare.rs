//! Preparation: duplicate removal, cell substitution and function columns.

use std::collections::HashSet;

use rayon::prelude::*;

use crate::constraints::{Constraint, ConstraintKind, Substitution, Target};
use crate::error::{Error, Result};
use crate::functions::FunctionRegistry;
use crate::model::{Cell, FunctionCall, ObjectMap, TabularSource};
use crate::values;

use super::{Policy, Workspace};

/// Removes rows equal to an earlier row; the first occurrence stays.
pub fn duplicates(source: &TabularSource) -> TabularSource {
    let mut seen: HashSet<&Vec<Cell>> = HashSet::with_capacity(source.rows.len());
    let rows = source.rows.iter().filter(|r| seen.insert(*r)).cloned().collect();
    TabularSource {
        path: source.path.clone(),
        columns: source.columns.clone(),
        rows,
    }
}

/// Applies one substitution to one column. Under [`Policy::Warn`] values
/// that fail to reparse become absent.
pub fn sub(source: &TabularSource, column: &str, family: &Substitution, policy: Policy) -> Result<TabularSource> {
    let idx = source
        .column_index(column)
        .ok_or_else(|| Error::Invalid(format!("substitution column `{column}` is not in {}", source.path)))?;
    let mut out = source.clone();
    for (r, row) in out.rows.iter_mut().enumerate() {
        let cell = &mut row[idx];
        match family {
            Substitution::NullToAbsent { markers } => {
                if cell.as_ref().is_some_and(|v| markers.contains(v)) {
                    *cell = None;
                }
            }
            Substitution::AbsentToDefault { value } => {
                if cell.as_deref().is_none_or(str::is_empty) {
                    *cell = Some(value.clone());
                }
            }
            Substitution::Reformat { datatype, pattern } => {
                let Some(v) = cell.as_deref().filter(|v| !v.is_empty()) else {
                    continue;
                };
                match values::normalize(v, *datatype, pattern) {
                    Ok(c) => *cell = Some(c),
                    Err(message) => match policy {
                        Policy::Error => {
                            return Err(Error::FormatViolation {
                                path: source.path.clone(),
                                row: r + 1,
                                column: column.to_string(),
                                value: v.to_string(),
                                message,
                            })
                        }
                        Policy::Warn => {
                            log::warn!("{}:{} {column}: {message}", source.path, r + 1);
                            *cell = None;
                        }
                    },
                }
            }
        }
    }
    Ok(out)
}

/// Appends a column holding the function's value for every row. Absent
/// inputs give an absent result.
pub fn create(
    source: &TabularSource,
    column: &str,
    call: &FunctionCall,
    registry: &FunctionRegistry,
) -> Result<TabularSource> {
    if source.column_index(column).is_some() {
        return Err(Error::NameCollision(format!("{} in {}", column, source.path)));
    }
    let mut out = source.clone();
    out.columns.push(column.to_string());
    for (r, row) in out.rows.iter_mut().enumerate() {
        let lookup = |name: &str| {
            source
                .column_index(name)
                .and_then(|i| source.rows[r][i].as_deref())
                .filter(|v| !v.is_empty())
        };
        let value = registry
            .call(call, &lookup)
            .map_err(|message| Error::FunctionError { row: r + 1, message })?;
        row.push(value);
    }
    Ok(out)
}

fn prepare_one(
    source: &TabularSource,
    constraints: &[&Constraint],
    registry: &FunctionRegistry,
    policy: Policy,
) -> Result<TabularSource> {
    let mut s = duplicates(source);
    let mut subs: Vec<(&Substitution, &str)> = constraints
        .iter()
        .filter_map(|c| match &c.kind {
            ConstraintKind::Substitution(f) => Some((f, c.target.columns[0].as_str())),
            _ => None,
        })
        .collect();
    subs.sort_by_key(|(f, _)| f.order());
    for (family, col) in subs {
        s = sub(&s, col, family, policy)?;
    }
    for c in constraints {
        if let ConstraintKind::CreateColumn { column, call, .. } = &c.kind {
            s = create(&s, column, call, registry)?;
        }
    }
    Ok(s)
}

impl Workspace {
    /// Runs duplicates, substitution and creation on every source, in
    /// parallel across sources, then points function objects at the new
    /// columns.
    pub fn prepare(&mut self, registry: &FunctionRegistry, policy: Policy, jobs: usize) -> Result<()> {
        let per_source: Vec<Vec<&Constraint>> = self
            .sources
            .iter()
            .map(|s| self.constraints.for_source(&s.path).collect())
            .collect();
        let work = || {
            self.sources
                .par_iter()
                .zip(per_source.par_iter())
                .map(|(s, cs)| prepare_one(s, cs, registry, policy))
                .collect::<Result<Vec<_>>>()
        };
        let prepared = if jobs == 0 {
            work()?
        } else {
            rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map_err(|e| Error::Invalid(format!("cannot start worker pool: {e}")))?
                .install(work)?
        };
        self.sources = prepared;

        let mut new = Vec::new();
        let mut notes = Vec::new();
        for c in self.constraints.iter() {
            if let ConstraintKind::CreateColumn {
                triples_map,
                pom_index,
                column,
                datatype,
                ..
            } = &c.kind
            {
                let tm = self
                    .mapping
                    .get_mut(triples_map)
                    .ok_or_else(|| Error::Invalid(format!("unknown triples map {triples_map}")))?;
                tm.poms[*pom_index].object = ObjectMap::Reference(column.clone());
                if let Some(dt) = datatype {
                    new.push(Constraint {
                        kind: ConstraintKind::Datatype {
                            datatype: *dt,
                            declared: false,
                        },
                        target: Target::column(&c.target.source, column),
                    });
                }
                notes.push((c.target.source.clone(), format!("created {column}")));
            }
        }
        for c in new {
            self.constraints.push(c);
        }
        for (path, note) in notes {
            self.record(&path, &[], note);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Datatype, FunctionArg};

    fn src() -> TabularSource {
        TabularSource::from_strs(
            "a.csv",
            &["id", "d", "n"],
            &[
                &["1", "25/12/2019", "NA"],
                &["2", "01/01/2020", ""],
                &["1", "25/12/2019", "NA"],
            ],
        )
        .unwrap()
    }

    #[test]
    fn duplicates_keep_first() {
        let d = duplicates(&src());
        assert_eq!(d.row_count(), 2);
        assert_eq!(duplicates(&d), d);
    }

    #[test]
    fn substitution_order_and_idempotence() {
        let s = src();
        let s = sub(
            &s,
            "n",
            &Substitution::NullToAbsent {
                markers: vec!["NA".into()],
            },
            Policy::Error,
        )
        .unwrap();
        assert_eq!(s.rows[0][2], None);
        let s = sub(
            &s,
            "n",
            &Substitution::AbsentToDefault { value: "0".into() },
            Policy::Error,
        )
        .unwrap();
        assert_eq!(s.rows[1][2].as_deref(), Some("0"));
        let f = Substitution::Reformat {
            datatype: Datatype::Date,
            pattern: "dd/MM/yyyy".into(),
        };
        let once = sub(&s, "d", &f, Policy::Error).unwrap();
        assert_eq!(once.rows[0][1].as_deref(), Some("2019-12-25"));
        assert_eq!(sub(&once, "d", &f, Policy::Error).unwrap(), once);
    }

    #[test]
    fn bad_format_follows_policy() {
        let s = TabularSource::from_strs("a.csv", &["d"], &[&["31/02/2020"]]).unwrap();
        let f = Substitution::Reformat {
            datatype: Datatype::Date,
            pattern: "dd/MM/yyyy".into(),
        };
        assert!(matches!(
            sub(&s, "d", &f, Policy::Error),
            Err(Error::FormatViolation { row: 1, .. })
        ));
        assert_eq!(sub(&s, "d", &f, Policy::Warn).unwrap().rows[0][0], None);
    }

    #[test]
    fn create_appends_column() {
        let s = TabularSource::from_strs("a.csv", &["name"], &[&["Plaza de Castilla"], &[""]]).unwrap();
        let call = FunctionCall {
            function_name: "slugify".into(),
            args: vec![FunctionArg::Column("name".into())],
        };
        let out = create(&s, "_fn_1", &call, &FunctionRegistry::default()).unwrap();
        assert_eq!(out.columns, vec!["name", "_fn_1"]);
        assert_eq!(out.rows[0][1].as_deref(), Some("plaza_de_castilla"));
        assert_eq!(out.rows[1][1], None);
    }
}
