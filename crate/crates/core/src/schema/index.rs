//! Selectivity-driven index decisions.

use std::collections::{BTreeSet, HashSet};

use serde::Serialize;

use crate::constraints::{ConstraintKind, ConstraintSet};
use crate::model::{path_stem, TabularSource};

use super::ddl::{sanitize, DdlScript, DdlStatement, IndexDef};

pub const DEFAULT_TAU: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexDecision {
    pub source: String,
    pub table: String,
    pub columns: Vec<String>,
    pub selectivity: f64,
    pub created: bool,
    pub reason: String,
}

/// Distinct present values over row count; zero for an empty table.
pub fn selectivity(source: &TabularSource, column: &str) -> f64 {
    let Some(values) = source.column_values(column) else {
        return 0.0;
    };
    let rows = source.row_count();
    if rows == 0 {
        return 0.0;
    }
    let distinct: HashSet<&str> = values.filter_map(|v| v.as_deref()).filter(|v| !v.is_empty()).collect();
    distinct.len() as f64 / rows as f64
}

/// One decision per distinct index candidate. A candidate is created iff
/// its selectivity reaches `tau` and it is not the leading primary key
/// column.
pub fn decide_indexes(
    sources: &[TabularSource],
    constraints: &ConstraintSet,
    tau: f64,
    enabled: bool,
) -> Vec<IndexDecision> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for c in constraints.iter() {
        if c.kind != ConstraintKind::IndexCandidate {
            continue;
        }
        let key = (c.target.source.clone(), c.target.columns.clone());
        if !seen.insert(key) {
            continue;
        }
        let Some(s) = sources.iter().find(|s| s.path == c.target.source) else {
            continue;
        };
        let col = &c.target.columns[0];
        if s.column_index(col).is_none() {
            continue;
        }
        let sel = selectivity(s, col);
        let leading_pk = constraints
            .primary_key(&s.path)
            .and_then(|pk| pk.first())
            .is_some_and(|first| first == col);
        let (created, reason) = if !enabled {
            (false, "indexes disabled".to_string())
        } else if leading_pk {
            (false, "covered by PK".to_string())
        } else if sel >= tau {
            (true, format!("selectivity {sel:.3} >= {tau}"))
        } else {
            (false, format!("selectivity {sel:.3} < {tau}"))
        };
        out.push(IndexDecision {
            source: s.path.clone(),
            table: sanitize(path_stem(&s.path)),
            columns: c.target.columns.iter().map(|c| sanitize(c)).collect(),
            selectivity: sel,
            created,
            reason,
        });
    }
    out
}

impl DdlScript {
    /// Appends `CREATE INDEX` statements for the created decisions.
    pub fn add_indexes(&mut self, decisions: &[IndexDecision]) {
        for d in decisions.iter().filter(|d| d.created) {
            self.statements.push(DdlStatement::CreateIndex(IndexDef {
                name: format!("idx_{}_{}", d.table, d.columns.join("_")),
                table: d.table.clone(),
                columns: d.columns.clone(),
            }));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{Constraint, Target};

    #[test]
    fn threshold_and_pk_rule() {
        let rows: Vec<Vec<&str>> = (0..20)
            .map(|i| if i < 10 { vec!["a", "x"] } else { vec!["b", "y"] })
            .collect();
        let refs: Vec<&[&str]> = rows.iter().map(|r| r.as_slice()).collect();
        let s = TabularSource::from_strs("t.csv", &["low", "k"], &refs).unwrap();
        assert!((selectivity(&s, "low") - 0.1).abs() < 1e-12);
        let cs = ConstraintSet::new(vec![
            Constraint {
                kind: ConstraintKind::IndexCandidate,
                target: Target::column("t.csv", "low"),
            },
            Constraint {
                kind: ConstraintKind::IndexCandidate,
                target: Target::column("t.csv", "low"),
            },
            Constraint {
                kind: ConstraintKind::IndexCandidate,
                target: Target::column("t.csv", "k"),
            },
            Constraint {
                kind: ConstraintKind::PrimaryKey,
                target: Target::column("t.csv", "k"),
            },
        ]);
        let d = decide_indexes(std::slice::from_ref(&s), &cs, DEFAULT_TAU, true);
        assert_eq!(d.len(), 2);
        assert!(d[0].created);
        assert!(!d[1].created);
        assert_eq!(d[1].reason, "covered by PK");
        let strict = decide_indexes(&[s], &cs, 0.2, true);
        assert!(!strict[0].created);
    }

    #[test]
    fn empty_table_has_zero_selectivity() {
        let s = TabularSource::from_strs("t.csv", &["c"], &[]).unwrap();
        assert_eq!(selectivity(&s, "c"), 0.0);
    }
}
