//! Relational schema synthesis from prepared sources and constraints.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::constraints::{ConstraintKind, ConstraintSet};
use crate::error::{Error, Result};
use crate::model::{path_stem, Datatype, TabularSource};

/// Lowercases and replaces anything outside `[a-z0-9_]` with `_`; a leading
/// digit gets a `t_` prefix.
pub fn sanitize(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect();
    if out.is_empty() || out.starts_with(|c: char| c.is_ascii_digit()) {
        out.insert_str(0, "t_");
    }
    out
}

pub fn quote(ident: &str) -> String {
    format!("\"{}\"", ident.replace('"', "\"\""))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnDef {
    pub name: String,
    pub source_column: String,
    pub datatype: Datatype,
    /// True when a constraint fixed the datatype.
    pub typed: bool,
    pub not_null: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForeignKeyDef {
    pub columns: Vec<String>,
    pub table: String,
    pub referenced_columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableDef {
    pub name: String,
    pub source_path: String,
    pub columns: Vec<ColumnDef>,
    pub primary_key: Option<Vec<String>>,
    pub foreign_keys: Vec<ForeignKeyDef>,
}

impl TableDef {
    pub fn column(&self, name: &str) -> Option<&ColumnDef> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_for_source(&self, source_column: &str) -> Option<&ColumnDef> {
        self.columns.iter().find(|c| c.source_column == source_column)
    }

    pub fn to_sql(&self) -> String {
        let mut lines: Vec<String> = self
            .columns
            .iter()
            .map(|c| {
                let mut l = format!("  {} {}", quote(&c.name), c.datatype.sql_type());
                if c.not_null {
                    l.push_str(" NOT NULL");
                }
                l
            })
            .collect();
        let list = |cols: &[String]| cols.iter().map(|c| quote(c)).collect::<Vec<_>>().join(", ");
        if let Some(pk) = &self.primary_key {
            lines.push(format!("  PRIMARY KEY ({})", list(pk)));
        }
        for fk in &self.foreign_keys {
            lines.push(format!(
                "  FOREIGN KEY ({}) REFERENCES {} ({})",
                list(&fk.columns),
                quote(&fk.table),
                list(&fk.referenced_columns)
            ));
        }
        format!("CREATE TABLE {} (\n{}\n)", quote(&self.name), lines.join(",\n"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexDef {
    pub name: String,
    pub table: String,
    pub columns: Vec<String>,
}

impl IndexDef {
    pub fn to_sql(&self) -> String {
        format!(
            "CREATE INDEX {} ON {} ({})",
            quote(&self.name),
            quote(&self.table),
            self.columns.iter().map(|c| quote(c)).collect::<Vec<_>>().join(", ")
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "statement")]
pub enum DdlStatement {
    CreateTable(TableDef),
    CreateIndex(IndexDef),
}

impl DdlStatement {
    pub fn to_sql(&self) -> String {
        match self {
            DdlStatement::CreateTable(t) => t.to_sql(),
            DdlStatement::CreateIndex(i) => i.to_sql(),
        }
    }
}

/// Tables in foreign-key order followed by indexes.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DdlScript {
    pub statements: Vec<DdlStatement>,
}

impl DdlScript {
    pub fn tables(&self) -> impl Iterator<Item = &TableDef> {
        self.statements.iter().filter_map(|s| match s {
            DdlStatement::CreateTable(t) => Some(t),
            _ => None,
        })
    }

    pub fn indexes(&self) -> impl Iterator<Item = &IndexDef> {
        self.statements.iter().filter_map(|s| match s {
            DdlStatement::CreateIndex(i) => Some(i),
            _ => None,
        })
    }

    pub fn table(&self, name: &str) -> Option<&TableDef> {
        self.tables().find(|t| t.name == name)
    }

    pub fn table_for_source(&self, path: &str) -> Option<&TableDef> {
        self.tables().find(|t| t.source_path == path)
    }

    pub fn to_sql(&self) -> String {
        self.statements.iter().map(|s| format!("{};\n", s.to_sql())).collect()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SchemaOptions {
    pub no_fk: bool,
}

/// One table per source. Columns are typed by their datatype constraints
/// (VARCHAR otherwise). Foreign keys are emitted only when they reference
/// the referenced table's primary key.
pub fn synthesize_schema(
    sources: &[TabularSource],
    constraints: &ConstraintSet,
    options: SchemaOptions,
) -> Result<DdlScript> {
    let mut names: BTreeMap<String, &str> = BTreeMap::new();
    let mut tables = Vec::new();
    for s in sources {
        let name = sanitize(path_stem(&s.path));
        if let Some(other) = names.insert(name.clone(), &s.path) {
            return Err(Error::NameCollision(format!(
                "{} and {} both become table {name}",
                other, s.path
            )));
        }
        let pk = constraints.primary_key(&s.path).map(|p| p.to_vec());
        let pk = pk.filter(|p| p.iter().all(|c| s.column_index(c).is_some()));
        let mut seen = BTreeSet::new();
        let mut columns = Vec::new();
        for c in &s.columns {
            let cname = sanitize(c);
            if !seen.insert(cname.clone()) {
                return Err(Error::NameCollision(format!(
                    "two columns of {} become {cname}",
                    s.path
                )));
            }
            let dt = constraints.datatype(&s.path, c);
            let not_null = pk.as_ref().is_some_and(|p| p.contains(c))
                || constraints
                    .for_column(&s.path, c)
                    .any(|k| k.kind == ConstraintKind::NotNull);
            columns.push(ColumnDef {
                name: cname,
                source_column: c.clone(),
                datatype: dt.unwrap_or(Datatype::String),
                typed: dt.is_some(),
                not_null,
            });
        }
        tables.push(TableDef {
            name: sanitize(path_stem(&s.path)),
            source_path: s.path.clone(),
            columns,
            primary_key: pk.map(|p| p.iter().map(|c| sanitize(c)).collect()),
            foreign_keys: Vec::new(),
        });
    }

    if !options.no_fk {
        for c in constraints.iter() {
            let ConstraintKind::ForeignKey {
                referenced_table,
                referenced_columns,
            } = &c.kind
            else {
                continue;
            };
            let Some(ti) = tables.iter().position(|t| t.source_path == c.target.source) else {
                continue;
            };
            let Some(rt) = tables.iter().find(|t| &t.source_path == referenced_table) else {
                log::warn!(
                    "foreign key of {} references unloaded {referenced_table}",
                    c.target.source
                );
                continue;
            };
            let refs: Vec<String> = referenced_columns.iter().map(|c| sanitize(c)).collect();
            let cols: Vec<String> = c.target.columns.iter().map(|c| sanitize(c)).collect();
            let matches_pk = rt.primary_key.as_ref().is_some_and(|pk| {
                let a: BTreeSet<_> = pk.iter().collect();
                let b: BTreeSet<_> = refs.iter().collect();
                a == b && pk.len() == refs.len()
            });
            if !matches_pk || cols.iter().any(|c| tables[ti].column(c).is_none()) {
                log::warn!(
                    "foreign key {} -> {referenced_table} not emitted: it must reference the primary key",
                    c.target.source
                );
                continue;
            }
            let fk = ForeignKeyDef {
                columns: cols,
                table: rt.name.clone(),
                referenced_columns: refs,
            };
            tables[ti].foreign_keys.push(fk);
        }
    }

    let ordered = topological(tables)?;
    Ok(DdlScript {
        statements: ordered.into_iter().map(DdlStatement::CreateTable).collect(),
    })
}

/// Kahn's algorithm; ties keep source order.
fn topological(tables: Vec<TableDef>) -> Result<Vec<TableDef>> {
    let n = tables.len();
    let idx: BTreeMap<&str, usize> = tables.iter().enumerate().map(|(i, t)| (t.name.as_str(), i)).collect();
    let mut indegree = vec![0usize; n];
    let mut dependents: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, t) in tables.iter().enumerate() {
        let parents: BTreeSet<usize> = t
            .foreign_keys
            .iter()
            .filter_map(|fk| idx.get(fk.table.as_str()).copied())
            .filter(|&p| p != i)
            .collect();
        for p in parents {
            indegree[i] += 1;
            dependents[p].push(i);
        }
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop_first() {
        order.push(i);
        for &d in &dependents[i] {
            indegree[d] -= 1;
            if indegree[d] == 0 {
                ready.insert(d);
            }
        }
    }
    if order.len() < n {
        let cycle = (0..n)
            .filter(|i| !order.contains(i))
            .map(|i| tables[i].name.clone())
            .collect();
        return Err(Error::CyclicForeignKeys(cycle));
    }
    let mut slots: Vec<Option<TableDef>> = tables.into_iter().map(Some).collect();
    Ok(order
        .into_iter()
        .map(|i| slots[i].take().expect("each index once"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{Constraint, Target};

    fn src(path: &str, cols: &[&str]) -> TabularSource {
        TabularSource::from_strs(path, cols, &[]).unwrap()
    }

    fn fk(from: &str, col: &str, to: &str, rcol: &str) -> Constraint {
        Constraint {
            kind: ConstraintKind::ForeignKey {
                referenced_table: to.into(),
                referenced_columns: vec![rcol.into()],
            },
            target: Target::column(from, col),
        }
    }

    fn pk(path: &str, col: &str) -> Constraint {
        Constraint {
            kind: ConstraintKind::PrimaryKey,
            target: Target::column(path, col),
        }
    }

    #[test]
    fn sanitizes_names() {
        assert_eq!(sanitize("Stop Times"), "stop_times");
        assert_eq!(sanitize("2020-data"), "t_2020_data");
    }

    #[test]
    fn fk_order_and_rendering() {
        let sources = vec![
            src("trips.csv", &["trip_id", "route_id"]),
            src("routes.csv", &["route_id"]),
        ];
        let cs = ConstraintSet::new(vec![
            pk("routes.csv", "route_id"),
            fk("trips.csv", "route_id", "routes.csv", "route_id"),
        ]);
        let ddl = synthesize_schema(&sources, &cs, SchemaOptions::default()).unwrap();
        let names: Vec<_> = ddl.tables().map(|t| t.name.as_str()).collect();
        assert_eq!(names, vec!["routes", "trips"]);
        let sql = ddl.to_sql();
        assert!(sql.contains("FOREIGN KEY (\"route_id\") REFERENCES \"routes\" (\"route_id\")"));
        assert!(sql.contains("\"route_id\" VARCHAR NOT NULL,\n  PRIMARY KEY"));
        let no_fk = synthesize_schema(&sources, &cs, SchemaOptions { no_fk: true }).unwrap();
        assert!(!no_fk.to_sql().contains("FOREIGN KEY"));
    }

    #[test]
    fn fk_to_non_key_is_skipped() {
        let sources = vec![src("a.csv", &["x"]), src("b.csv", &["y"])];
        let cs = ConstraintSet::new(vec![fk("a.csv", "x", "b.csv", "y")]);
        let ddl = synthesize_schema(&sources, &cs, SchemaOptions::default()).unwrap();
        assert!(ddl.tables().all(|t| t.foreign_keys.is_empty()));
    }

    #[test]
    fn cycles_are_rejected() {
        let sources = vec![src("a.csv", &["x"]), src("b.csv", &["y"])];
        let cs = ConstraintSet::new(vec![
            pk("a.csv", "x"),
            pk("b.csv", "y"),
            fk("a.csv", "x", "b.csv", "y"),
            fk("b.csv", "y", "a.csv", "x"),
        ]);
        assert!(matches!(
            synthesize_schema(&sources, &cs, SchemaOptions::default()),
            Err(Error::CyclicForeignKeys(_))
        ));
    }

    #[test]
    fn name_collision() {
        let sources = vec![src("a/x.csv", &["c"]), src("b/X.csv", &["c"])];
        assert!(matches!(
            synthesize_schema(&sources, &ConstraintSet::default(), SchemaOptions::default()),
            Err(Error::NameCollision(_))
        ));
    }
}
