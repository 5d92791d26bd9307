//! Fixture access shared by the integration tests and the acceptance run.
#![allow(dead_code)]

pub mod checks;
pub mod fd;
pub mod gen;

use std::path::{Path, PathBuf};

use tabular_obda::constraints::extract_constraints;
use tabular_obda::engine::{eval_oracle, materialize_oracle, ResultSet};
use tabular_obda::frontends::{parse_mapping, parse_metadata, parse_query, read_source, Query};
use tabular_obda::pipeline::{duplicates, Policy, Workspace};
use tabular_obda::{FunctionRegistry, RunConfig, TabularSource, VirtualTabularDataset};

pub const FIXTURES: [&str; 3] = ["motivating", "gtfs", "bsbm"];

pub struct Fixture {
    pub name: &'static str,
    pub dir: PathBuf,
}

impl Fixture {
    pub fn new(name: &'static str) -> Self {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
        Fixture { name, dir }
    }

    pub fn mapping_path(&self) -> PathBuf {
        self.dir.join("mapping.yaml")
    }

    pub fn metadata_path(&self) -> PathBuf {
        self.dir.join("metadata.json")
    }

    pub fn query_path(&self, stem: &str) -> PathBuf {
        self.dir.join("queries").join(format!("{stem}.rq"))
    }

    pub fn queries(&self) -> Vec<PathBuf> {
        let mut out: Vec<PathBuf> = std::fs::read_dir(self.dir.join("queries"))
            .expect("queries dir")
            .map(|e| e.expect("dir entry").path())
            .filter(|p| p.extension().is_some_and(|e| e == "rq"))
            .collect();
        out.sort();
        out
    }

    pub fn query(&self, path: &Path) -> Query {
        parse_query(&std::fs::read_to_string(path).expect("query file")).expect("query parses")
    }

    pub fn config(&self, query: &Path) -> RunConfig {
        let mut cfg = RunConfig::new(&self.dir, self.mapping_path(), Some(self.metadata_path()), query);
        cfg.db_url = Some(":memory:".into());
        cfg
    }

    pub fn vtd(&self) -> VirtualTabularDataset {
        let mapping = parse_mapping(&std::fs::read_to_string(self.mapping_path()).unwrap()).unwrap();
        let (metadata, _) = parse_metadata(&std::fs::read_to_string(self.metadata_path()).unwrap()).unwrap();
        let sources = mapping
            .source_paths()
            .iter()
            .map(|p| read_source(&self.dir, p, &metadata).unwrap().0)
            .collect();
        VirtualTabularDataset {
            sources,
            ontology_terms: Default::default(),
            mapping,
            metadata,
        }
    }

    pub fn oracle(&self, query: &Path) -> ResultSet {
        let triples = materialize_oracle(&self.vtd(), &FunctionRegistry::default()).expect("oracle materializes");
        eval_oracle(&self.query(query), &triples)
    }
}

/// Bag equality, or set equality for DISTINCT queries. Ordered queries
/// with a LIMIT must agree row by row.
pub fn same_answers(q: &Query, got: &ResultSet, want: &ResultSet) -> bool {
    if !q.order_by.is_empty() && q.limit.is_some() {
        return got == want;
    }
    if q.distinct {
        got.same_set(want)
    } else {
        got.same_bag(want)
    }
}

/// The route-type walk-through on the GTFS fixture: the cut source, its
/// row count after duplicate removal, and its rows after preparation.
pub struct RouteTypeWalk {
    pub cut_sources: Vec<String>,
    pub rows_after_duplicates: usize,
    pub prepared: TabularSource,
}

pub fn route_type_walk() -> RouteTypeWalk {
    let f = Fixture::new("gtfs");
    let vtd = f.vtd();
    let constraints = extract_constraints(&vtd.mapping, &vtd.metadata).expect("constraints");
    let mut ws = Workspace::new(vtd.sources.clone(), vtd.mapping.clone(), constraints);
    let before: Vec<String> = ws.sources.iter().map(|s| s.path.clone()).collect();
    ws.normalize().expect("normalize");
    let cut_sources = ws
        .sources
        .iter()
        .map(|s| s.path.clone())
        .filter(|p| !before.contains(p))
        .collect();
    let rows_after_duplicates = ws.source("route_type.csv").map_or(0, |s| duplicates(s).rows.len());
    ws.prepare(&FunctionRegistry::default(), Policy::Error, 1)
        .expect("prepare");
    let prepared = ws
        .source("route_type.csv")
        .cloned()
        .expect("route_type.csv after preparation");
    RouteTypeWalk {
        cut_sources,
        rows_after_duplicates,
        prepared,
    }
}

/// Values of `column` on rows whose `key` column equals `value`.
pub fn values_where(s: &TabularSource, key: &str, value: &str, column: usize) -> Vec<Option<String>> {
    let k = s.column_index(key).expect("key column");
    s.rows
        .iter()
        .filter(|r| r[k].as_deref() == Some(value))
        .map(|r| r[column].clone())
        .collect()
}
