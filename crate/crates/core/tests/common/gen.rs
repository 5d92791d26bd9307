//! Random virtual datasets with a conjunctive query over them.
//!
//! Metadata describes the data it ships with: separators only appear in
//! columns that declare one, and null markers only in columns that declare
//! them. Everything else (markers, defaults, datatypes, key gaps, duplicate
//! rows, query shape) is drawn at random.

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value};
use tabular_obda::RunConfig;
use tempfile::TempDir;

const MARKERS: [&str; 3] = ["NA", "-", "null"];
const SEPARATORS: [char; 3] = [';', '|', ','];
const WORDS: [&str; 4] = ["a", "b", "c", "d"];
const TAGS: [&str; 4] = ["x", "y", "z", "w"];

#[derive(Debug, Clone)]
pub struct ColumnSpec {
    pub marker: Option<&'static str>,
    pub default: Option<String>,
    pub separator: Option<char>,
    pub integer: bool,
}

#[derive(Debug, Clone)]
pub struct SourceSpec {
    pub val: ColumnSpec,
    pub tags: ColumnSpec,
    pub ref_marker: Option<&'static str>,
    /// Index of the source `ref` points at.
    pub parent: Option<usize>,
    pub rows: Vec<[String; 4]>,
}

pub struct RandomVtd {
    pub dir: TempDir,
    pub sources: Vec<SourceSpec>,
    pub query: String,
}

impl RandomVtd {
    pub fn config(&self) -> RunConfig {
        let d = self.dir.path();
        let mut cfg = RunConfig::new(d, d.join("mapping.yaml"), Some(d.join("metadata.json")), d.join("q.rq"));
        cfg.db_url = Some(":memory:".into());
        cfg
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// True when a declared null marker without a default occurs in a
    /// column the query reads.
    pub fn marker_without_default_in_query(&self) -> bool {
        self.sources.iter().enumerate().any(|(i, s)| {
            let hit = |col: usize, spec: &ColumnSpec, pred: &str| {
                spec.default.is_none()
                    && spec.marker.is_some_and(|m| s.rows.iter().any(|r| r[col] == m))
                    && self.query.contains(&format!("ex:{pred}{i} "))
            };
            hit(1, &s.val, "val")
                || hit(2, &s.tags, "tag")
                || (s.ref_marker.is_some_and(|m| s.rows.iter().any(|r| r[3] == m))
                    && self.query.contains(&format!("ex:ref{i} ")))
        })
    }
}

fn column_spec(rng: &mut impl Rng, multi: bool) -> ColumnSpec {
    let integer = !multi && rng.gen_bool(0.4);
    let default = rng.gen_bool(0.3).then(|| {
        if integer {
            rng.gen_range(0..6).to_string()
        } else {
            WORDS.choose(rng).unwrap().to_string()
        }
    });
    ColumnSpec {
        marker: rng.gen_bool(0.5).then(|| *MARKERS.choose(rng).unwrap()),
        default,
        separator: (multi && rng.gen_bool(0.6)).then(|| *SEPARATORS.choose(rng).unwrap()),
        integer,
    }
}

fn cell(rng: &mut impl Rng, spec: &ColumnSpec, multi: bool) -> String {
    match rng.gen_range(0..10) {
        0 => String::new(),
        1 if spec.marker.is_some() => spec.marker.unwrap().to_string(),
        _ if spec.integer => {
            let n = rng.gen_range(0..6);
            if rng.gen_bool(0.2) {
                format!("0{n}")
            } else {
                n.to_string()
            }
        }
        _ if multi => match spec.separator {
            Some(sep) => {
                let k = rng.gen_range(1..=3);
                let picked: Vec<&str> = (0..k).map(|_| *TAGS.choose(rng).unwrap()).collect();
                picked.join(&sep.to_string())
            }
            None => TAGS.choose(rng).unwrap().to_string(),
        },
        _ => WORDS.choose(rng).unwrap().to_string(),
    }
}

fn metadata_column(name: &str, spec: &ColumnSpec) -> Value {
    let mut c = json!({ "name": name });
    if spec.integer {
        c["datatype"] = json!("integer");
    }
    if let Some(m) = spec.marker {
        c["null"] = json!(m);
    }
    if let Some(d) = &spec.default {
        c["default"] = json!(d);
    }
    if let Some(s) = spec.separator {
        c["separator"] = json!(s.to_string());
    }
    c
}

pub fn random_vtd(rng: &mut impl Rng) -> RandomVtd {
    let n = rng.gen_range(1..=4);
    let mut sources: Vec<SourceSpec> = Vec::new();
    for i in 0..n {
        let val = column_spec(rng, false);
        let tags = column_spec(rng, true);
        let parent = (i > 0).then(|| rng.gen_range(0..i));
        let ref_marker = (parent.is_some() && rng.gen_bool(0.4)).then(|| *MARKERS.choose(rng).unwrap());
        let count = rng.gen_range(0..=20);
        let mut rows: Vec<[String; 4]> = Vec::new();
        for r in 0..count {
            if !rows.is_empty() && rng.gen_bool(0.1) {
                let copy = rows.choose(rng).unwrap().clone();
                rows.push(copy);
                continue;
            }
            let reference = match parent {
                None => String::new(),
                Some(p) => match rng.gen_range(0..8) {
                    0 => ref_marker.unwrap_or("").to_string(),
                    1 => "99".to_string(),
                    _ => rng.gen_range(1..=sources[p].rows.len().max(1)).to_string(),
                },
            };
            rows.push([
                (r + 1).to_string(),
                cell(rng, &val, false),
                cell(rng, &tags, true),
                reference,
            ]);
        }
        sources.push(SourceSpec {
            val,
            tags,
            ref_marker,
            parent,
            rows,
        });
    }

    let dir = tempfile::tempdir().expect("tempdir");
    let mut mapping = String::from("prefixes:\n  ex: http://example.org/\nmappings:\n");
    let mut tables = Vec::new();
    for (i, s) in sources.iter().enumerate() {
        let file = format!("t{i}.csv");
        let mut w = csv::Writer::from_path(dir.path().join(&file)).expect("csv");
        let header: &[&str] = if s.parent.is_some() {
            &["id", "val", "tags", "ref"]
        } else {
            &["id", "val", "tags"]
        };
        w.write_record(header).unwrap();
        for r in &s.rows {
            w.write_record(&r[..header.len()]).unwrap();
        }
        w.flush().unwrap();

        let _ = write!(
            mapping,
            "  t{i}:\n    sources: [[{file}~csv]]\n    s: ex:e{i}/$(id)\n    po:\n      - [a, ex:C{i}]\n"
        );
        if s.val.integer {
            let _ = writeln!(mapping, "      - [ex:val{i}, $(val), xsd:integer]");
        } else {
            let _ = writeln!(mapping, "      - [ex:val{i}, $(val)]");
        }
        let _ = writeln!(mapping, "      - [ex:tag{i}, $(tags)]");
        let mut columns = vec![
            json!({ "name": "id", "required": true }),
            metadata_column("val", &s.val),
            metadata_column("tags", &s.tags),
        ];
        if let Some(p) = s.parent {
            let _ = write!(
                mapping,
                "      - p: ex:ref{i}\n        o:\n          mapping: t{p}\n          condition:\n            function: equal\n            parameters:\n              - [str1, $(ref)]\n              - [str2, $(id)]\n"
            );
            let mut c = json!({ "name": "ref" });
            if let Some(m) = s.ref_marker {
                c["null"] = json!(m);
            }
            columns.push(c);
        }
        tables.push(json!({
            "url": file,
            "tableSchema": { "primaryKey": "id", "columns": columns }
        }));
    }
    std::fs::write(dir.path().join("mapping.yaml"), mapping).unwrap();
    std::fs::write(
        dir.path().join("metadata.json"),
        serde_json::to_string_pretty(&json!({ "tables": tables })).unwrap(),
    )
    .unwrap();

    let query = random_query(rng, &sources);
    std::fs::write(dir.path().join("q.rq"), &query).unwrap();
    RandomVtd { dir, sources, query }
}

/// A connected conjunctive query: a chain of sources linked through `ref`,
/// each with a random subset of its patterns, optionally sharing one tag
/// variable across sources.
fn random_query(rng: &mut impl Rng, sources: &[SourceSpec]) -> String {
    let mut chain = vec![rng.gen_range(0..sources.len())];
    while let Some(p) = sources[*chain.last().unwrap()].parent {
        if !rng.gen_bool(0.6) {
            break;
        }
        chain.push(p);
    }
    let share_tag = chain.len() > 1 && rng.gen_bool(0.5);
    let mut patterns = Vec::new();
    for (k, &i) in chain.iter().enumerate() {
        let before = patterns.len();
        if rng.gen_bool(0.6) {
            patterns.push(format!("?x{i} a ex:C{i} ."));
        }
        if rng.gen_bool(0.5) {
            patterns.push(format!("?x{i} ex:val{i} ?v{i} ."));
        }
        if share_tag || rng.gen_bool(0.4) {
            let var = if share_tag { "?t".to_string() } else { format!("?t{i}") };
            patterns.push(format!("?x{i} ex:tag{i} {var} ."));
        }
        if let Some(&next) = chain.get(k + 1) {
            patterns.push(format!("?x{i} ex:ref{i} ?x{next} ."));
        } else if patterns.len() == before {
            patterns.push(format!("?x{i} a ex:C{i} ."));
        }
    }
    let mut vars: Vec<String> = Vec::new();
    for p in &patterns {
        for tok in p.split_whitespace().filter(|t| t.starts_with('?')) {
            if !vars.iter().any(|v| v == tok) {
                vars.push(tok.to_string());
            }
        }
    }
    format!(
        "PREFIX ex: <http://example.org/>\nSELECT {} WHERE {{\n  {}\n}}\n",
        vars.join(" "),
        patterns.join("\n  ")
    )
}
