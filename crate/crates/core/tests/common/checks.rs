//! Brute-force checks shared by the property tests and the acceptance run.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use tabular_obda::constraints::{Constraint, ConstraintKind, ConstraintSet, Target};
use tabular_obda::pipeline::{cut, duplicates, split};
use tabular_obda::schema::ddl::quote;
use tabular_obda::schema::{decide_indexes, DdlScript};
use tabular_obda::{run, Mode, TabularSource};

use super::gen::RandomVtd;

type Row = Vec<Option<String>>;

/// A table of at most 8 rows with columns `id`, `key`, `attr`, `tags`.
/// `attr` is a function of `key`, `tags` holds separator-joined tokens.
pub fn random_table(rng: &mut impl Rng, sep: char) -> TabularSource {
    let attrs: BTreeMap<u8, String> = (0..4u8).map(|k| (k, format!("attr{}", rng.gen_range(0..3)))).collect();
    let rows: Vec<Row> = (0..rng.gen_range(0..=8))
        .map(|i| {
            let key = rng.gen_range(0..4u8);
            let tags: Vec<&str> = (0..rng.gen_range(1..=3))
                .map(|_| *["p", "q", "r", "s"].choose(rng).unwrap())
                .collect();
            vec![
                Some((i % 5).to_string()),
                Some(key.to_string()),
                Some(attrs[&key].clone()),
                Some(tags.join(&sep.to_string())),
            ]
        })
        .collect();
    TabularSource::new("t.csv", ["id", "key", "attr", "tags"].map(String::from).to_vec(), rows).unwrap()
}

fn natural_join(a: &TabularSource, b: &TabularSource, cols: &[&str]) -> BTreeSet<BTreeMap<String, Option<String>>> {
    let mut out = BTreeSet::new();
    for ra in &a.rows {
        for rb in &b.rows {
            let mut merged: BTreeMap<String, Option<String>> = BTreeMap::new();
            let mut ok = true;
            for (c, v) in a.columns.iter().zip(ra).chain(b.columns.iter().zip(rb)) {
                match merged.get(c) {
                    Some(prev) if prev != v => ok = false,
                    _ => {
                        merged.insert(c.clone(), v.clone());
                    }
                }
            }
            if ok {
                out.insert(merged.into_iter().filter(|(k, _)| cols.contains(&k.as_str())).collect());
            }
        }
    }
    out
}

fn as_set(s: &TabularSource, cols: &[&str]) -> BTreeSet<BTreeMap<String, Option<String>>> {
    s.rows
        .iter()
        .map(|r| {
            s.columns
                .iter()
                .zip(r)
                .filter(|(c, _)| cols.contains(&c.as_str()))
                .map(|(c, v)| (c.clone(), v.clone()))
                .collect()
        })
        .collect()
}

/// Splitting `tags` then regrouping the child's tokens per parent id gives
/// back every original row, reading each cell as a set of tokens.
pub fn split_is_lossless(t: &TabularSource, sep: char) -> Result<(), String> {
    let (parent, child) = split(t, "tags", sep, &[], None).map_err(|e| e.to_string())?;
    let (parent, child) = (duplicates(&parent), duplicates(&child));
    let mut tokens: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for r in &child.rows {
        tokens
            .entry(r[0].clone().unwrap())
            .or_default()
            .push(r[1].clone().unwrap());
    }
    // A multi-valued cell is a set of tokens; order and repeats carry no value.
    let token_set = |cell: Option<&str>| -> Option<String> {
        let set: BTreeSet<&str> = cell?.split(sep).collect();
        Some(set.into_iter().collect::<Vec<_>>().join(&sep.to_string()))
    };
    let rebuilt: BTreeSet<Row> = parent
        .rows
        .iter()
        .map(|r| {
            let mut r = r.clone();
            let joined = tokens.get(r[3].as_deref().unwrap()).map(|v| v.join(&sep.to_string()));
            r[3] = token_set(joined.as_deref());
            r
        })
        .collect();
    let original: BTreeSet<Row> = t
        .rows
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r[3] = token_set(r[3].as_deref());
            r
        })
        .collect();
    if rebuilt == original {
        Ok(())
    } else {
        Err(format!("split of {t:?} rebuilt {rebuilt:?}"))
    }
}

/// Cutting `key, attr` into a new table and joining back on `key` gives
/// the original rows.
pub fn cut_is_lossless(t: &TabularSource) -> Result<(), String> {
    let moved: BTreeSet<String> = ["key", "attr"].map(String::from).into();
    let dropped: BTreeSet<String> = ["attr"].map(String::from).into();
    let (kept, new) = cut(t, &moved, &dropped, "key.csv").map_err(|e| e.to_string())?;
    let (kept, new) = (duplicates(&kept), duplicates(&new));
    let all = ["id", "key", "attr", "tags"];
    let joined = natural_join(&kept, &new, &all);
    let original = as_set(t, &all);
    if joined == original {
        Ok(())
    } else {
        Err(format!("cut of {t:?} joined back to {joined:?}"))
    }
}

/// Every (distinct, rows) pair up to `max_rows`, with the candidate column
/// and the primary key column both offered for indexing. Returns how many
/// decisions were checked.
pub fn index_grid(max_rows: usize, taus: &[f64]) -> Result<usize, String> {
    let mut checked = 0;
    for &tau in taus {
        for rows in 1..=max_rows {
            for distinct in 1..=rows {
                let data: Vec<Row> = (0..rows)
                    .map(|i| vec![Some(i.to_string()), Some((i % distinct).to_string())])
                    .collect();
                let s = TabularSource::new("g.csv", vec!["id".into(), "c".into()], data).unwrap();
                let cs = ConstraintSet::new(vec![
                    Constraint {
                        kind: ConstraintKind::PrimaryKey,
                        target: Target::new("g.csv", vec!["id".into()]),
                    },
                    Constraint {
                        kind: ConstraintKind::IndexCandidate,
                        target: Target::column("g.csv", "c"),
                    },
                    Constraint {
                        kind: ConstraintKind::IndexCandidate,
                        target: Target::column("g.csv", "id"),
                    },
                ]);
                let decisions = decide_indexes(std::slice::from_ref(&s), &cs, tau, true);
                let mut ddl = DdlScript::default();
                ddl.add_indexes(&decisions);
                let sql = ddl.to_sql();
                for d in &decisions {
                    let sel = distinct as f64 / rows as f64;
                    let pk = d.columns == ["id"];
                    let want = !pk && sel >= tau;
                    if d.created != want {
                        return Err(format!("{rows} rows, {distinct} distinct, tau {tau}: {d:?}"));
                    }
                    let stmt = format!("CREATE INDEX {} ON", quote(&format!("idx_g_{}", d.columns.join("_"))));
                    if sql.contains(&stmt) != want {
                        return Err(format!("DDL disagrees with {d:?}:\n{sql}"));
                    }
                    checked += 1;
                }
                if sql.matches("CREATE INDEX").count() != decisions.iter().filter(|d| d.created).count() {
                    return Err(format!("extra indexes in:\n{sql}"));
                }
            }
        }
    }
    Ok(checked)
}

pub struct MonotoneOutcome {
    pub enhanced: usize,
    pub baseline: usize,
    /// Baseline answers left after dropping those that bind a declared
    /// null marker as a value.
    pub baseline_without_markers: usize,
}

pub fn monotone_case(v: &RandomVtd) -> Result<MonotoneOutcome, String> {
    let cfg = v.config();
    let e = run(&cfg).map_err(|e| format!("enhanced: {e}\n{}", v.query))?;
    let b = run(&cfg.with_mode(Mode::Baseline)).map_err(|e| format!("baseline: {e}\n{}", v.query))?;
    let markers: BTreeSet<&str> = v
        .sources
        .iter()
        .flat_map(|s| [s.val.marker, s.tags.marker, s.ref_marker])
        .flatten()
        .collect();
    let binds_marker = |lex: &str| markers.iter().any(|m| lex == *m || lex.ends_with(&format!("/{m}")));
    let baseline_without_markers = b
        .results
        .rows
        .iter()
        .filter(|r| !r.iter().flatten().any(|t| binds_marker(t.lexical())))
        .count();
    Ok(MonotoneOutcome {
        enhanced: e.answer_count,
        baseline: b.answer_count,
        baseline_without_markers,
    })
}
