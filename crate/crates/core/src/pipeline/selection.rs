//! Query-driven selection of triples maps, sources and metadata.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::constraints::columns_needed_by;
use crate::error::{Error, Result};
use crate::frontends::{build_ssgs, Query};
use crate::model::{MappingDocument, MetadataDocument, ObjectMap, TabularSource, TriplesMap, RDF_TYPE};

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SelectionPlan {
    /// Maps matched by at least one star-shaped group.
    pub kept_tm_ids: BTreeSet<String>,
    /// Parents kept only because a kept join points at them.
    pub join_dependencies: BTreeSet<String>,
    pub kept_predicates: BTreeMap<String, BTreeSet<String>>,
    pub kept_columns: BTreeMap<String, Vec<String>>,
    pub discarded_sources: BTreeSet<String>,
}

fn matches(tm: &TriplesMap, predicates: &BTreeSet<&str>, classes: &BTreeSet<&str>) -> bool {
    let produced = tm.predicates();
    predicates.iter().all(|p| produced.contains(p)) && classes.iter().all(|c| tm.class_iri.as_deref() == Some(*c))
}

/// Restricts the mapping and metadata to what the query can touch.
pub fn select_annotations(
    q: &Query,
    m: &MappingDocument,
    md: &MetadataDocument,
) -> Result<(MappingDocument, MetadataDocument, SelectionPlan)> {
    let ssgs = build_ssgs(q);
    let mut kept: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();

    for g in &ssgs.groups {
        let required = g.required_predicates();
        if !required.is_empty() {
            let classes = g.required_classes();
            let mut found = false;
            for tm in m.triples_maps.iter().filter(|tm| matches(tm, &required, &classes)) {
                found = true;
                kept.entry(tm.id.clone())
                    .or_default()
                    .extend(required.iter().map(|p| p.to_string()));
            }
            if !found {
                return Err(Error::NoMatchingTriplesMap(g.to_string()));
            }
        }
        for block in g.optional_blocks() {
            let preds = g.optional_predicates(block);
            let classes = g.optional_classes(block);
            for tm in m.triples_maps.iter().filter(|tm| matches(tm, &preds, &classes)) {
                kept.entry(tm.id.clone())
                    .or_default()
                    .extend(preds.iter().map(|p| p.to_string()));
            }
        }
    }

    let mut plan = SelectionPlan {
        kept_tm_ids: kept.keys().cloned().collect(),
        ..Default::default()
    };

    let mut out = MappingDocument::default();
    for tm in &m.triples_maps {
        let Some(preds) = kept.get(&tm.id) else {
            continue;
        };
        let mut t = tm.clone();
        t.poms.retain(|pom| {
            preds.contains(&pom.predicate) || pom.join().is_some_and(|(p, _)| plan.kept_tm_ids.contains(p))
        });
        if !preds.contains(RDF_TYPE) {
            t.class_iri = None;
        }
        plan.kept_predicates
            .insert(t.id.clone(), t.predicates().into_iter().map(str::to_string).collect());
        out.triples_maps.push(t);
    }

    // Parents of kept joins must survive to render join objects.
    let mut deps = BTreeSet::new();
    for t in &out.triples_maps {
        for pom in &t.poms {
            if let Some((p, _)) = pom.join() {
                if !plan.kept_tm_ids.contains(p) {
                    deps.insert(p.to_string());
                }
            }
        }
    }
    for tm in &m.triples_maps {
        if deps.contains(&tm.id) {
            out.triples_maps.push(TriplesMap {
                poms: Vec::new(),
                class_iri: None,
                ..tm.clone()
            });
        }
    }
    // Keep the original map order.
    let order: BTreeMap<&str, usize> = m
        .triples_maps
        .iter()
        .enumerate()
        .map(|(i, t)| (t.id.as_str(), i))
        .collect();
    out.triples_maps.sort_by_key(|t| order[t.id.as_str()]);
    plan.join_dependencies = deps;

    for path in out.source_paths() {
        plan.kept_columns.insert(path.clone(), out.referenced_columns(&path));
    }
    plan.discarded_sources = m
        .source_paths()
        .into_iter()
        .filter(|p| !plan.kept_columns.contains_key(p))
        .collect();

    let md_out = filter_metadata(md, &plan.kept_columns);
    Ok((out, md_out, plan))
}

/// Keeps tables of kept sources and their kept columns. Keys survive only
/// when every column they mention does.
pub fn filter_metadata(md: &MetadataDocument, kept: &BTreeMap<String, Vec<String>>) -> MetadataDocument {
    let has = |table: &str, cols: &[String]| kept.get(table).is_some_and(|k| cols.iter().all(|c| k.contains(c)));
    let mut out = MetadataDocument::default();
    for t in &md.tables {
        let Some(cols) = kept.get(&t.url) else {
            continue;
        };
        let mut t = t.clone();
        t.columns.retain(|c| cols.contains(&c.name));
        if t.primary_key.as_ref().is_some_and(|pk| !has(&t.url, pk)) {
            t.primary_key = None;
        }
        let url = t.url.clone();
        t.foreign_keys
            .retain(|fk| has(&url, &fk.columns) && has(&fk.referenced_table, &fk.referenced_columns));
        out.tables.push(t);
    }
    out
}

/// Projects each kept source to its kept columns, in file order.
pub fn select_sources(sources: &[TabularSource], plan: &SelectionPlan) -> Result<Vec<TabularSource>> {
    let mut out = Vec::new();
    for s in sources {
        let Some(cols) = plan.kept_columns.get(&s.path) else {
            continue;
        };
        out.push(project(s, cols)?);
    }
    Ok(out)
}

/// Keeps `cols` (in the source's own order); unknown names are an error.
pub fn project(s: &TabularSource, cols: &[String]) -> Result<TabularSource> {
    for c in cols {
        if s.column_index(c).is_none() {
            return Err(Error::Invalid(format!("column `{c}` is not in {}", s.path)));
        }
    }
    let idx: Vec<usize> = (0..s.columns.len()).filter(|&i| cols.contains(&s.columns[i])).collect();
    Ok(TabularSource {
        path: s.path.clone(),
        columns: idx.iter().map(|&i| s.columns[i].clone()).collect(),
        rows: s
            .rows
            .iter()
            .map(|r| idx.iter().map(|&i| r[i].clone()).collect())
            .collect(),
    })
}

/// Columns of `tm`'s source that only `tm` needs.
pub fn columns_only_needed_by(tm: &TriplesMap, m: &MappingDocument) -> BTreeSet<String> {
    let mine = columns_needed_by(tm, m);
    let others: BTreeSet<String> = m
        .triples_maps
        .iter()
        .filter(|t| t.id != tm.id && t.source_path == tm.source_path)
        .flat_map(|t| columns_needed_by(t, m))
        .collect();
    mine.difference(&others).cloned().collect()
}

/// True when an object map of `tm` still calls a function.
pub fn has_function(tm: &TriplesMap) -> bool {
    tm.poms.iter().any(|p| matches!(p.object, ObjectMap::Function(_)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontends::{parse_mapping, parse_query};

    const MAP: &str = r#"
prefixes:
  ex: http://ex.org/
mappings:
  stop:
    sources: [[stops.csv~csv]]
    s: ex:stop/$(id)
    po:
      - [a, ex:Stop]
      - [ex:name, $(name)]
      - [ex:lat, $(lat)]
      - p: ex:parent
        o:
          mapping: station
          condition:
            function: equal
            parameters: [[str1, $(parent)], [str2, $(sid)]]
  station:
    sources: [[stations.csv~csv]]
    s: ex:station/$(sid)
    po:
      - [ex:label, $(label)]
  agency:
    sources: [[agency.csv~csv]]
    s: ex:agency/$(aid)
    po:
      - [ex:name, $(aname)]
"#;

    #[test]
    fn selects_matching_maps_and_join_parents() {
        let m = parse_mapping(MAP).unwrap();
        let q =
            parse_query("PREFIX ex: <http://ex.org/> SELECT ?s ?p WHERE { ?s a ex:Stop . ?s ex:parent ?p }").unwrap();
        let (m2, _, plan) = select_annotations(&q, &m, &MetadataDocument::default()).unwrap();
        assert_eq!(plan.kept_tm_ids, BTreeSet::from(["stop".to_string()]));
        assert_eq!(plan.join_dependencies, BTreeSet::from(["station".to_string()]));
        assert_eq!(plan.kept_columns["stops.csv"], vec!["id", "parent"]);
        assert_eq!(plan.kept_columns["stations.csv"], vec!["sid"]);
        assert!(plan.discarded_sources.contains("agency.csv"));
        assert!(m2.get("station").unwrap().poms.is_empty());
    }

    #[test]
    fn unmatched_group_is_an_error() {
        let m = parse_mapping(MAP).unwrap();
        let q = parse_query("SELECT ?s WHERE { ?s <http://ex.org/nope> ?o }").unwrap();
        assert!(matches!(
            select_annotations(&q, &m, &MetadataDocument::default()),
            Err(Error::NoMatchingTriplesMap(_))
        ));
    }

    #[test]
    fn shared_predicate_keeps_every_candidate() {
        let m = parse_mapping(MAP).unwrap();
        let q = parse_query("SELECT ?s ?n WHERE { ?s <http://ex.org/name> ?n }").unwrap();
        let (m2, _, plan) = select_annotations(&q, &m, &MetadataDocument::default()).unwrap();
        assert_eq!(plan.kept_tm_ids.len(), 2);
        assert!(m2.get("stop").unwrap().class_iri.is_none());
        assert_eq!(m2.get("stop").unwrap().poms.len(), 1);
    }
}
