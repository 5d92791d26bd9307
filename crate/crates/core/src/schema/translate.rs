//! Rewrites a mapping over files into a mapping over generated tables.

use crate::error::{Error, Result};
use crate::model::{Datatype, MappingDocument, ObjectMap};

use super::ddl::{sanitize, DdlScript, TableDef};

fn hint_for(t: &TableDef, column: &str, current: Option<String>) -> Option<String> {
    match t.column(column) {
        Some(c) if c.typed => (c.datatype != Datatype::String).then(|| c.datatype.xsd_iri()),
        _ => current,
    }
}

/// Logical sources become table names and column references become the
/// sanitized column names. Reference hints follow typed columns.
pub fn translate_mappings(m: &MappingDocument, ddl: &DdlScript) -> Result<MappingDocument> {
    let table_of = |path: &str| {
        ddl.table_for_source(path)
            .ok_or_else(|| Error::UnmappedSource(path.to_string()))
    };
    let mut out = m.clone();
    for tm in &mut out.triples_maps {
        let t = table_of(&tm.source_path)?;
        tm.source_path = t.name.clone();
        tm.subject.rename_columns(sanitize);
        for pom in &mut tm.poms {
            match &mut pom.object {
                ObjectMap::Reference(c) => {
                    *c = sanitize(c);
                    pom.datatype = hint_for(t, c, pom.datatype.take());
                }
                ObjectMap::Template { template, .. } => template.rename_columns(sanitize),
                ObjectMap::Function(call) => {
                    return Err(Error::Invalid(format!(
                        "function `{}` of `{}` was not materialized before translation",
                        call.function_name, tm.id
                    )))
                }
                ObjectMap::Join {
                    parent,
                    condition,
                    project,
                } => {
                    let p = m.get(parent).ok_or_else(|| Error::DanglingParentMap {
                        triples_map: tm.id.clone(),
                        parent: parent.clone(),
                    })?;
                    let pt = table_of(&p.source_path)?;
                    condition.child = sanitize(&condition.child);
                    condition.parent = sanitize(&condition.parent);
                    if let Some(col) = project {
                        *col = sanitize(col);
                        pom.datatype = hint_for(pt, col, pom.datatype.take());
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{Constraint, ConstraintKind, ConstraintSet, Target};
    use crate::frontends::parse_mapping;
    use crate::model::TabularSource;
    use crate::schema::ddl::{synthesize_schema, SchemaOptions};

    #[test]
    fn paths_and_columns_are_renamed() {
        let m = parse_mapping(
            "mappings:\n  m:\n    sources: [[data/Stops.csv~csv]]\n    s: http://x/$(Stop ID)\n    po:\n      - [http://x/p, $(Lat), xsd:string]\n",
        )
        .unwrap();
        let s = TabularSource::from_strs("data/Stops.csv", &["Stop ID", "Lat"], &[]).unwrap();
        let cs = ConstraintSet::new(vec![Constraint {
            kind: ConstraintKind::Datatype {
                datatype: Datatype::Decimal,
                declared: true,
            },
            target: Target::column("data/Stops.csv", "Lat"),
        }]);
        let ddl = synthesize_schema(&[s], &cs, SchemaOptions::default()).unwrap();
        let out = translate_mappings(&m, &ddl).unwrap();
        let tm = &out.triples_maps[0];
        assert_eq!(tm.source_path, "stops");
        assert_eq!(tm.subject.to_string(), "http://x/$(stop_id)");
        assert_eq!(tm.poms[0].object, ObjectMap::Reference("lat".into()));
        assert_eq!(tm.poms[0].datatype, Some(Datatype::Decimal.xsd_iri()));
    }

    #[test]
    fn missing_table_is_reported() {
        let m = parse_mapping("mappings:\n  m:\n    sources: [[a.csv~csv]]\n    s: http://x/$(id)\n").unwrap();
        assert!(matches!(
            translate_mappings(&m, &DdlScript::default()),
            Err(Error::UnmappedSource(_))
        ));
    }
}
