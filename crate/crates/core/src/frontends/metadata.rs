//! CSVW-style table metadata (JSON).

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::model::{ColumnMetadata, Datatype, ForeignKey, MetadataDocument, TableMetadata};
use crate::validate::Diagnostic;

const TABLE_KEYS: &[&str] = &["url", "tableSchema", "dialect", "delimiter", "@context", "@id", "@type"];
const SCHEMA_KEYS: &[&str] = &["columns", "primaryKey", "foreignKeys", "rowTitles", "@id", "@type"];
const COLUMN_KEYS: &[&str] = &[
    "name",
    "titles",
    "datatype",
    "format",
    "required",
    "default",
    "null",
    "separator",
    "minimum",
    "maximum",
    "@id",
    "@type",
];

fn structure(message: impl Into<String>) -> Error {
    Error::Syntax {
        line: 0,
        column: 0,
        message: message.into(),
    }
}

fn warn_unknown(obj: &Map<String, Value>, known: &[&str], loc: &str, out: &mut Vec<Diagnostic>) {
    for k in obj.keys() {
        if !known.contains(&k.as_str()) {
            out.push(Diagnostic::warning(loc, format!("unknown key `{k}` ignored")));
        }
    }
}

fn string_list(v: &Value, what: &str) -> Result<Vec<String>> {
    match v {
        Value::String(s) => Ok(vec![s.clone()]),
        Value::Array(items) => items
            .iter()
            .map(|i| {
                i.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| structure(format!("{what} entries must be strings")))
            })
            .collect(),
        _ => Err(structure(format!("{what} must be a string or a list of strings"))),
    }
}

fn number(v: &Value, what: &str) -> Result<f64> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| structure(format!("{what} out of range"))),
        Value::String(s) => s
            .trim()
            .parse()
            .map_err(|_| structure(format!("{what} must be numeric, found `{s}`"))),
        _ => Err(structure(format!("{what} must be numeric"))),
    }
}

fn single_char(v: &Value, what: &str, table: &str, column: &str) -> Result<char> {
    let s = v
        .as_str()
        .ok_or_else(|| structure(format!("{what} must be a string")))?;
    let mut chars = s.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Ok(c),
        _ => Err(Error::ConflictingAnnotation {
            table: table.to_string(),
            column: column.to_string(),
            message: format!("{what} must be a single character, found `{s}`"),
        }),
    }
}

/// Parses a metadata document. Warnings (unknown keys, unsupported
/// datatypes coerced to string) are returned next to the document.
pub fn parse_metadata(text: &str) -> Result<(MetadataDocument, Vec<Diagnostic>)> {
    let root: Value = serde_json::from_str(text).map_err(|e| Error::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut warnings = Vec::new();
    let root = root
        .as_object()
        .ok_or_else(|| structure("metadata must be a JSON object"))?;
    let single;
    let tables: Vec<&Value> = match (root.get("tables"), root.get("url")) {
        (Some(Value::Array(t)), _) => t.iter().collect(),
        (Some(_), _) => return Err(structure("`tables` must be a list")),
        (None, Some(_)) => {
            single = Value::Object(root.clone());
            vec![&single]
        }
        (None, None) => return Err(structure("metadata lacks `tables`")),
    };
    for k in root.keys() {
        if !["tables", "@context", "@id", "@type", "url", "tableSchema", "dialect"].contains(&k.as_str()) {
            warnings.push(Diagnostic::warning("metadata", format!("unknown key `{k}` ignored")));
        }
    }
    let mut doc = MetadataDocument::default();
    for t in tables {
        let t = t.as_object().ok_or_else(|| structure("each table must be an object"))?;
        doc.tables.push(parse_table(t, &mut warnings)?);
    }
    Ok((doc, warnings))
}

fn parse_table(t: &Map<String, Value>, warnings: &mut Vec<Diagnostic>) -> Result<TableMetadata> {
    let url = t
        .get("url")
        .and_then(Value::as_str)
        .ok_or_else(|| structure("table lacks a string `url`"))?;
    let loc = format!("metadata `{url}`");
    warn_unknown(t, TABLE_KEYS, &loc, warnings);
    let mut table = TableMetadata::new(url);

    let delimiter = t
        .get("dialect")
        .and_then(|d| d.get("delimiter"))
        .or_else(|| t.get("delimiter"));
    if let Some(d) = delimiter {
        table.delimiter = Some(single_char(d, "delimiter", url, "")?);
    }

    let Some(schema) = t.get("tableSchema") else {
        return Ok(table);
    };
    let schema = schema
        .as_object()
        .ok_or_else(|| structure(format!("tableSchema of `{url}` must be an object")))?;
    warn_unknown(schema, SCHEMA_KEYS, &loc, warnings);

    if let Some(cols) = schema.get("columns") {
        let cols = cols
            .as_array()
            .ok_or_else(|| structure(format!("columns of `{url}` must be a list")))?;
        for c in cols {
            let c = c
                .as_object()
                .ok_or_else(|| structure(format!("column entries of `{url}` must be objects")))?;
            table.columns.push(parse_column(url, c, warnings)?);
        }
    }
    if let Some(pk) = schema.get("primaryKey") {
        table.primary_key = Some(string_list(pk, "primaryKey")?);
    }
    if let Some(fks) = schema.get("foreignKeys") {
        let fks = fks
            .as_array()
            .ok_or_else(|| structure(format!("foreignKeys of `{url}` must be a list")))?;
        for fk in fks {
            let columns = string_list(
                fk.get("columnReference")
                    .ok_or_else(|| structure("foreign key lacks columnReference"))?,
                "columnReference",
            )?;
            let reference = fk
                .get("reference")
                .and_then(Value::as_object)
                .ok_or_else(|| structure("foreign key lacks a reference object"))?;
            let referenced_table = reference
                .get("resource")
                .and_then(Value::as_str)
                .ok_or_else(|| structure("foreign key reference lacks `resource`"))?
                .to_string();
            let referenced_columns = string_list(
                reference
                    .get("columnReference")
                    .ok_or_else(|| structure("foreign key reference lacks columnReference"))?,
                "columnReference",
            )?;
            table.foreign_keys.push(ForeignKey {
                columns,
                referenced_table,
                referenced_columns,
            });
        }
    }
    if let Some(rt) = schema.get("rowTitles") {
        table.row_titles = Some(string_list(rt, "rowTitles")?);
    }
    Ok(table)
}

fn parse_column(url: &str, c: &Map<String, Value>, warnings: &mut Vec<Diagnostic>) -> Result<ColumnMetadata> {
    let name = match (c.get("name"), c.get("titles")) {
        (Some(Value::String(n)), _) => n.clone(),
        (None, Some(t)) => string_list(t, "titles")?
            .into_iter()
            .next()
            .ok_or_else(|| structure(format!("column of `{url}` has empty titles")))?,
        _ => return Err(structure(format!("column of `{url}` lacks a string `name`"))),
    };
    let loc = format!("metadata `{url}` column `{name}`");
    warn_unknown(c, COLUMN_KEYS, &loc, warnings);
    let conflict = |message: String| Error::ConflictingAnnotation {
        table: url.to_string(),
        column: name.clone(),
        message,
    };
    let mut col = ColumnMetadata::new(&name);

    let mut minimum = c.get("minimum");
    let mut maximum = c.get("maximum");
    let mut format = c.get("format");
    if let Some(dt) = c.get("datatype") {
        let base = match dt {
            Value::String(s) => s.clone(),
            Value::Object(o) => {
                for k in o.keys() {
                    if !["base", "format", "minimum", "maximum", "@id", "@type"].contains(&k.as_str()) {
                        warnings.push(Diagnostic::warning(&loc, format!("unknown datatype key `{k}` ignored")));
                    }
                }
                format = o.get("format").or(format);
                minimum = o.get("minimum").or(minimum);
                maximum = o.get("maximum").or(maximum);
                o.get("base").and_then(Value::as_str).unwrap_or("string").to_string()
            }
            _ => return Err(structure(format!("datatype of {loc} must be a string or object"))),
        };
        match Datatype::from_base(&base) {
            Some(d) => {
                col.datatype = d;
                col.datatype_declared = true;
            }
            None => warnings.push(Diagnostic::warning(
                &loc,
                format!("unsupported datatype `{base}` treated as string"),
            )),
        }
    }
    if let Some(f) = format {
        let f = match f {
            Value::String(s) => s.clone(),
            Value::Object(o) => o
                .get("pattern")
                .and_then(Value::as_str)
                .ok_or_else(|| structure(format!("format of {loc} lacks a pattern")))?
                .to_string(),
            _ => return Err(structure(format!("format of {loc} must be a string"))),
        };
        col.format = Some(f);
    }
    if let Some(r) = c.get("required") {
        col.required = r
            .as_bool()
            .ok_or_else(|| structure(format!("required of {loc} must be a boolean")))?;
    }
    if let Some(d) = c.get("default") {
        col.default = Some(match d {
            Value::String(s) => s.clone(),
            Value::Number(n) => n.to_string(),
            Value::Bool(b) => b.to_string(),
            _ => return Err(structure(format!("default of {loc} must be a scalar"))),
        });
    }
    if let Some(n) = c.get("null") {
        col.null_markers = string_list(n, "null")?;
    }
    if let Some(s) = c.get("separator") {
        col.separator = Some(single_char(s, "separator", url, &name)?);
        if col.datatype != Datatype::String {
            return Err(conflict(format!(
                "separator on a column of datatype {}; multi-valued columns must be strings",
                col.datatype.name()
            )));
        }
    }
    if let Some(m) = minimum {
        col.minimum = Some(number(m, "minimum")?);
    }
    if let Some(m) = maximum {
        col.maximum = Some(number(m, "maximum")?);
    }
    if let (Some(lo), Some(hi)) = (col.minimum, col.maximum) {
        if lo > hi {
            return Err(conflict(format!("minimum {lo} exceeds maximum {hi}")));
        }
    }
    Ok(col)
}

/// Serializes back to the accepted JSON shape.
pub fn serialize_metadata(doc: &MetadataDocument) -> String {
    let tables: Vec<Value> = doc.tables.iter().map(table_json).collect();
    serde_json::to_string_pretty(&json!({ "tables": tables })).expect("JSON values always serialize")
}

fn table_json(t: &TableMetadata) -> Value {
    let mut schema = Map::new();
    let columns: Vec<Value> = t.columns.iter().map(column_json).collect();
    schema.insert("columns".into(), Value::Array(columns));
    if let Some(pk) = &t.primary_key {
        schema.insert("primaryKey".into(), json!(pk));
    }
    if !t.foreign_keys.is_empty() {
        let fks: Vec<Value> = t
            .foreign_keys
            .iter()
            .map(|fk| {
                json!({
                    "columnReference": fk.columns,
                    "reference": {
                        "resource": fk.referenced_table,
                        "columnReference": fk.referenced_columns,
                    }
                })
            })
            .collect();
        schema.insert("foreignKeys".into(), Value::Array(fks));
    }
    if let Some(rt) = &t.row_titles {
        schema.insert("rowTitles".into(), json!(rt));
    }
    let mut out = Map::new();
    out.insert("url".into(), json!(t.url));
    if let Some(d) = t.delimiter {
        out.insert("dialect".into(), json!({ "delimiter": d.to_string() }));
    }
    out.insert("tableSchema".into(), Value::Object(schema));
    Value::Object(out)
}

fn column_json(c: &ColumnMetadata) -> Value {
    let mut m = Map::new();
    m.insert("name".into(), json!(c.name));
    if c.datatype_declared || c.format.is_some() {
        let mut dt = Map::new();
        dt.insert("base".into(), json!(c.datatype.name()));
        if let Some(f) = &c.format {
            dt.insert("format".into(), json!(f));
        }
        m.insert("datatype".into(), Value::Object(dt));
    }
    if c.required {
        m.insert("required".into(), json!(true));
    }
    if let Some(d) = &c.default {
        m.insert("default".into(), json!(d));
    }
    if !c.null_markers.is_empty() {
        m.insert("null".into(), json!(c.null_markers));
    }
    if let Some(s) = c.separator {
        m.insert("separator".into(), json!(s.to_string()));
    }
    if let Some(v) = c.minimum {
        m.insert("minimum".into(), json!(v));
    }
    if let Some(v) = c.maximum {
        m.insert("maximum".into(), json!(v));
    }
    Value::Object(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r##"{
      "@context": "http://www.w3.org/ns/csvw",
      "tables": [
        {"url": "stops.csv",
         "tableSchema": {
           "columns": [
             {"name": "stop_id", "required": true},
             {"name": "stop_lat", "datatype": {"base": "decimal", "format": "#.##0,0"}, "minimum": -90, "maximum": 90},
             {"name": "closing", "separator": ";", "null": ["N/A", ""]},
             {"name": "wheelchair", "datatype": "integer", "default": "0"},
             {"name": "geo", "datatype": "gYear"}
           ],
           "primaryKey": "stop_id",
           "foreignKeys": [{"columnReference": "parent", "reference": {"resource": "stations.csv", "columnReference": "id"}}]
         },
         "dialect": {"delimiter": ";"},
         "notes": "ignored"
        }
      ]
    }"##;

    #[test]
    fn parses_columns_and_keys() {
        let (doc, warnings) = parse_metadata(DOC).unwrap();
        let t = &doc.tables[0];
        assert_eq!(t.primary_key, Some(vec!["stop_id".to_string()]));
        assert_eq!(t.delimiter, Some(';'));
        let lat = t.column("stop_lat").unwrap();
        assert_eq!(lat.datatype, Datatype::Decimal);
        assert_eq!(lat.format.as_deref(), Some("#.##0,0"));
        assert_eq!((lat.minimum, lat.maximum), (Some(-90.0), Some(90.0)));
        assert_eq!(t.column("closing").unwrap().separator, Some(';'));
        assert_eq!(t.column("wheelchair").unwrap().default.as_deref(), Some("0"));
        assert_eq!(t.foreign_keys[0].referenced_table, "stations.csv");
        assert_eq!(t.column("geo").unwrap().datatype, Datatype::String);
        assert_eq!(warnings.len(), 2, "{warnings:?}");
    }

    #[test]
    fn empty_tables() {
        let (doc, w) = parse_metadata(r#"{"tables": []}"#).unwrap();
        assert!(doc.tables.is_empty());
        assert!(w.is_empty());
    }

    #[test]
    fn separator_on_integer_conflicts() {
        let err = parse_metadata(
            r#"{"tables":[{"url":"a.csv","tableSchema":{"columns":[{"name":"x","datatype":"integer","separator":";"}]}}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::ConflictingAnnotation { .. }));
    }

    #[test]
    fn round_trip() {
        let (doc, _) = parse_metadata(DOC).unwrap();
        let (again, w) = parse_metadata(&serialize_metadata(&doc)).unwrap();
        assert_eq!(again, doc);
        assert!(w.is_empty());
    }

    #[test]
    fn json_syntax_error_position() {
        let err = parse_metadata("{\n \"tables\": [,]\n}").unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 2, .. }));
    }
}
