//! Query answers and their serializations.

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::term::Term;

pub type Row = Vec<Option<Term>>;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ResultSet {
    pub vars: Vec<String>,
    pub rows: Vec<Row>,
}

impl ResultSet {
    pub fn new(vars: Vec<String>) -> Self {
        ResultSet { vars, rows: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn sorted_rows(&self) -> Vec<Row> {
        let mut rows = self.rows.clone();
        rows.sort();
        rows
    }

    /// Equal as multisets of rows.
    pub fn same_bag(&self, other: &ResultSet) -> bool {
        self.vars == other.vars && self.sorted_rows() == other.sorted_rows()
    }

    /// Equal as sets of rows.
    pub fn same_set(&self, other: &ResultSet) -> bool {
        let mut a = self.sorted_rows();
        let mut b = other.sorted_rows();
        a.dedup();
        b.dedup();
        self.vars == other.vars && a == b
    }

    /// CSV with a header row; IRIs and literals by their lexical form,
    /// unbound as an empty cell.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Csv {
            path: "<results>".into(),
            message: e.to_string(),
        };
        w.write_record(&self.vars).map_err(err)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|t| t.as_ref().map(Term::lexical).unwrap_or("")))
                .map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Invalid(e.to_string()))
    }

    /// SPARQL 1.1 query results JSON.
    pub fn to_json(&self) -> String {
        let bindings: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let mut b = Map::new();
                for (v, t) in self.vars.iter().zip(r) {
                    let Some(t) = t else { continue };
                    let value = match t {
                        Term::Iri(i) => json!({"type": "uri", "value": i}),
                        Term::Literal { value, datatype: None } => json!({"type": "literal", "value": value}),
                        Term::Literal {
                            value,
                            datatype: Some(d),
                        } => json!({"type": "literal", "value": value, "datatype": d}),
                    };
                    b.insert(v.clone(), value);
                }
                Value::Object(b)
            })
            .collect();
        serde_json::to_string_pretty(&json!({
            "head": {"vars": self.vars},
            "results": {"bindings": bindings},
        }))
        .expect("json values serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rs() -> ResultSet {
        ResultSet {
            vars: vec!["s".into(), "n".into()],
            rows: vec![
                vec![Some(Term::iri("http://x/1")), Some(Term::plain("a, b"))],
                vec![Some(Term::iri("http://x/2")), None],
            ],
        }
    }

    #[test]
    fn csv_and_json() {
        let r = rs();
        assert_eq!(r.to_csv().unwrap(), "s,n\nhttp://x/1,\"a, b\"\nhttp://x/2,\n");
        let v: Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["results"]["bindings"][0]["s"]["type"], "uri");
        assert!(v["results"]["bindings"][1].get("n").is_none());
    }

    #[test]
    fn bag_and_set_comparison() {
        let a = rs();
        let mut b = rs();
        b.rows.reverse();
        assert!(a.same_bag(&b));
        b.rows.push(b.rows[0].clone());
        assert!(!a.same_bag(&b));
        assert!(a.same_set(&b));
    }
}
