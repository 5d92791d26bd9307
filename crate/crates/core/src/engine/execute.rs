//! Running translated queries and decoding rows into terms.

use rusqlite::types::ValueRef;
use rusqlite::Connection;

use crate::error::{Error, Result};
use crate::term::Term;
use crate::values::format_f64;

use super::results::ResultSet;
use super::sql::SqlQuery;

fn lexical(v: ValueRef<'_>) -> Option<String> {
    match v {
        ValueRef::Null => None,
        ValueRef::Integer(i) => Some(i.to_string()),
        ValueRef::Real(f) => Some(format_f64(f)),
        ValueRef::Text(t) | ValueRef::Blob(t) => Some(String::from_utf8_lossy(t).into_owned()),
    }
}

/// Rebuilds a term from its value and shape tag.
pub fn decode(value: Option<String>, shape: Option<String>) -> Option<Term> {
    let (value, shape) = (value?, shape?);
    Some(match shape.as_str() {
        "I" => Term::Iri(value),
        "L" => Term::plain(value),
        s => Term::literal(value, Some(&s[1..])),
    })
}

pub fn execute(conn: &Connection, q: &SqlQuery) -> Result<ResultSet> {
    let mut stmt = conn.prepare(&q.text).map_err(|e| Error::engine(e, &q.text))?;
    let n = q.vars.len();
    let mut rows = stmt.query([]).map_err(|e| Error::engine(e, &q.text))?;
    let mut out = ResultSet::new(q.vars.clone());
    while let Some(r) = rows.next().map_err(|e| Error::engine(e, &q.text))? {
        let mut row = Vec::with_capacity(n);
        for i in 0..n {
            let v = r.get_ref(2 * i).map_err(|e| Error::engine(e, &q.text))?;
            let s = r.get_ref(2 * i + 1).map_err(|e| Error::engine(e, &q.text))?;
            row.push(decode(lexical(v), lexical(s)));
        }
        out.rows.push(row);
    }
    Ok(out)
}
