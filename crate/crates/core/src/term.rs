use std::fmt;

use serde::Serialize;

use crate::model::Datatype;
use crate::values;

/// An RDF term as it appears in answers. Literals of known XSD types keep
/// their canonical lexical form, so term equality is value equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Term {
    Iri(String),
    Literal { value: String, datatype: Option<String> },
}

impl Term {
    pub fn iri(value: impl Into<String>) -> Self {
        Term::Iri(value.into())
    }

    pub fn plain(value: impl Into<String>) -> Self {
        Term::Literal {
            value: value.into(),
            datatype: None,
        }
    }

    pub fn literal(value: impl Into<String>, datatype: Option<&str>) -> Self {
        let value = value.into();
        let known = datatype.and_then(Datatype::from_xsd);
        match known {
            Some(Datatype::String) => Term::plain(value),
            Some(dt) => Term::Literal {
                value: values::canonical(&value, dt).unwrap_or(value),
                datatype: Some(dt.xsd_iri()),
            },
            None => Term::Literal {
                value,
                datatype: datatype.map(str::to_string),
            },
        }
    }

    pub fn lexical(&self) -> &str {
        match self {
            Term::Iri(v) => v,
            Term::Literal { value, .. } => value,
        }
    }

    pub fn datatype(&self) -> Option<Datatype> {
        match self {
            Term::Literal { datatype: Some(dt), .. } => Datatype::from_xsd(dt),
            Term::Literal { datatype: None, .. } => Some(Datatype::String),
            Term::Iri(_) => None,
        }
    }

    pub fn is_iri(&self) -> bool {
        matches!(self, Term::Iri(_))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(v) => write!(f, "<{v}>"),
            Term::Literal { value, datatype: None } => write!(f, "{value:?}"),
            Term::Literal {
                value,
                datatype: Some(dt),
            } => write!(f, "{value:?}^^<{dt}>"),
        }
    }
}
