//! Star-shaped groups: the query's triple patterns partitioned by subject.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::frontends::sparql::{Query, TriplePattern, VarOrTerm};
use crate::model::RDF_TYPE;
use crate::term::Term;

/// A triple pattern inside a group. `optional` is the index of the
/// OPTIONAL block it came from, `None` for required patterns.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct GroupPattern {
    pub pattern: TriplePattern,
    pub optional: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StarGroup {
    pub subject: VarOrTerm,
    /// Predicates of every pattern in the group, optional ones included.
    pub predicates: BTreeSet<String>,
    pub patterns: Vec<GroupPattern>,
}

impl StarGroup {
    pub fn required_predicates(&self) -> BTreeSet<&str> {
        self.patterns
            .iter()
            .filter(|p| p.optional.is_none())
            .map(|p| p.pattern.predicate.as_str())
            .collect()
    }

    /// Predicates contributed by one OPTIONAL block.
    pub fn optional_predicates(&self, block: usize) -> BTreeSet<&str> {
        self.patterns
            .iter()
            .filter(|p| p.optional == Some(block))
            .map(|p| p.pattern.predicate.as_str())
            .collect()
    }

    pub fn optional_blocks(&self) -> BTreeSet<usize> {
        self.patterns.iter().filter_map(|p| p.optional).collect()
    }

    /// Classes required by `?s rdf:type <C>` patterns with a constant class.
    pub fn required_classes(&self) -> BTreeSet<&str> {
        self.classes(|p| p.optional.is_none())
    }

    pub fn optional_classes(&self, block: usize) -> BTreeSet<&str> {
        self.classes(|p| p.optional == Some(block))
    }

    fn classes(&self, keep: impl Fn(&GroupPattern) -> bool) -> BTreeSet<&str> {
        self.patterns
            .iter()
            .filter(|p| keep(p) && p.pattern.predicate == RDF_TYPE)
            .filter_map(|p| match &p.pattern.object {
                VarOrTerm::Term(Term::Iri(c)) => Some(c.as_str()),
                _ => None,
            })
            .collect()
    }
}

impl fmt::Display for StarGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {{", self.subject)?;
        for (i, p) in self.predicates.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, " <{p}>")?;
        }
        f.write_str(" }")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SsgSet {
    pub groups: Vec<StarGroup>,
}

/// One group per distinct subject term. Groups are ordered by subject term
/// and their patterns are sorted, so the result does not depend on the
/// order of patterns in the query text.
pub fn build_ssgs(q: &Query) -> SsgSet {
    let mut by_subject: BTreeMap<VarOrTerm, BTreeSet<GroupPattern>> = BTreeMap::new();
    let tagged = q.bgp.iter().map(|p| (p, None)).chain(
        q.optionals
            .iter()
            .enumerate()
            .flat_map(|(i, o)| o.patterns.iter().map(move |p| (p, Some(i)))),
    );
    for (p, optional) in tagged {
        by_subject.entry(p.subject.clone()).or_default().insert(GroupPattern {
            pattern: p.clone(),
            optional,
        });
    }
    SsgSet {
        groups: by_subject
            .into_iter()
            .map(|(subject, patterns)| StarGroup {
                subject,
                predicates: patterns.iter().map(|p| p.pattern.predicate.clone()).collect(),
                patterns: patterns.into_iter().collect(),
            })
            .collect(),
    }
}
