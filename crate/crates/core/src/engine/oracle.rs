//! Reference semantics: materialize the virtual graph directly from the
//! files and evaluate queries over it by brute force. Used to check the
//! relational pipeline, never on the fast path.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::frontends::{BinOp, Expr, Query, TriplePattern, VarOrTerm};
use crate::functions::FunctionRegistry;
use crate::model::{
    ColumnMetadata, Datatype, ObjectMap, TabularSource, TermKind, TriplesMap, VirtualTabularDataset, RDF_TYPE,
};
use crate::term::Term;
use crate::values;

use super::results::{ResultSet, Row};

pub type Triple = (Term, String, Term);

/// How cells of one column are read.
#[derive(Debug, Clone, Default)]
struct ColumnRule {
    markers: Vec<String>,
    default: Option<String>,
    format: Option<String>,
    separator: Option<char>,
    datatype: Datatype,
    declared: bool,
    minimum: Option<f64>,
    maximum: Option<f64>,
}

impl ColumnRule {
    fn from_metadata(c: Option<&ColumnMetadata>, hint: Option<Datatype>) -> Self {
        let mut r = ColumnRule {
            datatype: hint.unwrap_or(Datatype::String),
            ..Default::default()
        };
        if let Some(c) = c {
            r.markers = c.null_markers.clone();
            r.default = c.default.clone();
            r.separator = c.separator;
            r.minimum = c.minimum;
            r.maximum = c.maximum;
            if c.datatype_declared {
                r.datatype = c.datatype;
                r.declared = true;
            }
            if c.datatype != Datatype::String {
                r.format = c.format.clone();
            }
        }
        r
    }

    /// A value after formatting, canonicalization and range checks.
    fn finish(&self, v: String) -> Option<String> {
        let v = match &self.format {
            Some(f) if self.datatype != Datatype::String => values::normalize(&v, self.datatype, f).ok()?,
            _ => v,
        };
        let v = if self.datatype == Datatype::String {
            v
        } else {
            values::canonical(&v, self.datatype).ok()?
        };
        if self.minimum.is_some() || self.maximum.is_some() {
            if let Some(n) = values::numeric(&v) {
                if self.minimum.is_some_and(|m| n < m) || self.maximum.is_some_and(|m| n > m) {
                    return None;
                }
            }
        }
        Some(v)
    }

    /// Values a raw cell stands for: none, one, or several tokens.
    fn read(&self, raw: Option<&str>) -> Vec<String> {
        let cell = raw
            .filter(|v| !v.is_empty() && !self.markers.iter().any(|m| m == v))
            .map(str::to_string)
            .or_else(|| self.default.clone());
        let Some(cell) = cell else {
            return Vec::new();
        };
        match self.separator {
            None => self.finish(cell).into_iter().collect(),
            Some(sep) => cell
                .split(sep)
                .filter(|t| !t.is_empty() && !self.markers.iter().any(|m| m == t))
                .filter_map(|t| self.finish(t.to_string()))
                .collect(),
        }
    }
}

/// A source with every cell resolved.
struct Resolved<'a> {
    source: &'a TabularSource,
    rules: Vec<ColumnRule>,
    cells: Vec<Vec<Vec<String>>>,
}

impl Resolved<'_> {
    fn values(&self, row: usize, column: &str) -> &[String] {
        match self.source.column_index(column) {
            Some(i) => &self.cells[row][i],
            None => &[],
        }
    }

    fn single(&self, row: usize, column: &str) -> Option<&str> {
        self.values(row, column).first().map(String::as_str)
    }

    fn rule(&self, column: &str) -> Option<&ColumnRule> {
        self.source.column_index(column).map(|i| &self.rules[i])
    }
}

fn resolve<'a>(vtd: &'a VirtualTabularDataset, source: &'a TabularSource) -> Resolved<'a> {
    let rules: Vec<ColumnRule> = source
        .columns
        .iter()
        .map(|c| {
            let hint = vtd
                .mapping
                .triples_maps
                .iter()
                .filter(|t| t.source_path == source.path)
                .flat_map(|t| &t.poms)
                .find_map(|p| match (&p.object, &p.datatype) {
                    (ObjectMap::Reference(r), Some(h)) if r == c => Datatype::from_xsd(h),
                    _ => None,
                });
            ColumnRule::from_metadata(vtd.metadata.column(&source.path, c), hint)
        })
        .collect();
    let cells = source
        .rows
        .iter()
        .map(|r| {
            r.iter()
                .zip(&rules)
                .map(|(cell, rule)| rule.read(cell.as_deref()))
                .collect()
        })
        .collect();
    Resolved { source, rules, cells }
}

fn subject(tm: &TriplesMap, r: &Resolved<'_>, row: usize) -> Option<Term> {
    tm.subject.render(|c| r.single(row, c)).map(Term::Iri)
}

/// Every triple the mapping produces over the files.
pub fn materialize(vtd: &VirtualTabularDataset, registry: &FunctionRegistry) -> Result<BTreeSet<Triple>> {
    let mut resolved: HashMap<&str, Resolved<'_>> = HashMap::new();
    for s in &vtd.sources {
        resolved.insert(s.path.as_str(), resolve(vtd, s));
    }
    let get = |path: &str| {
        resolved
            .get(path)
            .ok_or_else(|| Error::UnmappedSource(path.to_string()))
    };
    let mut out = BTreeSet::new();
    for tm in &vtd.mapping.triples_maps {
        let r = get(&tm.source_path)?;
        for row in 0..r.source.row_count() {
            let Some(s) = subject(tm, r, row) else { continue };
            if let Some(c) = &tm.class_iri {
                out.insert((s.clone(), RDF_TYPE.to_string(), Term::iri(c.as_str())));
            }
            for pom in &tm.poms {
                let objects: Vec<Term> = match &pom.object {
                    ObjectMap::Reference(c) => {
                        let rule = r.rule(c);
                        r.values(row, c)
                            .iter()
                            .map(|v| literal(v, rule, pom.datatype.as_deref()))
                            .collect()
                    }
                    ObjectMap::Template { template, kind } => template
                        .render(|c| r.single(row, c))
                        .map(|v| match kind {
                            TermKind::Iri => Term::Iri(v),
                            TermKind::Literal => Term::literal(v, pom.datatype.as_deref()),
                        })
                        .into_iter()
                        .collect(),
                    ObjectMap::Function(call) => {
                        let lookup = |c: &str| r.single(row, c);
                        registry
                            .call(call, &lookup)
                            .map_err(|message| Error::FunctionError { row: row + 1, message })?
                            .map(|v| Term::literal(v, pom.datatype.as_deref()))
                            .into_iter()
                            .collect()
                    }
                    ObjectMap::Join {
                        parent,
                        condition,
                        project,
                    } => {
                        let p = vtd.mapping.get(parent).ok_or_else(|| Error::DanglingParentMap {
                            triples_map: tm.id.clone(),
                            parent: parent.clone(),
                        })?;
                        let pr = get(&p.source_path)?;
                        let Some(key) = r.single(row, &condition.child) else {
                            continue;
                        };
                        let mut objs = Vec::new();
                        for prow in 0..pr.source.row_count() {
                            if pr.single(prow, &condition.parent) != Some(key) {
                                continue;
                            }
                            match project {
                                Some(col) => objs.extend(
                                    pr.values(prow, col)
                                        .iter()
                                        .map(|v| literal(v, pr.rule(col), pom.datatype.as_deref())),
                                ),
                                None => objs.extend(subject(p, pr, prow)),
                            }
                        }
                        objs
                    }
                };
                for o in objects {
                    out.insert((s.clone(), pom.predicate.clone(), o));
                }
            }
        }
    }
    Ok(out)
}

fn literal(v: &str, rule: Option<&ColumnRule>, hint: Option<&str>) -> Term {
    match rule {
        Some(r) if r.declared => Term::literal(
            v,
            (r.datatype != Datatype::String)
                .then(|| r.datatype.xsd_iri())
                .as_deref(),
        ),
        _ => Term::literal(v, hint),
    }
}

type Solution = HashMap<String, Term>;

struct Graph<'a> {
    by_predicate: HashMap<&'a str, Vec<(&'a Term, &'a Term)>>,
    by_subject: HashMap<(&'a str, &'a Term), Vec<(&'a Term, &'a Term)>>,
}

impl<'a> Graph<'a> {
    fn new(triples: &'a BTreeSet<Triple>) -> Self {
        let mut by_predicate: HashMap<&str, Vec<(&Term, &Term)>> = HashMap::new();
        let mut by_subject: HashMap<(&str, &Term), Vec<(&Term, &Term)>> = HashMap::new();
        for (s, p, o) in triples {
            by_predicate.entry(p).or_default().push((s, o));
            by_subject.entry((p, s)).or_default().push((s, o));
        }
        Graph {
            by_predicate,
            by_subject,
        }
    }

    fn extend(&self, sol: &Solution, tp: &TriplePattern) -> Vec<Solution> {
        let lookup = |x: &VarOrTerm| match x {
            VarOrTerm::Term(t) => Some(t.clone()),
            VarOrTerm::Var(v) => sol.get(v).cloned(),
        };
        let bind = |sol: &mut Solution, x: &VarOrTerm, t: &Term| -> bool {
            match x {
                VarOrTerm::Term(c) => c == t,
                VarOrTerm::Var(v) => match sol.get(v) {
                    Some(b) => b == t,
                    None => {
                        sol.insert(v.clone(), t.clone());
                        true
                    }
                },
            }
        };
        let mut out = Vec::new();
        let pairs: Vec<(&Term, &Term)> = match lookup(&tp.subject) {
            Some(s) => self
                .by_subject
                .get(&(tp.predicate.as_str(), &s))
                .cloned()
                .unwrap_or_default(),
            None => self
                .by_predicate
                .get(tp.predicate.as_str())
                .cloned()
                .unwrap_or_default(),
        };
        for (s, o) in pairs {
            let mut next = sol.clone();
            if bind(&mut next, &tp.subject, s) && bind(&mut next, &tp.object, o) {
                out.push(next);
            }
        }
        out
    }

    fn bgp(&self, start: Vec<Solution>, patterns: &[TriplePattern]) -> Vec<Solution> {
        let mut sols = start;
        for tp in patterns {
            sols = sols.iter().flat_map(|s| self.extend(s, tp)).collect();
        }
        sols
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Val {
    Num(f64),
    Str(String),
    Date(String),
    Time(String),
    DateTime(String),
    Bool(bool),
    Iri(String),
    Other(String, String),
}

fn val(t: &Term) -> Val {
    match t {
        Term::Iri(i) => Val::Iri(i.clone()),
        Term::Literal { value, datatype } => match t.datatype() {
            Some(d) if d.is_numeric() => match values::numeric(value) {
                Some(n) => Val::Num(n),
                None => Val::Other(value.clone(), d.xsd_iri()),
            },
            Some(Datatype::Date) => Val::Date(value.clone()),
            Some(Datatype::Time) => Val::Time(value.clone()),
            Some(Datatype::Datetime) => Val::DateTime(value.clone()),
            Some(Datatype::Boolean) => Val::Bool(value == "true"),
            Some(_) => Val::Str(value.clone()),
            None => Val::Other(value.clone(), datatype.clone().unwrap_or_default()),
        },
    }
}

/// Evaluates with SPARQL error semantics: `Err(())` is a type error or an
/// unbound variable.
fn eval(e: &Expr, sol: &Solution) -> std::result::Result<Val, ()> {
    match e {
        Expr::Var(v) => sol.get(v).map(val).ok_or(()),
        Expr::Const(t) => Ok(val(t)),
        Expr::Not(a) => match eval(a, sol)? {
            Val::Bool(b) => Ok(Val::Bool(!b)),
            _ => Err(()),
        },
        Expr::Neg(a) => match eval(a, sol)? {
            Val::Num(n) => Ok(Val::Num(-n)),
            _ => Err(()),
        },
        Expr::Binary(op, a, b) => match op {
            BinOp::Or | BinOp::And => {
                let x = eval(a, sol).and_then(ebv);
                let y = eval(b, sol).and_then(ebv);
                let decisive = *op == BinOp::Or;
                match (x, y) {
                    (Ok(p), _) | (_, Ok(p)) if p == decisive => Ok(Val::Bool(decisive)),
                    (Ok(_), Ok(_)) => Ok(Val::Bool(!decisive)),
                    _ => Err(()),
                }
            }
            op if op.is_comparison() => {
                let (x, y) = (eval(a, sol)?, eval(b, sol)?);
                let ord = match (&x, &y) {
                    (Val::Num(p), Val::Num(q)) => p.partial_cmp(q).ok_or(())?,
                    (Val::Str(p), Val::Str(q))
                    | (Val::Date(p), Val::Date(q))
                    | (Val::Time(p), Val::Time(q))
                    | (Val::DateTime(p), Val::DateTime(q)) => p.cmp(q),
                    _ if matches!(op, BinOp::Eq | BinOp::Ne) => {
                        let same = match (&x, &y) {
                            (Val::Bool(p), Val::Bool(q)) => p == q,
                            (Val::Iri(p), Val::Iri(q)) => p == q,
                            (Val::Other(p, d), Val::Other(q, e)) if d == e => p == q,
                            _ => return Err(()),
                        };
                        if same {
                            Ordering::Equal
                        } else {
                            Ordering::Less
                        }
                    }
                    _ => return Err(()),
                };
                Ok(Val::Bool(match op {
                    BinOp::Eq => ord == Ordering::Equal,
                    BinOp::Ne => ord != Ordering::Equal,
                    BinOp::Lt => ord == Ordering::Less,
                    BinOp::Le => ord != Ordering::Greater,
                    BinOp::Gt => ord == Ordering::Greater,
                    _ => ord != Ordering::Less,
                }))
            }
            op => match (eval(a, sol)?, eval(b, sol)?) {
                (Val::Num(p), Val::Num(q)) => Ok(Val::Num(match op {
                    BinOp::Add => p + q,
                    BinOp::Sub => p - q,
                    BinOp::Mul => p * q,
                    _ if q == 0.0 => return Err(()),
                    _ => p / q,
                })),
                _ => Err(()),
            },
        },
    }
}

fn ebv(v: Val) -> std::result::Result<bool, ()> {
    match v {
        Val::Bool(b) => Ok(b),
        _ => Err(()),
    }
}

fn passes(filters: &[Expr], sol: &Solution) -> bool {
    filters.iter().all(|f| matches!(eval(f, sol), Ok(Val::Bool(true))))
}

/// Sort key matching the engine's ordering: unbound, then numbers, then
/// everything else by lexical form.
fn order_cmp(a: Option<&Term>, b: Option<&Term>) -> Ordering {
    fn rank(t: Option<&Term>) -> (u8, f64, &str) {
        match t {
            None => (0, 0.0, ""),
            Some(t) => match (t.datatype(), values::numeric(t.lexical())) {
                (Some(d), Some(n)) if d.is_numeric() => (1, n, ""),
                _ => (2, 0.0, t.lexical()),
            },
        }
    }
    let (ra, na, la) = rank(a);
    let (rb, nb, lb) = rank(b);
    ra.cmp(&rb)
        .then(na.partial_cmp(&nb).unwrap_or(Ordering::Equal))
        .then(la.cmp(lb))
}

/// Evaluates `q` over `triples` by brute force.
pub fn evaluate(q: &Query, triples: &BTreeSet<Triple>) -> ResultSet {
    let g = Graph::new(triples);
    let mut sols = g.bgp(vec![Solution::new()], &q.bgp);
    for opt in &q.optionals {
        sols = sols
            .into_iter()
            .flat_map(|s| {
                let ext: Vec<Solution> = g
                    .bgp(vec![s.clone()], &opt.patterns)
                    .into_iter()
                    .filter(|e| passes(&opt.filters, e))
                    .collect();
                if ext.is_empty() {
                    vec![s]
                } else {
                    ext
                }
            })
            .collect();
    }
    sols.retain(|s| passes(&q.filters, s));
    if !q.order_by.is_empty() {
        sols.sort_by(|a, b| {
            q.order_by
                .iter()
                .map(|k| {
                    let o = order_cmp(a.get(&k.var), b.get(&k.var));
                    if k.descending {
                        o.reverse()
                    } else {
                        o
                    }
                })
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        });
    }
    let vars = q.projected_vars();
    let mut rows: Vec<Row> = sols
        .iter()
        .map(|s| vars.iter().map(|v| s.get(v).cloned()).collect())
        .collect();
    if q.distinct {
        let mut seen = BTreeSet::new();
        rows.retain(|r| seen.insert(r.clone()));
    }
    let offset = q.offset.unwrap_or(0) as usize;
    let rows: Vec<Row> = rows
        .into_iter()
        .skip(offset)
        .take(q.limit.map_or(usize::MAX, |l| l as usize))
        .collect();
    ResultSet { vars, rows }
}

/// Materializes and evaluates in one step.
pub fn answer(q: &Query, vtd: &VirtualTabularDataset, registry: &FunctionRegistry) -> Result<ResultSet> {
    Ok(evaluate(q, &materialize(vtd, registry)?))
}
