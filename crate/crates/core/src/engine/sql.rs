//! SPARQL to SQL translation over a mapping of generated tables.
//!
//! Each basic graph pattern becomes a `UNION` of branches, one per choice
//! of triples map for every subject group and of predicate-object rule for
//! every pattern. A branch yields, per variable, the term's value and a
//! shape tag (`I` for IRIs, `L` or `L<datatype>` for literals) so answers
//! can be decoded back into terms. OPTIONAL groups become `LEFT JOIN`s of
//! their own unions.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::frontends::{BinOp, Expr, Query, TriplePattern, VarOrTerm};
use crate::model::{Datatype, MappingDocument, ObjectMap, Template, TemplatePart, TermKind, TriplesMap, RDF_TYPE};
use crate::schema::ddl::quote;
use crate::schema::{DdlScript, TableDef};
use crate::term::Term;

const MAX_BRANCHES: usize = 4096;

/// A translated query. Column `v{i}` holds the value of `vars[i]` and
/// `v{i}_t` its shape tag.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SqlQuery {
    pub text: String,
    pub vars: Vec<String>,
}

pub fn sql_str(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

/// Datatype IRI as it appears on decoded terms: known XSD types in their
/// canonical spelling, `xsd:string` as a plain literal.
pub fn normalize_datatype(hint: Option<&str>) -> Option<String> {
    let hint = hint?;
    match Datatype::from_xsd(hint) {
        Some(Datatype::String) => None,
        Some(dt) => Some(dt.xsd_iri()),
        None => Some(hint.to_string()),
    }
}

pub fn term_shape(t: &Term) -> String {
    match t {
        Term::Iri(_) => "I".into(),
        Term::Literal { datatype: None, .. } => "L".into(),
        Term::Literal { datatype: Some(d), .. } => format!("L{d}"),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Part {
    Text(String),
    Col {
        alias: String,
        column: String,
        storage: Datatype,
    },
}

impl Part {
    fn sql(&self) -> String {
        match self {
            Part::Text(t) => sql_str(t),
            Part::Col { alias, column, .. } => format!("{}.{}", quote(alias), quote(column)),
        }
    }

    fn numeric(&self) -> bool {
        matches!(self, Part::Col { storage, .. } if storage.is_numeric())
    }

    fn text_sql(&self) -> String {
        if self.numeric() {
            format!("CAST({} AS TEXT)", self.sql())
        } else {
            self.sql()
        }
    }
}

fn col_eq(a: &Part, b: &Part) -> String {
    if a.numeric() == b.numeric() {
        format!("{} = {}", a.sql(), b.sql())
    } else {
        format!("{} = {}", a.text_sql(), b.text_sql())
    }
}

/// A term as a function of the current row.
#[derive(Debug, Clone)]
struct Bound {
    kind: TermKind,
    parts: Vec<Part>,
    datatype: Option<String>,
}

impl Bound {
    fn constant_iri(iri: &str) -> Self {
        Bound {
            kind: TermKind::Iri,
            parts: vec![Part::Text(iri.to_string())],
            datatype: None,
        }
    }

    fn shape(&self) -> String {
        match (self.kind, &self.datatype) {
            (TermKind::Iri, _) => "I".into(),
            (TermKind::Literal, None) => "L".into(),
            (TermKind::Literal, Some(d)) => format!("L{d}"),
        }
    }

    fn numeric(&self) -> bool {
        matches!(self.parts.as_slice(), [p] if p.numeric())
    }

    fn value_sql(&self, as_text: bool) -> String {
        match self.parts.as_slice() {
            [] => "''".into(),
            [p] if as_text => p.text_sql(),
            [p] => p.sql(),
            parts => format!(
                "({})",
                parts.iter().map(Part::text_sql).collect::<Vec<_>>().join(" || ")
            ),
        }
    }

    fn columns(&self) -> impl Iterator<Item = &Part> {
        self.parts.iter().filter(|p| matches!(p, Part::Col { .. }))
    }

    fn constant_text(&self) -> Option<String> {
        let mut s = String::new();
        for p in &self.parts {
            match p {
                Part::Text(t) => s.push_str(t),
                Part::Col { .. } => return None,
            }
        }
        Some(s)
    }
}

/// Column-wise comparison is exact only when both sides have the same
/// literal text around at most one column.
fn aligned(a: &Bound, b: &Bound) -> bool {
    a.parts.len() == b.parts.len()
        && a.columns().count() <= 1
        && a.parts.iter().zip(&b.parts).all(|(x, y)| match (x, y) {
            (Part::Text(s), Part::Text(t)) => s == t,
            (Part::Col { .. }, Part::Col { .. }) => true,
            _ => false,
        })
}

/// Conditions under which two bound terms are equal; `None` if never.
fn eq_bounds(a: &Bound, b: &Bound) -> Option<Vec<String>> {
    if a.shape() != b.shape() {
        return None;
    }
    if let (Some(x), Some(y)) = (a.constant_text(), b.constant_text()) {
        return (x == y).then(Vec::new);
    }
    if aligned(a, b) {
        return Some(
            a.parts
                .iter()
                .zip(&b.parts)
                .filter(|(x, _)| matches!(x, Part::Col { .. }))
                .map(|(x, y)| col_eq(x, y))
                .collect(),
        );
    }
    Some(vec![format!("{} = {}", a.value_sql(true), b.value_sql(true))])
}

/// Conditions under which a bound term equals a constant; `None` if never.
fn eq_const(b: &Bound, t: &Term) -> Option<Vec<String>> {
    if b.shape() != term_shape(t) {
        return None;
    }
    let lex = t.lexical();
    if let Some(text) = b.constant_text() {
        return (text == lex).then(Vec::new);
    }
    if let [p] = b.parts.as_slice() {
        if p.numeric() && b.kind == TermKind::Literal {
            return crate::values::numeric(lex).map(|_| vec![format!("{} = {lex}", p.sql())]);
        }
        return Some(vec![format!("{} = {}", p.text_sql(), sql_str(lex))]);
    }
    let template = Template {
        parts: b
            .parts
            .iter()
            .enumerate()
            .map(|(i, p)| match p {
                Part::Text(t) => TemplatePart::Text(t.clone()),
                Part::Col { .. } => TemplatePart::Column(i.to_string()),
            })
            .collect(),
    };
    let values = template.invert(lex)?;
    Some(
        values
            .into_iter()
            .map(|(i, v)| {
                let p = &b.parts[i.parse::<usize>().expect("index column")];
                format!("{} = {}", p.text_sql(), sql_str(&v))
            })
            .collect(),
    )
}

#[derive(Debug, Clone, Default)]
struct Branch {
    from: Vec<(String, String)>,
    conds: Vec<String>,
    binds: BTreeMap<String, Bound>,
    not_null: BTreeSet<String>,
}

impl Branch {
    fn alias(&mut self, table: &str) -> String {
        let a = format!("t{}", self.from.len());
        self.from.push((table.to_string(), a.clone()));
        a
    }

    /// Binds a pattern position; false when the branch can never match.
    fn bind(&mut self, slot: &VarOrTerm, b: Bound) -> bool {
        self.not_null.extend(b.columns().map(Part::sql));
        let conds = match slot {
            VarOrTerm::Var(v) => match self.binds.get(v) {
                Some(prev) => eq_bounds(prev, &b),
                None => {
                    self.binds.insert(v.clone(), b);
                    Some(Vec::new())
                }
            },
            VarOrTerm::Term(t) => eq_const(&b, t),
        };
        match conds {
            Some(c) => {
                self.conds.extend(c);
                true
            }
            None => false,
        }
    }
}

/// What is known about a variable across the branches binding it.
#[derive(Debug, Clone, Default)]
struct VarInfo {
    shapes: BTreeSet<String>,
    numeric: bool,
}

impl VarInfo {
    fn merge(&self, other: &VarInfo) -> VarInfo {
        VarInfo {
            shapes: self.shapes.union(&other.shapes).cloned().collect(),
            numeric: self.numeric && other.numeric,
        }
    }
}

#[derive(Debug, Clone)]
struct ScopeVar {
    value: String,
    shape: String,
    info: VarInfo,
    nullable: bool,
}

struct Translator<'a> {
    m: &'a MappingDocument,
    ddl: &'a DdlScript,
    index: BTreeMap<String, usize>,
}

fn subject_key(s: &VarOrTerm) -> String {
    s.to_string()
}

impl<'a> Translator<'a> {
    fn table(&self, tm: &TriplesMap) -> Result<&'a TableDef> {
        self.ddl
            .table(&tm.source_path)
            .ok_or_else(|| Error::UnmappedSource(tm.source_path.clone()))
    }

    fn col(&self, t: &TableDef, alias: &str, column: &str) -> Result<Part> {
        let c = t
            .column(column)
            .ok_or_else(|| Error::Invalid(format!("column `{column}` is not in table {}", t.name)))?;
        Ok(Part::Col {
            alias: alias.to_string(),
            column: column.to_string(),
            storage: c.datatype,
        })
    }

    fn template(&self, t: &TableDef, alias: &str, tpl: &Template) -> Result<Vec<Part>> {
        tpl.parts
            .iter()
            .map(|p| match p {
                TemplatePart::Text(s) => Ok(Part::Text(s.clone())),
                TemplatePart::Column(c) => self.col(t, alias, c),
            })
            .collect()
    }

    fn object(&self, br: &mut Branch, tm: &TriplesMap, alias: &str, pom_idx: usize) -> Result<Bound> {
        let t = self.table(tm)?;
        let pom = &tm.poms[pom_idx];
        Ok(match &pom.object {
            ObjectMap::Reference(c) => Bound {
                kind: TermKind::Literal,
                parts: vec![self.col(t, alias, c)?],
                datatype: normalize_datatype(pom.datatype.as_deref()),
            },
            ObjectMap::Template { template, kind } => Bound {
                kind: *kind,
                parts: self.template(t, alias, template)?,
                datatype: match kind {
                    TermKind::Literal => normalize_datatype(pom.datatype.as_deref()),
                    TermKind::Iri => None,
                },
            },
            ObjectMap::Join {
                parent,
                condition,
                project,
            } => {
                let p = self.m.get(parent).ok_or_else(|| Error::DanglingParentMap {
                    triples_map: tm.id.clone(),
                    parent: parent.clone(),
                })?;
                let pt = self.table(p)?;
                let pa = br.alias(&pt.name);
                let child = self.col(t, alias, &condition.child)?;
                let parent_col = self.col(pt, &pa, &condition.parent)?;
                br.conds.push(col_eq(&child, &parent_col));
                br.not_null.insert(child.sql());
                br.not_null.insert(parent_col.sql());
                match project {
                    Some(c) => Bound {
                        kind: TermKind::Literal,
                        parts: vec![self.col(pt, &pa, c)?],
                        datatype: normalize_datatype(pom.datatype.as_deref()),
                    },
                    None => Bound {
                        kind: TermKind::Iri,
                        parts: self.template(pt, &pa, &p.subject)?,
                        datatype: None,
                    },
                }
            }
            ObjectMap::Function(call) => {
                return Err(Error::Invalid(format!(
                    "function `{}` must be materialized before query translation",
                    call.function_name
                )))
            }
        })
    }

    /// All branches of a basic graph pattern; empty when it has no answers.
    fn compile_bgp(&self, patterns: &[TriplePattern]) -> Result<Vec<Branch>> {
        let mut groups: Vec<(VarOrTerm, Vec<&TriplePattern>)> = Vec::new();
        for tp in patterns {
            match groups
                .iter_mut()
                .find(|(s, _)| subject_key(s) == subject_key(&tp.subject))
            {
                Some((_, v)) => v.push(tp),
                None => groups.push((tp.subject.clone(), vec![tp])),
            }
        }
        // Per group: candidate maps with the rule options of every pattern.
        type Options = Vec<Vec<Option<usize>>>;
        let mut per_group: Vec<Vec<(&TriplesMap, Options)>> = Vec::new();
        let mut total: usize = 1;
        for (_, tps) in &groups {
            let mut cands = Vec::new();
            let mut count = 0usize;
            'tm: for tm in &self.m.triples_maps {
                let mut opts = Vec::new();
                for tp in tps {
                    if tp.predicate == RDF_TYPE {
                        let Some(class) = &tm.class_iri else { continue 'tm };
                        if let VarOrTerm::Term(t) = &tp.object {
                            if t != &Term::iri(class.as_str()) {
                                continue 'tm;
                            }
                        }
                        opts.push(vec![None]);
                    } else {
                        let o: Vec<Option<usize>> = tm
                            .poms
                            .iter()
                            .enumerate()
                            .filter(|(_, p)| p.predicate == tp.predicate)
                            .map(|(i, _)| Some(i))
                            .collect();
                        if o.is_empty() {
                            continue 'tm;
                        }
                        opts.push(o);
                    }
                }
                count = count.saturating_add(opts.iter().map(Vec::len).product::<usize>());
                cands.push((tm, opts));
            }
            if cands.is_empty() {
                return Ok(Vec::new());
            }
            total = total.saturating_mul(count);
            per_group.push(cands);
        }
        if total > MAX_BRANCHES {
            return Err(Error::UnsupportedFeature(format!(
                "query expands to {total} union branches (limit {MAX_BRANCHES})"
            )));
        }

        let mut branches = vec![Branch::default()];
        for ((subject, tps), cands) in groups.iter().zip(&per_group) {
            let mut next = Vec::new();
            for br in &branches {
                for (tm, opts) in cands {
                    for choice in product(opts) {
                        let mut b = br.clone();
                        if self.extend(&mut b, subject, tps, tm, &choice)? {
                            next.push(b);
                        }
                    }
                }
            }
            branches = next;
        }
        Ok(branches)
    }

    fn extend(
        &self,
        br: &mut Branch,
        subject: &VarOrTerm,
        tps: &[&TriplePattern],
        tm: &TriplesMap,
        choice: &[Option<usize>],
    ) -> Result<bool> {
        let t = self.table(tm)?;
        let alias = br.alias(&t.name);
        let s = Bound {
            kind: TermKind::Iri,
            parts: self.template(t, &alias, &tm.subject)?,
            datatype: None,
        };
        if !br.bind(subject, s) {
            return Ok(false);
        }
        for (tp, c) in tps.iter().zip(choice) {
            let o = match c {
                None => Bound::constant_iri(tm.class_iri.as_deref().unwrap_or_default()),
                Some(i) => self.object(br, tm, &alias, *i)?,
            };
            if !br.bind(&tp.object, o) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Renders a union of branches over `vars` and reports what it binds.
    fn render_union(&self, branches: &[Branch], vars: &[String]) -> (String, BTreeMap<String, VarInfo>) {
        let mut infos: BTreeMap<String, VarInfo> = BTreeMap::new();
        for v in vars {
            let bounds: Vec<&Bound> = branches.iter().filter_map(|b| b.binds.get(v)).collect();
            infos.insert(
                v.clone(),
                VarInfo {
                    shapes: bounds.iter().map(|b| b.shape()).collect(),
                    numeric: !bounds.is_empty() && bounds.iter().all(|b| b.numeric()),
                },
            );
        }
        if branches.is_empty() {
            let cols: Vec<String> = vars
                .iter()
                .flat_map(|v| {
                    let k = self.index[v];
                    [format!("NULL AS \"v{k}\""), format!("NULL AS \"v{k}_t\"")]
                })
                .collect();
            let cols = if cols.is_empty() {
                vec!["NULL AS \"none\"".to_string()]
            } else {
                cols
            };
            return (format!("SELECT {} WHERE 0", cols.join(", ")), infos);
        }
        let mut parts = Vec::new();
        for br in branches {
            let cols: Vec<String> = vars
                .iter()
                .flat_map(|v| {
                    let k = self.index[v];
                    let b = &br.binds[v];
                    let as_text = !infos[v].numeric;
                    [
                        format!("{} AS \"v{k}\"", b.value_sql(as_text)),
                        format!("{} AS \"v{k}_t\"", sql_str(&b.shape())),
                    ]
                })
                .collect();
            let cols = if cols.is_empty() {
                vec!["1 AS \"none\"".to_string()]
            } else {
                cols
            };
            let from: Vec<String> = br
                .from
                .iter()
                .map(|(t, a)| format!("{} AS {}", quote(t), quote(a)))
                .collect();
            let mut conds = br.conds.clone();
            conds.extend(br.not_null.iter().map(|c| format!("{c} IS NOT NULL")));
            let mut sql = format!("SELECT DISTINCT {} FROM {}", cols.join(", "), from.join(", "));
            if !conds.is_empty() {
                sql.push_str(" WHERE ");
                sql.push_str(&conds.join(" AND "));
            }
            parts.push(sql);
        }
        (parts.join("\nUNION\n"), infos)
    }
}

fn product(opts: &[Vec<Option<usize>>]) -> Vec<Vec<Option<usize>>> {
    let mut out = vec![Vec::new()];
    for o in opts {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                o.iter().map(move |x| {
                    let mut p = prefix.clone();
                    p.push(*x);
                    p
                })
            })
            .collect();
    }
    out
}

fn bgp_vars(patterns: &[TriplePattern], order: &[String]) -> Vec<String> {
    let used: BTreeSet<&str> = patterns.iter().flat_map(|tp| tp.vars()).collect();
    order.iter().filter(|v| used.contains(v.as_str())).cloned().collect()
}

fn value_eq(a: &ScopeVar, b: &ScopeVar) -> String {
    let (x, y) = if a.info.numeric && b.info.numeric {
        (a.value.clone(), b.value.clone())
    } else {
        (
            format!("CAST({} AS TEXT)", a.value),
            format!("CAST({} AS TEXT)", b.value),
        )
    };
    format!("({x} = {y} AND {} = {})", a.shape, b.shape)
}

/// Translates `q` against the table-level mapping `m`.
pub fn translate_query(q: &Query, m: &MappingDocument, ddl: &DdlScript) -> Result<SqlQuery> {
    let order = q.pattern_vars();
    let tr = Translator {
        m,
        ddl,
        index: order.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect(),
    };

    let req_vars = bgp_vars(&q.bgp, &order);
    let branches = tr.compile_bgp(&q.bgp)?;
    let (req_sql, infos) = tr.render_union(&branches, &req_vars);
    let mut from = format!("({req_sql}) AS \"q\"");
    let mut scope: BTreeMap<String, ScopeVar> = BTreeMap::new();
    for v in &req_vars {
        let k = tr.index[v];
        scope.insert(
            v.clone(),
            ScopeVar {
                value: format!("\"q\".\"v{k}\""),
                shape: format!("\"q\".\"v{k}_t\""),
                info: infos[v].clone(),
                nullable: false,
            },
        );
    }

    for (oi, opt) in q.optionals.iter().enumerate() {
        let branches = tr.compile_bgp(&opt.patterns)?;
        if branches.is_empty() {
            continue;
        }
        let vars = bgp_vars(&opt.patterns, &order);
        let (sql, infos) = tr.render_union(&branches, &vars);
        let alias = format!("o{oi}");
        let mut on = Vec::new();
        for v in &vars {
            let k = tr.index[v];
            let mine = ScopeVar {
                value: format!("\"{alias}\".\"v{k}\""),
                shape: format!("\"{alias}\".\"v{k}_t\""),
                info: infos[v].clone(),
                nullable: true,
            };
            match scope.get(v).cloned() {
                Some(prev) => {
                    let eq = value_eq(&prev, &mine);
                    if prev.nullable {
                        on.push(format!("({} IS NULL OR {eq})", prev.value));
                        scope.insert(
                            v.clone(),
                            ScopeVar {
                                value: format!("COALESCE({}, {})", prev.value, mine.value),
                                shape: format!("COALESCE({}, {})", prev.shape, mine.shape),
                                info: prev.info.merge(&mine.info),
                                nullable: true,
                            },
                        );
                    } else {
                        on.push(eq);
                    }
                }
                None => {
                    scope.insert(v.clone(), mine);
                }
            }
        }
        for f in &opt.filters {
            on.push(compile_filter(f, &scope)?);
        }
        let on = if on.is_empty() {
            "1".to_string()
        } else {
            on.join(" AND ")
        };
        from.push_str(&format!("\nLEFT JOIN ({sql}) AS \"{alias}\" ON {on}"));
    }

    let mut wheres = Vec::new();
    for f in &q.filters {
        wheres.push(compile_filter(f, &scope)?);
    }

    let vars = q.projected_vars();
    let mut select = Vec::new();
    for (i, v) in vars.iter().enumerate() {
        match scope.get(v) {
            Some(s) => {
                select.push(format!("{} AS \"v{i}\"", s.value));
                select.push(format!("{} AS \"v{i}_t\"", s.shape));
            }
            None => {
                select.push(format!("NULL AS \"v{i}\""));
                select.push(format!("NULL AS \"v{i}_t\""));
            }
        }
    }
    if select.is_empty() {
        select.push("1 AS \"none\"".into());
    }
    let mut sql = format!(
        "SELECT {}{} FROM {from}",
        if q.distinct { "DISTINCT " } else { "" },
        select.join(", ")
    );
    if !wheres.is_empty() {
        sql.push_str(&format!("\nWHERE {}", wheres.join(" AND ")));
    }
    let keys: Vec<String> = q
        .order_by
        .iter()
        .filter_map(|k| {
            scope
                .get(&k.var)
                .map(|s| format!("{} {}", s.value, if k.descending { "DESC" } else { "ASC" }))
        })
        .collect();
    if !keys.is_empty() {
        sql.push_str(&format!("\nORDER BY {}", keys.join(", ")));
    }
    match (q.limit, q.offset) {
        (Some(l), Some(o)) => sql.push_str(&format!("\nLIMIT {l} OFFSET {o}")),
        (Some(l), None) => sql.push_str(&format!("\nLIMIT {l}")),
        (None, Some(o)) => sql.push_str(&format!("\nLIMIT -1 OFFSET {o}")),
        (None, None) => {}
    }
    Ok(SqlQuery { text: sql, vars })
}

#[derive(Debug, Clone, PartialEq)]
enum Cat {
    Numeric,
    Str,
    Date,
    Time,
    DateTime,
    Bool,
    Iri,
    Other(String),
    Null,
    Logical,
}

struct Ex {
    sql: String,
    cat: Cat,
    /// Lexical form when the expression is a constant.
    lexical: Option<String>,
}

impl Ex {
    fn new(sql: String, cat: Cat) -> Self {
        Ex {
            sql,
            cat,
            lexical: None,
        }
    }
}

fn cat_of_shape(shape: &str, numeric_storage: bool) -> Cat {
    match shape {
        "I" => Cat::Iri,
        "L" => Cat::Str,
        _ => {
            let dt = &shape[1..];
            match Datatype::from_xsd(dt) {
                Some(d) if d.is_numeric() => {
                    if numeric_storage {
                        Cat::Numeric
                    } else {
                        Cat::Str
                    }
                }
                Some(Datatype::Date) => Cat::Date,
                Some(Datatype::Time) => Cat::Time,
                Some(Datatype::Datetime) => Cat::DateTime,
                Some(Datatype::Boolean) => Cat::Bool,
                Some(_) => Cat::Str,
                None => Cat::Other(dt.to_string()),
            }
        }
    }
}

fn compile_filter(e: &Expr, scope: &BTreeMap<String, ScopeVar>) -> Result<String> {
    let x = compile(e, scope)?;
    Ok(logical(x, e)?.sql)
}

fn logical(x: Ex, e: &Expr) -> Result<Ex> {
    match x.cat {
        Cat::Logical | Cat::Null => Ok(Ex::new(x.sql, Cat::Logical)),
        Cat::Bool => Ok(Ex::new(format!("({} = 'true')", x.sql), Cat::Logical)),
        _ => Err(Error::UnsupportedFeature(format!(
            "effective boolean value of non-boolean expression {e}"
        ))),
    }
}

fn compile(e: &Expr, scope: &BTreeMap<String, ScopeVar>) -> Result<Ex> {
    Ok(match e {
        Expr::Var(v) => match scope.get(v) {
            None => Ex::new("NULL".into(), Cat::Null),
            Some(s) => {
                if s.info.shapes.len() > 1 {
                    return Err(Error::UnsupportedFeature(format!(
                        "FILTER over ?{v}, which binds terms of different types"
                    )));
                }
                match s.info.shapes.iter().next() {
                    None => Ex::new("NULL".into(), Cat::Null),
                    Some(shape) => Ex::new(s.value.clone(), cat_of_shape(shape, s.info.numeric)),
                }
            }
        },
        Expr::Const(t) => {
            let lex = t.lexical().to_string();
            let (sql, cat) = match t {
                Term::Iri(_) => (sql_str(&lex), Cat::Iri),
                Term::Literal { datatype, .. } => match t.datatype() {
                    Some(d) if d.is_numeric() => (format!("({lex})"), Cat::Numeric),
                    Some(Datatype::Date) => (sql_str(&lex), Cat::Date),
                    Some(Datatype::Time) => (sql_str(&lex), Cat::Time),
                    Some(Datatype::Datetime) => (sql_str(&lex), Cat::DateTime),
                    Some(Datatype::Boolean) => (sql_str(&lex), Cat::Bool),
                    Some(_) => (sql_str(&lex), Cat::Str),
                    None => (sql_str(&lex), Cat::Other(datatype.clone().unwrap_or_default())),
                },
            };
            Ex {
                sql,
                cat,
                lexical: Some(lex),
            }
        }
        Expr::Not(a) => {
            let x = logical(compile(a, scope)?, a)?;
            Ex::new(format!("(NOT {})", x.sql), Cat::Logical)
        }
        Expr::Neg(a) => {
            let x = compile(a, scope)?;
            match x.cat {
                Cat::Numeric => Ex::new(format!("(-{})", x.sql), Cat::Numeric),
                Cat::Null => x,
                _ => return Err(Error::UntypedComparison(format!("negation of non-numeric {a}"))),
            }
        }
        Expr::Binary(op, a, b) => {
            let x = compile(a, scope)?;
            let y = compile(b, scope)?;
            match op {
                BinOp::And | BinOp::Or => {
                    let x = logical(x, a)?;
                    let y = logical(y, b)?;
                    let word = if *op == BinOp::And { "AND" } else { "OR" };
                    Ex::new(format!("({} {word} {})", x.sql, y.sql), Cat::Logical)
                }
                op if op.is_comparison() => compare(*op, x, y, e)?,
                op => {
                    if x.cat == Cat::Null || y.cat == Cat::Null {
                        Ex::new("NULL".into(), Cat::Null)
                    } else if x.cat == Cat::Numeric && y.cat == Cat::Numeric {
                        let sql = match op {
                            BinOp::Div => format!("(CAST({} AS REAL) / {})", x.sql, y.sql),
                            _ => format!("({} {} {})", x.sql, op.symbol(), y.sql),
                        };
                        Ex::new(sql, Cat::Numeric)
                    } else {
                        return Err(Error::UntypedComparison(format!(
                            "arithmetic over non-numeric operands in {e}"
                        )));
                    }
                }
            }
        }
    })
}

fn compare(op: BinOp, mut x: Ex, mut y: Ex, e: &Expr) -> Result<Ex> {
    if x.cat == Cat::Null || y.cat == Cat::Null {
        return Ok(Ex::new("NULL".into(), Cat::Logical));
    }
    let untyped = || Err(Error::UntypedComparison(e.to_string()));
    let equality_only = matches!(op, BinOp::Eq | BinOp::Ne);
    match (&x.cat, &y.cat) {
        (Cat::Numeric, Cat::Numeric) => {}
        // A string against a numeric constant compares lexically.
        (Cat::Numeric, Cat::Str) if x.lexical.is_some() => {
            x.sql = sql_str(x.lexical.as_deref().unwrap_or_default());
        }
        (Cat::Str, Cat::Numeric) if y.lexical.is_some() => {
            y.sql = sql_str(y.lexical.as_deref().unwrap_or_default());
        }
        (Cat::Numeric, _) | (_, Cat::Numeric) => return untyped(),
        (a, b) if a == b => match a {
            Cat::Str | Cat::Date | Cat::Time | Cat::DateTime => {}
            Cat::Bool | Cat::Iri | Cat::Other(_) if equality_only => {}
            _ => return untyped(),
        },
        _ => return untyped(),
    }
    let sym = match op {
        BinOp::Ne => "<>",
        other => other.symbol(),
    };
    Ok(Ex::new(format!("({} {sym} {})", x.sql, y.sql), Cat::Logical))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(c: &str, storage: Datatype) -> Part {
        Part::Col {
            alias: "t0".into(),
            column: c.into(),
            storage,
        }
    }

    #[test]
    fn constants_invert_templates() {
        let b = Bound {
            kind: TermKind::Iri,
            parts: vec![Part::Text("http://ex.org/stop/".into()), col("id", Datatype::Integer)],
            datatype: None,
        };
        assert_eq!(
            eq_const(&b, &Term::iri("http://ex.org/stop/7")),
            Some(vec!["CAST(\"t0\".\"id\" AS TEXT) = '7'".to_string()])
        );
        assert_eq!(eq_const(&b, &Term::iri("http://other/7")), None);
        assert_eq!(eq_const(&b, &Term::plain("x")), None);
    }

    #[test]
    fn shapes_must_agree() {
        let a = Bound {
            kind: TermKind::Literal,
            parts: vec![col("a", Datatype::String)],
            datatype: None,
        };
        let b = Bound {
            kind: TermKind::Literal,
            parts: vec![col("b", Datatype::Integer)],
            datatype: Some(Datatype::Integer.xsd_iri()),
        };
        assert!(eq_bounds(&a, &b).is_none());
        let c = Bound { datatype: None, ..b };
        assert_eq!(
            eq_bounds(&a, &c).unwrap(),
            vec!["\"t0\".\"a\" = CAST(\"t0\".\"b\" AS TEXT)".to_string()]
        );
    }

    #[test]
    fn multi_column_templates_compare_rendered() {
        let a = Bound {
            kind: TermKind::Iri,
            parts: vec![
                col("x", Datatype::String),
                Part::Text("-".into()),
                col("y", Datatype::String),
            ],
            datatype: None,
        };
        let conds = eq_bounds(&a, &a.clone()).unwrap();
        assert_eq!(conds.len(), 1);
        assert!(conds[0].contains("||"));
    }
}
