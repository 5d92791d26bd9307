//! Recursive-descent parser for the supported SPARQL SELECT subset.
//!
//! Supported: PREFIX/BASE-free prologue with PREFIX declarations, SELECT
//! [DISTINCT] vars or `*`, a WHERE group of triple patterns (with `;` and
//! `,` shorthands and `a`), non-nested OPTIONAL groups, FILTER with
//! comparison, arithmetic and logical operators, ORDER BY, LIMIT, OFFSET.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Datatype, RDF_TYPE, XSD};
use crate::term::Term;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum VarOrTerm {
    Var(String),
    Term(Term),
}

impl VarOrTerm {
    pub fn var(&self) -> Option<&str> {
        match self {
            VarOrTerm::Var(v) => Some(v),
            VarOrTerm::Term(_) => None,
        }
    }
}

impl fmt::Display for VarOrTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarOrTerm::Var(v) => write!(f, "?{v}"),
            VarOrTerm::Term(t) => write!(f, "{t}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct TriplePattern {
    pub subject: VarOrTerm,
    pub predicate: String,
    pub object: VarOrTerm,
}

impl TriplePattern {
    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.subject.var().into_iter().chain(self.object.var())
    }
}

impl fmt::Display for TriplePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} <{}> {}", self.subject, self.predicate, self.object)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
        )
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Or => "||",
            BinOp::And => "&&",
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Expr {
    Var(String),
    Const(Term),
    Not(Box<Expr>),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Const(_) => {}
            Expr::Not(e) | Expr::Neg(e) => e.vars(out),
            Expr::Binary(_, a, b) => {
                a.vars(out);
                b.vars(out);
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Var(v) => write!(f, "?{v}"),
            Expr::Const(t) => write!(f, "{t}"),
            Expr::Not(e) => write!(f, "!({e})"),
            Expr::Neg(e) => write!(f, "-({e})"),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptionalGroup {
    pub patterns: Vec<TriplePattern>,
    pub filters: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Projection {
    All,
    Vars(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderKey {
    pub var: String,
    pub descending: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Query {
    pub projection: Projection,
    pub distinct: bool,
    pub bgp: Vec<TriplePattern>,
    pub optionals: Vec<OptionalGroup>,
    pub filters: Vec<Expr>,
    pub order_by: Vec<OrderKey>,
    pub limit: Option<u64>,
    pub offset: Option<u64>,
}

impl Query {
    /// Variables in order of first appearance across BGP then OPTIONALs.
    pub fn pattern_vars(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let all = self.bgp.iter().chain(self.optionals.iter().flat_map(|o| &o.patterns));
        for tp in all {
            for v in tp.vars() {
                if !out.iter().any(|x| x == v) {
                    out.push(v.to_string());
                }
            }
        }
        out
    }

    pub fn projected_vars(&self) -> Vec<String> {
        match &self.projection {
            Projection::All => self.pattern_vars(),
            Projection::Vars(v) => v.clone(),
        }
    }

    /// Every triple pattern, required ones first.
    pub fn all_patterns(&self) -> impl Iterator<Item = &TriplePattern> {
        self.bgp.iter().chain(self.optionals.iter().flat_map(|o| &o.patterns))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Iri(String),
    PName(String, String),
    Var(String),
    Str(String),
    Int(String),
    Dec(String),
    Dbl(String),
    Word(String),
    Punct(&'static str),
    LangTag(String),
    BNode,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Spanned>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    macro_rules! advance {
        ($n:expr) => {
            for _ in 0..$n {
                if chars[i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
        };
    }
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            advance!(1);
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                advance!(1);
            }
            continue;
        }
        let (l0, c0) = (line, col);
        let push = |out: &mut Vec<Spanned>, tok| {
            out.push(Spanned {
                tok,
                line: l0,
                column: c0,
            })
        };
        let peek = |k: usize| chars.get(i + k).copied();
        match c {
            '<' => {
                let mut j = i + 1;
                while j < chars.len()
                    && !chars[j].is_whitespace()
                    && !matches!(chars[j], '<' | '>' | '"' | '{' | '}' | '|' | '^' | '`' | '\\')
                {
                    j += 1;
                }
                if j < chars.len() && chars[j] == '>' {
                    let iri: String = chars[i + 1..j].iter().collect();
                    push(&mut out, Tok::Iri(iri));
                    advance!(j + 1 - i);
                } else if peek(1) == Some('=') {
                    push(&mut out, Tok::Punct("<="));
                    advance!(2);
                } else {
                    push(&mut out, Tok::Punct("<"));
                    advance!(1);
                }
            }
            '?' | '$' => {
                let mut j = i + 1;
                while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                if j == i + 1 {
                    return Err(syntax(l0, c0, "empty variable name"));
                }
                push(&mut out, Tok::Var(chars[i + 1..j].iter().collect()));
                advance!(j - i);
            }
            '"' | '\'' => {
                let long = peek(1) == Some(c) && peek(2) == Some(c);
                let start = if long { 3 } else { 1 };
                let mut j = i + start;
                let mut s = String::new();
                loop {
                    let Some(&ch) = chars.get(j) else {
                        return Err(syntax(l0, c0, "unterminated string literal"));
                    };
                    if ch == '\\' {
                        let esc = chars.get(j + 1).ok_or_else(|| syntax(l0, c0, "unterminated escape"))?;
                        s.push(match esc {
                            'n' => '\n',
                            't' => '\t',
                            'r' => '\r',
                            'b' => '\u{8}',
                            'f' => '\u{c}',
                            other => *other,
                        });
                        j += 2;
                        continue;
                    }
                    if long {
                        if ch == c && chars.get(j + 1) == Some(&c) && chars.get(j + 2) == Some(&c) {
                            j += 3;
                            break;
                        }
                    } else if ch == c {
                        j += 1;
                        break;
                    } else if ch == '\n' {
                        return Err(syntax(l0, c0, "newline in string literal"));
                    }
                    s.push(ch);
                    j += 1;
                }
                push(&mut out, Tok::Str(s));
                advance!(j - i);
            }
            '@' => {
                let mut j = i + 1;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '-') {
                    j += 1;
                }
                push(&mut out, Tok::LangTag(chars[i + 1..j].iter().collect()));
                advance!(j - i);
            }
            '0'..='9' | '.' if c != '.' || peek(1).is_some_and(|d| d.is_ascii_digit()) => {
                let mut j = i;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                let mut kind = 0;
                if j < chars.len() && chars[j] == '.' && chars.get(j + 1).is_some_and(|d| d.is_ascii_digit()) {
                    kind = 1;
                    j += 1;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                if j < chars.len() && matches!(chars[j], 'e' | 'E') {
                    let mut k = j + 1;
                    if k < chars.len() && matches!(chars[k], '+' | '-') {
                        k += 1;
                    }
                    if k < chars.len() && chars[k].is_ascii_digit() {
                        kind = 2;
                        j = k;
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                    }
                }
                let s: String = chars[i..j].iter().collect();
                push(
                    &mut out,
                    match kind {
                        0 => Tok::Int(s),
                        1 => Tok::Dec(s),
                        _ => Tok::Dbl(s),
                    },
                );
                advance!(j - i);
            }
            '_' if peek(1) == Some(':') => {
                let mut j = i + 2;
                while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                push(&mut out, Tok::BNode);
                advance!(j - i);
            }
            _ if c.is_alphabetic() || c == ':' || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_alphanumeric() || matches!(chars[j], '_' | '-' | '.')) {
                    j += 1;
                }
                // A trailing dot ends the triple, it is not part of the name.
                while j > i && chars[j - 1] == '.' {
                    j -= 1;
                }
                let prefix: String = chars[i..j].iter().collect();
                if j < chars.len() && chars[j] == ':' {
                    let mut k = j + 1;
                    while k < chars.len()
                        && (chars[k].is_alphanumeric() || matches!(chars[k], '_' | '-' | '.' | ':' | '%'))
                    {
                        k += 1;
                    }
                    while k > j + 1 && chars[k - 1] == '.' {
                        k -= 1;
                    }
                    let local: String = chars[j + 1..k].iter().collect();
                    push(&mut out, Tok::PName(prefix, local));
                    advance!(k - i);
                } else if prefix.is_empty() {
                    return Err(syntax(l0, c0, format!("unexpected character `{c}`")));
                } else {
                    push(&mut out, Tok::Word(prefix));
                    advance!(j - i);
                }
            }
            _ => {
                let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
                let p = match two.as_str() {
                    "<=" => "<=",
                    ">=" => ">=",
                    "!=" => "!=",
                    "&&" => "&&",
                    "||" => "||",
                    "^^" => "^^",
                    _ => "",
                };
                if !p.is_empty() {
                    push(&mut out, Tok::Punct(p));
                    advance!(2);
                    continue;
                }
                let p = match c {
                    '{' => "{",
                    '}' => "}",
                    '(' => "(",
                    ')' => ")",
                    '[' => "[",
                    ']' => "]",
                    '.' => ".",
                    ';' => ";",
                    ',' => ",",
                    '*' => "*",
                    '=' => "=",
                    '>' => ">",
                    '!' => "!",
                    '+' => "+",
                    '-' => "-",
                    '/' => "/",
                    '|' => "|",
                    '^' => "^",
                    _ => return Err(syntax(l0, c0, format!("unexpected character `{c}`"))),
                };
                push(&mut out, Tok::Punct(p));
                advance!(1);
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    prefixes: BTreeMap<String, String>,
    end: (usize, usize),
}

const UNSUPPORTED_KEYWORDS: &[&str] = &[
    "UNION",
    "GRAPH",
    "BIND",
    "VALUES",
    "MINUS",
    "SERVICE",
    "CONSTRUCT",
    "DESCRIBE",
    "ASK",
    "FROM",
    "GROUP",
    "HAVING",
    "REDUCED",
    "EXISTS",
    "NOT",
    "INSERT",
    "DELETE",
    "LOAD",
    "CLEAR",
];

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map(|s| (s.line, s.column)).unwrap_or(self.end)
    }

    fn err(&self, message: impl Into<String>) -> Error {
        let (l, c) = self.here();
        syntax(l, c, message)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|s| s.tok.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Some(Tok::Punct(q)) if *q == p)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{p}`{}", self.found())))
        }
    }

    fn found(&self) -> String {
        match self.peek() {
            None => ", found end of input".into(),
            Some(t) => format!(", found {}", describe(t)),
        }
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(x)) if x.eq_ignore_ascii_case(w))
    }

    fn eat_word(&mut self, w: &str) -> bool {
        if self.is_word(w) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn check_unsupported(&self) -> Result<()> {
        if let Some(Tok::Word(w)) = self.peek() {
            let upper = w.to_ascii_uppercase();
            if UNSUPPORTED_KEYWORDS.contains(&upper.as_str()) {
                return Err(Error::UnsupportedFeature(upper));
            }
        }
        Ok(())
    }

    fn expand(&self, prefix: &str, local: &str) -> Result<String> {
        self.prefixes
            .get(prefix)
            .map(|ns| format!("{ns}{local}"))
            .ok_or_else(|| self.err(format!("undeclared prefix `{prefix}:`")))
    }

    fn parse(mut self) -> Result<Query> {
        loop {
            self.check_unsupported()?;
            if self.eat_word("PREFIX") {
                let (prefix, _) = match self.next() {
                    Some(Tok::PName(p, l)) if l.is_empty() => (p, l),
                    _ => {
                        self.pos = self.pos.saturating_sub(1);
                        return Err(self.err("expected a prefix name like `ex:`"));
                    }
                };
                let iri = match self.next() {
                    Some(Tok::Iri(i)) => i,
                    _ => {
                        self.pos = self.pos.saturating_sub(1);
                        return Err(self.err("expected an IRI after the prefix name"));
                    }
                };
                self.prefixes.insert(prefix, iri);
            } else if self.is_word("BASE") {
                return Err(Error::UnsupportedFeature("BASE".into()));
            } else {
                break;
            }
        }
        if !self.eat_word("SELECT") {
            self.check_unsupported()?;
            return Err(self.err(format!("expected SELECT{}", self.found())));
        }
        let distinct = self.eat_word("DISTINCT");
        self.check_unsupported()?;
        let projection = if self.eat_punct("*") {
            Projection::All
        } else {
            let mut vars = Vec::new();
            loop {
                match self.peek() {
                    Some(Tok::Var(v)) => {
                        let v = v.clone();
                        if vars.contains(&v) {
                            return Err(self.err(format!("variable ?{v} projected twice")));
                        }
                        vars.push(v);
                        self.pos += 1;
                    }
                    Some(Tok::Punct("(")) => {
                        return Err(Error::UnsupportedFeature("expressions or aggregates in SELECT".into()))
                    }
                    _ => break,
                }
            }
            if vars.is_empty() {
                return Err(self.err(format!("expected variables or `*`{}", self.found())));
            }
            Projection::Vars(vars)
        };
        self.check_unsupported()?;
        self.eat_word("WHERE");
        self.expect_punct("{")?;
        let mut bgp = Vec::new();
        let mut optionals = Vec::new();
        let mut filters = Vec::new();
        self.group(&mut bgp, &mut filters, Some(&mut optionals))?;

        let mut order_by = Vec::new();
        let mut limit = None;
        let mut offset = None;
        loop {
            self.check_unsupported()?;
            if self.eat_word("ORDER") {
                if !self.eat_word("BY") {
                    return Err(self.err("expected BY after ORDER"));
                }
                loop {
                    if let Some(Tok::Var(v)) = self.peek() {
                        order_by.push(OrderKey {
                            var: v.clone(),
                            descending: false,
                        });
                        self.pos += 1;
                    } else if self.is_word("ASC") || self.is_word("DESC") {
                        let descending = self.is_word("DESC");
                        self.pos += 1;
                        self.expect_punct("(")?;
                        let var = match self.next() {
                            Some(Tok::Var(v)) => v,
                            _ => return Err(Error::UnsupportedFeature("ORDER BY on expressions".into())),
                        };
                        self.expect_punct(")")?;
                        order_by.push(OrderKey { var, descending });
                    } else {
                        break;
                    }
                }
                if order_by.is_empty() {
                    return Err(self.err("expected an ORDER BY key"));
                }
            } else if self.eat_word("LIMIT") {
                limit = Some(self.integer()?);
            } else if self.eat_word("OFFSET") {
                offset = Some(self.integer()?);
            } else {
                break;
            }
        }
        if self.peek().is_some() {
            return Err(self.err(format!("unexpected trailing input{}", self.found())));
        }
        if bgp.is_empty() {
            return Err(Error::UnsupportedFeature(
                "queries without required triple patterns".into(),
            ));
        }
        let q = Query {
            projection,
            distinct,
            bgp,
            optionals,
            filters,
            order_by,
            limit,
            offset,
        };
        let bound: BTreeSet<String> = q.pattern_vars().into_iter().collect();
        for v in q.projected_vars() {
            if !bound.contains(&v) {
                return Err(Error::Invalid(format!(
                    "projected variable ?{v} does not occur in any triple pattern"
                )));
            }
        }
        for k in &q.order_by {
            if !bound.contains(&k.var) {
                return Err(Error::Invalid(format!(
                    "ORDER BY variable ?{} does not occur in any triple pattern",
                    k.var
                )));
            }
        }
        Ok(q)
    }

    fn integer(&mut self) -> Result<u64> {
        match self.next() {
            Some(Tok::Int(s)) => s.parse().map_err(|_| self.err("integer out of range")),
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.err("expected a non-negative integer"))
            }
        }
    }

    /// Parses group contents up to and including the closing brace.
    fn group(
        &mut self,
        patterns: &mut Vec<TriplePattern>,
        filters: &mut Vec<Expr>,
        mut optionals: Option<&mut Vec<OptionalGroup>>,
    ) -> Result<()> {
        loop {
            self.check_unsupported()?;
            if self.eat_punct("}") {
                return Ok(());
            }
            if self.peek().is_none() {
                return Err(self.err("unterminated group, expected `}`"));
            }
            if self.eat_punct(".") {
                continue;
            }
            if self.is_punct("{") {
                return Err(Error::UnsupportedFeature("nested group patterns".into()));
            }
            if self.eat_word("FILTER") {
                filters.push(self.filter()?);
                continue;
            }
            if self.is_word("OPTIONAL") {
                let Some(opts) = optionals.as_deref_mut() else {
                    return Err(Error::UnsupportedFeature("nested OPTIONAL".into()));
                };
                self.pos += 1;
                self.expect_punct("{")?;
                let mut g = OptionalGroup {
                    patterns: Vec::new(),
                    filters: Vec::new(),
                };
                self.group(&mut g.patterns, &mut g.filters, None)?;
                if g.patterns.is_empty() {
                    return Err(self.err("empty OPTIONAL group"));
                }
                opts.push(g);
                continue;
            }
            self.triples(patterns)?;
            if !self.is_punct("}") {
                self.check_unsupported()?;
                if !self.is_word("FILTER") && !self.is_word("OPTIONAL") {
                    self.expect_punct(".")?;
                }
            }
        }
    }

    fn triples(&mut self, out: &mut Vec<TriplePattern>) -> Result<()> {
        let subject = self.node(false)?;
        loop {
            let predicate = self.predicate()?;
            loop {
                let object = self.node(true)?;
                out.push(TriplePattern {
                    subject: subject.clone(),
                    predicate: predicate.clone(),
                    object,
                });
                if !self.eat_punct(",") {
                    break;
                }
            }
            if !self.eat_punct(";") {
                return Ok(());
            }
            // Trailing `;` before `.` or `}` is allowed.
            if self.is_punct(".") || self.is_punct("}") {
                return Ok(());
            }
        }
    }

    fn predicate(&mut self) -> Result<String> {
        let iri = match self.peek() {
            Some(Tok::Word(w)) if w == "a" => {
                self.pos += 1;
                RDF_TYPE.to_string()
            }
            Some(Tok::Iri(i)) => {
                let i = i.clone();
                self.pos += 1;
                i
            }
            Some(Tok::PName(p, l)) => {
                let (p, l) = (p.clone(), l.clone());
                let iri = self.expand(&p, &l)?;
                self.pos += 1;
                iri
            }
            Some(Tok::Var(_)) => return Err(Error::UnsupportedFeature("variable in predicate position".into())),
            Some(Tok::Punct("^" | "(" | "!")) => return Err(Error::UnsupportedFeature("property paths".into())),
            _ => return Err(self.err(format!("expected a predicate{}", self.found()))),
        };
        if matches!(self.peek(), Some(Tok::Punct("/" | "|" | "*" | "+" | "^"))) || (self.is_punct("?")) {
            return Err(Error::UnsupportedFeature("property paths".into()));
        }
        Ok(iri)
    }

    fn node(&mut self, allow_literal: bool) -> Result<VarOrTerm> {
        let (l, c) = self.here();
        let tok = self
            .next()
            .ok_or_else(|| syntax(l, c, "expected a term, found end of input"))?;
        let term = match tok {
            Tok::Var(v) => return Ok(VarOrTerm::Var(v)),
            Tok::Iri(i) => Term::Iri(i),
            Tok::PName(p, local) => Term::Iri(
                self.expand(&p, &local)
                    .map_err(|_| syntax(l, c, format!("undeclared prefix `{p}:`")))?,
            ),
            Tok::BNode | Tok::Punct("[") => return Err(Error::UnsupportedFeature("blank nodes".into())),
            Tok::Punct("(") => return Err(Error::UnsupportedFeature("RDF collections".into())),
            other => {
                self.pos -= 1;
                if !allow_literal {
                    return Err(syntax(
                        l,
                        c,
                        format!("expected a variable or IRI, found {}", describe(&other)),
                    ));
                }
                match self.literal()? {
                    Some(t) => t,
                    None => return Err(syntax(l, c, format!("expected a term, found {}", describe(&other)))),
                }
            }
        };
        Ok(VarOrTerm::Term(term))
    }

    /// Parses a literal at the cursor, or returns `None` without consuming.
    fn literal(&mut self) -> Result<Option<Term>> {
        let xsd = |local: &str| format!("{XSD}{local}");
        let negative = self.is_punct("-")
            && matches!(
                self.toks.get(self.pos + 1).map(|s| &s.tok),
                Some(Tok::Int(_) | Tok::Dec(_) | Tok::Dbl(_))
            );
        if negative
            || self.is_punct("+")
                && matches!(
                    self.toks.get(self.pos + 1).map(|s| &s.tok),
                    Some(Tok::Int(_) | Tok::Dec(_) | Tok::Dbl(_))
                )
        {
            self.pos += 1;
        }
        let sign = if negative { "-" } else { "" };
        let t = match self.peek().cloned() {
            Some(Tok::Int(s)) => Term::literal(format!("{sign}{s}"), Some(&xsd("integer"))),
            Some(Tok::Dec(s)) => Term::literal(format!("{sign}{s}"), Some(&xsd("decimal"))),
            Some(Tok::Dbl(s)) => Term::literal(format!("{sign}{s}"), Some(&xsd("double"))),
            Some(Tok::Word(w)) if w == "true" || w == "false" => Term::literal(w, Some(&xsd("boolean"))),
            Some(Tok::Str(s)) => {
                self.pos += 1;
                if let Some(Tok::LangTag(_)) = self.peek() {
                    return Err(Error::UnsupportedFeature("language-tagged literals".into()));
                }
                if self.eat_punct("^^") {
                    let dt = match self.next() {
                        Some(Tok::Iri(i)) => i,
                        Some(Tok::PName(p, l)) => {
                            self.pos -= 1;
                            let iri = self.expand(&p, &l)?;
                            self.pos += 1;
                            iri
                        }
                        _ => {
                            self.pos = self.pos.saturating_sub(1);
                            return Err(self.err("expected a datatype IRI after `^^`"));
                        }
                    };
                    if let Some(known) = Datatype::from_xsd(&dt) {
                        if known != Datatype::String {
                            crate::values::canonical(&s, known)
                                .map_err(|e| self.err(format!("ill-typed literal: {e}")))?;
                        }
                    }
                    return Ok(Some(Term::literal(s, Some(&dt))));
                }
                return Ok(Some(Term::plain(s)));
            }
            _ => {
                if negative {
                    self.pos -= 1;
                }
                return Ok(None);
            }
        };
        self.pos += 1;
        Ok(Some(t))
    }

    fn filter(&mut self) -> Result<Expr> {
        if !self.is_punct("(") {
            if let Some(Tok::Word(w)) = self.peek() {
                return Err(Error::UnsupportedFeature(format!(
                    "FILTER function `{}`",
                    w.to_ascii_uppercase()
                )));
            }
            if let Some(Tok::PName(..) | Tok::Iri(_)) = self.peek() {
                return Err(Error::UnsupportedFeature("FILTER function calls".into()));
            }
            return Err(self.err(format!("expected `(` after FILTER{}", self.found())));
        }
        self.primary()
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.and_expr()?;
        while self.eat_punct("||") {
            let rhs = self.and_expr()?;
            lhs = Expr::Binary(BinOp::Or, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.rel_expr()?;
        while self.eat_punct("&&") {
            let rhs = self.rel_expr()?;
            lhs = Expr::Binary(BinOp::And, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn rel_expr(&mut self) -> Result<Expr> {
        let lhs = self.add_expr()?;
        let op = match self.peek() {
            Some(Tok::Punct("=")) => BinOp::Eq,
            Some(Tok::Punct("!=")) => BinOp::Ne,
            Some(Tok::Punct("<")) => BinOp::Lt,
            Some(Tok::Punct("<=")) => BinOp::Le,
            Some(Tok::Punct(">")) => BinOp::Gt,
            Some(Tok::Punct(">=")) => BinOp::Ge,
            Some(Tok::Word(w)) if w.eq_ignore_ascii_case("IN") => return Err(Error::UnsupportedFeature("IN".into())),
            _ => return Ok(lhs),
        };
        self.pos += 1;
        let rhs = self.add_expr()?;
        Ok(Expr::Binary(op, Box::new(lhs), Box::new(rhs)))
    }

    fn add_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = if self.is_punct("+") {
                BinOp::Add
            } else if self.is_punct("-") {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            self.pos += 1;
            let rhs = self.mul_expr()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn mul_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.is_punct("*") {
                BinOp::Mul
            } else if self.is_punct("/") {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat_punct("!") {
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        if self.is_punct("-") {
            if let Some(t) = self.literal()? {
                return Ok(Expr::Const(t));
            }
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat_punct("+") {
            return self.unary();
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr> {
        if self.eat_punct("(") {
            let e = self.expr()?;
            self.expect_punct(")")?;
            return Ok(e);
        }
        match self.peek().cloned() {
            Some(Tok::Var(v)) => {
                self.pos += 1;
                Ok(Expr::Var(v))
            }
            Some(Tok::Iri(i)) => {
                self.pos += 1;
                if self.is_punct("(") {
                    return Err(Error::UnsupportedFeature("FILTER function calls".into()));
                }
                Ok(Expr::Const(Term::Iri(i)))
            }
            Some(Tok::PName(p, l)) => {
                let iri = self.expand(&p, &l)?;
                self.pos += 1;
                if self.is_punct("(") {
                    return Err(Error::UnsupportedFeature("FILTER function calls".into()));
                }
                Ok(Expr::Const(Term::Iri(iri)))
            }
            Some(Tok::Word(w)) if w != "true" && w != "false" => Err(Error::UnsupportedFeature(format!(
                "FILTER function `{}`",
                w.to_ascii_uppercase()
            ))),
            _ => match self.literal()? {
                Some(t) => Ok(Expr::Const(t)),
                None => Err(self.err(format!("expected an expression{}", self.found()))),
            },
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Iri(i) => format!("<{i}>"),
        Tok::PName(p, l) => format!("`{p}:{l}`"),
        Tok::Var(v) => format!("?{v}"),
        Tok::Str(s) => format!("{s:?}"),
        Tok::Int(s) | Tok::Dec(s) | Tok::Dbl(s) => s.clone(),
        Tok::Word(w) => format!("`{w}`"),
        Tok::Punct(p) => format!("`{p}`"),
        Tok::LangTag(l) => format!("@{l}"),
        Tok::BNode => "blank node".into(),
    }
}

/// Parses a query in the supported subset.
pub fn parse_query(text: &str) -> Result<Query> {
    let toks = lex(text)?;
    let lines = text.lines().count().max(1);
    let last_col = text.lines().last().map(|l| l.chars().count() + 1).unwrap_or(1);
    let mut prefixes = BTreeMap::new();
    prefixes.insert("rdf".into(), "http://www.w3.org/1999/02/22-rdf-syntax-ns#".into());
    prefixes.insert("rdfs".into(), "http://www.w3.org/2000/01/rdf-schema#".into());
    prefixes.insert("xsd".into(), XSD.into());
    Parser {
        toks,
        pos: 0,
        prefixes,
        end: (lines, last_col),
    }
    .parse()
}

#[cfg(test)]
mod tests {
    use super::*;

    const GTFS: &str = r#"
        PREFIX gtfs: <http://vocab.gtfs.org/terms#>
        SELECT * WHERE {
            ?trip gtfs:route ?route .
            ?route gtfs:shortName ?name ;
                   gtfs:routeType ?type .
            ?freq gtfs:trip ?trip ;
                  gtfs:startTime ?start .
        }"#;

    #[test]
    fn gtfs_query_has_three_subjects() {
        let q = parse_query(GTFS).unwrap();
        assert_eq!(q.bgp.len(), 5);
        let subjects: BTreeSet<_> = q.bgp.iter().map(|t| t.subject.clone()).collect();
        assert_eq!(subjects.len(), 3);
        assert_eq!(
            q.projected_vars(),
            vec!["trip", "route", "name", "type", "freq", "start"]
        );
    }

    #[test]
    fn minimal_query() {
        let q = parse_query("SELECT ?s WHERE { ?s <p> ?o }").unwrap();
        assert_eq!(q.bgp.len(), 1);
        assert_eq!(q.projected_vars(), vec!["s"]);
        assert!(!q.distinct);
    }

    #[test]
    fn union_is_unsupported() {
        let err = parse_query("SELECT ?s WHERE { { ?s <p> ?o } UNION { ?s <q> ?o } }").unwrap_err();
        assert!(matches!(err, Error::UnsupportedFeature(_)));
        let err = parse_query("SELECT ?s WHERE { ?s <p> ?o } UNION { ?s <q> ?o }").unwrap_err();
        assert!(matches!(err, Error::UnsupportedFeature(ref f) if f == "UNION"));
        let err = parse_query("SELECT ?s WHERE { ?s <p> ?o . UNION }").unwrap_err();
        assert!(matches!(err, Error::UnsupportedFeature(ref f) if f == "UNION"));
    }

    #[test]
    fn syntax_error_position() {
        let err = parse_query("SELECT ?s WHERE {\n  ?s <p> \n}").unwrap_err();
        match err {
            Error::Syntax { line, column, .. } => assert_eq!((line, column), (3, 1)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn filters_optionals_and_modifiers() {
        let q = parse_query(
            r#"PREFIX ex: <http://ex.org/>
            SELECT DISTINCT ?p ?price WHERE {
              ?p ex:price ?price ; a ex:Product .
              OPTIONAL { ?p ex:label ?l . FILTER(?l != "x") }
              FILTER(?price * 2 > 10.5 && !(?price = -3) || ?p = ex:p1)
            } ORDER BY DESC(?price) ?p LIMIT 5 OFFSET 2"#,
        )
        .unwrap();
        assert!(q.distinct);
        assert_eq!(q.bgp.len(), 2);
        assert_eq!(q.bgp[1].predicate, RDF_TYPE);
        assert_eq!(q.optionals.len(), 1);
        assert_eq!(q.optionals[0].filters.len(), 1);
        assert_eq!(q.filters.len(), 1);
        let int = |v: &str| format!("\"{v}\"^^<{XSD}integer>");
        let expected = format!(
            "((((?price * {}) > \"10.5\"^^<{XSD}decimal>) && !((?price = {}))) || (?p = <http://ex.org/p1>))",
            int("2"),
            int("-3")
        );
        assert_eq!(q.filters[0].to_string(), expected);
        assert_eq!(q.order_by.len(), 2);
        assert!(q.order_by[0].descending);
        assert_eq!((q.limit, q.offset), (Some(5), Some(2)));
    }

    #[test]
    fn unsupported_constructs() {
        for q in [
            "SELECT ?s WHERE { ?s ?p ?o }",
            "SELECT ?s WHERE { ?s <p>/<q> ?o }",
            "SELECT ?s WHERE { ?s <p> _:b }",
            "SELECT (COUNT(?s) AS ?n) WHERE { ?s <p> ?o }",
            "CONSTRUCT { ?s <p> ?o } WHERE { ?s <p> ?o }",
            "SELECT ?s WHERE { ?s <p> ?o FILTER regex(?o, \"x\") }",
            "SELECT ?s WHERE { ?s <p> \"x\"@en }",
            "SELECT ?s WHERE { ?s <p> ?o OPTIONAL { ?s <q> ?x OPTIONAL { ?x <r> ?y } } }",
        ] {
            assert!(
                matches!(parse_query(q), Err(Error::UnsupportedFeature(_))),
                "{q}: {:?}",
                parse_query(q)
            );
        }
    }

    #[test]
    fn projected_var_must_occur() {
        assert!(parse_query("SELECT ?x WHERE { ?s <p> ?o }").is_err());
    }

    #[test]
    fn typed_literals_and_prefix_errors() {
        let q = parse_query(
            "PREFIX xsd: <http://www.w3.org/2001/XMLSchema#>\nSELECT ?s WHERE { ?s <p> \"2019-12-25\"^^xsd:date }",
        )
        .unwrap();
        assert_eq!(
            q.bgp[0].object,
            VarOrTerm::Term(Term::literal("2019-12-25", Some(&Datatype::Date.xsd_iri())))
        );
        assert!(matches!(
            parse_query("SELECT ?s WHERE { ?s ex:p ?o }"),
            Err(Error::Syntax { .. })
        ));
    }
}
