//! YARRRML-style mapping documents (YAML or JSON).
//!
//! ```yaml
//! prefixes:
//!   ex: http://example.com/
//! mappings:
//!   stops:
//!     sources: [[stops.csv~csv]]
//!     s: ex:stop/$(stop_id)
//!     po:
//!       - [a, ex:Stop]
//!       - [ex:name, $(stop_name)]
//!       - [ex:lat, $(lat), xsd:decimal]
//!       - [ex:page, http://ex.com/page/$(stop_id)~iri]
//!       - p: ex:label
//!         o:
//!           function: ex:uppercase
//!           parameters:
//!             - [ex:input, $(stop_name)]
//!       - p: ex:route
//!         o:
//!           mapping: routes
//!           condition:
//!             function: equal
//!             parameters:
//!               - [str1, $(route_id)]
//!               - [str2, $(route_id)]
//! ```
//!
//! A join object may carry `value: $(col)` to emit the parent's column as a
//! literal instead of the parent's subject.

use std::collections::BTreeMap;

use serde_yaml::{Mapping, Value};

use crate::error::{Error, Result};
use crate::functions::FunctionRegistry;
use crate::model::{
    FunctionArg, FunctionCall, JoinCondition, MappingDocument, ObjectMap, PredicateObjectMap, Template, TermKind,
    TriplesMap, RDF_TYPE, XSD,
};

fn structure(message: impl Into<String>) -> Error {
    Error::Syntax {
        line: 0,
        column: 0,
        message: message.into(),
    }
}

struct Prefixes(BTreeMap<String, String>);

impl Prefixes {
    fn expand(&self, text: &str) -> String {
        if let Some((prefix, rest)) = text.split_once(':') {
            if !rest.starts_with("//") && !prefix.contains(['$', '(', '/']) {
                if let Some(ns) = self.0.get(prefix) {
                    return format!("{ns}{rest}");
                }
            }
        }
        text.to_string()
    }
}

fn as_str<'a>(v: &'a Value, what: &str) -> Result<&'a str> {
    v.as_str()
        .ok_or_else(|| structure(format!("{what} must be a string, found {}", kind(v))))
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Sequence(_) => "a list",
        Value::Mapping(_) => "a map",
        Value::Tagged(_) => "a tagged value",
    }
}

fn scalar_string(v: &Value, what: &str) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        other => Err(structure(format!("{what} must be a scalar, found {}", kind(other)))),
    }
}

fn get<'a>(m: &'a Mapping, keys: &[&str]) -> Option<&'a Value> {
    keys.iter().find_map(|k| m.get(*k))
}

/// Parses a mapping document, checking function names against the default
/// registry.
pub fn parse_mapping(text: &str) -> Result<MappingDocument> {
    parse_mapping_with(text, &FunctionRegistry::default())
}

pub fn parse_mapping_with(text: &str, registry: &FunctionRegistry) -> Result<MappingDocument> {
    let root: Value = serde_yaml::from_str(text).map_err(|e| {
        let (line, column) = e.location().map(|l| (l.line(), l.column())).unwrap_or((0, 0));
        Error::Syntax {
            line,
            column,
            message: e.to_string(),
        }
    })?;
    let root = root
        .as_mapping()
        .ok_or_else(|| structure("mapping document must be a map"))?;

    let mut prefixes = BTreeMap::from([
        (
            "rdf".to_string(),
            "http://www.w3.org/1999/02/22-rdf-syntax-ns#".to_string(),
        ),
        ("rdfs".to_string(), "http://www.w3.org/2000/01/rdf-schema#".to_string()),
        ("xsd".to_string(), XSD.to_string()),
    ]);
    if let Some(p) = root.get("prefixes") {
        let p = p.as_mapping().ok_or_else(|| structure("`prefixes` must be a map"))?;
        for (k, v) in p {
            prefixes.insert(
                as_str(k, "prefix name")?.to_string(),
                as_str(v, "prefix IRI")?.to_string(),
            );
        }
    }
    let prefixes = Prefixes(prefixes);

    let mappings = get(root, &["mappings", "mapping"])
        .ok_or_else(|| structure("missing `mappings`"))?
        .as_mapping()
        .ok_or_else(|| structure("`mappings` must be a map of triples maps"))?;

    let mut doc = MappingDocument::default();
    for (id, body) in mappings {
        let id = scalar_string(id, "triples map id")?;
        if doc.get(&id).is_some() {
            return Err(structure(format!("duplicate triples map id `{id}`")));
        }
        let body = body
            .as_mapping()
            .ok_or_else(|| structure(format!("triples map `{id}` must be a map")))?;
        doc.triples_maps
            .push(parse_triples_map(&id, body, &prefixes, registry)?);
    }

    for tm in &doc.triples_maps {
        for pom in &tm.poms {
            if let Some((parent, _)) = pom.join() {
                if doc.get(parent).is_none() {
                    return Err(Error::DanglingParentMap {
                        triples_map: tm.id.clone(),
                        parent: parent.to_string(),
                    });
                }
            }
        }
    }
    Ok(doc)
}

fn parse_source(id: &str, v: &Value) -> Result<String> {
    let strip = |s: &str| -> String {
        match s.rsplit_once('~') {
            Some((path, _)) => path.to_string(),
            None => s.to_string(),
        }
    };
    match v {
        Value::String(s) => Ok(strip(s)),
        Value::Sequence(items) => {
            if items.len() != 1 {
                return Err(Error::UnsupportedFeature(format!(
                    "triples map `{id}` declares {} sources; exactly one is supported",
                    items.len()
                )));
            }
            parse_source(id, &items[0])
        }
        Value::Mapping(m) => {
            let access = get(m, &["access"]).ok_or_else(|| structure(format!("source of `{id}` lacks `access`")))?;
            Ok(strip(as_str(access, "source access")?))
        }
        other => Err(structure(format!(
            "source of `{id}` must be a string or list, found {}",
            kind(other)
        ))),
    }
}

fn parse_triples_map(id: &str, body: &Mapping, prefixes: &Prefixes, registry: &FunctionRegistry) -> Result<TriplesMap> {
    let source =
        get(body, &["sources", "source"]).ok_or_else(|| structure(format!("triples map `{id}` lacks `sources`")))?;
    let source_path = parse_source(id, source)?;

    let subject = get(body, &["s", "subject", "subjects"])
        .ok_or_else(|| structure(format!("triples map `{id}` lacks a subject `s`")))?;
    let subject = match subject {
        Value::Sequence(items) if items.len() == 1 => &items[0],
        other => other,
    };
    let subject_text = as_str(subject, "subject")?;
    let subject_text = subject_text.strip_suffix("~iri").unwrap_or(subject_text);
    let subject = Template::parse(&prefixes.expand(subject_text))?;

    let mut tm = TriplesMap {
        id: id.to_string(),
        source_path,
        subject,
        class_iri: None,
        poms: Vec::new(),
    };

    let empty = Vec::new();
    let po = match get(body, &["po", "predicateobjects"]) {
        None => &empty,
        Some(Value::Sequence(items)) => items,
        Some(other) => {
            return Err(structure(format!(
                "`po` of `{id}` must be a list, found {}",
                kind(other)
            )))
        }
    };
    for entry in po {
        let (predicate, object, datatype) = match entry {
            Value::Sequence(items) if (2..=3).contains(&items.len()) => (
                as_str(&items[0], "predicate")?.to_string(),
                items[1].clone(),
                items
                    .get(2)
                    .map(|d| as_str(d, "datatype").map(str::to_string))
                    .transpose()?,
            ),
            Value::Mapping(m) => {
                let p = get(m, &["p", "predicates", "predicate"])
                    .ok_or_else(|| structure(format!("po entry of `{id}` lacks `p`")))?;
                let o = get(m, &["o", "objects", "object"])
                    .ok_or_else(|| structure(format!("po entry of `{id}` lacks `o`")))?;
                let o = match o {
                    Value::Sequence(items) if items.len() == 1 => items[0].clone(),
                    other => other.clone(),
                };
                let dt = get(m, &["datatype"])
                    .map(|d| as_str(d, "datatype").map(str::to_string))
                    .transpose()?;
                (as_str(p, "predicate")?.to_string(), o, dt)
            }
            other => {
                return Err(structure(format!(
                    "po entry of `{id}` must be [p, o] or a map, found {}",
                    kind(other)
                )))
            }
        };

        let predicate = if predicate == "a" {
            RDF_TYPE.to_string()
        } else {
            prefixes.expand(&predicate)
        };

        if predicate == RDF_TYPE {
            let class = scalar_string(&object, "class")?;
            let class = class.strip_suffix("~iri").unwrap_or(&class);
            if tm.class_iri.is_some() {
                return Err(Error::UnsupportedFeature(format!(
                    "triples map `{id}` declares more than one class"
                )));
            }
            tm.class_iri = Some(prefixes.expand(class));
            continue;
        }

        let (object, inner_dt) = parse_object(id, &object, prefixes, registry)?;
        let datatype = datatype.or(inner_dt).map(|d| prefixes.expand(&d));
        tm.poms.push(PredicateObjectMap {
            predicate,
            object,
            datatype,
        });
    }
    Ok(tm)
}

fn parse_object(
    id: &str,
    v: &Value,
    prefixes: &Prefixes,
    registry: &FunctionRegistry,
) -> Result<(ObjectMap, Option<String>)> {
    match v {
        Value::Mapping(m) => {
            let dt = get(m, &["datatype"])
                .map(|d| as_str(d, "datatype").map(str::to_string))
                .transpose()?;
            if m.contains_key("function") {
                let call = parse_call(id, m, registry)?;
                return Ok((ObjectMap::Function(call), dt));
            }
            if let Some(parent) = get(m, &["mapping"]) {
                let parent = scalar_string(parent, "parent mapping")?;
                let condition = get(m, &["condition", "conditions"]).ok_or_else(|| {
                    Error::UnsupportedFeature(format!("join to `{parent}` in `{id}` without a join condition"))
                })?;
                let condition = parse_condition(id, condition)?;
                let project = get(m, &["value"])
                    .map(|c| single_column(as_str(c, "join value")?))
                    .transpose()?;
                return Ok((
                    ObjectMap::Join {
                        parent,
                        condition,
                        project,
                    },
                    dt,
                ));
            }
            if let Some(value) = get(m, &["value"]) {
                let text = scalar_string(value, "object value")?;
                let iri = matches!(get(m, &["type"]).and_then(Value::as_str), Some("iri"));
                let text = if iri { format!("{text}~iri") } else { text };
                return Ok((string_object(&text, prefixes)?, dt));
            }
            Err(structure(format!(
                "object map of `{id}` needs `function`, `mapping` or `value`"
            )))
        }
        other => Ok((string_object(&scalar_string(other, "object")?, prefixes)?, None)),
    }
}

fn single_column(text: &str) -> Result<String> {
    let t = Template::parse(text)?;
    match t.parts.as_slice() {
        [crate::model::TemplatePart::Column(c)] => Ok(c.clone()),
        _ => Err(structure(format!("expected a single column reference, found `{text}`"))),
    }
}

fn string_object(text: &str, prefixes: &Prefixes) -> Result<ObjectMap> {
    let (text, kind) = match text.strip_suffix("~iri") {
        Some(t) => (prefixes.expand(t), TermKind::Iri),
        None => (text.to_string(), TermKind::Literal),
    };
    let template = Template::parse(&text)?;
    if kind == TermKind::Literal {
        if let [crate::model::TemplatePart::Column(c)] = template.parts.as_slice() {
            return Ok(ObjectMap::Reference(c.clone()));
        }
    }
    Ok(ObjectMap::Template { template, kind })
}

fn parse_call(id: &str, m: &Mapping, registry: &FunctionRegistry) -> Result<FunctionCall> {
    let name = as_str(m.get("function").expect("checked by caller"), "function name")?;
    if !registry.contains(name) {
        return Err(Error::UnknownFunction(name.to_string()));
    }
    let mut args = Vec::new();
    if let Some(params) = get(m, &["parameters", "params"]) {
        let params = params
            .as_sequence()
            .ok_or_else(|| structure(format!("parameters of `{name}` in `{id}` must be a list")))?;
        for p in params {
            let value = match p {
                Value::Sequence(pair) if pair.len() == 2 => &pair[1],
                Value::Mapping(pm) if pm.contains_key("function") => p,
                Value::Mapping(pm) => get(pm, &["value"])
                    .ok_or_else(|| structure(format!("parameter of `{name}` in `{id}` lacks `value`")))?,
                other => other,
            };
            args.push(match value {
                Value::Mapping(inner) if inner.contains_key("function") => {
                    FunctionArg::Call(parse_call(id, inner, registry)?)
                }
                other => {
                    let text = scalar_string(other, "parameter value")?;
                    let t = Template::parse(&text)?;
                    match t.parts.as_slice() {
                        [crate::model::TemplatePart::Column(c)] => FunctionArg::Column(c.clone()),
                        _ if t.is_constant() => FunctionArg::Constant(text),
                        _ => {
                            return Err(Error::UnsupportedFeature(format!(
                                "template `{text}` as a function parameter; wrap it in concat"
                            )))
                        }
                    }
                }
            });
        }
    }
    Ok(FunctionCall {
        function_name: name.to_string(),
        args,
    })
}

fn parse_condition(id: &str, v: &Value) -> Result<JoinCondition> {
    let v = match v {
        Value::Sequence(items) if items.len() == 1 => &items[0],
        Value::Sequence(items) => {
            return Err(Error::UnsupportedFeature(format!(
                "{} join conditions in `{id}`; exactly one is supported",
                items.len()
            )))
        }
        other => other,
    };
    let m = v
        .as_mapping()
        .ok_or_else(|| structure(format!("join condition in `{id}` must be a map")))?;
    let f = get(m, &["function"]).and_then(Value::as_str).unwrap_or("equal");
    if !f.ends_with("equal") {
        return Err(Error::UnsupportedFeature(format!("join condition function `{f}`")));
    }
    let params = get(m, &["parameters"])
        .and_then(Value::as_sequence)
        .ok_or_else(|| structure(format!("join condition in `{id}` lacks parameters")))?;
    let mut child = None;
    let mut parent = None;
    for (i, p) in params.iter().enumerate() {
        let items = p
            .as_sequence()
            .ok_or_else(|| structure(format!("join parameter in `{id}` must be a list")))?;
        if items.len() < 2 {
            return Err(structure(format!("join parameter in `{id}` needs a name and a value")));
        }
        let name = as_str(&items[0], "join parameter name")?;
        let col = single_column(as_str(&items[1], "join parameter value")?)?;
        let side = items.get(2).and_then(Value::as_str);
        let is_child = match side {
            Some("s") => true,
            Some("o") => false,
            _ => name.ends_with("str1") || (name != "str2" && i == 0),
        };
        if is_child {
            child = Some(col);
        } else {
            parent = Some(col);
        }
    }
    match (child, parent) {
        (Some(child), Some(parent)) => Ok(JoinCondition { child, parent }),
        _ => Err(structure(format!(
            "join condition in `{id}` must name both a child and a parent column"
        ))),
    }
}

fn column_ref(c: &str) -> Value {
    Value::String(format!("$({c})"))
}

fn call_value(call: &FunctionCall) -> Value {
    let mut m = Mapping::new();
    m.insert("function".into(), call.function_name.clone().into());
    let params = call
        .args
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let v = match a {
                FunctionArg::Column(c) => column_ref(c),
                FunctionArg::Constant(k) => Value::String(k.clone()),
                FunctionArg::Call(inner) => call_value(inner),
            };
            Value::Sequence(vec![format!("p{}", i + 1).into(), v])
        })
        .collect();
    m.insert("parameters".into(), Value::Sequence(params));
    Value::Mapping(m)
}

/// Serializes to the same YAML subset with expanded IRIs. Parsing the
/// output yields a structurally equal document.
pub fn serialize_mapping(doc: &MappingDocument) -> String {
    let mut mappings = Mapping::new();
    for tm in &doc.triples_maps {
        let mut body = Mapping::new();
        body.insert(
            "sources".into(),
            Value::Sequence(vec![Value::Sequence(vec![format!("{}~csv", tm.source_path).into()])]),
        );
        body.insert("s".into(), tm.subject.to_string().into());
        let mut po = Vec::new();
        if let Some(c) = &tm.class_iri {
            po.push(Value::Sequence(vec!["a".into(), c.clone().into()]));
        }
        for pom in &tm.poms {
            let simple = |o: Value| {
                let mut items = vec![Value::String(pom.predicate.clone()), o];
                if let Some(dt) = &pom.datatype {
                    items.push(dt.clone().into());
                }
                Value::Sequence(items)
            };
            let entry = match &pom.object {
                ObjectMap::Reference(c) => simple(column_ref(c)),
                ObjectMap::Template { template, kind } => simple(Value::String(match kind {
                    TermKind::Iri => format!("{template}~iri"),
                    TermKind::Literal => template.to_string(),
                })),
                ObjectMap::Function(call) => {
                    let mut m = Mapping::new();
                    m.insert("p".into(), pom.predicate.clone().into());
                    m.insert("o".into(), call_value(call));
                    if let Some(dt) = &pom.datatype {
                        m.insert("datatype".into(), dt.clone().into());
                    }
                    Value::Mapping(m)
                }
                ObjectMap::Join {
                    parent,
                    condition,
                    project,
                } => {
                    let mut cond = Mapping::new();
                    cond.insert("function".into(), "equal".into());
                    cond.insert(
                        "parameters".into(),
                        Value::Sequence(vec![
                            Value::Sequence(vec!["str1".into(), column_ref(&condition.child)]),
                            Value::Sequence(vec!["str2".into(), column_ref(&condition.parent)]),
                        ]),
                    );
                    let mut o = Mapping::new();
                    o.insert("mapping".into(), parent.clone().into());
                    o.insert("condition".into(), Value::Mapping(cond));
                    if let Some(c) = project {
                        o.insert("value".into(), column_ref(c));
                    }
                    let mut m = Mapping::new();
                    m.insert("p".into(), pom.predicate.clone().into());
                    m.insert("o".into(), Value::Mapping(o));
                    if let Some(dt) = &pom.datatype {
                        m.insert("datatype".into(), dt.clone().into());
                    }
                    Value::Mapping(m)
                }
            };
            po.push(entry);
        }
        body.insert("po".into(), Value::Sequence(po));
        mappings.insert(tm.id.clone().into(), Value::Mapping(body));
    }
    let mut root = Mapping::new();
    root.insert("mappings".into(), Value::Mapping(mappings));
    serde_yaml::to_string(&Value::Mapping(root)).expect("YAML values always serialize")
}
