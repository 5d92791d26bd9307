//! Named transformation functions referenced from mapping rules.
//!
//! Every built-in is deterministic and returns `None` when one of its value
//! arguments is absent.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use chrono::NaiveDate;

use crate::model::{Datatype, FunctionArg, FunctionCall};
use crate::values;

pub type FunctionResult = Result<Option<String>, String>;
pub type FunctionImpl = Arc<dyn Fn(&[Option<String>]) -> FunctionResult + Send + Sync>;

#[derive(Clone)]
pub struct FunctionRegistry {
    functions: BTreeMap<String, FunctionImpl>,
}

impl fmt::Debug for FunctionRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.functions.keys()).finish()
    }
}

impl Default for FunctionRegistry {
    fn default() -> Self {
        let mut r = FunctionRegistry::empty();
        r.register("concat", |args| {
            let mut out = String::new();
            for a in args {
                match a {
                    Some(s) => out.push_str(s),
                    None => return Ok(None),
                }
            }
            Ok(Some(out))
        });
        r.register("uppercase", unary(|s| Ok(s.to_uppercase())));
        r.register("lowercase", unary(|s| Ok(s.to_lowercase())));
        r.register("trim", unary(|s| Ok(s.trim().to_string())));
        r.register("slugify", unary(|s| Ok(slugify(s))));
        r.register("replace", |args| {
            let [value, from, to] = expect_args::<3>("replace", args)?;
            Ok(match (value, from, to) {
                (Some(v), Some(f), Some(t)) => Some(v.replace(f.as_str(), t)),
                _ => None,
            })
        });
        r.register("date_reformat", |args| {
            if !(2..=3).contains(&args.len()) {
                return Err(format!("date_reformat expects 2 or 3 arguments, got {}", args.len()));
            }
            let (Some(value), Some(from)) = (&args[0], &args[1]) else {
                return Ok(None);
            };
            let canonical = values::reformat(value, Datatype::Date, from)?;
            match args.get(2).cloned().flatten() {
                None => Ok(Some(canonical)),
                Some(to) => {
                    let d = NaiveDate::parse_from_str(&canonical, "%Y-%m-%d").map_err(|e| e.to_string())?;
                    Ok(Some(d.format(&values::date_pattern_to_chrono(&to)).to_string()))
                }
            }
        });
        r.register("numeric_parse", |args| {
            let (value, pattern) = match args {
                [v] => (v, "#,##0.#".to_string()),
                [v, Some(p)] => (v, p.clone()),
                [_, None] => return Ok(None),
                _ => return Err(format!("numeric_parse expects 1 or 2 arguments, got {}", args.len())),
            };
            match value {
                Some(v) => values::reformat(v, Datatype::Decimal, &pattern).map(Some),
                None => Ok(None),
            }
        });
        r.register("lookup_table", |args| {
            if !(2..=3).contains(&args.len()) {
                return Err(format!("lookup_table expects 2 or 3 arguments, got {}", args.len()));
            }
            let (Some(key), Some(table)) = (&args[0], &args[1]) else {
                return Ok(None);
            };
            let hit = table.split(';').find_map(|entry| {
                let (k, v) = entry.split_once('=')?;
                (k.trim() == key.trim()).then(|| v.trim().to_string())
            });
            Ok(hit.or_else(|| args.get(2).cloned().flatten()))
        });
        r
    }
}

fn unary(
    f: impl Fn(&str) -> Result<String, String> + Send + Sync + 'static,
) -> impl Fn(&[Option<String>]) -> FunctionResult + Send + Sync + 'static {
    move |args| match args {
        [Some(v)] => f(v).map(Some),
        [None] => Ok(None),
        _ => Err(format!("expected 1 argument, got {}", args.len())),
    }
}

fn expect_args<'a, const N: usize>(name: &str, args: &'a [Option<String>]) -> Result<&'a [Option<String>; N], String> {
    args.try_into()
        .map_err(|_| format!("{name} expects {N} arguments, got {}", args.len()))
}

/// Lowercase, trim, and turn whitespace runs into single underscores:
/// `Colonia Jardin` and `Colonia_jardin` both become `colonia_jardin`.
pub fn slugify(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join("_").to_lowercase()
}

impl FunctionRegistry {
    pub fn empty() -> Self {
        FunctionRegistry {
            functions: BTreeMap::new(),
        }
    }

    pub fn register(
        &mut self,
        name: impl Into<String>,
        f: impl Fn(&[Option<String>]) -> FunctionResult + Send + Sync + 'static,
    ) {
        self.functions.insert(name.into(), Arc::new(f));
    }

    /// Exact name first, then the local part of a prefixed or IRI name
    /// (`grel:toUpperCase` -> `toUpperCase`).
    fn resolve(&self, name: &str) -> Option<&FunctionImpl> {
        self.functions.get(name).or_else(|| {
            let local = name.rsplit(['#', ':', '/']).next()?;
            self.functions.get(local)
        })
    }

    pub fn contains(&self, name: &str) -> bool {
        self.resolve(name).is_some()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.functions.keys().map(String::as_str)
    }

    /// Name of the first function in `call` (nested calls included) that is
    /// not registered.
    pub fn first_unknown<'a>(&self, call: &'a FunctionCall) -> Option<&'a str> {
        if !self.contains(&call.function_name) {
            return Some(&call.function_name);
        }
        call.args.iter().find_map(|a| match a {
            FunctionArg::Call(inner) => self.first_unknown(inner),
            _ => None,
        })
    }

    pub fn call<'a>(&self, call: &FunctionCall, lookup: &impl Fn(&str) -> Option<&'a str>) -> FunctionResult {
        let f = self
            .resolve(&call.function_name)
            .ok_or_else(|| format!("unknown function `{}`", call.function_name))?;
        let mut args = Vec::with_capacity(call.args.len());
        for arg in &call.args {
            args.push(match arg {
                FunctionArg::Column(c) => lookup(c).map(str::to_string),
                FunctionArg::Constant(k) => Some(k.clone()),
                FunctionArg::Call(inner) => self.call(inner, lookup)?,
            });
        }
        f(&args)
    }
}
