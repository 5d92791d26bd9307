//! Cell-level value handling: format reparsing and canonical lexical forms.
//!
//! Canonical forms: ISO-8601 extended for dates and times, `.` radix without
//! grouping for numbers, `true`/`false` for booleans. Canonicalizing an
//! already canonical value is the identity.

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};

use crate::model::Datatype;

const DATE_CANON: &str = "%Y-%m-%d";
const TIME_CANON: &str = "%H:%M:%S";
const DATETIME_CANON: &str = "%Y-%m-%dT%H:%M:%S";

/// A value ready to be bound into the relational engine.
#[derive(Debug, Clone, PartialEq)]
pub enum SqlValue {
    Null,
    Text(String),
    Integer(i64),
    Real(f64),
}

/// Canonical lexical form of `value` under `datatype`, or a reason why the
/// value does not conform.
pub fn canonical(value: &str, datatype: Datatype) -> Result<String, String> {
    let v = value.trim();
    match datatype {
        Datatype::String => Ok(value.to_string()),
        Datatype::Integer => v
            .strip_prefix('+')
            .unwrap_or(v)
            .parse::<i64>()
            .map(|i| i.to_string())
            .map_err(|_| format!("not an integer: `{value}`")),
        Datatype::Decimal | Datatype::Double => parse_f64(v).map(format_f64),
        Datatype::Boolean => match v {
            "true" | "1" | "TRUE" | "True" => Ok("true".into()),
            "false" | "0" | "FALSE" | "False" => Ok("false".into()),
            _ => Err(format!("not a boolean: `{value}`")),
        },
        Datatype::Date => NaiveDate::parse_from_str(v, DATE_CANON)
            .map(|d| d.format(DATE_CANON).to_string())
            .map_err(|e| format!("not an ISO date: `{value}` ({e})")),
        Datatype::Time => parse_time(v)
            .map(|t| t.format(TIME_CANON).to_string())
            .ok_or_else(|| format!("not an ISO time: `{value}`")),
        Datatype::Datetime => parse_datetime(v)
            .map(|t| t.format(DATETIME_CANON).to_string())
            .ok_or_else(|| format!("not an ISO datetime: `{value}`")),
    }
}

fn parse_time(v: &str) -> Option<NaiveTime> {
    NaiveTime::parse_from_str(v, "%H:%M:%S%.f")
        .or_else(|_| NaiveTime::parse_from_str(v, "%H:%M"))
        .ok()
}

fn parse_datetime(v: &str) -> Option<NaiveDateTime> {
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(v, f).ok())
}

fn parse_f64(v: &str) -> Result<f64, String> {
    let f: f64 = v.parse().map_err(|_| format!("not a number: `{v}`"))?;
    if f.is_finite() {
        Ok(f)
    } else {
        Err(format!("not a finite number: `{v}`"))
    }
}

/// Shortest round-trip decimal rendering; integral values print without a
/// fractional part (`10.0` -> `10`).
pub fn format_f64(f: f64) -> String {
    if f == 0.0 {
        return "0".into();
    }
    format!("{f}")
}

/// Reparses `value` written according to a CSVW `format` into canonical form.
pub fn reformat(value: &str, datatype: Datatype, pattern: &str) -> Result<String, String> {
    match datatype {
        Datatype::Date | Datatype::Time | Datatype::Datetime => {
            let fmt = date_pattern_to_chrono(pattern);
            let v = value.trim();
            let parsed = match datatype {
                Datatype::Date => NaiveDate::parse_from_str(v, &fmt).map(|d| d.format(DATE_CANON).to_string()),
                Datatype::Time => NaiveTime::parse_from_str(v, &fmt).map(|t| t.format(TIME_CANON).to_string()),
                _ => NaiveDateTime::parse_from_str(v, &fmt).map(|t| t.format(DATETIME_CANON).to_string()),
            };
            parsed.map_err(|e| format!("`{value}` does not match format `{pattern}` ({e})"))
        }
        Datatype::Integer | Datatype::Decimal | Datatype::Double => {
            let (group, decimal) = numeric_separators(pattern);
            let mut out = String::with_capacity(value.len());
            for ch in value.trim().chars() {
                if Some(ch) == group || ch == ' ' || ch == '\u{a0}' {
                    continue;
                }
                out.push(if ch == decimal { '.' } else { ch });
            }
            canonical(&out, datatype)
        }
        Datatype::Boolean => {
            let (yes, no) = pattern.split_once('|').unwrap_or((pattern, ""));
            if value == yes {
                Ok("true".into())
            } else if value == no {
                Ok("false".into())
            } else {
                Err(format!("`{value}` is neither `{yes}` nor `{no}`"))
            }
        }
        Datatype::String => Ok(value.to_string()),
    }
}

/// Reparses a formatted value unless it is already canonical, so that
/// applying it twice gives the same result as applying it once.
pub fn normalize(value: &str, datatype: Datatype, pattern: &str) -> Result<String, String> {
    match canonical(value, datatype) {
        Ok(c) if c == value => Ok(c),
        _ => reformat(value, datatype, pattern),
    }
}

/// Translates a UAX #35 style date pattern (`dd/MM/yyyy`) to chrono syntax.
pub fn date_pattern_to_chrono(pattern: &str) -> String {
    let chars: Vec<char> = pattern.chars().collect();
    let mut out = String::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '\'' {
            i += 1;
            while i < chars.len() && chars[i] != '\'' {
                push_literal(&mut out, chars[i]);
                i += 1;
            }
            i += 1;
            continue;
        }
        let mut run = 1;
        while i + run < chars.len() && chars[i + run] == c {
            run += 1;
        }
        let spec = match (c, run) {
            ('y', 2) => Some("%y"),
            ('y', _) => Some("%Y"),
            ('M', 1 | 2) => Some("%m"),
            ('M', 3) => Some("%b"),
            ('M', _) => Some("%B"),
            ('d', _) => Some("%d"),
            ('H', _) => Some("%H"),
            ('h', _) => Some("%I"),
            ('a', _) => Some("%p"),
            ('m', _) => Some("%M"),
            ('s', _) => Some("%S"),
            ('S', _) => Some("%.f"),
            ('X' | 'x', _) => Some("%:z"),
            _ => None,
        };
        match spec {
            Some("%.f") => {
                // `ss.SSS`: chrono's `%.f` consumes the dot itself.
                if out.ends_with('.') {
                    out.pop();
                }
                out.push_str("%.f");
            }
            Some(s) => out.push_str(s),
            None => (0..run).for_each(|_| push_literal(&mut out, c)),
        }
        i += run;
    }
    out
}

fn push_literal(out: &mut String, c: char) {
    if c == '%' {
        out.push_str("%%");
    } else {
        out.push(c);
    }
}

/// Group and decimal characters implied by a number pattern such as
/// `#,##0.00` or `#.##0,00`.
pub fn numeric_separators(pattern: &str) -> (Option<char>, char) {
    let last_dot = pattern.rfind('.');
    let last_comma = pattern.rfind(',');
    match (last_dot, last_comma) {
        (Some(d), Some(c)) if d > c => (Some(','), '.'),
        (Some(_), Some(_)) => (Some('.'), ','),
        (Some(_), None) => single_separator(pattern, '.', ','),
        (None, Some(_)) => single_separator(pattern, ',', '.'),
        (None, None) => (None, '.'),
    }
}

fn single_separator(pattern: &str, sep: char, other: char) -> (Option<char>, char) {
    let occurrences = pattern.matches(sep).count();
    let pos = pattern.rfind(sep).unwrap_or(0);
    let after = pattern[pos + sep.len_utf8()..]
        .chars()
        .take_while(|c| *c == '#' || *c == '0')
        .count();
    let before = pattern[..pos].chars().last();
    if occurrences > 1 || (after == 3 && before == Some('#')) {
        (Some(sep), other)
    } else {
        (None, sep)
    }
}

/// Converts a canonical value into its engine representation.
pub fn to_sql(value: &str, datatype: Datatype) -> Result<SqlValue, String> {
    Ok(match datatype {
        Datatype::Integer => SqlValue::Integer(value.trim().parse().map_err(|_| format!("not an integer: `{value}`"))?),
        Datatype::Decimal | Datatype::Double => SqlValue::Real(parse_f64(value.trim())?),
        _ => SqlValue::Text(canonical(value, datatype)?),
    })
}

/// Numeric view of a canonical value, for range checks.
pub fn numeric(value: &str) -> Option<f64> {
    value.trim().parse::<f64>().ok().filter(|f| f.is_finite())
}
