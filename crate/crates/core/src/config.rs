//! Helpers for the flat TOML-based configuration files used by machine and
//! kernel descriptions.

use crate::error::{Error, Result};
use toml::{Table, Value};

pub(crate) fn parse_table(source: &str, what: &str) -> Result<Table> {
    let meaningful = source
        .lines()
        .any(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    if !meaningful {
        return Err(Error::Syntax {
            line: 1,
            message: format!("empty {what} description"),
        });
    }
    source.parse::<Table>().map_err(|e| {
        let line = e
            .span()
            .map(|s| source[..s.start.min(source.len())].matches('\n').count() + 1)
            .unwrap_or(1);
        Error::Syntax {
            line,
            message: e.message().to_string(),
        }
    })
}

pub(crate) fn reject_unknown(table: &Table, allowed: &[&str], context: &str) -> Result<()> {
    // BTreeMap-backed table, so the first unknown key is deterministic.
    for key in table.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::validation(key, format!("unknown key in {context}")));
        }
    }
    Ok(())
}

fn required<'a>(table: &'a Table, key: &str) -> Result<&'a Value> {
    table
        .get(key)
        .ok_or_else(|| Error::validation(key, "missing required key"))
}

pub(crate) fn get_str(table: &Table, key: &str) -> Result<String> {
    match required(table, key)? {
        Value::String(s) => Ok(s.clone()),
        other => Err(type_error(key, "a string", other)),
    }
}

pub(crate) fn get_u64(table: &Table, key: &str) -> Result<u64> {
    let v = required(table, key)?;
    as_u64(key, v)
}

fn as_u64(key: &str, v: &Value) -> Result<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        Value::Integer(_) => Err(Error::validation(key, "must be non-negative")),
        other => Err(type_error(key, "an integer", other)),
    }
}

pub(crate) fn get_f64(table: &Table, key: &str) -> Result<f64> {
    as_f64(key, required(table, key)?)
}

pub(crate) fn get_opt_f64(table: &Table, key: &str) -> Result<Option<f64>> {
    table.get(key).map(|v| as_f64(key, v)).transpose()
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        other => Err(type_error(key, "a number", other)),
    }
}

pub(crate) fn get_bool_or(table: &Table, key: &str, default: bool) -> Result<bool> {
    match table.get(key) {
        None => Ok(default),
        Some(Value::Boolean(b)) => Ok(*b),
        Some(other) => Err(type_error(key, "a boolean", other)),
    }
}

fn type_error(key: &str, expected: &str, got: &Value) -> Error {
    Error::validation(
        key,
        format!("expected {expected}, found {}", got.type_str()),
    )
}

/// Formats a float so that it reads back as the identical `f64`.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Quotes a string as a TOML basic string.
pub(crate) fn quote(s: &str) -> String {
    Value::String(s.to_string()).to_string()
}
