//! Strict JSON walking: every problem is recorded with its path and walking continues.

use gla_core::Complex64;
use serde_json::{Map, Value};

#[derive(Debug, Default)]
pub struct Checker {
    pub errors: Vec<String>,
}

impl Checker {
    pub fn err(&mut self, path: &str, msg: impl std::fmt::Display) {
        self.errors.push(format!("{path}: {msg}"));
    }

    /// An object whose keys are all in `required` or `optional`.
    pub fn object<'a>(
        &mut self,
        path: &str,
        v: &'a Value,
        required: &[&str],
        optional: &[&str],
    ) -> Option<&'a Map<String, Value>> {
        let Some(map) = v.as_object() else {
            self.err(path, format!("expected an object, found {}", kind(v)));
            return None;
        };
        for key in map.keys() {
            if !required.contains(&key.as_str()) && !optional.contains(&key.as_str()) {
                self.err(&join(path, key), "unknown key");
            }
        }
        for key in required {
            if !map.contains_key(*key) {
                self.err(&join(path, key), "missing required key");
            }
        }
        Some(map)
    }

    pub fn array<'a>(&mut self, path: &str, v: &'a Value) -> Option<&'a Vec<Value>> {
        let a = v.as_array();
        if a.is_none() {
            self.err(path, format!("expected an array, found {}", kind(v)));
        }
        a
    }

    pub fn string<'a>(&mut self, path: &str, v: &'a Value) -> Option<&'a str> {
        let s = v.as_str();
        if s.is_none() {
            self.err(path, format!("expected a string, found {}", kind(v)));
        }
        s
    }

    pub fn number(&mut self, path: &str, v: &Value) -> Option<f64> {
        match v.as_f64() {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                self.err(path, format!("expected a finite number, found {}", kind(v)));
                None
            }
        }
    }

    pub fn unsigned(&mut self, path: &str, v: &Value) -> Option<u64> {
        let u = v.as_u64();
        if u.is_none() {
            self.err(path, format!("expected a non-negative integer, found {}", kind(v)));
        }
        u
    }

    pub fn integer(&mut self, path: &str, v: &Value) -> Option<i64> {
        let i = v.as_i64();
        if i.is_none() {
            self.err(path, format!("expected an integer, found {}", kind(v)));
        }
        i
    }

    /// A real number or a `[re, im]` pair.
    pub fn complex(&mut self, path: &str, v: &Value) -> Option<Complex64> {
        if v.is_number() {
            return self.number(path, v).map(|re| Complex64::new(re, 0.0));
        }
        match v.as_array() {
            Some(pair) if pair.len() == 2 => {
                let re = self.number(&index(path, 0), &pair[0]);
                let im = self.number(&index(path, 1), &pair[1]);
                Some(Complex64::new(re?, im?))
            }
            _ => {
                self.err(path, "expected a number or a [re, im] pair");
                None
            }
        }
    }

    pub fn numbers(&mut self, path: &str, v: &Value) -> Option<Vec<f64>> {
        let items = self.array(path, v)?;
        let out: Vec<Option<f64>> = items
            .iter()
            .enumerate()
            .map(|(i, x)| self.number(&index(path, i), x))
            .collect();
        out.into_iter().collect()
    }
}

pub fn join(path: &str, key: &str) -> String {
    format!("{path}.{key}")
}

pub fn index(path: &str, i: usize) -> String {
    format!("{path}[{i}]")
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}
