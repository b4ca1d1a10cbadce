//! Ordered JSON values whose floats always print with 17 significant digits.

use serde::ser::{Serialize, SerializeMap, SerializeSeq, Serializer};
use serde_json::value::RawValue;

#[derive(Debug, Clone, PartialEq)]
pub enum Json {
    Null,
    Bool(bool),
    Int(i64),
    Num(f64),
    Str(String),
    Arr(Vec<Json>),
    Obj(Vec<(String, Json)>),
}

/// `x` with 17 significant digits in exponent form; round-trips exactly.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

impl Serialize for Json {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Json::Null => s.serialize_none(),
            Json::Bool(b) => s.serialize_bool(*b),
            Json::Int(i) => s.serialize_i64(*i),
            Json::Num(x) if x.is_finite() => {
                let raw = RawValue::from_string(fmt17(*x)).map_err(serde::ser::Error::custom)?;
                raw.serialize(s)
            }
            Json::Num(_) => s.serialize_none(),
            Json::Str(v) => s.serialize_str(v),
            Json::Arr(items) => {
                let mut seq = s.serialize_seq(Some(items.len()))?;
                for it in items {
                    seq.serialize_element(it)?;
                }
                seq.end()
            }
            Json::Obj(fields) => {
                let mut map = s.serialize_map(Some(fields.len()))?;
                for (k, v) in fields {
                    map.serialize_entry(k, v)?;
                }
                map.end()
            }
        }
    }
}

impl Json {
    pub fn to_pretty(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("json values serialize");
        text.push('\n');
        text
    }
}

pub fn obj<K: Into<String>>(fields: Vec<(K, Json)>) -> Json {
    Json::Obj(fields.into_iter().map(|(k, v)| (k.into(), v)).collect())
}

pub fn nums(values: &[f64]) -> Json {
    Json::Arr(values.iter().map(|&v| Json::Num(v)).collect())
}

impl From<f64> for Json {
    fn from(x: f64) -> Self {
        Json::Num(x)
    }
}

impl From<Option<f64>> for Json {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Json::Null, Json::Num)
    }
}

impl From<bool> for Json {
    fn from(b: bool) -> Self {
        Json::Bool(b)
    }
}

impl From<usize> for Json {
    fn from(n: usize) -> Self {
        Json::Int(n as i64)
    }
}

impl From<&str> for Json {
    fn from(s: &str) -> Self {
        Json::Str(s.to_string())
    }
}

impl From<String> for Json {
    fn from(s: String) -> Self {
        Json::Str(s)
    }
}

impl From<Option<String>> for Json {
    fn from(s: Option<String>) -> Self {
        s.map_or(Json::Null, Json::Str)
    }
}
