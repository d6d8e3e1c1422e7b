use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttrType {
    Integer,
    Real,
    Text,
    Boolean,
    Timestamp,
}

/// Attribute value. Timestamps are milliseconds since the Unix epoch.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Value {
    #[default]
    Null,
    Integer(i64),
    Real(f64),
    Text(String),
    Boolean(bool),
    Timestamp(i64),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Value::Real(v) => Some(v),
            Value::Integer(v) | Value::Timestamp(v) => Some(v as f64),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match *self {
            Value::Integer(v) | Value::Timestamp(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match *self {
            Value::Boolean(b) => Some(b),
            _ => None,
        }
    }

    /// Converts to `ty` when the value is representable, e.g. an integer
    /// into a real column. `Null` passes through.
    pub fn coerce(self, ty: AttrType) -> Option<Value> {
        Some(match (self, ty) {
            (Value::Null, _) => Value::Null,
            (Value::Integer(v), AttrType::Integer) => Value::Integer(v),
            (Value::Integer(v), AttrType::Real) => Value::Real(v as f64),
            (Value::Integer(v), AttrType::Timestamp) => Value::Timestamp(v),
            (Value::Timestamp(v), AttrType::Timestamp) => Value::Timestamp(v),
            (Value::Timestamp(v), AttrType::Integer) => Value::Integer(v),
            (Value::Real(v), AttrType::Real) if v.is_finite() => Value::Real(v),
            (Value::Real(v), AttrType::Integer | AttrType::Timestamp)
                if v.fract() == 0.0 && v.abs() < 9.0e15 =>
            {
                let i = v as i64;
                if ty == AttrType::Integer {
                    Value::Integer(i)
                } else {
                    Value::Timestamp(i)
                }
            }
            (Value::Text(s), AttrType::Text) => Value::Text(s),
            (Value::Boolean(b), AttrType::Boolean) => Value::Boolean(b),
            _ => return None,
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Null => serde_json::Value::Null,
            Value::Integer(v) | Value::Timestamp(v) => (*v).into(),
            Value::Real(v) => serde_json::Number::from_f64(*v)
                .map(serde_json::Value::Number)
                .unwrap_or(serde_json::Value::Null),
            Value::Text(s) => s.clone().into(),
            Value::Boolean(b) => (*b).into(),
        }
    }

    /// Untyped conversion; schema coercion happens on validation.
    pub fn from_json(v: &serde_json::Value) -> Option<Value> {
        Some(match v {
            serde_json::Value::Null => Value::Null,
            serde_json::Value::Bool(b) => Value::Boolean(*b),
            serde_json::Value::Number(n) => match n.as_i64() {
                Some(i) => Value::Integer(i),
                None => Value::Real(n.as_f64()?),
            },
            serde_json::Value::String(s) => Value::Text(s.clone()),
            _ => return None,
        })
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("null"),
            Value::Integer(v) | Value::Timestamp(v) => write!(f, "{v}"),
            Value::Real(v) => write!(f, "{v}"),
            Value::Text(s) => f.write_str(s),
            Value::Boolean(b) => write!(f, "{b}"),
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Integer(v)
    }
}

impl From<i32> for Value {
    fn from(v: i32) -> Self {
        Value::Integer(v as i64)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Integer(v as i64)
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::Integer(v as i64)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Real(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Boolean(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(v: Option<T>) -> Self {
        v.map_or(Value::Null, Into::into)
    }
}
