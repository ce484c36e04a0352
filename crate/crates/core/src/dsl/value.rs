use std::collections::BTreeMap;

use serde::{Serialize, Serializer};

use crate::domain::VideoSegment;

/// Runtime values a program can hold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    None,
    Str(String),
    Int(i64),
    List(Vec<Value>),
    Segment(VideoSegment),
}

impl Value {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::None => "None",
            Value::Str(_) => "str",
            Value::Int(_) => "int",
            Value::List(_) => "list",
            Value::Segment(_) => "VideoSegment",
        }
    }
}

/// Text shown to the agent for a value.
pub fn render_value(v: &Value) -> String {
    match v {
        Value::None => "None".to_string(),
        Value::Str(s) => s.clone(),
        Value::Int(i) => i.to_string(),
        Value::List(items) => {
            let inner: Vec<String> = items.iter().map(render_value).collect();
            format!("[{}]", inner.join(", "))
        }
        Value::Segment(s) => s.to_string(),
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::None => serializer.serialize_none(),
            Value::Str(s) => serializer.serialize_str(s),
            Value::Int(i) => serializer.serialize_i64(*i),
            Value::List(items) => items.serialize(serializer),
            Value::Segment(s) => s.serialize(serializer),
        }
    }
}

/// Variable bindings for one episode. Persisted across steps.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Environment {
    vars: BTreeMap<String, Value>,
}

impl Environment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.vars.get(name)
    }

    pub fn set(&mut self, name: impl Into<String>, value: Value) {
        self.vars.insert(name.into(), value);
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.vars.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_rules() {
        let seg = VideoSegment::from_secs(150, 175).unwrap();
        assert_eq!(render_value(&Value::Segment(seg)), "['02:30', '02:55']");
        assert_eq!(render_value(&Value::None), "None");
        assert_eq!(render_value(&Value::Str("abc".into())), "abc");
        assert_eq!(
            render_value(&Value::List(vec![Value::Str("a".into()), Value::Int(2)])),
            "[a, 2]"
        );
    }
}
