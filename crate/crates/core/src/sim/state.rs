use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::SimError;

/// Value held by a state variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Num(f64),
}

impl Value {
    pub fn as_f64(self) -> f64 {
        match self {
            Value::Bool(b) => f64::from(u8::from(b)),
            Value::Num(x) => x,
        }
    }

    pub fn truthy(self) -> bool {
        match self {
            Value::Bool(b) => b,
            Value::Num(x) => x != 0.0,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Num(x) => write!(f, "{x}"),
        }
    }
}

/// Named state variables of one run. Reads observe the latest write.
#[derive(Debug, Clone, Default)]
pub struct StateTable {
    index: HashMap<String, usize>,
    values: Vec<Value>,
}

impl StateTable {
    pub fn declare(&mut self, name: &str, init: Value) {
        match self.index.get(name) {
            Some(&i) => self.values[i] = init,
            None => {
                self.index.insert(name.to_string(), self.values.len());
                self.values.push(init);
            }
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Result<Value, SimError> {
        self.index
            .get(name)
            .map(|&i| self.values[i])
            .ok_or_else(|| SimError::UnknownState(name.to_string()))
    }

    pub fn set(&mut self, name: &str, value: Value) -> Result<(), SimError> {
        let i = *self
            .index
            .get(name)
            .ok_or_else(|| SimError::UnknownState(name.to_string()))?;
        self.values[i] = value;
        Ok(())
    }
}
