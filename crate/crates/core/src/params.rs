//! Named parameter collections with deterministic iteration order.

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Ordered map from layer-slot identifier to parameter tensor.
///
/// Iteration follows insertion order, so two models built from the same
/// config enumerate parameters identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(String, Tensor)>", into = "Vec<(String, Tensor)>")]
pub struct ParameterSet {
    names: Vec<String>,
    values: Vec<Tensor>,
    #[allow(clippy::used_underscore_binding)]
    index: HashMap<String, usize>,
}

impl ParameterSet {
    pub fn new() -> Self {
        ParameterSet { names: Vec::new(), values: Vec::new(), index: HashMap::new() }
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<()> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Usage(format!("duplicate parameter name '{name}'")));
        }
        self.index.insert(name.clone(), self.values.len());
        self.names.push(name);
        self.values.push(value);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.values[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.index.get(name).copied().map(move |i| &mut self.values[i])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Total scalar count across all parameters.
    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(self.values.iter())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.names.iter().map(String::as_str).zip(self.values.iter_mut())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }

    /// True when both sets hold the same names with the same shapes,
    /// regardless of values.
    pub fn shapes_match(&self, other: &ParameterSet) -> bool {
        self.len() == other.len()
            && self.iter().all(|(name, t)| {
                other.get(name).map(|o| o.shape() == t.shape()).unwrap_or(false)
            })
    }

    /// Deep copy used for consolidation anchors; later training cannot
    /// mutate the snapshot.
    pub fn snapshot(&self) -> ParameterSet {
        self.clone()
    }
}

impl Default for ParameterSet {
    fn default() -> Self {
        Self::new()
    }
}

impl TryFrom<Vec<(String, Tensor)>> for ParameterSet {
    type Error = Error;
    fn try_from(pairs: Vec<(String, Tensor)>) -> Result<Self> {
        let mut set = ParameterSet::new();
        for (name, value) in pairs {
            set.insert(name, value)?;
        }
        Ok(set)
    }
}

impl From<ParameterSet> for Vec<(String, Tensor)> {
    fn from(set: ParameterSet) -> Self {
        set.names.into_iter().zip(set.values).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_rejected() {
        let mut p = ParameterSet::new();
        p.insert("w", Tensor::zeros(vec![2])).unwrap();
        assert!(p.insert("w", Tensor::zeros(vec![2])).is_err());
    }

    #[test]
    fn iteration_follows_insertion_order() {
        let mut p = ParameterSet::new();
        p.insert("z_last", Tensor::zeros(vec![1])).unwrap();
        p.insert("a_first", Tensor::zeros(vec![1])).unwrap();
        let names: Vec<&str> = p.names().collect();
        assert_eq!(names, vec!["z_last", "a_first"]);
    }

    #[test]
    fn serde_preserves_order() {
        let mut p = ParameterSet::new();
        p.insert("b", Tensor::vector(&[1.0])).unwrap();
        p.insert("a", Tensor::vector(&[2.0])).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let back: ParameterSet = serde_json::from_str(&s).unwrap();
        assert_eq!(p, back);
        assert_eq!(back.names().collect::<Vec<_>>(), vec!["b", "a"]);
    }
}
