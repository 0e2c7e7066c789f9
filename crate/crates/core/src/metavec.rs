//! Hierarchical genre metadata as categorical vectors.
//!
//! Every prefix of a genre path ("factual", "factual/scienceandnature", ...)
//! is its own attribute, so two programmes match at whatever depth their
//! paths share.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GenrePath {
    segments: Vec<String>,
}

impl GenrePath {
    pub fn segments(&self) -> &[String] {
        &self.segments
    }

    pub fn depth(&self) -> usize {
        self.segments.len()
    }

    /// All prefixes, shortest first, as "/"-joined node names.
    pub fn prefixes(&self) -> impl Iterator<Item = String> + '_ {
        (1..=self.segments.len()).map(move |d| self.segments[..d].join("/"))
    }
}

impl fmt::Display for GenrePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.segments.join("/"))
    }
}

pub fn parse_genre_path(raw: &str) -> Result<GenrePath> {
    if raw.trim().is_empty() {
        return Err(Error::EmptyPath);
    }
    let segments = raw
        .split('/')
        .map(|s| {
            let s = s.trim().to_lowercase();
            if s.is_empty() {
                Err(Error::EmptySegment(raw.to_string()))
            } else {
                Ok(s)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GenrePath { segments })
}

/// Index over every genre node seen in the corpus. Serializes as the JSON
/// list of node names in index order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeSpace {
    nodes: Vec<String>,
    index: HashMap<String, usize>,
}

impl AttributeSpace {
    pub fn from_nodes(nodes: Vec<String>) -> Result<Self> {
        let index: HashMap<String, usize> = nodes.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect();
        if index.len() != nodes.len() {
            return Err(Error::Format("duplicate node in attribute space".into()));
        }
        for n in &nodes {
            let path = parse_genre_path(n)?;
            let missing = path.prefixes().find(|p| !index.contains_key(p));
            if let Some(missing) = missing {
                return Err(Error::UnknownNode(missing));
            }
        }
        Ok(AttributeSpace { nodes, index })
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn index_of(&self, node: &str) -> Option<usize> {
        self.index.get(node).copied()
    }
}

impl Serialize for AttributeSpace {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.nodes.serialize(s)
    }
}

impl<'de> Deserialize<'de> for AttributeSpace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let nodes = Vec::<String>::deserialize(d)?;
        AttributeSpace::from_nodes(nodes).map_err(serde::de::Error::custom)
    }
}

/// Enumerates every prefix of every path; indices follow lexicographic order
/// of the joined node names.
pub fn build_attribute_space<'a>(paths: impl IntoIterator<Item = &'a GenrePath>) -> Result<AttributeSpace> {
    let nodes: BTreeSet<String> = paths.into_iter().flat_map(|p| p.prefixes()).collect();
    if nodes.is_empty() {
        return Err(Error::NoMetadata);
    }
    let nodes: Vec<String> = nodes.into_iter().collect();
    let index = nodes.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect();
    Ok(AttributeSpace { nodes, index })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalVector {
    pub programme_id: String,
    pub values: Vec<f64>,
}

/// Activates every prefix of every assigned path. A node at depth `d` gets
/// `level_weights[d - 1]` (the last weight repeats for deeper levels; an
/// empty slice means all ones). Multiple paths are OR-ed.
pub fn encode_metadata(
    programme_id: &str,
    paths: &[GenrePath],
    space: &AttributeSpace,
    level_weights: &[f64],
) -> Result<CategoricalVector> {
    let mut values = vec![0.0; space.dim()];
    for path in paths {
        for (depth, node) in path.prefixes().enumerate() {
            let idx = space.index_of(&node).ok_or_else(|| Error::UnknownNode(node.clone()))?;
            let w = level_weights
                .get(depth)
                .or(level_weights.last())
                .copied()
                .unwrap_or(1.0);
            values[idx] = w;
        }
    }
    Ok(CategoricalVector {
        programme_id: programme_id.to_string(),
        values,
    })
}
