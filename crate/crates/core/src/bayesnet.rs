//! Merging two reduced trees into the Bayesian-network DAG used for inference.
//!
//! Edges run from a cause to the variable that depends on it, i.e. from a tree
//! child to its tree parent: value leaves feed pair variables, pair variables
//! feed row variables, and so on up to the single `SensorVar` sink.
//!
//! ```text
//! SensorVar ── IdVar ── ValueLeaf(a), ValueLeaf(b)
//!           └─ ObservationVar ── TagSetVar ── TagRowVar[i] ── TagPairVar[i,j] ── ValueLeaf(P), ValueLeaf(Q)
//! ```

use std::collections::VecDeque;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::pml::NodeKind;
use crate::reduce::ReducedTree;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("root labels differ: {left} vs {right}")]
pub struct RootMismatch {
    pub left: NodeKind,
    pub right: NodeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BnNodeKind {
    SensorVar,
    IdVar,
    ObservationVar,
    TagSetVar,
    TagRowVar,
    TagPairVar,
    ValueLeaf,
}

impl fmt::Display for BnNodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Which of the two compared documents a value leaf comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BnNode {
    pub kind: BnNodeKind,
    /// Deterministic identifier built from the kind and tag indices,
    /// e.g. `pair[1,2]` or `pair[1,2].ID.b`.
    pub key: String,
    /// Attribute compared by a value leaf.
    pub attribute: Option<String>,
    pub side: Option<Side>,
    pub value: Option<String>,
}

impl BnNode {
    pub fn var(kind: BnNodeKind, key: impl Into<String>) -> BnNode {
        BnNode {
            kind,
            key: key.into(),
            attribute: None,
            side: None,
            value: None,
        }
    }

    pub fn value_leaf(key: impl Into<String>, attribute: &str, side: Side, value: &str) -> BnNode {
        BnNode {
            kind: BnNodeKind::ValueLeaf,
            key: key.into(),
            attribute: Some(attribute.to_string()),
            side: Some(side),
            value: Some(value.to_string()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BnGraph {
    nodes: Vec<BnNode>,
    edges: Vec<(usize, usize)>,
    tags_a: usize,
    tags_b: usize,
}

impl BnGraph {
    /// The empty graph, also the shape of a root-label mismatch.
    pub fn new() -> BnGraph {
        BnGraph::default()
    }

    pub fn add_node(&mut self, node: BnNode) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    /// Adds an edge meaning "`from` is a cause of `to`".
    pub fn add_edge(&mut self, from: usize, to: usize) {
        assert!(
            from < self.nodes.len() && to < self.nodes.len(),
            "edge endpoint out of range"
        );
        self.edges.push((from, to));
    }

    pub fn nodes(&self) -> &[BnNode] {
        &self.nodes
    }

    pub fn node(&self, ix: usize) -> &BnNode {
        &self.nodes[ix]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Tag counts `(M, N)` of the first and second document.
    pub fn tag_counts(&self) -> (usize, usize) {
        (self.tags_a, self.tags_b)
    }

    pub fn count(&self, kind: BnNodeKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    /// Nodes with an edge into `ix`, in insertion order.
    pub fn inputs(&self, ix: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|&&(_, to)| to == ix)
            .map(|&(from, _)| from)
            .collect()
    }

    /// Nodes without outgoing edges.
    pub fn sinks(&self) -> Vec<usize> {
        let mut has_out = vec![false; self.nodes.len()];
        for &(from, _) in &self.edges {
            has_out[from] = true;
        }
        (0..self.nodes.len()).filter(|&i| !has_out[i]).collect()
    }

    /// Kahn's algorithm; causes come before the variables they feed. `None` if
    /// the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.nodes.len();
        let mut indegree = vec![0usize; n];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(from, to) in &self.edges {
            indegree[to] += 1;
            out[from].push(to);
        }
        let mut ready: VecDeque<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_front() {
            order.push(i);
            for &j in &out[i] {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    ready.push_back(j);
                }
            }
        }
        (order.len() == n).then_some(order)
    }
}

/// Expected node count of a merge with `m` and `n` tags and a single-attribute
/// sensor ID on both sides.
pub fn expected_node_count(m: usize, n: usize) -> usize {
    let tag_part = if m > 0 && n > 0 { 1 + m + m * n + 2 * m * n } else { 0 };
    3 + tag_part + 2
}

pub fn merge_trees(a: &ReducedTree, b: &ReducedTree) -> Result<BnGraph, RootMismatch> {
    if a.label != b.label {
        return Err(RootMismatch {
            left: a.label.clone(),
            right: b.label.clone(),
        });
    }
    let mut g = BnGraph::new();
    let root = g.add_node(BnNode::var(BnNodeKind::SensorVar, "sensor"));

    // V and V' are compared attribute by attribute; a side lacking the
    // attribute contributes the empty string.
    let mut attributes: Vec<&str> = a.pairs.iter().chain(&b.pairs).map(|p| p.attribute.as_str()).collect();
    attributes.sort_unstable();
    attributes.dedup();
    if !attributes.is_empty() {
        let id = g.add_node(BnNode::var(BnNodeKind::IdVar, "sensor.id"));
        g.add_edge(id, root);
        for attr in attributes {
            add_value_pair(
                &mut g,
                id,
                "sensor.id",
                attr,
                a.value_of(attr).unwrap_or(""),
                b.value_of(attr).unwrap_or(""),
            );
        }
    }

    let obs = g.add_node(BnNode::var(BnNodeKind::ObservationVar, "obs"));
    g.add_edge(obs, root);

    let tags_a = a.tag_epcs();
    let tags_b = b.tag_epcs();
    g.tags_a = tags_a.len();
    g.tags_b = tags_b.len();
    if !tags_a.is_empty() && !tags_b.is_empty() {
        let set = g.add_node(BnNode::var(BnNodeKind::TagSetVar, "tags"));
        g.add_edge(set, obs);
        for (i, p) in tags_a.iter().enumerate() {
            let row = g.add_node(BnNode::var(BnNodeKind::TagRowVar, format!("row[{}]", i + 1)));
            g.add_edge(row, set);
            for (j, q) in tags_b.iter().enumerate() {
                let key = format!("pair[{},{}]", i + 1, j + 1);
                let pair = g.add_node(BnNode::var(BnNodeKind::TagPairVar, key.clone()));
                g.add_edge(pair, row);
                add_value_pair(&mut g, pair, &key, "ID", p, q);
            }
        }
    }
    Ok(g)
}

fn add_value_pair(g: &mut BnGraph, target: usize, key: &str, attr: &str, left: &str, right: &str) {
    let p = g.add_node(BnNode::value_leaf(format!("{key}.{attr}.a"), attr, Side::A, left));
    g.add_edge(p, target);
    let q = g.add_node(BnNode::value_leaf(format!("{key}.{attr}.b"), attr, Side::B, right));
    g.add_edge(q, target);
}

const LABEL_VALUE_MAX: usize = 24;

/// DOT rendering with nodes in insertion order.
pub fn export_dot(g: &BnGraph) -> String {
    let mut out = String::from("digraph bn {\n  rankdir=BT;\n");
    for (i, node) in g.nodes().iter().enumerate() {
        let mut label = format!("{}\\n{}", node.kind, escape(&node.key));
        if let Some(value) = &node.value {
            label.push_str("\\n");
            label.push_str(&escape(&truncate(value, LABEL_VALUE_MAX)));
        }
        let shape = if node.kind == BnNodeKind::ValueLeaf {
            "box"
        } else {
            "ellipse"
        };
        let _ = writeln!(out, "  n{i} [label=\"{label}\", shape={shape}];");
    }
    for (from, to) in g.edges() {
        let _ = writeln!(out, "  n{from} -> n{to};");
    }
    out.push_str("}\n");
    out
}

fn truncate(s: &str, max: usize) -> String {
    if s.chars().count() <= max {
        return s.to_string();
    }
    let head: String = s.chars().take(max - 3).collect();
    format!("{head}...")
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
