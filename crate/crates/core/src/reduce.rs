//! Redundancy reduction: strip everything that does not identify an EPC.

use std::collections::VecDeque;

use thiserror::Error;

use crate::pml::{NodeKind, NodePath, PmlNode, PmlTree};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EditError {
    #[error("node at {0} has element children")]
    NotALeaf(NodePath),
    #[error("no node at {0}")]
    NoSuchNode(NodePath),
    #[error("the root has no parent to be removed from")]
    NoParent,
}

/// An `(attribute, value)` pair of the triple form. A node that carries a value
/// itself contributes the pair `(its tag name, value)` to its parent.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ValuePair {
    pub attribute: String,
    pub value: String,
}

impl ValuePair {
    pub fn new(attribute: impl Into<String>, value: impl Into<String>) -> ValuePair {
        ValuePair {
            attribute: attribute.into(),
            value: value.into(),
        }
    }
}

/// The triple `(label, pairs, subtrees)` a reduced PML tree is made of.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReducedTree {
    pub label: NodeKind,
    pub pairs: Vec<ValuePair>,
    pub subtrees: Vec<ReducedTree>,
}

impl ReducedTree {
    pub fn value_of(&self, attribute: &str) -> Option<&str> {
        self.pairs
            .iter()
            .find(|p| p.attribute == attribute)
            .map(|p| p.value.as_str())
    }

    /// Tag EPCs of every Observation subtree, pooled in document order.
    /// A Tag without an ID contributes the empty string.
    pub fn tag_epcs(&self) -> Vec<&str> {
        self.subtrees
            .iter()
            .filter(|s| s.label == NodeKind::Observation)
            .flat_map(|obs| obs.subtrees.iter().filter(|t| t.label == NodeKind::Tag))
            .map(|tag| tag.value_of("ID").unwrap_or(""))
            .collect()
    }

    /// Embeds the triple back into an ordered labeled tree: pairs first, as
    /// value elements, then subtrees.
    pub fn to_node(&self) -> PmlNode {
        let mut children: Vec<PmlNode> = self
            .pairs
            .iter()
            .map(|p| PmlNode::value_element(NodeKind::from_tag(&p.attribute), p.value.clone()))
            .collect();
        children.extend(self.subtrees.iter().map(ReducedTree::to_node));
        PmlNode::element(self.label.clone(), children)
    }

    pub fn to_pml(&self, source_id: impl Into<String>) -> PmlTree {
        PmlTree::new(self.to_node(), source_id)
    }

    /// Node count of the embedded tree, comparable with [`PmlTree::node_count`].
    pub fn node_count(&self) -> usize {
        self.to_node().node_count()
    }
}

/// Removes the leaf at `target` from its parent; siblings keep their order.
pub fn del_leaf(tree: &PmlTree, target: &NodePath) -> Result<PmlTree, EditError> {
    let node = tree
        .root
        .get(target)
        .ok_or_else(|| EditError::NoSuchNode(target.clone()))?;
    if !node.is_leaf() {
        return Err(EditError::NotALeaf(target.clone()));
    }
    let (parent, index) = target.parent().ok_or(EditError::NoParent)?;
    let mut out = tree.clone();
    remove_child(&mut out.root, &parent, index);
    Ok(out)
}

/// Removes the whole subtree at `target`. Deleting the root yields `None`,
/// the empty tree.
pub fn del_subtree(tree: &PmlTree, target: &NodePath) -> Result<Option<PmlTree>, EditError> {
    if tree.root.get(target).is_none() {
        return Err(EditError::NoSuchNode(target.clone()));
    }
    let Some((parent, index)) = target.parent() else {
        return Ok(None);
    };
    let mut out = tree.clone();
    remove_child(&mut out.root, &parent, index);
    Ok(Some(out))
}

fn remove_child(root: &mut PmlNode, parent: &NodePath, index: usize) {
    if let Some(p) = root.get_mut(parent) {
        p.children.remove(index);
    }
}

/// Reduces a tree to its EPC skeleton.
///
/// Nodes are visited in level order. Under every Observation the ID, Command
/// and DateTime leaves and all Data subtrees are deleted; under every Tag
/// everything but the ID is deleted (Data and nested Sensors). At the Sensor
/// root only the ID and the Observations survive. Surviving nodes keep their
/// relative order.
pub fn reduce_pml(tree: &PmlTree) -> ReducedTree {
    let mut root = tree.root.clone();

    if root.kind == NodeKind::Sensor {
        root.children
            .retain(|c| matches!(c.kind, NodeKind::Id | NodeKind::Observation));
    }

    let mut queue = VecDeque::from([NodePath::root()]);
    while let Some(path) = queue.pop_front() {
        let Some(node) = root.get_mut(&path) else {
            continue;
        };
        let doomed: Vec<usize> = node
            .children
            .iter()
            .enumerate()
            .filter(|(_, c)| is_redundant(&node.kind, c))
            .map(|(i, _)| i)
            .collect();
        // back to front so earlier indices stay valid
        for &i in doomed.iter().rev() {
            remove_child(&mut root, &path, i);
        }
        let node = root.get(&path).expect("path was just resolved");
        for (i, child) in node.children.iter().enumerate() {
            if !child.is_leaf() {
                queue.push_back(path.child(i));
            }
        }
    }

    to_triple(&root)
}

fn is_redundant(parent: &NodeKind, child: &PmlNode) -> bool {
    match parent {
        // ID, Command, DateTime and Data; anything else non-Tag is not schema content
        NodeKind::Observation => child.kind != NodeKind::Tag,
        NodeKind::Tag => child.kind != NodeKind::Id,
        _ => false,
    }
}

fn is_value_child(node: &PmlNode) -> bool {
    node.kind == NodeKind::Id || (!node.children.is_empty() && node.is_leaf())
}

fn to_triple(node: &PmlNode) -> ReducedTree {
    let mut pairs = Vec::new();
    let mut subtrees = Vec::new();
    for child in node.children.iter().filter(|c| !c.is_text()) {
        if is_value_child(child) {
            pairs.push(ValuePair::new(
                child.kind.tag_name(),
                child.text_value().unwrap_or_default(),
            ));
        } else {
            subtrees.push(to_triple(child));
        }
    }
    ReducedTree {
        label: node.kind.clone(),
        pairs,
        subtrees,
    }
}
