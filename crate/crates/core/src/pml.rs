//! PML sensor documents as ordered labeled trees.
//!
//! Elements become nodes labeled by their local tag name, text content becomes
//! [`NodeKind::Text`] children, and XML attributes are folded into value-bearing
//! child elements placed ahead of the element children (sorted by attribute
//! name). Namespace prefixes are dropped.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PmlError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("not a PML sensor document: root element is <{0}>")]
    NotPml(String),
    #[error("sensor document has no <{0}> child")]
    MissingRequired(&'static str),
}

/// Node label. Everything outside the PML subset the method relies on is kept
/// as [`NodeKind::Other`] with its local name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKind {
    Sensor,
    Id,
    Observation,
    Command,
    DateTime,
    Data,
    Tag,
    Text,
    Other(String),
}

impl NodeKind {
    pub fn from_tag(local_name: &str) -> NodeKind {
        match local_name {
            "Sensor" => NodeKind::Sensor,
            "ID" => NodeKind::Id,
            "Observation" => NodeKind::Observation,
            "Command" => NodeKind::Command,
            "DateTime" => NodeKind::DateTime,
            "Data" => NodeKind::Data,
            "Tag" => NodeKind::Tag,
            other => NodeKind::Other(other.to_string()),
        }
    }

    /// The element name this kind serializes to. Text nodes have no element name.
    pub fn tag_name(&self) -> &str {
        match self {
            NodeKind::Sensor => "Sensor",
            NodeKind::Id => "ID",
            NodeKind::Observation => "Observation",
            NodeKind::Command => "Command",
            NodeKind::DateTime => "DateTime",
            NodeKind::Data => "Data",
            NodeKind::Tag => "Tag",
            NodeKind::Text => "#text",
            NodeKind::Other(name) => name,
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag_name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PmlNode {
    pub kind: NodeKind,
    /// Present only on [`NodeKind::Text`] nodes.
    pub value: Option<String>,
    pub children: Vec<PmlNode>,
}

impl PmlNode {
    pub fn element(kind: NodeKind, children: Vec<PmlNode>) -> PmlNode {
        PmlNode {
            kind,
            value: None,
            children,
        }
    }

    pub fn text(value: impl Into<String>) -> PmlNode {
        PmlNode {
            kind: NodeKind::Text,
            value: Some(value.into()),
            children: Vec::new(),
        }
    }

    /// An element holding a single text value, e.g. `<ID>urn:epc:1:4.16.36</ID>`.
    pub fn value_element(kind: NodeKind, value: impl Into<String>) -> PmlNode {
        let value = value.into();
        let children = if value.is_empty() {
            Vec::new()
        } else {
            vec![PmlNode::text(value)]
        };
        PmlNode::element(kind, children)
    }

    pub fn is_text(&self) -> bool {
        self.kind == NodeKind::Text
    }

    /// A leaf in the deletion sense: no element children. Text nodes and
    /// value-bearing elements such as `<Command>READ</Command>` are leaves.
    pub fn is_leaf(&self) -> bool {
        self.children.iter().all(PmlNode::is_text)
    }

    /// Concatenated text of the direct text children, `None` if there are none.
    pub fn text_value(&self) -> Option<String> {
        if self.is_text() {
            return self.value.clone();
        }
        let mut texts = self
            .children
            .iter()
            .filter_map(|c| if c.is_text() { c.value.as_deref() } else { None })
            .peekable();
        texts.peek()?;
        Some(texts.collect())
    }

    pub fn children_of<'a>(&'a self, kind: &'a NodeKind) -> impl Iterator<Item = &'a PmlNode> + 'a {
        self.children.iter().filter(move |c| &c.kind == kind)
    }

    pub fn count_of(&self, kind: &NodeKind) -> usize {
        self.children_of(kind).count()
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(PmlNode::node_count).sum::<usize>()
    }

    pub fn get(&self, path: &NodePath) -> Option<&PmlNode> {
        path.0.iter().try_fold(self, |node, &i| node.children.get(i))
    }

    pub fn get_mut(&mut self, path: &NodePath) -> Option<&mut PmlNode> {
        path.0.iter().try_fold(self, |node, &i| node.children.get_mut(i))
    }
}

/// Positional address of a node: child indices from the root. The empty path
/// is the root itself.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodePath(pub Vec<usize>);

impl NodePath {
    pub fn root() -> NodePath {
        NodePath(Vec::new())
    }

    pub fn child(&self, index: usize) -> NodePath {
        let mut steps = self.0.clone();
        steps.push(index);
        NodePath(steps)
    }

    pub fn parent(&self) -> Option<(NodePath, usize)> {
        let (&last, rest) = self.0.split_last()?;
        Some((NodePath(rest.to_vec()), last))
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("/");
        }
        for i in &self.0 {
            write!(f, "/{i}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PmlTree {
    pub root: PmlNode,
    pub source_id: String,
}

impl PmlTree {
    pub fn new(root: PmlNode, source_id: impl Into<String>) -> PmlTree {
        PmlTree {
            root,
            source_id: source_id.into(),
        }
    }

    pub fn with_source_id(mut self, source_id: impl Into<String>) -> PmlTree {
        self.source_id = source_id.into();
        self
    }

    /// Equality of kinds, values and child order, ignoring `source_id`.
    pub fn same_structure(&self, other: &PmlTree) -> bool {
        self.root == other.root
    }

    pub fn node_count(&self) -> usize {
        self.root.node_count()
    }

    /// The sensor's own EPC, i.e. the text of the first `ID` child of the root.
    pub fn sensor_epc(&self) -> Option<String> {
        self.root
            .children_of(&NodeKind::Id)
            .next()
            .and_then(PmlNode::text_value)
    }

    /// EPCs of all `Tag` elements under the root's observations, in document order.
    pub fn tag_epcs(&self) -> Vec<String> {
        self.root
            .children_of(&NodeKind::Observation)
            .flat_map(|obs| obs.children_of(&NodeKind::Tag))
            .filter_map(|tag| tag.children_of(&NodeKind::Id).next())
            .filter_map(PmlNode::text_value)
            .collect()
    }
}

pub fn parse_pml(text: &str) -> Result<PmlTree, PmlError> {
    let doc = roxmltree::Document::parse(text).map_err(|e| PmlError::MalformedXml(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "Sensor" {
        return Err(PmlError::NotPml(root.tag_name().name().to_string()));
    }
    let root = convert(root);
    if root.count_of(&NodeKind::Id) == 0 {
        return Err(PmlError::MissingRequired("ID"));
    }
    if root.count_of(&NodeKind::Observation) == 0 {
        return Err(PmlError::MissingRequired("Observation"));
    }
    Ok(PmlTree::new(root, ""))
}

fn convert(element: roxmltree::Node<'_, '_>) -> PmlNode {
    let mut attributes: Vec<_> = element.attributes().map(|a| (a.name(), a.value())).collect();
    attributes.sort_by(|a, b| a.0.cmp(b.0));

    let mut children: Vec<PmlNode> = attributes
        .into_iter()
        .map(|(name, value)| PmlNode::value_element(NodeKind::from_tag(name), value.trim()))
        .collect();

    for child in element.children() {
        if child.is_element() {
            children.push(convert(child));
        } else if child.is_text() {
            let text = child.text().unwrap_or_default().trim();
            if text.is_empty() {
                continue;
            }
            // adjacent runs (split by comments or PIs) collapse into one node
            match children.last_mut() {
                Some(last) if last.is_text() => {
                    if let Some(v) = last.value.as_mut() {
                        v.push_str(text);
                    }
                }
                _ => children.push(PmlNode::text(text)),
            }
        }
    }

    PmlNode::element(NodeKind::from_tag(element.tag_name().name()), children)
}

/// Canonical indented XML. Value elements with a single text child are written
/// on one line.
pub fn serialize_pml(tree: &PmlTree) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    write_node(&mut out, &tree.root, 0);
    out
}

fn write_node(out: &mut String, node: &PmlNode, depth: usize) {
    let indent = "  ".repeat(depth);
    if node.is_text() {
        out.push_str(&indent);
        push_escaped(out, node.value.as_deref().unwrap_or_default());
        out.push('\n');
        return;
    }
    let name = node.kind.tag_name();
    match node.children.as_slice() {
        [] => {
            out.push_str(&format!("{indent}<{name}/>\n"));
        }
        [only] if only.is_text() => {
            out.push_str(&format!("{indent}<{name}>"));
            push_escaped(out, only.value.as_deref().unwrap_or_default());
            out.push_str(&format!("</{name}>\n"));
        }
        children => {
            out.push_str(&format!("{indent}<{name}>\n"));
            for child in children {
                write_node(out, child, depth + 1);
            }
            out.push_str(&format!("{indent}</{name}>\n"));
        }
    }
}

fn push_escaped(out: &mut String, text: &str) {
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            c => out.push(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rule {
    RootNotSensor,
    Missing(NodeKind),
    TooMany { kind: NodeKind, max: usize },
    Unexpected(NodeKind),
    EmptyValue,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::RootNotSensor => f.write_str("root element must be Sensor"),
            Rule::Missing(kind) => write!(f, "required <{kind}> is missing"),
            Rule::TooMany { kind, max } => write!(f, "at most {max} <{kind}> allowed"),
            Rule::Unexpected(kind) => write!(f, "<{kind}> is not allowed here"),
            Rule::EmptyValue => f.write_str("value is empty"),
        }
    }
}

/// A composition rule broken at `location`, an XPath-like rendering of `path`
/// such as `/Sensor/Observation[1]/Tag[2]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: NodePath,
    pub location: String,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.rule)
    }
}

/// Checks the element composition the similarity method depends on:
///
/// * Sensor: exactly one ID, at least one Observation.
/// * Observation: optional ID, optional Command, one DateTime, any number of
///   Data and Tag elements.
/// * Tag: one ID, optional Data, any number of nested Sensors.
/// * ID, Command, DateTime: a single non-empty text value.
///
/// Data content is free-form and not inspected.
pub fn validate(tree: &PmlTree) -> Vec<Violation> {
    let mut out = Vec::new();
    let root = &tree.root;
    let location = format!("/{}", root.kind);
    if root.kind == NodeKind::Sensor {
        check_sensor(root, &NodePath::root(), &location, &mut out);
    } else {
        out.push(Violation {
            path: NodePath::root(),
            location,
            rule: Rule::RootNotSensor,
        });
    }
    out
}

struct Composition<'a> {
    required: &'a [NodeKind],
    at_most_one: &'a [NodeKind],
    many: &'a [NodeKind],
}

fn check_children(node: &PmlNode, path: &NodePath, location: &str, rules: Composition<'_>, out: &mut Vec<Violation>) {
    let mut report = |rule| {
        out.push(Violation {
            path: path.clone(),
            location: location.to_string(),
            rule,
        })
    };
    for kind in rules.required {
        match node.count_of(kind) {
            0 => report(Rule::Missing(kind.clone())),
            1 => {}
            _ => report(Rule::TooMany {
                kind: kind.clone(),
                max: 1,
            }),
        }
    }
    for kind in rules.at_most_one {
        if node.count_of(kind) > 1 {
            report(Rule::TooMany {
                kind: kind.clone(),
                max: 1,
            });
        }
    }
    let mut unexpected: Vec<&NodeKind> = Vec::new();
    for child in &node.children {
        let allowed = rules.required.contains(&child.kind)
            || rules.at_most_one.contains(&child.kind)
            || rules.many.contains(&child.kind);
        if !allowed && !unexpected.contains(&&child.kind) {
            unexpected.push(&child.kind);
        }
    }
    for kind in unexpected {
        report(Rule::Unexpected(kind.clone()));
    }
}

fn walk_children<F>(node: &PmlNode, path: &NodePath, location: &str, mut visit: F)
where
    F: FnMut(&PmlNode, NodePath, String),
{
    let mut seen: Vec<(&NodeKind, usize)> = Vec::new();
    for (i, child) in node.children.iter().enumerate() {
        if child.is_text() {
            continue;
        }
        let ordinal = match seen.iter_mut().find(|(k, _)| *k == &child.kind) {
            Some((_, n)) => {
                *n += 1;
                *n
            }
            None => {
                seen.push((&child.kind, 1));
                1
            }
        };
        visit(child, path.child(i), format!("{location}/{}[{ordinal}]", child.kind));
    }
}

fn check_sensor(node: &PmlNode, path: &NodePath, location: &str, out: &mut Vec<Violation>) {
    check_children(
        node,
        path,
        location,
        Composition {
            required: &[NodeKind::Id],
            at_most_one: &[],
            many: &[NodeKind::Observation],
        },
        out,
    );
    if node.count_of(&NodeKind::Observation) == 0 {
        out.push(Violation {
            path: path.clone(),
            location: location.to_string(),
            rule: Rule::Missing(NodeKind::Observation),
        });
    }
    walk_children(node, path, location, |child, p, loc| match child.kind {
        NodeKind::Id => check_value(child, &p, &loc, out),
        NodeKind::Observation => check_observation(child, &p, &loc, out),
        _ => {}
    });
}

fn check_observation(node: &PmlNode, path: &NodePath, location: &str, out: &mut Vec<Violation>) {
    check_children(
        node,
        path,
        location,
        Composition {
            required: &[NodeKind::DateTime],
            at_most_one: &[NodeKind::Id, NodeKind::Command],
            many: &[NodeKind::Data, NodeKind::Tag],
        },
        out,
    );
    walk_children(node, path, location, |child, p, loc| match child.kind {
        NodeKind::Id | NodeKind::Command | NodeKind::DateTime => check_value(child, &p, &loc, out),
        NodeKind::Tag => check_tag(child, &p, &loc, out),
        _ => {}
    });
}

fn check_tag(node: &PmlNode, path: &NodePath, location: &str, out: &mut Vec<Violation>) {
    check_children(
        node,
        path,
        location,
        Composition {
            required: &[NodeKind::Id],
            at_most_one: &[NodeKind::Data],
            many: &[NodeKind::Sensor],
        },
        out,
    );
    walk_children(node, path, location, |child, p, loc| match child.kind {
        NodeKind::Id => check_value(child, &p, &loc, out),
        NodeKind::Sensor => check_sensor(child, &p, &loc, out),
        _ => {}
    });
}

fn check_value(node: &PmlNode, path: &NodePath, location: &str, out: &mut Vec<Violation>) {
    let mut report = |rule| {
        out.push(Violation {
            path: path.clone(),
            location: location.to_string(),
            rule,
        })
    };
    if let Some(child) = node.children.iter().find(|c| !c.is_text()) {
        report(Rule::Unexpected(child.kind.clone()));
    }
    if node.text_value().is_none_or(|v| v.is_empty()) {
        report(Rule::EmptyValue);
    }
}
