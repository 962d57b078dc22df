//! Assessment framework trees.
//!
//! A framework is a grading scale plus an arbitrary-depth tree of domains,
//! controls and assessment issues. Only leaves are graded; every aggregate
//! node is scored from its children.

mod builtin;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use builtin::{builtin_iso27001, ISO27001_ID};
pub use validate::{validate_framework, Violation, ViolationCode};

/// One point on a grading scale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleLevel {
    pub value: i64,
    pub label: String,
}

/// Discrete ordered grading scale, `0..=max`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradingScale {
    pub levels: Vec<ScaleLevel>,
}

impl GradingScale {
    pub fn new<I, S>(levels: I) -> Self
    where
        I: IntoIterator<Item = (i64, S)>,
        S: Into<String>,
    {
        Self {
            levels: levels
                .into_iter()
                .map(|(value, label)| ScaleLevel {
                    value,
                    label: label.into(),
                })
                .collect(),
        }
    }

    /// Highest grade on the scale, i.e. the ideal score.
    pub fn max_value(&self) -> i64 {
        self.levels.iter().map(|l| l.value).max().unwrap_or(0)
    }

    pub fn max_f64(&self) -> f64 {
        self.max_value() as f64
    }

    pub fn contains(&self, grade: i64) -> bool {
        self.levels.iter().any(|l| l.value == grade)
    }

    pub fn label_of(&self, grade: i64) -> Option<&str> {
        self.levels
            .iter()
            .find(|l| l.value == grade)
            .map(|l| l.label.as_str())
    }
}

impl Default for GradingScale {
    fn default() -> Self {
        Self::new([
            (0, "not implementing"),
            (1, "below average"),
            (2, "average"),
            (3, "above average"),
            (4, "excellent"),
        ])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Aggregate,
    Leaf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeBody {
    Leaf { question: String },
    Aggregate { children: Vec<FrameworkNode> },
}

/// A node of the framework tree.
///
/// Ids are dotted paths; a child's id always extends its parent's id
/// (`organization` -> `organization.6.1.3` -> `organization.6.1.3.q1`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawNode", into = "RawNode")]
pub struct FrameworkNode {
    pub id: String,
    pub name: String,
    pub iso_ref: Option<String>,
    pub body: NodeBody,
}

impl FrameworkNode {
    pub fn leaf(
        id: impl Into<String>,
        name: impl Into<String>,
        iso_ref: Option<&str>,
        question: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            iso_ref: iso_ref.map(str::to_owned),
            body: NodeBody::Leaf {
                question: question.into(),
            },
        }
    }

    pub fn aggregate(
        id: impl Into<String>,
        name: impl Into<String>,
        iso_ref: Option<&str>,
        children: Vec<FrameworkNode>,
    ) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            iso_ref: iso_ref.map(str::to_owned),
            body: NodeBody::Aggregate { children },
        }
    }

    pub fn kind(&self) -> NodeKind {
        match self.body {
            NodeBody::Leaf { .. } => NodeKind::Leaf,
            NodeBody::Aggregate { .. } => NodeKind::Aggregate,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.kind() == NodeKind::Leaf
    }

    pub fn children(&self) -> &[FrameworkNode] {
        match &self.body {
            NodeBody::Aggregate { children } => children,
            NodeBody::Leaf { .. } => &[],
        }
    }

    pub fn question(&self) -> Option<&str> {
        match &self.body {
            NodeBody::Leaf { question } => Some(question),
            NodeBody::Aggregate { .. } => None,
        }
    }

    /// Pre-order iterator over this node and all descendants.
    pub fn iter(&self) -> PreOrder<'_> {
        PreOrder { stack: vec![self] }
    }

    pub fn leaves(&self) -> impl Iterator<Item = &FrameworkNode> {
        self.iter().filter(|n| n.is_leaf())
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().count()
    }

    /// Whether any child of this node is a leaf, i.e. this node is a
    /// control carrying assessment issues directly.
    pub fn bears_leaves(&self) -> bool {
        self.children().iter().any(FrameworkNode::is_leaf)
    }
}

pub struct PreOrder<'a> {
    stack: Vec<&'a FrameworkNode>,
}

impl<'a> Iterator for PreOrder<'a> {
    type Item = &'a FrameworkNode;

    fn next(&mut self) -> Option<Self::Item> {
        let node = self.stack.pop()?;
        self.stack.extend(node.children().iter().rev());
        Some(node)
    }
}

/// File representation of a node: exactly one of `question` / `children`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    id: String,
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    iso_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    question: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    children: Option<Vec<FrameworkNode>>,
}

impl TryFrom<RawNode> for FrameworkNode {
    type Error = String;

    fn try_from(raw: RawNode) -> Result<Self, Self::Error> {
        let body = match (raw.question, raw.children) {
            (Some(question), None) => NodeBody::Leaf { question },
            (None, Some(children)) => NodeBody::Aggregate { children },
            (Some(_), Some(_)) => {
                return Err(format!(
                    "node `{}` has both `question` and `children`",
                    raw.id
                ))
            }
            (None, None) => {
                return Err(format!(
                    "node `{}` has neither `question` nor `children`",
                    raw.id
                ))
            }
        };
        Ok(Self {
            id: raw.id,
            name: raw.name,
            iso_ref: raw.iso_ref,
            body,
        })
    }
}

impl From<FrameworkNode> for RawNode {
    fn from(node: FrameworkNode) -> Self {
        let (question, children) = match node.body {
            NodeBody::Leaf { question } => (Some(question), None),
            NodeBody::Aggregate { children } => (None, Some(children)),
        };
        Self {
            id: node.id,
            name: node.name,
            iso_ref: node.iso_ref,
            question,
            children,
        }
    }
}

/// A complete, versioned assessment framework.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameworkDefinition {
    pub id: String,
    pub name: String,
    pub version: String,
    pub scale: GradingScale,
    pub domains: Vec<FrameworkNode>,
}

impl FrameworkDefinition {
    /// Pre-order iterator over every node of every domain.
    pub fn nodes(&self) -> impl Iterator<Item = &FrameworkNode> {
        self.domains.iter().flat_map(FrameworkNode::iter)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &FrameworkNode> {
        self.nodes().filter(|n| n.is_leaf())
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().count()
    }

    /// Controls are the aggregate nodes that carry assessment issues.
    pub fn controls(&self) -> impl Iterator<Item = &FrameworkNode> {
        self.nodes().filter(|n| n.bears_leaves())
    }

    pub fn control_count(&self) -> usize {
        self.controls().count()
    }

    pub fn find_node(&self, id: &str) -> Option<&FrameworkNode> {
        find_node(self, id)
    }

    pub fn summary(&self) -> FrameworkSummary {
        FrameworkSummary {
            id: self.id.clone(),
            name: self.name.clone(),
            version: self.version.clone(),
            domain_count: self.domains.len(),
            control_count: self.control_count(),
            leaf_count: self.leaf_count(),
        }
    }

    /// Serialize to the framework-file format (pretty JSON).
    pub fn to_document(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("framework serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameworkSummary {
    pub id: String,
    pub name: String,
    pub version: String,
    pub domain_count: usize,
    pub control_count: usize,
    pub leaf_count: usize,
}

/// Look up a node anywhere in the tree by its dotted-path id.
///
/// Descends only into subtrees whose id is a path prefix of `id`.
pub fn find_node<'a>(def: &'a FrameworkDefinition, id: &str) -> Option<&'a FrameworkNode> {
    fn search<'a>(level: &'a [FrameworkNode], id: &str) -> Option<&'a FrameworkNode> {
        level.iter().find_map(|node| {
            if node.id == id {
                Some(node)
            } else if is_path_prefix(&node.id, id) {
                search(node.children(), id)
            } else {
                None
            }
        })
    }
    search(&def.domains, id)
}

/// `parent` is a strict dotted-path prefix of `child`.
pub(crate) fn is_path_prefix(parent: &str, child: &str) -> bool {
    child.len() > parent.len() + 1
        && child.starts_with(parent)
        && child.as_bytes()[parent.len()] == b'.'
}

#[derive(Debug, Error)]
pub enum FrameworkError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("framework has {} violation(s):\n{}", .0.len(), ViolationList(.0))]
    Invalid(Vec<Violation>),
}

struct ViolationList<'a>(&'a [Violation]);

impl fmt::Display for ViolationList<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Parse a framework document. Returns either a definition satisfying every
/// invariant or the complete list of violations; never a partial tree.
pub fn parse_framework(source: &str) -> Result<FrameworkDefinition, FrameworkError> {
    let def: FrameworkDefinition =
        serde_json::from_str(source).map_err(|e| FrameworkError::Syntax {
            line: e.line(),
            column: e.column(),
            message: strip_position(&e.to_string()),
        })?;
    let violations = validate_framework(&def);
    if violations.is_empty() {
        Ok(def)
    } else {
        Err(FrameworkError::Invalid(violations))
    }
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(idx) => msg[..idx].to_owned(),
        None => msg.to_owned(),
    }
}
