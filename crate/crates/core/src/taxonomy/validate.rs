use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{is_path_prefix, FrameworkDefinition, FrameworkNode, NodeBody};

/// Node id used for violations that concern the grading scale.
pub const SCALE_NODE: &str = "<scale>";
/// Node id used for violations that concern the framework as a whole.
pub const FRAMEWORK_NODE: &str = "<framework>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationCode {
    ScaleTooSmall,
    ScaleNonContiguous,
    ScaleLabelEmpty,
    ScaleLabelDuplicate,
    EmptyFrameworkId,
    NoDomains,
    LeafDomain,
    EmptyId,
    DuplicateId,
    IdNotExtendingParent,
    EmptyAggregate,
    EmptyQuestion,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ScaleTooSmall => "scale_too_small",
            Self::ScaleNonContiguous => "non_contiguous_scale",
            Self::ScaleLabelEmpty => "scale_label_empty",
            Self::ScaleLabelDuplicate => "scale_label_duplicate",
            Self::EmptyFrameworkId => "empty_framework_id",
            Self::NoDomains => "no_domains",
            Self::LeafDomain => "leaf_domain",
            Self::EmptyId => "empty_id",
            Self::DuplicateId => "duplicate_id",
            Self::IdNotExtendingParent => "id_not_extending_parent",
            Self::EmptyAggregate => "empty_aggregate",
            Self::EmptyQuestion => "empty_question",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub node_id: String,
    pub message: String,
}

impl Violation {
    fn new(code: ViolationCode, node_id: &str, message: impl Into<String>) -> Self {
        Self {
            code,
            node_id: node_id.to_owned(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", self.code, self.node_id, self.message)
    }
}

/// Check every structural invariant of a framework.
///
/// Scale violations come first, then framework-level ones, then node
/// violations in pre-order. An empty list means the framework is valid.
pub fn validate_framework(def: &FrameworkDefinition) -> Vec<Violation> {
    let mut out = Vec::new();
    validate_scale(def, &mut out);

    if def.id.trim().is_empty() {
        out.push(Violation::new(
            ViolationCode::EmptyFrameworkId,
            FRAMEWORK_NODE,
            "framework id is empty",
        ));
    }
    if def.domains.is_empty() {
        out.push(Violation::new(
            ViolationCode::NoDomains,
            FRAMEWORK_NODE,
            "framework has no domains",
        ));
    }

    let mut seen = HashSet::new();
    for domain in &def.domains {
        if domain.is_leaf() {
            out.push(Violation::new(
                ViolationCode::LeafDomain,
                &domain.id,
                "top-level domain must be an aggregate (tree depth < 2)",
            ));
        }
        validate_node(domain, None, &mut seen, &mut out);
    }
    out
}

fn validate_scale(def: &FrameworkDefinition, out: &mut Vec<Violation>) {
    let levels = &def.scale.levels;
    if levels.len() < 2 {
        out.push(Violation::new(
            ViolationCode::ScaleTooSmall,
            SCALE_NODE,
            format!("scale needs at least 2 levels, has {}", levels.len()),
        ));
    }
    if levels
        .iter()
        .enumerate()
        .any(|(i, l)| l.value != i as i64)
    {
        let values: Vec<String> = levels.iter().map(|l| l.value.to_string()).collect();
        out.push(Violation::new(
            ViolationCode::ScaleNonContiguous,
            SCALE_NODE,
            format!(
                "non-contiguous scale: values {{{}}} are not 0, 1, 2, ...",
                values.join(",")
            ),
        ));
    }
    let mut labels = HashSet::new();
    for level in levels {
        if level.label.trim().is_empty() {
            out.push(Violation::new(
                ViolationCode::ScaleLabelEmpty,
                SCALE_NODE,
                format!("scale value {} has an empty label", level.value),
            ));
        } else if !labels.insert(level.label.as_str()) {
            out.push(Violation::new(
                ViolationCode::ScaleLabelDuplicate,
                SCALE_NODE,
                format!("scale label `{}` is used twice", level.label),
            ));
        }
    }
}

fn validate_node<'a>(
    node: &'a FrameworkNode,
    parent: Option<&str>,
    seen: &mut HashSet<&'a str>,
    out: &mut Vec<Violation>,
) {
    if node.id.trim().is_empty() {
        out.push(Violation::new(
            ViolationCode::EmptyId,
            &node.id,
            format!("node `{}` has an empty id", node.name),
        ));
    } else if !seen.insert(node.id.as_str()) {
        out.push(Violation::new(
            ViolationCode::DuplicateId,
            &node.id,
            "duplicate id",
        ));
    }
    if let Some(parent) = parent {
        if !is_path_prefix(parent, &node.id) {
            out.push(Violation::new(
                ViolationCode::IdNotExtendingParent,
                &node.id,
                format!("id does not extend parent path `{parent}`"),
            ));
        }
    }
    match &node.body {
        NodeBody::Leaf { question } => {
            if question.trim().is_empty() {
                out.push(Violation::new(
                    ViolationCode::EmptyQuestion,
                    &node.id,
                    "leaf has an empty question",
                ));
            }
        }
        NodeBody::Aggregate { children } => {
            if children.is_empty() {
                out.push(Violation::new(
                    ViolationCode::EmptyAggregate,
                    &node.id,
                    "empty aggregate: node has no children",
                ));
            }
            for child in children {
                validate_node(child, Some(&node.id), seen, out);
            }
        }
    }
}
