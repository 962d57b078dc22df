//! Recursive mean aggregation of leaf grades.
//!
//! A leaf's achievement is its grade; an aggregate's achievement is the
//! arithmetic mean of its children's achievements, all the way up to a
//! synthetic root whose children are the domains. Priority is the gap to
//! the top of the scale.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::{FrameworkDefinition, FrameworkNode, GradingScale, NodeKind};

/// A session's grades, keyed by leaf id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerSet {
    pub framework_id: String,
    pub answers: BTreeMap<String, i64>,
}

impl AnswerSet {
    pub fn new(framework_id: impl Into<String>) -> Self {
        Self {
            framework_id: framework_id.into(),
            answers: BTreeMap::new(),
        }
    }

    /// Grade every leaf of `def` with the same value.
    pub fn uniform(def: &FrameworkDefinition, grade: i64) -> Self {
        let mut set = Self::new(&def.id);
        for leaf in def.leaves() {
            set.answers.insert(leaf.id.clone(), grade);
        }
        set
    }

    pub fn insert(&mut self, leaf_id: impl Into<String>, grade: i64) -> Option<i64> {
        self.answers.insert(leaf_id.into(), grade)
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }

    pub fn parse(source: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(source)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Every leaf must be answered.
    #[default]
    Strict,
    /// Unanswered leaves are skipped and coverage is reported.
    Provisional,
}

/// Score-annotated mirror of a framework node.
///
/// `achievement` and `priority` are absent only in provisional results, for
/// nodes with no answered leaf beneath them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeScore {
    pub node_id: String,
    pub name: String,
    pub kind: NodeKind,
    pub achievement: Option<f64>,
    pub priority: Option<f64>,
    pub coverage: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<NodeScore>,
}

impl NodeScore {
    pub fn iter(&self) -> impl Iterator<Item = &NodeScore> {
        let mut stack = vec![self];
        std::iter::from_fn(move || {
            let node = stack.pop()?;
            stack.extend(node.children.iter().rev());
            Some(node)
        })
    }

    /// Nodes whose children include at least one leaf.
    pub fn bears_leaves(&self) -> bool {
        self.children.iter().any(|c| c.kind == NodeKind::Leaf)
    }

    pub fn find(&self, node_id: &str) -> Option<&NodeScore> {
        self.iter().find(|n| n.node_id == node_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub framework_id: String,
    pub mode: Mode,
    pub scale: GradingScale,
    pub answered_count: usize,
    pub total_leaves: usize,
    /// Top level; its children are the domains.
    pub root: NodeScore,
}

impl AggregateResult {
    /// Overall achievement, or `None` when nothing has been answered.
    pub fn overall(&self) -> Option<f64> {
        self.root.achievement
    }

    pub fn domains(&self) -> &[NodeScore] {
        &self.root.children
    }

    pub fn is_complete(&self) -> bool {
        self.answered_count == self.total_leaves
    }

    pub fn node(&self, node_id: &str) -> Option<&NodeScore> {
        self.root.find(node_id)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoringError {
    #[error("answers are for framework `{found}`, expected `{expected}`")]
    FrameworkMismatch { expected: String, found: String },
    #[error("unknown leaf id `{0}`")]
    UnknownLeaf(String),
    #[error("grade {grade} for `{leaf_id}` is outside the scale 0..={max}")]
    GradeOutOfScale { leaf_id: String, grade: i64, max: i64 },
    #[error("{} leaf/leaves unanswered: {}", .missing.len(), .missing.join(", "))]
    Incomplete { missing: Vec<String> },
    #[error("achievement {value} is outside 0..={max}")]
    OutOfRange { value: f64, max: f64 },
}

/// Check the answer-set invariants against a framework: matching framework
/// id, keys naming existing leaves, grades on the scale.
pub fn check_answers(def: &FrameworkDefinition, answers: &AnswerSet) -> Result<(), ScoringError> {
    if answers.framework_id != def.id {
        return Err(ScoringError::FrameworkMismatch {
            expected: def.id.clone(),
            found: answers.framework_id.clone(),
        });
    }
    for (leaf_id, &grade) in &answers.answers {
        check_answer(def, leaf_id, grade)?;
    }
    Ok(())
}

/// Check a single (leaf, grade) pair.
pub fn check_answer(def: &FrameworkDefinition, leaf_id: &str, grade: i64) -> Result<(), ScoringError> {
    match def.find_node(leaf_id) {
        Some(node) if node.is_leaf() => {}
        _ => return Err(ScoringError::UnknownLeaf(leaf_id.to_owned())),
    }
    if !def.scale.contains(grade) {
        return Err(ScoringError::GradeOutOfScale {
            leaf_id: leaf_id.to_owned(),
            grade,
            max: def.scale.max_value(),
        });
    }
    Ok(())
}

/// Leaves of `def` with no answer, in pre-order.
pub fn missing_leaves(def: &FrameworkDefinition, answers: &AnswerSet) -> Vec<String> {
    def.leaves()
        .filter(|l| !answers.answers.contains_key(&l.id))
        .map(|l| l.id.clone())
        .collect()
}

/// Roll leaf grades up the tree.
pub fn aggregate(
    def: &FrameworkDefinition,
    answers: &AnswerSet,
    mode: Mode,
) -> Result<AggregateResult, ScoringError> {
    check_answers(def, answers)?;
    if mode == Mode::Strict {
        let missing = missing_leaves(def, answers);
        if !missing.is_empty() {
            return Err(ScoringError::Incomplete { missing });
        }
    }

    let max = def.scale.max_f64();
    let mut answered = 0;
    let mut total = 0;
    let children: Vec<NodeScore> = def
        .domains
        .iter()
        .map(|d| {
            let (score, a, t) = score_node(d, answers, max);
            answered += a;
            total += t;
            score
        })
        .collect();
    let achievement = mean_of(&children);
    let root = NodeScore {
        node_id: def.id.clone(),
        name: def.name.clone(),
        kind: NodeKind::Aggregate,
        achievement,
        priority: achievement.map(|a| max - a),
        coverage: ratio(answered, total),
        children,
    };

    Ok(AggregateResult {
        framework_id: def.id.clone(),
        mode,
        scale: def.scale.clone(),
        answered_count: answered,
        total_leaves: total,
        root,
    })
}

/// Returns the node's score plus (answered, total) leaf counts beneath it.
fn score_node(node: &FrameworkNode, answers: &AnswerSet, max: f64) -> (NodeScore, usize, usize) {
    let (achievement, children, answered, total) = if node.is_leaf() {
        let grade = answers.answers.get(&node.id).map(|&g| g as f64);
        (grade, Vec::new(), usize::from(grade.is_some()), 1)
    } else {
        let mut answered = 0;
        let mut total = 0;
        let children: Vec<NodeScore> = node
            .children()
            .iter()
            .map(|c| {
                let (s, a, t) = score_node(c, answers, max);
                answered += a;
                total += t;
                s
            })
            .collect();
        (mean_of(&children), children, answered, total)
    };
    let score = NodeScore {
        node_id: node.id.clone(),
        name: node.name.clone(),
        kind: node.kind(),
        achievement,
        priority: achievement.map(|a| max - a),
        coverage: ratio(answered, total),
        children,
    };
    (score, answered, total)
}

/// Mean over the children that have a score. Values are summed in sorted
/// order so the result does not depend on sibling order.
fn mean_of(children: &[NodeScore]) -> Option<f64> {
    let mut values: Vec<f64> = children.iter().filter_map(|c| c.achievement).collect();
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

fn ratio(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        part as f64 / whole as f64
    }
}

fn check_range(achievement: f64, scale: &GradingScale) -> Result<f64, ScoringError> {
    let max = scale.max_f64();
    if (0.0..=max).contains(&achievement) {
        Ok(max)
    } else {
        Err(ScoringError::OutOfRange {
            value: achievement,
            max,
        })
    }
}

/// Gap between the ideal (top of scale) and the achievement.
pub fn priority_of(achievement: f64, scale: &GradingScale) -> Result<f64, ScoringError> {
    let max = check_range(achievement, scale)?;
    Ok(max - achievement)
}

pub fn to_percent(achievement: f64, scale: &GradingScale) -> Result<f64, ScoringError> {
    let max = check_range(achievement, scale)?;
    Ok(achievement / max * 100.0)
}

/// Label of the nearest scale value; exact halves round up.
pub fn predicate_of(achievement: f64, scale: &GradingScale) -> Result<&str, ScoringError> {
    check_range(achievement, scale)?;
    let nearest = ((achievement + 0.5).floor() as i64).min(scale.max_value());
    Ok(scale
        .label_of(nearest)
        .expect("validated scale holds every value in 0..=max"))
}

/// Fraction of the framework's leaves that carry an answer.
pub fn coverage_of(def: &FrameworkDefinition, answers: &AnswerSet) -> f64 {
    let total = def.leaf_count();
    let answered = def
        .leaves()
        .filter(|l| answers.answers.contains_key(&l.id))
        .count();
    ratio(answered, total)
}
