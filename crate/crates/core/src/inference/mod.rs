//! Priors, conditional probability tables and the duplicate probability of
//! two documents.
//!
//! Every non-leaf variable of a merged graph gets one of these tables:
//!
//! | variable                   | table                                         |
//! |----------------------------|-----------------------------------------------|
//! | `IdVar`, `TagPairVar`      | CP1: weighted sum of matching value pairs     |
//! | `SensorVar`                | CP2: AND of its inputs                        |
//! | `TagRowVar`                | CP3-row: OR over the row's pairs (noisy-OR)   |
//! | `TagSetVar`                | CP3-set: mean of the row indicators over M    |
//! | `ObservationVar`           | copies `TagSetVar`, or a constant without tags |
//!
//! With independent inputs the marginal of the sink collapses to
//!
//! ```text
//! P(Sensor) = P(ID) * (1/M) * sum_i [1 - prod_j (1 - P(ID_ij))]
//! ```
//!
//! which [`ProbAnnotatedGraph::closed_form`] evaluates. [`enumerate_exact`]
//! computes the same marginal by summing the full joint and is used as the
//! reference in tests.

mod exact;
mod similarity;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::bayesnet::{merge_trees, BnGraph, BnNodeKind, Side};
use crate::pml::{validate, PmlTree, Violation};
use crate::reduce::{reduce_pml, ReducedTree};

pub use exact::{enumerate_exact, enumerate_exact_with_cap, DEFAULT_ENUMERATION_CAP};
pub use similarity::{levenshtein, string_similarity, SimilarityMode};

/// Lower edge of the empirical duplicate band.
pub const DEFAULT_THRESHOLD: f64 = 0.4095;

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("noisy-OR over an empty row")]
    EmptyRow,
    #[error("mean over an empty tag set")]
    EmptySet,
    #[error("expected {expected} row probabilities, got {got}")]
    RowCountMismatch { expected: usize, got: usize },
    #[error("{pairs} value pairs exceed the enumeration cap of {cap}")]
    TooLarge { pairs: usize, cap: usize },
    #[error("invalid attribute weights: {0}")]
    InvalidWeights(String),
    #[error("document `{source_id}` violates the PML composition rules: {}", .violations.first().map(ToString::to_string).unwrap_or_default())]
    InvalidDocument {
        source_id: String,
        violations: Vec<Violation>,
    },
    #[error("graph has a cycle")]
    Cyclic,
    #[error("graph must have exactly one sink, found {0}")]
    NoUniqueSink(usize),
    #[error("variable `{0}` is missing an input")]
    MissingInput(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub similarity: SimilarityMode,
    /// Attribute weights of CP1 tables. Only consulted for variables comparing
    /// more than one attribute; a single attribute always weighs 1.
    pub weights: BTreeMap<String, f64>,
    pub threshold: f64,
    /// Average the (a, b) and (b, a) evaluations.
    pub symmetrize: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            similarity: SimilarityMode::Edit,
            weights: BTreeMap::from([("ID".to_string(), 1.0)]),
            threshold: DEFAULT_THRESHOLD,
            symmetrize: false,
        }
    }
}

impl SimConfig {
    pub fn with_similarity(mut self, similarity: SimilarityMode) -> Self {
        self.similarity = similarity;
        self
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn with_symmetrize(mut self, symmetrize: bool) -> Self {
        self.symmetrize = symmetrize;
        self
    }

    /// Weights for a variable comparing `attributes`; they must sum to 1.
    pub fn weights_for(&self, attributes: &[&str]) -> Result<Vec<f64>, InferenceError> {
        if let [_] = attributes {
            return Ok(vec![1.0]);
        }
        let weights = attributes
            .iter()
            .map(|a| {
                self.weights
                    .get(*a)
                    .copied()
                    .ok_or_else(|| InferenceError::InvalidWeights(format!("no weight for `{a}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(InferenceError::InvalidWeights("weights must lie in [0, 1]".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(InferenceError::InvalidWeights(format!(
                "weights of {attributes:?} sum to {sum}, not 1"
            )));
        }
        Ok(weights)
    }
}

/// Prior that the values of a leaf pair are duplicates.
pub fn leaf_prior(pair: (&str, &str), cfg: &SimConfig) -> f64 {
    string_similarity(pair.0, pair.1, cfg.similarity)
}

/// `1 - prod(1 - p_i)`: probability that at least one independent cause holds.
pub fn noisy_or(row_priors: &[f64]) -> Result<f64, InferenceError> {
    if row_priors.is_empty() {
        return Err(InferenceError::EmptyRow);
    }
    let miss: f64 = row_priors.iter().map(|p| 1.0 - p).product();
    Ok(1.0 - miss)
}

/// Mean of the row probabilities, normalized by the first document's tag count.
pub fn tag_set_prob(rows: &[f64], m: usize) -> Result<f64, InferenceError> {
    if m == 0 {
        return Err(InferenceError::EmptySet);
    }
    if rows.len() != m {
        return Err(InferenceError::RowCountMismatch {
            expected: m,
            got: rows.len(),
        });
    }
    Ok(rows.iter().sum::<f64>() / m as f64)
}

/// Conditional probability table of a non-leaf variable.
#[derive(Debug, Clone, PartialEq)]
pub enum Cpt {
    /// CP1. `pairs` index into [`ProbAnnotatedGraph::pairs`].
    ValueMatch {
        pairs: Vec<usize>,
        weights: Vec<f64>,
    },
    /// CP2.
    And,
    /// CP3-row.
    AnyMatch,
    /// CP3-set.
    MeanMatch,
    PassThrough,
    Constant(f64),
}

impl Cpt {
    pub fn class_name(&self) -> &'static str {
        match self {
            Cpt::ValueMatch { .. } => "CP1",
            Cpt::And => "CP2",
            Cpt::AnyMatch => "CP3-row",
            Cpt::MeanMatch => "CP3-set",
            Cpt::PassThrough => "pass-through",
            Cpt::Constant(_) => "constant",
        }
    }
}

/// Two value leaves compared by one CP1 variable, with the prior that they are
/// duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafPair {
    pub attribute: String,
    pub left: String,
    pub right: String,
    /// The CP1 variable this pair feeds.
    pub target: usize,
    pub prior: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbAnnotatedGraph {
    graph: BnGraph,
    pairs: Vec<LeafPair>,
    cpts: Vec<Option<Cpt>>,
    inputs: Vec<Vec<usize>>,
    order: Vec<usize>,
    sink: Option<usize>,
}

impl ProbAnnotatedGraph {
    pub fn graph(&self) -> &BnGraph {
        &self.graph
    }

    pub fn pairs(&self) -> &[LeafPair] {
        &self.pairs
    }

    /// `None` for value leaves.
    pub fn cpt(&self, ix: usize) -> Option<&Cpt> {
        self.cpts[ix].as_ref()
    }

    pub fn set_prior(&mut self, pair: usize, prior: f64) {
        self.pairs[pair].prior = prior.clamp(0.0, 1.0);
    }

    pub fn sink(&self) -> Option<usize> {
        self.sink
    }

    pub(crate) fn inputs(&self, ix: usize) -> &[usize] {
        &self.inputs[ix]
    }

    /// Non-leaf variables, causes first.
    pub(crate) fn variable_order(&self) -> impl Iterator<Item = usize> + '_ {
        self.order.iter().copied().filter(|&ix| self.cpts[ix].is_some())
    }

    /// Marginal of the sink assuming independent inputs at every variable,
    /// which holds for merged graphs since each variable feeds exactly one other.
    /// The empty graph evaluates to 0.
    pub fn closed_form(&self) -> Result<f64, InferenceError> {
        let Some(sink) = self.sink else {
            return Ok(0.0);
        };
        let mut values = vec![0.0; self.cpts.len()];
        for ix in self.variable_order() {
            let inputs = self.inputs(ix);
            let input_values = || inputs.iter().map(|&i| values[i]);
            let p = match self.cpts[ix].as_ref().expect("variables carry a table") {
                Cpt::ValueMatch { pairs, weights } => {
                    pairs.iter().zip(weights).map(|(&k, w)| w * self.pairs[k].prior).sum()
                }
                Cpt::And => input_values().product(),
                Cpt::AnyMatch => noisy_or(&input_values().collect::<Vec<_>>())?,
                Cpt::MeanMatch => tag_set_prob(&input_values().collect::<Vec<_>>(), inputs.len())?,
                Cpt::PassThrough => input_values()
                    .next()
                    .ok_or_else(|| InferenceError::MissingInput(self.graph.node(ix).key.clone()))?,
                Cpt::Constant(c) => *c,
            };
            values[ix] = p;
        }
        Ok(values[sink])
    }
}

/// Assigns a table to every variable and a prior to every value-leaf pair.
pub fn annotate(graph: BnGraph, cfg: &SimConfig) -> Result<ProbAnnotatedGraph, InferenceError> {
    let n = graph.nodes().len();
    let mut inputs = vec![Vec::new(); n];
    for &(from, to) in graph.edges() {
        inputs[to].push(from);
    }
    let order = graph.topological_order().ok_or(InferenceError::Cyclic)?;
    let sink = if graph.is_empty() {
        None
    } else {
        match graph.sinks().as_slice() {
            [s] => Some(*s),
            other => return Err(InferenceError::NoUniqueSink(other.len())),
        }
    };

    let mut pairs = Vec::new();
    let mut cpts = Vec::with_capacity(n);
    for (ix, node) in graph.nodes().iter().enumerate() {
        let cpt = match node.kind {
            BnNodeKind::ValueLeaf => None,
            BnNodeKind::IdVar | BnNodeKind::TagPairVar => {
                let mut by_attr: BTreeMap<&str, (&str, &str)> = BTreeMap::new();
                for &i in &inputs[ix] {
                    let leaf = graph.node(i);
                    if leaf.kind != BnNodeKind::ValueLeaf {
                        continue;
                    }
                    let attr = leaf.attribute.as_deref().unwrap_or_default();
                    let value = leaf.value.as_deref().unwrap_or_default();
                    let entry = by_attr.entry(attr).or_insert(("", ""));
                    match leaf.side {
                        Some(Side::B) => entry.1 = value,
                        _ => entry.0 = value,
                    }
                }
                let attrs: Vec<&str> = by_attr.keys().copied().collect();
                let weights = if attrs.is_empty() {
                    Vec::new()
                } else {
                    cfg.weights_for(&attrs)?
                };
                let mut members = Vec::with_capacity(attrs.len());
                for (attr, (left, right)) in by_attr {
                    members.push(pairs.len());
                    pairs.push(LeafPair {
                        attribute: attr.to_string(),
                        left: left.to_string(),
                        right: right.to_string(),
                        target: ix,
                        prior: leaf_prior((left, right), cfg),
                    });
                }
                Some(Cpt::ValueMatch {
                    pairs: members,
                    weights,
                })
            }
            BnNodeKind::SensorVar => Some(Cpt::And),
            BnNodeKind::TagRowVar => Some(Cpt::AnyMatch),
            BnNodeKind::TagSetVar => Some(Cpt::MeanMatch),
            BnNodeKind::ObservationVar => {
                if inputs[ix].is_empty() {
                    // no tag set: agreement iff both documents have no tags
                    let agree = graph.tag_counts() == (0, 0);
                    Some(Cpt::Constant(if agree { 1.0 } else { 0.0 }))
                } else {
                    Some(Cpt::PassThrough)
                }
            }
        };
        cpts.push(cpt);
    }

    Ok(ProbAnnotatedGraph {
        graph,
        pairs,
        cpts,
        inputs,
        order,
        sink,
    })
}

/// Merges and annotates the directed comparison of `a` against `b`. `None`
/// when the root labels differ.
pub fn annotate_pair(
    a: &ReducedTree,
    b: &ReducedTree,
    cfg: &SimConfig,
) -> Result<Option<ProbAnnotatedGraph>, InferenceError> {
    match merge_trees(a, b) {
        Ok(graph) => annotate(graph, cfg).map(Some),
        Err(_) => Ok(None),
    }
}

fn directed(a: &ReducedTree, b: &ReducedTree, cfg: &SimConfig) -> Result<f64, InferenceError> {
    match annotate_pair(a, b, cfg)? {
        Some(g) => g.closed_form(),
        None => Ok(0.0),
    }
}

/// Duplicate probability of two already reduced documents.
pub fn pair_similarity(a: &ReducedTree, b: &ReducedTree, cfg: &SimConfig) -> Result<f64, InferenceError> {
    let forward = directed(a, b, cfg)?;
    if cfg.symmetrize {
        Ok((forward + directed(b, a, cfg)?) / 2.0)
    } else {
        Ok(forward)
    }
}

/// Same quantity as [`pair_similarity`], computed by full enumeration.
pub fn pair_similarity_exact(
    a: &ReducedTree,
    b: &ReducedTree,
    cfg: &SimConfig,
    cap: usize,
) -> Result<f64, InferenceError> {
    let run = |x, y| match annotate_pair(x, y, cfg)? {
        Some(g) => enumerate_exact_with_cap(&g, cap),
        None => Ok(0.0),
    };
    let forward = run(a, b)?;
    if cfg.symmetrize {
        Ok((forward + run(b, a)?) / 2.0)
    } else {
        Ok(forward)
    }
}

pub fn ensure_valid(tree: &PmlTree) -> Result<(), InferenceError> {
    let violations = validate(tree);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(InferenceError::InvalidDocument {
            source_id: tree.source_id.clone(),
            violations,
        })
    }
}

/// Reduce, merge, annotate and evaluate.
pub fn document_similarity(a: &PmlTree, b: &PmlTree, cfg: &SimConfig) -> Result<f64, InferenceError> {
    ensure_valid(a)?;
    ensure_valid(b)?;
    pair_similarity(&reduce_pml(a), &reduce_pml(b), cfg)
}
