//! Duplicate probability of PML sensor documents.
//!
//! A document is parsed into an ordered labeled tree ([`pml`]), reduced to the
//! EPCs that identify it ([`reduce`]), merged with a second reduced document
//! into a Bayesian-network DAG ([`bayesnet`]) and evaluated in closed form
//! ([`inference`]). [`generator`] and [`eval`] produce labeled synthetic
//! corpora and score the method on them.
//!
//! ```
//! use pmlsim::{document_similarity, parse_pml, SimConfig};
//!
//! let doc = parse_pml(
//!     "<Sensor><ID>urn:epc:1:4.16.36</ID><Observation>\
//!      <DateTime>2002-11-06T13:04:34-06:00</DateTime>\
//!      <Tag><ID>1:2.24.404</ID></Tag></Observation></Sensor>",
//! )
//! .unwrap();
//! assert_eq!(document_similarity(&doc, &doc, &SimConfig::default()).unwrap(), 1.0);
//! ```

pub mod bayesnet;
pub mod eval;
pub mod generator;
pub mod inference;
pub mod pml;
pub mod reduce;

pub use bayesnet::{export_dot, merge_trees, BnGraph, BnNodeKind, RootMismatch};
pub use eval::{classify, pairwise_matrix, EvalOptions, EvalReport, Execution};
pub use generator::{generate_corpus, perturb, CorpusSpec, DocPair, EpcScheme, LabeledCorpus, Perturbation};
pub use inference::{
    annotate, document_similarity, enumerate_exact, leaf_prior, noisy_or, pair_similarity, string_similarity,
    tag_set_prob, InferenceError, ProbAnnotatedGraph, SimConfig, SimilarityMode,
};
pub use pml::{parse_pml, serialize_pml, validate, NodeKind, NodePath, PmlError, PmlNode, PmlTree, Violation};
pub use reduce::{del_leaf, del_subtree, reduce_pml, EditError, ReducedTree};
