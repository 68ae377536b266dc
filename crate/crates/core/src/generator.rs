//! Seeded synthetic PML corpora with labeled duplicates.
//!
//! All randomness comes from `ChaCha8Rng` (rand_chacha) seeded with
//! `seed_from_u64`, so a `(spec, seed)` pair always yields the same corpus.
//!
//! Documents `0..originals` are independent random sensor reports. Every later
//! document is a copy of a uniformly chosen earlier one (original or copy),
//! optionally perturbed. Copies belong to the cluster of their source and the
//! ground truth holds every unordered pair inside a cluster.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::pml::{NodeKind, PmlNode, PmlTree};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeneratorError {
    #[error("bad corpus spec: {0}")]
    BadSpec(String),
}

const DIGITS: &[u8] = b"0123456789";
const HEX: &[u8] = b"0123456789abcdef";

/// EPC value pattern: `d` draws a decimal digit, `x` a hex digit, every other
/// character is literal. `"1:d.dd.ddd"` yields values like `1:4.16.362`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpcScheme(String);

impl EpcScheme {
    pub fn new(pattern: impl Into<String>) -> Result<EpcScheme, GeneratorError> {
        let pattern = pattern.into();
        if !pattern.chars().any(|c| c == 'd' || c == 'x') {
            return Err(GeneratorError::BadSpec(format!(
                "EPC pattern `{pattern}` has no random field"
            )));
        }
        Ok(EpcScheme(pattern))
    }

    pub fn pattern(&self) -> &str {
        &self.0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> String {
        self.0
            .chars()
            .map(|c| match c {
                'd' => DIGITS[rng.random_range(0..DIGITS.len())] as char,
                'x' => HEX[rng.random_range(0..HEX.len())] as char,
                c => c,
            })
            .collect()
    }
}

impl Default for EpcScheme {
    /// Header, 8-digit manager, 7-digit object class, 11-digit serial.
    fn default() -> Self {
        EpcScheme("1:dddddddd.ddddddd.ddddddddddd".to_string())
    }
}

impl fmt::Display for EpcScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Perturbation {
    #[default]
    None,
    /// This many single-character substitutions in the EPCs of each copy.
    CharEdits(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub count: usize,
    pub tags_per_doc: RangeInclusive<usize>,
    pub id_scheme: EpcScheme,
    pub duplicate_fraction: f64,
    pub perturbation: Perturbation,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            count: 500,
            tags_per_doc: 1..=5,
            id_scheme: EpcScheme::default(),
            duplicate_fraction: 0.0,
            perturbation: Perturbation::None,
            seed: 0,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        if self.count == 0 {
            return Err(GeneratorError::BadSpec("count must be at least 1".into()));
        }
        if self.tags_per_doc.is_empty() {
            return Err(GeneratorError::BadSpec(format!(
                "empty tag range {}..={}",
                self.tags_per_doc.start(),
                self.tags_per_doc.end()
            )));
        }
        if !(0.0..=1.0).contains(&self.duplicate_fraction) {
            return Err(GeneratorError::BadSpec(format!(
                "duplicate fraction {} outside [0, 1]",
                self.duplicate_fraction
            )));
        }
        Ok(())
    }

    /// `floor(fraction * count)`, keeping at least one original.
    pub fn duplicate_count(&self) -> usize {
        let wanted = (self.duplicate_fraction * self.count as f64 + 1e-9).floor() as usize;
        wanted.min(self.count.saturating_sub(1))
    }
}

/// Unordered document pair, stored with the smaller id first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct DocPair(String, String);

impl DocPair {
    pub fn new(a: impl Into<String>, b: impl Into<String>) -> DocPair {
        let (a, b) = (a.into(), b.into());
        if a <= b {
            DocPair(a, b)
        } else {
            DocPair(b, a)
        }
    }

    pub fn first(&self) -> &str {
        &self.0
    }

    pub fn second(&self) -> &str {
        &self.1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCorpus {
    pub documents: Vec<PmlTree>,
    pub truth: BTreeSet<DocPair>,
}

pub fn document_id(index: usize) -> String {
    format!("doc{index:05}")
}

pub fn generate_corpus(spec: &CorpusSpec) -> Result<LabeledCorpus, GeneratorError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let duplicates = spec.duplicate_count();
    let originals = spec.count - duplicates;

    let mut documents = Vec::with_capacity(spec.count);
    let mut cluster = Vec::with_capacity(spec.count);
    for i in 0..originals {
        documents.push(random_document(&document_id(i), spec, &mut rng));
        cluster.push(i);
    }
    for i in originals..spec.count {
        let source = rng.random_range(0..i);
        let mut copy = documents[source].clone().with_source_id(document_id(i));
        if let Perturbation::CharEdits(edits) = spec.perturbation {
            copy = perturb(&copy, edits, rng.random());
        }
        documents.push(copy);
        cluster.push(cluster[source]);
    }

    let mut truth = BTreeSet::new();
    for i in originals..spec.count {
        for j in 0..i {
            if cluster[j] == cluster[i] {
                truth.insert(DocPair::new(document_id(j), document_id(i)));
            }
        }
    }
    Ok(LabeledCorpus { documents, truth })
}

const COMMANDS: [&str; 4] = [
    "READ_PALLET_TAGS_ONLY",
    "READ_CASE_TAGS_ONLY",
    "READ_ALL_TAGS",
    "INVENTORY",
];

/// One random sensor report with a single observation. Observation IDs,
/// commands and data blocks are optional; every tag carries an EPC and may
/// carry a data block.
pub fn random_document<R: Rng + ?Sized>(id: &str, spec: &CorpusSpec, rng: &mut R) -> PmlTree {
    let scheme = &spec.id_scheme;
    let mut observation = Vec::new();
    if rng.random_bool(0.5) {
        observation.push(PmlNode::value_element(
            NodeKind::Id,
            format!("{:08}", rng.random_range(0..100_000_000u32)),
        ));
    }
    if rng.random_bool(0.7) {
        observation.push(PmlNode::value_element(
            NodeKind::Command,
            COMMANDS[rng.random_range(0..COMMANDS.len())],
        ));
    }
    observation.push(PmlNode::value_element(NodeKind::DateTime, random_timestamp(rng)));
    if rng.random_bool(0.2) {
        observation.push(PmlNode::element(
            NodeKind::Data,
            vec![PmlNode::value_element(
                NodeKind::Other("Temperature".into()),
                format!("{:.1}", rng.random_range(-20.0..40.0f64)),
            )],
        ));
    }
    let tags = rng.random_range(spec.tags_per_doc.clone());
    for _ in 0..tags {
        let mut tag = vec![PmlNode::value_element(NodeKind::Id, scheme.sample(rng))];
        if rng.random_bool(0.3) {
            let eeprom: String = (0..16).map(|_| HEX[rng.random_range(0..16)] as char).collect();
            tag.push(PmlNode::element(
                NodeKind::Data,
                vec![PmlNode::value_element(NodeKind::Other("EEPROM".into()), eeprom)],
            ));
        }
        observation.push(PmlNode::element(NodeKind::Tag, tag));
    }

    let root = PmlNode::element(
        NodeKind::Sensor,
        vec![
            PmlNode::value_element(NodeKind::Id, scheme.sample(rng)),
            PmlNode::element(NodeKind::Observation, observation),
        ],
    );
    PmlTree::new(root, id)
}

fn random_timestamp<R: Rng + ?Sized>(rng: &mut R) -> String {
    format!(
        "{:04}-{:02}-{:02}T{:02}:{:02}:{:02}-06:00",
        rng.random_range(2002..=2012),
        rng.random_range(1..=12),
        rng.random_range(1..=28),
        rng.random_range(0..24),
        rng.random_range(0..60),
        rng.random_range(0..60)
    )
}

/// Applies `edits` single-character substitutions to the EPC values of the
/// sensor ID and the tag IDs. Each edit picks one of those strings uniformly
/// and a digit position not edited before (any digit position once all have
/// been), and writes a character that differs from the original one there.
/// Structure is untouched and `edits == 0` returns an equal document.
pub fn perturb(doc: &PmlTree, edits: usize, seed: u64) -> PmlTree {
    let mut out = doc.clone();
    if edits == 0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut targets = epc_values_mut(&mut out.root);
    if targets.is_empty() {
        return out;
    }
    let originals: Vec<Vec<char>> = targets.iter().map(|v| v.chars().collect()).collect();
    let mut current = originals.clone();
    let mut touched: Vec<Vec<bool>> = originals.iter().map(|c| vec![false; c.len()]).collect();

    for _ in 0..edits {
        let t = rng.random_range(0..targets.len());
        let chars = &originals[t];
        if chars.is_empty() {
            continue;
        }
        let digit_positions: Vec<usize> = (0..chars.len()).filter(|&i| chars[i].is_ascii_digit()).collect();
        let pool = if digit_positions.is_empty() {
            (0..chars.len()).collect()
        } else {
            digit_positions
        };
        let fresh: Vec<usize> = pool.iter().copied().filter(|&i| !touched[t][i]).collect();
        let candidates = if fresh.is_empty() { &pool } else { &fresh };
        let pos = candidates[rng.random_range(0..candidates.len())];
        let original = chars[pos];
        let alphabet = if original.is_ascii_digit() { DIGITS } else { HEX };
        let replacement = loop {
            let c = alphabet[rng.random_range(0..alphabet.len())] as char;
            if c != original {
                break c;
            }
        };
        current[t][pos] = replacement;
        touched[t][pos] = true;
    }

    for (value, chars) in targets.iter_mut().zip(current) {
        **value = chars.into_iter().collect();
    }
    out
}

/// Mutable text of the sensor ID and every tag ID under the observations.
fn epc_values_mut(root: &mut PmlNode) -> Vec<&mut String> {
    let mut out = Vec::new();
    for child in root.children.iter_mut() {
        match child.kind {
            NodeKind::Id => out.extend(first_text_mut(child)),
            NodeKind::Observation => {
                for tag in child.children.iter_mut().filter(|c| c.kind == NodeKind::Tag) {
                    if let Some(id) = tag.children.iter_mut().find(|c| c.kind == NodeKind::Id) {
                        out.extend(first_text_mut(id));
                    }
                }
            }
            _ => {}
        }
    }
    out
}

fn first_text_mut(node: &mut PmlNode) -> Option<&mut String> {
    node.children
        .iter_mut()
        .find(|c| c.is_text())
        .and_then(|t| t.value.as_mut())
}
