//! Exact inference by enumerating the joint distribution.
//!
//! Each leaf pair is a binary variable "these two values are duplicates" with
//! its prior. For every assignment of the pair variables, the remaining
//! variables are enumerated in topological order under their tables; the
//! probability of the sink being true is the total weight of the assignments
//! in which it is. Branches of zero probability are skipped, so deterministic
//! tables cost nothing extra. No independence between inputs is assumed.

use super::{Cpt, InferenceError, ProbAnnotatedGraph};

pub const DEFAULT_ENUMERATION_CAP: usize = 20;

pub fn enumerate_exact(g: &ProbAnnotatedGraph) -> Result<f64, InferenceError> {
    enumerate_exact_with_cap(g, DEFAULT_ENUMERATION_CAP)
}

/// Fails with [`InferenceError::TooLarge`] when the graph has more than `cap`
/// leaf pairs; cost grows as `2^pairs`.
pub fn enumerate_exact_with_cap(g: &ProbAnnotatedGraph, cap: usize) -> Result<f64, InferenceError> {
    let pairs = g.pairs().len();
    if pairs > cap {
        return Err(InferenceError::TooLarge { pairs, cap });
    }
    let Some(sink) = g.sink() else {
        return Ok(0.0);
    };
    let order: Vec<usize> = g.variable_order().collect();
    for &ix in &order {
        if matches!(g.cpt(ix), Some(Cpt::PassThrough)) && g.inputs(ix).is_empty() {
            return Err(InferenceError::MissingInput(g.graph().node(ix).key.clone()));
        }
    }

    let mut walk = Walk {
        g,
        order: &order,
        sink,
        pair_state: vec![false; pairs],
        state: vec![false; g.graph().nodes().len()],
        total: 0.0,
    };
    for assignment in 0u64..(1u64 << pairs) {
        let mut weight = 1.0;
        for (k, pair) in g.pairs().iter().enumerate() {
            let on = assignment >> k & 1 == 1;
            walk.pair_state[k] = on;
            weight *= if on { pair.prior } else { 1.0 - pair.prior };
        }
        if weight > 0.0 {
            walk.descend(0, weight);
        }
    }
    Ok(walk.total)
}

struct Walk<'a> {
    g: &'a ProbAnnotatedGraph,
    order: &'a [usize],
    sink: usize,
    pair_state: Vec<bool>,
    state: Vec<bool>,
    total: f64,
}

impl Walk<'_> {
    fn descend(&mut self, pos: usize, weight: f64) {
        let Some(&ix) = self.order.get(pos) else {
            if self.state[self.sink] {
                self.total += weight;
            }
            return;
        };
        let p_true = self.p_true(ix);
        if p_true > 0.0 {
            self.state[ix] = true;
            self.descend(pos + 1, weight * p_true);
        }
        if p_true < 1.0 {
            self.state[ix] = false;
            self.descend(pos + 1, weight * (1.0 - p_true));
        }
    }

    /// P(variable = 1 | current states of its inputs).
    fn p_true(&self, ix: usize) -> f64 {
        let inputs = self.g.inputs(ix);
        let on = || inputs.iter().filter(|&&i| self.state[i]);
        match self.g.cpt(ix).expect("only variables are enumerated") {
            Cpt::ValueMatch { pairs, weights } => pairs
                .iter()
                .zip(weights)
                .filter(|(&k, _)| self.pair_state[k])
                .map(|(_, w)| w)
                .sum(),
            Cpt::And => indicator(on().count() == inputs.len()),
            Cpt::AnyMatch => indicator(on().next().is_some()),
            Cpt::MeanMatch => on().count() as f64 / inputs.len() as f64,
            Cpt::PassThrough => indicator(self.state[inputs[0]]),
            Cpt::Constant(c) => *c,
        }
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}
