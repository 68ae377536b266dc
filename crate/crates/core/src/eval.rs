//! Pairwise evaluation of a labeled corpus: probability matrix, threshold
//! classification, precision/recall, timing and histogram.
//!
//! Pair evaluations are independent. With the `parallel` feature they run on a
//! rayon pool chosen by [`EvalOptions::execution`]; otherwise, or with
//! [`Execution::Sequential`], they run in order on the calling thread. Results are identical either way.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::Serialize;

use crate::generator::{generate_corpus, CorpusSpec, DocPair, GeneratorError, LabeledCorpus};
use crate::inference::{ensure_valid, pair_similarity, InferenceError, SimConfig};
use crate::pml::PmlTree;
use crate::reduce::{reduce_pml, ReducedTree};

pub const DEFAULT_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Execution {
    Sequential,
    /// `None` uses rayon's global pool.
    Parallel(Option<usize>),
}

impl Execution {
    /// `--jobs` semantics: 1 is sequential, anything else a pool of that size.
    pub fn from_jobs(jobs: Option<usize>) -> Execution {
        match jobs {
            Some(1) => Execution::Sequential,
            other => Execution::Parallel(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EvalOptions {
    pub bins: usize,
    pub execution: Execution,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            bins: DEFAULT_BINS,
            execution: Execution::Parallel(None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairProb {
    pub a: String,
    pub b: String,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Timing {
    pub documents: usize,
    pub pairs: usize,
    pub wall_seconds: f64,
}

impl Timing {
    pub fn per_pair_micros(&self) -> f64 {
        if self.pairs == 0 {
            0.0
        } else {
            self.wall_seconds * 1e6 / self.pairs as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub count: usize,
}

/// Shape summary of the probability distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub std_dev: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub pair_probs: Vec<PairProb>,
    pub predicted: Vec<DocPair>,
    pub threshold: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub truth_count: usize,
    pub mean_prob: f64,
    pub moments: Moments,
    pub timings: Vec<Timing>,
    pub histogram: Vec<HistogramBin>,
}

/// Evaluates every unordered pair `(i, j)`, `i < j`, in row-major order.
/// Documents are validated and reduced once up front.
pub fn pairwise_matrix(
    corpus: &LabeledCorpus,
    cfg: &SimConfig,
    opts: &EvalOptions,
) -> Result<EvalReport, InferenceError> {
    pairwise_documents(&corpus.documents, cfg, opts)
}

pub fn pairwise_documents(
    documents: &[PmlTree],
    cfg: &SimConfig,
    opts: &EvalOptions,
) -> Result<EvalReport, InferenceError> {
    let start = Instant::now();
    for doc in documents {
        ensure_valid(doc)?;
    }
    let reduced: Vec<ReducedTree> = documents.iter().map(reduce_pml).collect();
    let probs = sweep(&reduced, cfg, opts.execution)?;
    let wall_seconds = start.elapsed().as_secs_f64();

    let n = documents.len();
    let mut pair_probs = Vec::with_capacity(probs.len());
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            pair_probs.push(PairProb {
                a: documents[i].source_id.clone(),
                b: documents[j].source_id.clone(),
                p: probs[k],
            });
            k += 1;
        }
    }

    let (mean_prob, moments) = summarize(&probs);
    Ok(EvalReport {
        histogram: histogram(&probs, opts.bins),
        timings: vec![Timing {
            documents: n,
            pairs: probs.len(),
            wall_seconds,
        }],
        pair_probs,
        predicted: Vec::new(),
        threshold: None,
        precision: 1.0,
        recall: 1.0,
        truth_count: 0,
        mean_prob,
        moments,
    })
}

fn row(reduced: &[ReducedTree], i: usize, cfg: &SimConfig) -> Result<Vec<f64>, InferenceError> {
    reduced[i + 1..]
        .iter()
        .map(|b| pair_similarity(&reduced[i], b, cfg))
        .collect()
}

fn sweep(reduced: &[ReducedTree], cfg: &SimConfig, execution: Execution) -> Result<Vec<f64>, InferenceError> {
    let n = reduced.len();
    let rows: Vec<Vec<f64>> = match execution {
        Execution::Sequential => (0..n).map(|i| row(reduced, i, cfg)).collect::<Result<_, _>>()?,
        Execution::Parallel(jobs) => parallel_rows(reduced, cfg, jobs)?,
    };
    Ok(rows.into_iter().flatten().collect())
}

#[cfg(feature = "parallel")]
fn parallel_rows(
    reduced: &[ReducedTree],
    cfg: &SimConfig,
    jobs: Option<usize>,
) -> Result<Vec<Vec<f64>>, InferenceError> {
    use rayon::prelude::*;

    let run = || {
        (0..reduced.len())
            .into_par_iter()
            .map(|i| row(reduced, i, cfg))
            .collect::<Result<Vec<_>, _>>()
    };
    match jobs {
        None => run(),
        Some(threads) => match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(run),
            Err(_) => run(),
        },
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_rows(
    reduced: &[ReducedTree],
    cfg: &SimConfig,
    _jobs: Option<usize>,
) -> Result<Vec<Vec<f64>>, InferenceError> {
    (0..reduced.len()).map(|i| row(reduced, i, cfg)).collect()
}

fn summarize(probs: &[f64]) -> (f64, Moments) {
    if probs.is_empty() {
        return (
            0.0,
            Moments {
                std_dev: 0.0,
                skewness: 0.0,
                excess_kurtosis: 0.0,
            },
        );
    }
    let n = probs.len() as f64;
    let mean = probs.iter().sum::<f64>() / n;
    let central = |k: i32| probs.iter().map(|p| (p - mean).powi(k)).sum::<f64>() / n;
    let (m2, m3, m4) = (central(2), central(3), central(4));
    let moments = if m2 > 0.0 {
        Moments {
            std_dev: m2.sqrt(),
            skewness: m3 / m2.powf(1.5),
            excess_kurtosis: m4 / (m2 * m2) - 3.0,
        }
    } else {
        Moments {
            std_dev: 0.0,
            skewness: 0.0,
            excess_kurtosis: 0.0,
        }
    };
    (mean, moments)
}

/// Equal-width bins over [0, 1]; 1.0 falls in the last bin.
pub fn histogram(probs: &[f64], bins: usize) -> Vec<HistogramBin> {
    let bins = bins.max(1);
    let mut counts = vec![0usize; bins];
    for &p in probs {
        let i = ((p * bins as f64).floor() as usize).min(bins - 1);
        counts[i] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            lo: i as f64 / bins as f64,
            count,
        })
        .collect()
}

/// True when the counts rise to a single strict maximum that is neither the
/// first nor the last bin, and fall after it.
pub fn is_unimodal(histogram: &[HistogramBin]) -> bool {
    let counts: Vec<usize> = histogram.iter().map(|b| b.count).collect();
    let Some(max) = counts.iter().copied().max() else {
        return false;
    };
    let peaks: Vec<usize> = (0..counts.len()).filter(|&i| counts[i] == max).collect();
    let [peak] = peaks.as_slice() else {
        return false;
    };
    let peak = *peak;
    peak > 0
        && peak + 1 < counts.len()
        && counts[..=peak].windows(2).all(|w| w[0] <= w[1])
        && counts[peak..].windows(2).all(|w| w[0] >= w[1])
}

/// Marks pairs with `p >= threshold` as duplicates and scores them against
/// `truth`. Precision is 1 when nothing is predicted, recall is 1 when there
/// is no truth.
pub fn classify(report: &EvalReport, truth: &BTreeSet<DocPair>, threshold: f64) -> EvalReport {
    let predicted: Vec<DocPair> = report
        .pair_probs
        .iter()
        .filter(|pp| pp.p >= threshold)
        .map(|pp| DocPair::new(pp.a.clone(), pp.b.clone()))
        .collect();
    let hits = predicted.iter().filter(|p| truth.contains(p)).count();
    let precision = if predicted.is_empty() {
        1.0
    } else {
        hits as f64 / predicted.len() as f64
    };
    let recall = if truth.is_empty() {
        1.0
    } else {
        hits as f64 / truth.len() as f64
    };
    EvalReport {
        predicted,
        threshold: Some(threshold),
        precision,
        recall,
        truth_count: truth.len(),
        ..report.clone()
    }
}

/// Generates a corpus per size from `base` and times its pairwise sweep.
pub fn timing_sweep(
    sizes: &[usize],
    base: &CorpusSpec,
    cfg: &SimConfig,
    opts: &EvalOptions,
) -> Result<Vec<Timing>, SweepError> {
    let mut out = Vec::with_capacity(sizes.len());
    for &count in sizes {
        let corpus = generate_corpus(&CorpusSpec { count, ..base.clone() })?;
        let report = pairwise_matrix(&corpus, cfg, opts)?;
        out.extend(report.timings);
    }
    Ok(out)
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `ys` on `xs`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    let n = xs.len().min(ys.len()) as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - mean_y).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r_squared = if sxx > 0.0 && syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        1.0
    };
    LinearFit {
        slope,
        intercept: mean_y - slope * mean_x,
        r_squared,
    }
}
