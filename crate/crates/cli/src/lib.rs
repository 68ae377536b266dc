//! Command-line front end: `compare`, `reduce`, `graph`, `generate` and
//! `evaluate`. Machine-readable output goes to stdout, diagnostics to stderr.
//!
//! Exit codes: 0 on success, 1 on domain errors (unreadable or invalid
//! documents, bad corpus), 2 on usage errors. Every flag is checked before
//! any file is touched.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use pmlsim::eval::{pairwise_documents, HistogramBin, DEFAULT_BINS};
use pmlsim::inference::{ensure_valid, pair_similarity_exact, DEFAULT_ENUMERATION_CAP, DEFAULT_THRESHOLD};
use pmlsim::{
    classify, export_dot, generate_corpus, merge_trees, parse_pml, reduce_pml, serialize_pml, BnGraph, CorpusSpec,
    DocPair, EvalOptions, Execution, InferenceError, Perturbation, PmlTree, SimConfig, SimilarityMode,
};

#[derive(Debug, Parser)]
#[command(name = "pmlsim", version, about = "Duplicate probability of PML sensor reports")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Seed for corpus generation
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Value similarity: exact or edit
    #[arg(long, global = true, default_value_t = SimilarityMode::Edit)]
    sim: SimilarityMode,
    /// Duplicate threshold in [0, 1]
    #[arg(long, global = true, default_value_t = DEFAULT_THRESHOLD, value_parser = unit_interval)]
    threshold: f64,
    /// Worker threads for the evaluate sweep; 1 runs sequentially
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: Option<u64>,
    /// Suppress notes on stderr
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Duplicate probability of two documents
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Average both comparison directions
        #[arg(long)]
        symmetrize: bool,
        /// Also compute the value by full enumeration
        #[arg(long)]
        oracle: bool,
    },
    /// Reduce a document to sensor, tag and EPC skeleton
    Reduce {
        #[arg(long = "in")]
        input: PathBuf,
        /// Write the reduced XML here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Merged Bayesian network of two documents as DOT
    Graph {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Write DOT here and print a summary instead
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Write a random labeled corpus
    Generate {
        #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u64).range(1..))]
        count: u64,
        /// Share of documents that copy an earlier one
        #[arg(long, default_value_t = 0.0, value_parser = unit_interval)]
        fraction: f64,
        /// Tags per document as LO..HI
        #[arg(long, default_value = "1..5", value_parser = tag_range)]
        tags: RangeInclusive<usize>,
        /// Character substitutions applied to each copy
        #[arg(long, default_value_t = 0)]
        edits: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score every pair of a corpus against its truth
    Evaluate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Report JSON, including timing
        #[arg(long)]
        out: Option<PathBuf>,
        /// Histogram CSV
        #[arg(long)]
        hist: Option<PathBuf>,
    },
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn tag_range(s: &str) -> Result<RangeInclusive<usize>, String> {
    let (lo, hi) = s.split_once("..").ok_or_else(|| format!("`{s}` is not LO..HI"))?;
    let lo: usize = lo.trim().parse().map_err(|_| format!("bad lower bound in `{s}`"))?;
    let hi: usize = hi.trim().parse().map_err(|_| format!("bad upper bound in `{s}`"))?;
    if lo > hi {
        return Err(format!("empty range {lo}..{hi}"));
    }
    Ok(lo..=hi)
}

pub fn run() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
                return 2;
            }
            let _ = write!(out, "{text}");
            return 0;
        }
    };
    match execute(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            1
        }
    }
}

fn config(global: &Global, symmetrize: bool) -> SimConfig {
    SimConfig::default()
        .with_similarity(global.sim)
        .with_threshold(global.threshold)
        .with_symmetrize(symmetrize)
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Compare {
            a,
            b,
            symmetrize,
            oracle,
        } => compare(g, &a, &b, symmetrize, oracle, out, err),
        Command::Reduce { input, out: target } => reduce(&input, target.as_deref(), out),
        Command::Graph { a, b, dot } => graph(&a, &b, dot.as_deref(), out),
        Command::Generate {
            count,
            fraction,
            tags,
            edits,
            out: dir,
        } => {
            let spec = CorpusSpec {
                count: count as usize,
                tags_per_doc: tags,
                duplicate_fraction: fraction,
                perturbation: if edits == 0 {
                    Perturbation::None
                } else {
                    Perturbation::CharEdits(edits)
                },
                seed: g.seed,
                ..CorpusSpec::default()
            };
            generate(&spec, &dir, out)
        }
        Command::Evaluate {
            corpus,
            truth,
            out: report,
            hist,
        } => evaluate(g, &corpus, &truth, report.as_deref(), hist.as_deref(), out),
    }
}

/// Parses without checking the composition rules; the source id is the file stem.
fn read_pml(path: &Path) -> Result<PmlTree> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(parse_pml(&text)
        .with_context(|| format!("parsing {}", path.display()))?
        .with_source_id(stem))
}

fn read_document(path: &Path) -> Result<PmlTree> {
    let doc = read_pml(path)?;
    ensure_valid(&doc).with_context(|| format!("validating {}", path.display()))?;
    Ok(doc)
}

fn print_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

#[derive(Serialize)]
struct CompareOutput {
    p: f64,
    oracle: Option<f64>,
    duplicate: bool,
    threshold: f64,
}

fn compare(
    g: &Global,
    a: &Path,
    b: &Path,
    symmetrize: bool,
    oracle: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<()> {
    let cfg = config(g, symmetrize);
    let (a, b) = (reduce_pml(&read_document(a)?), reduce_pml(&read_document(b)?));
    let p = pmlsim::inference::pair_similarity(&a, &b, &cfg)?;
    let oracle = if oracle {
        match pair_similarity_exact(&a, &b, &cfg, DEFAULT_ENUMERATION_CAP) {
            Ok(v) => Some(v),
            Err(InferenceError::TooLarge { pairs, cap }) => {
                if !g.quiet {
                    writeln!(
                        err,
                        "note: {pairs} leaf pairs exceed the enumeration cap of {cap}; oracle skipped"
                    )?;
                }
                None
            }
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };
    print_json(
        out,
        &CompareOutput {
            p,
            oracle,
            duplicate: p >= cfg.threshold,
            threshold: cfg.threshold,
        },
    )
}

#[derive(Serialize)]
struct ReduceSummary<'a> {
    out: &'a Path,
    nodes_before: usize,
    nodes_after: usize,
    tags: usize,
}

fn reduce(input: &Path, target: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    // reduction is defined on any well-formed report, including its own output
    let doc = read_pml(input)?;
    let reduced = reduce_pml(&doc);
    let xml = serialize_pml(&reduced.to_pml(doc.source_id.clone()));
    match target {
        None => out.write_all(xml.as_bytes())?,
        Some(path) => {
            fs::write(path, &xml).with_context(|| format!("writing {}", path.display()))?;
            print_json(
                out,
                &ReduceSummary {
                    out: path,
                    nodes_before: doc.node_count(),
                    nodes_after: reduced.node_count(),
                    tags: reduced.tag_epcs().len(),
                },
            )?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct GraphSummary<'a> {
    dot: &'a Path,
    nodes: usize,
    edges: usize,
    tags_a: usize,
    tags_b: usize,
    root_mismatch: bool,
}

fn graph(a: &Path, b: &Path, dot: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let (a, b) = (reduce_pml(&read_document(a)?), reduce_pml(&read_document(b)?));
    let (graph, root_mismatch) = match merge_trees(&a, &b) {
        Ok(g) => (g, false),
        Err(_) => (BnGraph::new(), true),
    };
    let text = export_dot(&graph);
    match dot {
        None => out.write_all(text.as_bytes())?,
        Some(path) => {
            fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
            let (tags_a, tags_b) = graph.tag_counts();
            print_json(
                out,
                &GraphSummary {
                    dot: path,
                    nodes: graph.nodes().len(),
                    edges: graph.edges().len(),
                    tags_a,
                    tags_b,
                    root_mismatch,
                },
            )?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct GenerateSummary<'a> {
    out: &'a Path,
    documents: usize,
    duplicates: usize,
    truth_pairs: usize,
    seed: u64,
}

fn generate(spec: &CorpusSpec, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let corpus = generate_corpus(spec)?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for doc in &corpus.documents {
        let path = dir.join(format!("{}.xml", doc.source_id));
        fs::write(&path, serialize_pml(doc)).with_context(|| format!("writing {}", path.display()))?;
    }
    let truth_path = dir.join("truth.csv");
    let mut w = csv::Writer::from_path(&truth_path).with_context(|| format!("writing {}", truth_path.display()))?;
    w.write_record(["a", "b"])?;
    for pair in &corpus.truth {
        w.write_record([pair.first(), pair.second()])?;
    }
    w.flush()?;
    print_json(
        out,
        &GenerateSummary {
            out: dir,
            documents: corpus.documents.len(),
            duplicates: spec.duplicate_count(),
            truth_pairs: corpus.truth.len(),
            seed: spec.seed,
        },
    )
}

#[derive(Serialize)]
struct EvalConfig {
    similarity: SimilarityMode,
    threshold: f64,
    jobs: Option<u64>,
    bins: usize,
}

#[derive(Serialize)]
struct ReportFile {
    config: EvalConfig,
    documents: usize,
    pairs: usize,
    mean_prob: f64,
    precision: f64,
    recall: f64,
    predicted_count: usize,
    truth_count: usize,
    wall_seconds: f64,
    per_pair_micros: f64,
}

/// What `evaluate` prints: the report minus anything timing-dependent.
#[derive(Serialize)]
struct EvalSummary {
    documents: usize,
    pairs: usize,
    mean_prob: f64,
    precision: f64,
    recall: f64,
    predicted_count: usize,
    truth_count: usize,
}

fn read_corpus(dir: &Path) -> Result<Vec<PmlTree>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "xml"));
    paths.sort();
    if paths.is_empty() {
        bail!("no .xml documents in {}", dir.display());
    }
    paths.iter().map(|p| read_document(p)).collect()
}

fn read_truth(path: &Path, known: &BTreeSet<&str>) -> Result<BTreeSet<DocPair>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = r.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "a" || &headers[1] != "b" {
        bail!("{}: expected header `a,b`", path.display());
    }
    let mut truth = BTreeSet::new();
    for record in r.records() {
        let record = record.with_context(|| format!("reading {}", path.display()))?;
        for id in [&record[0], &record[1]] {
            if !known.contains(id) {
                bail!("{}: unknown document `{id}`", path.display());
            }
        }
        truth.insert(DocPair::new(&record[0], &record[1]));
    }
    Ok(truth)
}

fn write_histogram(path: &Path, bins: &[HistogramBin]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["bin_lo", "count"])?;
    for bin in bins {
        w.write_record([bin.lo.to_string(), bin.count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn evaluate(
    g: &Global,
    corpus: &Path,
    truth: &Path,
    report_path: Option<&Path>,
    hist_path: Option<&Path>,
    out: &mut dyn Write,
) -> Result<()> {
    let docs = read_corpus(corpus)?;
    let known: BTreeSet<&str> = docs.iter().map(|d| d.source_id.as_str()).collect();
    let truth = read_truth(truth, &known)?;
    let cfg = config(g, false);
    let opts = EvalOptions {
        bins: DEFAULT_BINS,
        execution: Execution::from_jobs(g.jobs.map(|j| j as usize)),
    };
    let report = classify(&pairwise_documents(&docs, &cfg, &opts)?, &truth, cfg.threshold);
    let timing = report.timings[0];

    if let Some(path) = report_path {
        let file = ReportFile {
            config: EvalConfig {
                similarity: cfg.similarity,
                threshold: cfg.threshold,
                jobs: g.jobs,
                bins: opts.bins,
            },
            documents: docs.len(),
            pairs: timing.pairs,
            mean_prob: report.mean_prob,
            precision: report.precision,
            recall: report.recall,
            predicted_count: report.predicted.len(),
            truth_count: report.truth_count,
            wall_seconds: timing.wall_seconds,
            per_pair_micros: timing.per_pair_micros(),
        };
        let json = serde_json::to_string_pretty(&file)?;
        fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = hist_path {
        write_histogram(path, &report.histogram)?;
    }
    print_json(
        out,
        &EvalSummary {
            documents: docs.len(),
            pairs: timing.pairs,
            mean_prob: report.mean_prob,
            precision: report.precision,
            recall: report.recall,
            predicted_count: report.predicted.len(),
            truth_count: report.truth_count,
        },
    )
}
