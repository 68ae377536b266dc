//! Acceptance suite. Runs every criterion in order on the calling thread,
//! prints one line per criterion and exits non-zero if any failed.
//!
//! Built with `harness = false` so the timing criteria never share the
//! machine with other tests of this binary.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pmlsim::bayesnet::{expected_node_count, BnNode, Side};
use pmlsim::eval::{is_unimodal, linear_fit, pairwise_documents};
use pmlsim::generator::random_document;
use pmlsim::inference::{annotate_pair, pair_similarity, pair_similarity_exact, DEFAULT_THRESHOLD};
use pmlsim::*;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn check(pass: bool, detail: impl Into<String>) -> Outcome {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

type Criterion = fn() -> Outcome;

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 9] = [
        ("identity law", identity_law),
        ("closed form matches enumeration", oracle_equivalence),
        ("single-parent chain", background_chain),
        ("reduction golden shape", reduction_golden),
        ("graph node-count law", graph_count_law),
        ("probability mean stable across seeds", mean_stability),
        ("per-pair cost flat across sizes", timing_scaling),
        ("precision and recall at threshold", precision_recall),
        ("monotone in every prior", monotonicity),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!(
            "[{verdict}] {} {name}: {} ({:.2} s)",
            i + 1,
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
        failed += usize::from(!outcome.pass);
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn fixture(name: &str) -> PmlTree {
    let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    parse_pml(&text).unwrap_or_else(|e| panic!("{path}: {e}"))
}

fn identity_law() -> Outcome {
    let start = Instant::now();
    let corpus = generate_corpus(&CorpusSpec {
        count: 100,
        tags_per_doc: 0..=8,
        seed: 11,
        ..CorpusSpec::default()
    })
    .expect("valid spec");
    let mut off = Vec::new();
    for doc in &corpus.documents {
        for cfg in [
            SimConfig::default(),
            SimConfig::default().with_similarity(SimilarityMode::Exact),
            SimConfig::default().with_symmetrize(true),
        ] {
            let p = document_similarity(doc, doc, &cfg).expect("valid document");
            if p != 1.0 {
                off.push(format!("{}={p}", doc.source_id));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::check(
        off.is_empty() && secs < 5.0,
        format!(
            "{} documents x 3 configs, {} off 1.0 {:?}",
            corpus.documents.len(),
            off.len(),
            off
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let spec = CorpusSpec {
        tags_per_doc: 0..=4,
        ..CorpusSpec::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    while checked < 200 {
        let a = random_document("a", &spec, &mut rng);
        let b = if rng.random_bool(0.5) {
            perturb(&a, rng.random_range(0..4), rng.random())
        } else {
            random_document("b", &spec, &mut rng)
        };
        let (m, n) = (a.tag_epcs().len(), b.tag_epcs().len());
        if m * n > 12 {
            continue;
        }
        let cfg = SimConfig::default().with_symmetrize(rng.random_bool(0.3));
        let (ra, rb) = (reduce_pml(&a), reduce_pml(&b));
        let closed = pair_similarity(&ra, &rb, &cfg).expect("closed form");
        let exact = pair_similarity_exact(&ra, &rb, &cfg, 20).expect("enumeration");
        worst = worst.max((closed - exact).abs());
        checked += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::check(
        worst <= 1e-12 && secs < 60.0,
        format!("{checked} pairs with M*N <= 12, max |closed - exact| = {worst:.3e}"),
    )
}

fn background_chain() -> Outcome {
    let mut g = BnGraph::new();
    let x = g.add_node(BnNode::value_leaf("x.v.a", "v", Side::A, "x"));
    let y = g.add_node(BnNode::value_leaf("x.v.b", "v", Side::B, "x"));
    let dependent = g.add_node(BnNode::var(BnNodeKind::IdVar, "x"));
    g.add_edge(x, dependent);
    g.add_edge(y, dependent);
    let mut annotated = annotate(g, &SimConfig::default()).expect("chain annotates");
    annotated.set_prior(0, 0.5);
    let exact = enumerate_exact(&annotated).expect("one pair");
    let closed = annotated.closed_form().expect("closed form");
    Outcome::check(
        exact == 0.5 && closed == 0.5,
        format!("P(child) = {exact} by enumeration, {closed} closed form"),
    )
}

fn reduction_golden() -> Outcome {
    let mut problems = Vec::new();
    for name in ["pallet_read.xml", "pallet_read_with_data.xml"] {
        let reduced = reduce_pml(&fixture(name));
        let shape_ok = reduced.label == NodeKind::Sensor
            && reduced.value_of("ID") == Some("urn:epc:1:4.16.36")
            && reduced.pairs.len() == 1
            && reduced.subtrees.len() == 1
            && reduced.subtrees[0].label == NodeKind::Observation
            && reduced.subtrees[0].pairs.is_empty()
            && reduced.subtrees[0].subtrees.len() == 2
            && reduced.subtrees[0].subtrees.iter().all(|t| {
                t.label == NodeKind::Tag && t.subtrees.is_empty() && t.pairs.len() == 1 && t.pairs[0].attribute == "ID"
            });
        let mut epcs = reduced.tag_epcs();
        epcs.sort_unstable();
        if !shape_ok {
            problems.push(format!("{name}: shape {reduced:?}"));
        }
        if epcs != ["1:12.8.128", "1:2.24.404"] {
            problems.push(format!("{name}: epcs {epcs:?}"));
        }
    }
    Outcome::check(
        problems.is_empty(),
        if problems.is_empty() {
            "both reports reduce to Sensor(ID) -> Observation -> 2 x Tag(ID)".to_string()
        } else {
            problems.join("; ")
        },
    )
}

fn sensor_with_tags(sensor: &str, tags: usize) -> ReducedTree {
    let doc = PmlTree::new(
        PmlNode::element(
            NodeKind::Sensor,
            vec![
                PmlNode::value_element(NodeKind::Id, sensor),
                PmlNode::element(
                    NodeKind::Observation,
                    std::iter::once(PmlNode::value_element(NodeKind::DateTime, "2002-11-06T13:04:34-06:00"))
                        .chain((0..tags).map(|t| {
                            PmlNode::element(
                                NodeKind::Tag,
                                vec![PmlNode::value_element(NodeKind::Id, format!("1:{t}.0.0"))],
                            )
                        }))
                        .collect(),
                ),
            ],
        ),
        sensor,
    );
    reduce_pml(&doc)
}

fn graph_count_law() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut bad = Vec::new();
    for _ in 0..500 {
        let (m, n) = (rng.random_range(0..=6), rng.random_range(0..=6));
        let g = merge_trees(&sensor_with_tags("s", m), &sensor_with_tags("s", n)).expect("same root");
        let sorted = g
            .topological_order()
            .is_some_and(|order| order.len() == g.nodes().len());
        if g.nodes().len() != expected_node_count(m, n) || !sorted {
            bad.push((m, n, g.nodes().len()));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::check(
        bad.is_empty() && secs < 10.0,
        format!("500 random (M, N), {} violations {:?}", bad.len(), bad),
    )
}

fn mean_stability() -> Outcome {
    let start = Instant::now();
    let mut means = Vec::new();
    let mut shapes = Vec::new();
    for seed in [1, 2, 3] {
        let corpus = generate_corpus(&CorpusSpec {
            count: 500,
            seed,
            ..CorpusSpec::default()
        })
        .expect("valid spec");
        let report = pairwise_matrix(&corpus, &SimConfig::default(), &EvalOptions::default()).expect("valid corpus");
        means.push(report.mean_prob);
        shapes.push(is_unimodal(&report.histogram));
    }
    let spread = means.iter().copied().fold(f64::MIN, f64::max) - means.iter().copied().fold(f64::MAX, f64::min);
    let secs = start.elapsed().as_secs_f64();
    Outcome::check(
        spread <= 0.02 && shapes.iter().all(|&u| u) && secs < 600.0,
        format!("means {means:.4?} (spread {spread:.4}), unimodal {shapes:?}"),
    )
}

fn timing_scaling() -> Outcome {
    const REPEATS: usize = 3;
    let start = Instant::now();
    let sizes = [100, 200, 300, 400, 500];
    let cfg = SimConfig::default();
    let opts = EvalOptions {
        execution: Execution::Sequential,
        ..EvalOptions::default()
    };
    let corpora: Vec<LabeledCorpus> = sizes
        .iter()
        .map(|&count| {
            generate_corpus(&CorpusSpec {
                count,
                duplicate_fraction: 0.5,
                seed: 7,
                ..CorpusSpec::default()
            })
            .expect("valid spec")
        })
        .collect();
    // warm caches and the allocator before measuring
    pairwise_documents(&corpora[0].documents, &cfg, &opts).expect("valid corpus");

    let mut pairs = Vec::new();
    let mut walls = Vec::new();
    for corpus in &corpora {
        let mut runs: Vec<f64> = (0..REPEATS)
            .map(|_| pairwise_matrix(corpus, &cfg, &opts).expect("valid corpus").timings[0].wall_seconds)
            .collect();
        runs.sort_by(f64::total_cmp);
        let n = corpus.documents.len();
        pairs.push((n * (n - 1) / 2) as f64);
        walls.push(runs[REPEATS / 2]);
    }
    let per_pair: Vec<f64> = walls.iter().zip(&pairs).map(|(w, p)| w * 1e6 / p).collect();
    let mean = per_pair.iter().sum::<f64>() / per_pair.len() as f64;
    let deviation = per_pair.iter().map(|t| (t - mean).abs() / mean).fold(0.0, f64::max);
    let fit = linear_fit(&pairs, &walls);
    let secs = start.elapsed().as_secs_f64();
    Outcome::check(
        deviation <= 0.2 && fit.r_squared >= 0.95 && secs < 900.0,
        format!(
            "per-pair us {per_pair:.2?} (max deviation {:.1}%), wall vs pairs R^2 = {:.4}",
            deviation * 100.0,
            fit.r_squared
        ),
    )
}

fn precision_recall() -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut pass = true;
    for perturbation in [Perturbation::CharEdits(1), Perturbation::None] {
        for fraction in [0.2, 0.5, 0.8] {
            let corpus = generate_corpus(&CorpusSpec {
                count: 500,
                duplicate_fraction: fraction,
                perturbation,
                seed: 3,
                ..CorpusSpec::default()
            })
            .expect("valid spec");
            let report =
                pairwise_matrix(&corpus, &SimConfig::default(), &EvalOptions::default()).expect("valid corpus");
            let scored = classify(&report, &corpus.truth, DEFAULT_THRESHOLD);
            pass &= match perturbation {
                Perturbation::None => scored.precision == 1.0 && scored.recall == 1.0,
                Perturbation::CharEdits(_) => scored.precision >= 0.9 && scored.recall >= 0.9,
            };
            lines.push(format!(
                "{perturbation:?}@{fraction}: P={:.4} R={:.4}",
                scored.precision, scored.recall
            ));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::check(pass && secs < 900.0, lines.join(", "))
}

fn monotonicity() -> Outcome {
    let spec = CorpusSpec {
        tags_per_doc: 0..=5,
        ..CorpusSpec::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut checks = 0usize;
    let mut violations = Vec::new();
    for trial in 0..1000 {
        let a = reduce_pml(&random_document("a", &spec, &mut rng));
        let b = reduce_pml(&random_document("b", &spec, &mut rng));
        let mut g = annotate_pair(&a, &b, &SimConfig::default())
            .expect("annotates")
            .expect("same root");
        for k in 0..g.pairs().len() {
            g.set_prior(k, rng.random());
        }
        let base = g.closed_form().expect("closed form");
        for k in 0..g.pairs().len() {
            let old = g.pairs()[k].prior;
            let raised = rng.random_range(old..=1.0);
            g.set_prior(k, raised);
            let p = g.closed_form().expect("closed form");
            if p < base {
                violations.push((trial, k, base, p));
            }
            g.set_prior(k, old);
            checks += 1;
        }
    }
    Outcome::check(
        violations.is_empty(),
        format!(
            "1000 prior vectors, {checks} single raises, {} decreases {violations:?}",
            violations.len()
        ),
    )
}
