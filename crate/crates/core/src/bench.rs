//! Benchmark datasets and multi-seed evaluation.
//!
//! A benchmark dataset is a JSON file of analogy problems, each carrying the
//! answers human participants gave (with selection percentages), the ranks
//! two earlier systems (Pisa and Metacat) assigned to those answers, and a
//! frozen twenty-string candidate set. [`run_benchmark`] solves every
//! problem once per seed, reduces each answer's ranks to a median across
//! seeds, and aggregates how often the most common participant answer lands
//! at rank 1 (top-1) or within the first two ranks (top-2). Reports render
//! as markdown or CSV with identical numbers.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Candidate, CandidateSet, Provenance, CANDIDATE_COUNT};
use crate::logic::{parse_problem, LetterString};
use crate::train::{solve_with_candidates, rank_candidates_reference, SolveError, TrainConfig, TrainError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("record {index}: {reason}")]
    Schema { index: usize, reason: String },
    #[error("config: {0}")]
    Config(String),
    #[error("problem {problem:?} seed {seed}: {source}")]
    Solve {
        problem: String,
        seed: u64,
        source: SolveError,
    },
}

/// One participant answer to a benchmark problem: the string, the share of
/// participants who chose it, and the rank each baseline system gave it
/// (`None` renders as ∞: the system never produced that answer).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantAnswer {
    pub answer: LetterString,
    pub pct: f64,
    pub p_p: Option<u32>,
    pub p_m: Option<u32>,
}

/// One benchmark problem: text, participant answers ordered most-chosen
/// first, and the frozen candidate set every solver run ranks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkProblem {
    pub problem: String,
    pub answers: Vec<ParticipantAnswer>,
    pub candidates: Vec<LetterString>,
}

impl BenchmarkProblem {
    /// The participant answer with the highest selection percentage
    /// (first wins ties, matching file order).
    pub fn most_common(&self) -> &ParticipantAnswer {
        self.answers
            .iter()
            .reduce(|best, a| if a.pct > best.pct { a } else { best })
            .expect("validated problems have at least one answer")
    }

    /// The frozen candidates as a [`CandidateSet`] ready for ranking.
    pub fn candidate_set(&self) -> Result<CandidateSet, BenchError> {
        let p = parse_problem(&self.problem).map_err(|e| BenchError::Schema {
            index: 0,
            reason: e.to_string(),
        })?;
        Ok(CandidateSet {
            query: p.query,
            candidates: self
                .candidates
                .iter()
                .map(|s| Candidate { answer: s.clone(), provenance: Provenance::Curated })
                .collect(),
        })
    }
}

/// A named list of benchmark problems, round-trippable through JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkDataset {
    pub name: String,
    pub problems: Vec<BenchmarkProblem>,
}

fn validate_dataset(ds: &BenchmarkDataset) -> Result<(), BenchError> {
    let schema = |index: usize, reason: String| BenchError::Schema { index, reason };
    if ds.problems.is_empty() {
        return Err(schema(0, "dataset has no problems".into()));
    }
    for (i, p) in ds.problems.iter().enumerate() {
        parse_problem(&p.problem)
            .map_err(|e| schema(i, format!("unparseable problem {:?}: {e}", p.problem)))?;
        if p.answers.is_empty() {
            return Err(schema(i, "no participant answers".into()));
        }
        for a in &p.answers {
            if !(a.pct > 0.0 && a.pct <= 100.0) {
                return Err(schema(i, format!("selection percentage {} outside (0, 100]", a.pct)));
            }
        }
        if p.candidates.len() != CANDIDATE_COUNT {
            return Err(schema(
                i,
                format!("{} candidates, expected {CANDIDATE_COUNT}", p.candidates.len()),
            ));
        }
        for (j, c) in p.candidates.iter().enumerate() {
            if p.candidates[..j].contains(c) {
                return Err(schema(i, format!("duplicate candidate {c}")));
            }
        }
        for a in &p.answers {
            if !p.candidates.contains(&a.answer) {
                return Err(schema(i, format!("participant answer {} not in candidates", a.answer)));
            }
        }
    }
    Ok(())
}

/// Parse and validate a dataset from JSON text.
pub fn load_dataset_str(text: &str) -> Result<BenchmarkDataset, BenchError> {
    let ds: BenchmarkDataset = serde_json::from_str(text)?;
    validate_dataset(&ds)?;
    Ok(ds)
}

/// Load and validate a dataset file.
pub fn load_dataset(path: &Path) -> Result<BenchmarkDataset, BenchError> {
    load_dataset_str(&std::fs::read_to_string(path)?)
}

/// Write a dataset as pretty JSON; `load_dataset` reads it back equal.
pub fn save_dataset(path: &Path, ds: &BenchmarkDataset) -> Result<(), BenchError> {
    let mut text = serde_json::to_string_pretty(ds)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

// Benchmark files shipped with the crate.
pub const MURENA_JSON: &str = include_str!("../data/murena.json");
pub const RIJSDIJK_JSON: &str = include_str!("../data/rijsdijk.json");

/// A dataset shipped with the crate, by name ("murena" or "rijsdijk").
pub fn builtin_dataset(name: &str) -> Option<BenchmarkDataset> {
    let text = match name {
        "murena" => MURENA_JSON,
        "rijsdijk" => RIJSDIJK_JSON,
        _ => return None,
    };
    Some(load_dataset_str(text).expect("shipped benchmark files are validated in tests"))
}

/// Per-answer outcome: the solver's rank of the answer under each seed
/// (`None` when training diverged for that seed or the answer was missing),
/// the median across seeds, and the transcribed baseline ranks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerRow {
    pub answer: LetterString,
    pub pct: f64,
    pub p_p: Option<u32>,
    pub p_m: Option<u32>,
    pub seed_ranks: Vec<Option<usize>>,
    pub median_rank: Option<usize>,
}

/// Per-problem outcome across all seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemRow {
    pub problem: String,
    pub answers: Vec<AnswerRow>,
    /// Seeds whose training run diverged (their ranks are absent).
    pub diverged_seeds: Vec<u64>,
    /// Whether graph-mode ranking matched the reference evaluator's ranking
    /// for every non-diverged seed.
    pub graph_matches_reference: bool,
}

/// Counts over problems: in how many the most common participant answer got
/// median rank 1 (`top1`) or median rank ≤ 2 (`top2`), out of `total`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Aggregates {
    pub top1: usize,
    pub top2: usize,
    pub total: usize,
}

/// Everything one benchmark run produced. Report rendering is a pure
/// function of this value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub dataset: String,
    pub config: TrainConfig,
    pub seeds: Vec<u64>,
    pub wall_secs: f64,
    pub rows: Vec<ProblemRow>,
    pub aggregates: Aggregates,
    /// True when any (problem, seed) run diverged; such runs contribute
    /// absent ranks but do not abort the benchmark.
    pub partial_failure: bool,
}

/// Median of ranks where `None` sorts above every finite rank (an answer
/// the solver never produced is "infinitely bad"). Even-length lists take
/// the upper middle element.
pub fn median_rank(ranks: &[Option<usize>]) -> Option<usize> {
    assert!(!ranks.is_empty(), "median of no ranks");
    let mut sorted = ranks.to_vec();
    sorted.sort_by_key(|r| (r.is_none(), r.unwrap_or(0)));
    sorted[sorted.len() / 2]
}

/// Recompute the aggregate counters from per-problem rows; `run_benchmark`
/// stores exactly this, and tests hold it to that.
pub fn recompute_aggregates(rows: &[ProblemRow], problems: &[BenchmarkProblem]) -> Aggregates {
    let mut agg = Aggregates { top1: 0, top2: 0, total: rows.len() };
    for (row, problem) in rows.iter().zip(problems) {
        let target = &problem.most_common().answer;
        let median = row
            .answers
            .iter()
            .find(|a| &a.answer == target)
            .expect("most common answer has a row")
            .median_rank;
        match median {
            Some(1) => {
                agg.top1 += 1;
                agg.top2 += 1;
            }
            Some(2) => agg.top2 += 1,
            _ => {}
        }
    }
    agg
}

enum SeedRun {
    Ranked { ranks: Vec<Option<usize>>, agrees: bool },
    Diverged,
}

fn run_one(
    problem: &BenchmarkProblem,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<SeedRun, BenchError> {
    let parsed = parse_problem(&problem.problem).expect("validated on load");
    let candidates = problem.candidate_set()?;
    let mut cfg = *cfg;
    cfg.seed = seed;
    match solve_with_candidates(&parsed, Some(candidates.clone()), &cfg) {
        Ok(out) => {
            let reference = rank_candidates_reference(&out.model, &parsed, &candidates, seed);
            let agrees = out
                .ranked
                .entries
                .iter()
                .map(|e| (&e.candidate, e.rank))
                .eq(reference.entries.iter().map(|e| (&e.candidate, e.rank)));
            let ranks = problem
                .answers
                .iter()
                .map(|a| out.ranked.rank_of(&a.answer))
                .collect();
            Ok(SeedRun::Ranked { ranks, agrees })
        }
        Err(SolveError::Train(TrainError::Diverged { .. })) => Ok(SeedRun::Diverged),
        Err(source) => Err(BenchError::Solve {
            problem: problem.problem.clone(),
            seed,
            source,
        }),
    }
}

/// Solve every problem once per seed and fold the outcomes into a report.
///
/// Runs fan out in parallel over (problem, seed) pairs; results are merged
/// back in index order, so the report is deterministic regardless of
/// scheduling. A diverged training run yields absent ranks for that seed
/// and flags the report as a partial failure; any other error aborts.
pub fn run_benchmark(
    dataset: &BenchmarkDataset,
    cfg: &TrainConfig,
    seeds: &[u64],
) -> Result<BenchmarkReport, BenchError> {
    if seeds.is_empty() {
        return Err(BenchError::Config("seed list is empty".into()));
    }
    cfg.validate().map_err(|e| BenchError::Config(e.to_string()))?;
    validate_dataset(dataset)?;

    let start = Instant::now();
    let jobs: Vec<(usize, u64)> = dataset
        .problems
        .iter()
        .enumerate()
        .flat_map(|(i, _)| seeds.iter().map(move |&s| (i, s)))
        .collect();
    let outcomes: Vec<Result<SeedRun, BenchError>> = jobs
        .par_iter()
        .map(|&(i, seed)| run_one(&dataset.problems[i], cfg, seed))
        .collect();

    let mut outcomes = outcomes.into_iter();
    let mut rows = Vec::with_capacity(dataset.problems.len());
    let mut partial_failure = false;
    for problem in &dataset.problems {
        let mut per_seed: Vec<Vec<Option<usize>>> = Vec::with_capacity(seeds.len());
        let mut diverged_seeds = Vec::new();
        let mut graph_matches_reference = true;
        for &seed in seeds {
            match outcomes.next().expect("one outcome per job")? {
                SeedRun::Ranked { ranks, agrees } => {
                    graph_matches_reference &= agrees;
                    per_seed.push(ranks);
                }
                SeedRun::Diverged => {
                    diverged_seeds.push(seed);
                    partial_failure = true;
                    per_seed.push(vec![None; problem.answers.len()]);
                }
            }
        }
        let answers = problem
            .answers
            .iter()
            .enumerate()
            .map(|(j, a)| {
                let seed_ranks: Vec<Option<usize>> =
                    per_seed.iter().map(|ranks| ranks[j]).collect();
                AnswerRow {
                    answer: a.answer.clone(),
                    pct: a.pct,
                    p_p: a.p_p,
                    p_m: a.p_m,
                    median_rank: median_rank(&seed_ranks),
                    seed_ranks,
                }
            })
            .collect();
        rows.push(ProblemRow {
            problem: problem.problem.clone(),
            answers,
            diverged_seeds,
            graph_matches_reference,
        });
    }

    let aggregates = recompute_aggregates(&rows, &dataset.problems);
    Ok(BenchmarkReport {
        dataset: dataset.name.clone(),
        config: *cfg,
        seeds: seeds.to_vec(),
        wall_secs: start.elapsed().as_secs_f64(),
        rows,
        aggregates,
        partial_failure,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown report format {other:?} (markdown|csv)")),
        }
    }
}

/// "93" for whole percentages, "2.9" otherwise — the way the sources print
/// selection shares.
fn fmt_pct(pct: f64) -> String {
    if (pct - pct.round()).abs() < 1e-9 {
        format!("{pct:.0}")
    } else {
        format!("{pct:.1}")
    }
}

fn fmt_rank_u32(r: Option<u32>) -> String {
    r.map_or_else(|| "∞".to_string(), |r| r.to_string())
}

fn fmt_rank(r: Option<usize>) -> String {
    r.map_or_else(|| "∞".to_string(), |r| r.to_string())
}

fn metadata_lines(report: &BenchmarkReport) -> Vec<(String, String)> {
    let seeds = report
        .seeds
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(" ");
    let mut lines = vec![
        ("dataset".to_string(), report.dataset.clone()),
        ("seeds".to_string(), seeds),
        ("wall-seconds".to_string(), format!("{:.1}", report.wall_secs)),
        (
            "config".to_string(),
            format!(
                "d={} hidden={} alpha={} lr={} batch={} epochs={} patience={} lambda-logic={} lambda-length={} lambda-weights={}",
                report.config.model.d,
                report.config.model.hidden,
                report.config.model.alpha,
                report.config.adam.lr,
                report.config.batch_size,
                report.config.epochs_max,
                report.config.patience,
                report.config.weights.lambda_l,
                report.config.weights.lambda_len,
                report.config.weights.lambda_theta
            ),
        ),
        (
            "top-1".to_string(),
            format!("{}/{}", report.aggregates.top1, report.aggregates.total),
        ),
        (
            "top-2".to_string(),
            format!("{}/{}", report.aggregates.top2, report.aggregates.total),
        ),
    ];
    if report.partial_failure {
        let diverged: Vec<String> = report
            .rows
            .iter()
            .filter(|r| !r.diverged_seeds.is_empty())
            .map(|r| format!("{} (seeds {:?})", r.problem, r.diverged_seeds))
            .collect();
        lines.push(("diverged".to_string(), diverged.join("; ")));
    }
    lines
}

fn render_markdown(report: &BenchmarkReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Benchmark report: {}", report.dataset);
    out.push('\n');
    let _ = writeln!(out, "| Problem | Solution | Selected | Rank | Pisa | Metacat |");
    let _ = writeln!(out, "|---|---|---|---|---|---|");
    for row in &report.rows {
        for (j, a) in row.answers.iter().enumerate() {
            let problem = if j == 0 { row.problem.as_str() } else { "" };
            let _ = writeln!(
                out,
                "| {} | {} | {}% | {} | {} | {} |",
                problem,
                a.answer,
                fmt_pct(a.pct),
                fmt_rank(a.median_rank),
                fmt_rank_u32(a.p_p),
                fmt_rank_u32(a.p_m),
            );
        }
    }
    out.push('\n');
    for (key, value) in metadata_lines(report) {
        let _ = writeln!(out, "- {key}: {value}");
    }
    out
}

fn render_csv(report: &BenchmarkReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "problem,solution,selected_pct,rank,pisa,metacat");
    for row in &report.rows {
        for a in &row.answers {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                row.problem,
                a.answer,
                fmt_pct(a.pct),
                fmt_rank(a.median_rank),
                fmt_rank_u32(a.p_p),
                fmt_rank_u32(a.p_m),
            );
        }
    }
    for (key, value) in metadata_lines(report) {
        let _ = writeln!(out, "# {key},{value}");
    }
    out
}

/// Render a report. Pure: identical reports yield byte-identical text, and
/// both formats carry the same numbers.
pub fn render_report(report: &BenchmarkReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => render_markdown(report),
        ReportFormat::Csv => render_csv(report),
    }
}

/// Render a report and write it to `path`.
pub fn emit_report(
    report: &BenchmarkReport,
    format: ReportFormat,
    path: &Path,
) -> Result<(), BenchError> {
    std::fs::write(path, render_report(report, format))?;
    Ok(())
}
