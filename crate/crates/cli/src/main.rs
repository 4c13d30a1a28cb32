//! `noan` — command-line interface to the analogy solver.
//!
//! Subcommands: `solve` one problem end to end, `bench` a dataset across
//! seeds, `gen-data` to dump a problem's generated training data,
//! `gradcheck` to validate the autodiff engine against finite differences,
//! and `inspect` to score a checkpoint against the ten logical laws.
//!
//! Exit codes: 0 success, 1 usage or runtime error, 2 partial failure
//! (a benchmark run where some training diverged).

use std::error::Error;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use noan_core::autodiff::{Graph, NodeId, ParamId, ParamStore, Tensor};
use noan_core::bench::{builtin_dataset, load_dataset, render_report, run_benchmark, ReportFormat};
use noan_core::data::{build_bundle, gen_candidates};
use noan_core::logic::parse_problem;
use noan_core::loss::probe_regularizer_values;
use noan_core::model::{Checkpoint, Model};
use noan_core::train::{solve, write_training_log, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "noan", version, about = "Letter-string analogy solver with trainable neural logic")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one analogy problem, e.g. "ABC:ABD::IJK:?"
    Solve {
        /// The problem, formatted initial:modified::query:?
        problem: String,
        /// Master seed (model init, data, candidates, batch order)
        #[arg(long)]
        seed: Option<u64>,
        /// Letter-embedding dimension
        #[arg(long)]
        dim: Option<usize>,
        /// Maximum training epochs
        #[arg(long)]
        epochs: Option<usize>,
        /// key=value config file (see README for keys)
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for artifacts: ranked.json, training_log.csv,
        /// checkpoint.json, candidates.json
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a benchmark dataset across seeds and print the report
    Bench {
        /// Dataset JSON path, or a shipped dataset name: murena, rijsdijk
        dataset: String,
        /// Seeds to run, comma separated
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        seeds: Vec<u64>,
        /// Report format: markdown or csv
        #[arg(long, default_value = "markdown")]
        format: ReportFormat,
        /// Also write the report to this file
        #[arg(long)]
        out: Option<PathBuf>,
        /// key=value config file applied to every run
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write the generated training data for a problem
    GenData {
        /// The problem, formatted initial:modified::query:?
        problem: String,
        /// Output directory: train.json, validation.json, candidates.json
        #[arg(long)]
        out: PathBuf,
        /// Master seed (same substreams as solve)
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Check analytic gradients against central finite differences
    Gradcheck,
    /// Score a saved checkpoint against the ten logical laws
    Inspect {
        /// checkpoint.json written by solve --out
        checkpoint: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<ExitCode, Box<dyn Error>> {
    match command {
        Command::Solve { problem, seed, dim, epochs, config, out } => {
            let mut cfg = base_config(config.as_deref())?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(dim) = dim {
                cfg.model.d = dim;
            }
            if let Some(epochs) = epochs {
                cfg.epochs_max = epochs;
            }
            run_solve(&problem, &cfg, out.as_deref())
        }
        Command::Bench { dataset, seeds, format, out, config } => {
            let cfg = base_config(config.as_deref())?;
            run_bench(&dataset, &cfg, &seeds, format, out.as_deref())
        }
        Command::GenData { problem, out, seed } => run_gen_data(&problem, seed, &out),
        Command::Gradcheck => run_gradcheck(),
        Command::Inspect { checkpoint } => run_inspect(&checkpoint),
    }
}

/// Defaults, overridden by the config file when one is given.
fn base_config(path: Option<&Path>) -> Result<TrainConfig, Box<dyn Error>> {
    let mut cfg = TrainConfig::default();
    if let Some(path) = path {
        apply_config_file(&mut cfg, path)?;
    }
    Ok(cfg)
}

/// Plain key=value lines; # starts a comment; unknown keys are errors.
fn apply_config_file(cfg: &mut TrainConfig, path: &Path) -> Result<(), Box<dyn Error>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("config {}: {e}", path.display()))?;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key=value, got {raw:?}", lineno + 1))?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |e: &dyn std::fmt::Display| format!("config line {}: {key}={value}: {e}", lineno + 1);
        match key {
            "seed" => cfg.seed = value.parse().map_err(|e| bad(&e))?,
            "d" => cfg.model.d = value.parse().map_err(|e| bad(&e))?,
            "hidden" => cfg.model.hidden = value.parse().map_err(|e| bad(&e))?,
            "alpha" => cfg.model.alpha = value.parse().map_err(|e| bad(&e))?,
            "lr" => cfg.adam.lr = value.parse().map_err(|e| bad(&e))?,
            "beta1" => cfg.adam.beta1 = value.parse().map_err(|e| bad(&e))?,
            "beta2" => cfg.adam.beta2 = value.parse().map_err(|e| bad(&e))?,
            "eps" => cfg.adam.eps = value.parse().map_err(|e| bad(&e))?,
            "batch_size" => cfg.batch_size = value.parse().map_err(|e| bad(&e))?,
            "epochs_max" => cfg.epochs_max = value.parse().map_err(|e| bad(&e))?,
            "patience" => cfg.patience = value.parse().map_err(|e| bad(&e))?,
            "oneshot_boost" => cfg.oneshot_boost = value.parse().map_err(|e| bad(&e))?,
            "lambda_l" => cfg.weights.lambda_l = value.parse().map_err(|e| bad(&e))?,
            "lambda_len" => cfg.weights.lambda_len = value.parse().map_err(|e| bad(&e))?,
            "lambda_theta" => cfg.weights.lambda_theta = value.parse().map_err(|e| bad(&e))?,
            other => return Err(format!("config line {}: unknown key {other:?}", lineno + 1).into()),
        }
    }
    Ok(())
}

fn pretty_json<T: serde::Serialize>(value: &T) -> Result<String, Box<dyn Error>> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn run_solve(problem: &str, cfg: &TrainConfig, out: Option<&Path>) -> Result<ExitCode, Box<dyn Error>> {
    let outcome = solve(problem, cfg)?;

    let mut table = String::new();
    let _ = writeln!(table, "problem: {problem}");
    let _ = writeln!(
        table,
        "seed: {}  best epoch: {}  validation accuracy: {:.3}",
        cfg.seed, outcome.best_epoch, outcome.best_val_acc
    );
    let _ = writeln!(table, "rank  truth     answer");
    for e in &outcome.ranked.entries {
        let _ = writeln!(table, "{:<5} {:.6}  {}", e.rank, e.p, e.candidate);
    }
    print!("{table}");

    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("ranked.json"), pretty_json(&outcome.ranked)?)?;
        std::fs::write(dir.join("candidates.json"), pretty_json(&outcome.candidates)?)?;
        std::fs::write(dir.join("checkpoint.json"), pretty_json(&outcome.model.to_checkpoint())?)?;
        write_training_log(&dir.join("training_log.csv"), &outcome.log)?;
        eprintln!("wrote ranked.json, candidates.json, checkpoint.json, training_log.csv to {}", dir.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn run_bench(
    dataset: &str,
    cfg: &TrainConfig,
    seeds: &[u64],
    format: ReportFormat,
    out: Option<&Path>,
) -> Result<ExitCode, Box<dyn Error>> {
    let ds = match builtin_dataset(dataset) {
        Some(ds) => ds,
        None => load_dataset(Path::new(dataset))?,
    };
    let report = run_benchmark(&ds, cfg, seeds)?;
    let rendered = render_report(&report, format);
    print!("{rendered}");
    if let Some(path) = out {
        std::fs::write(path, &rendered)?;
    }
    Ok(if report.partial_failure { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn run_gen_data(problem: &str, seed: u64, out: &Path) -> Result<ExitCode, Box<dyn Error>> {
    let parsed = parse_problem(problem)?;
    let cfg = TrainConfig { seed, ..TrainConfig::default() };
    // the same substreams solve uses: 1 = data, 2 = candidates
    let bundle = build_bundle(&parsed, cfg.sub_seed(1));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.sub_seed(2));
    let candidates = gen_candidates(&parsed, &mut rng);

    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("train.json"), pretty_json(&bundle.train)?)?;
    std::fs::write(out.join("validation.json"), pretty_json(&bundle.validation)?)?;
    std::fs::write(out.join("candidates.json"), pretty_json(&candidates)?)?;
    println!(
        "{}: {} training examples, {} validation examples, {} candidates -> {}",
        parsed,
        bundle.train.len(),
        bundle.validation.len(),
        candidates.candidates.len(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

/// The same composite graph the test suite checks, run over 100 seeds:
/// every op, random shapes, central finite differences.
fn run_gradcheck() -> Result<ExitCode, Box<dyn Error>> {
    const STEP: f64 = 1e-5;
    const REL_TOL: f64 = 1e-4;
    const SCALE_FLOOR: f64 = 1e-2;

    let rand_values = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> {
        (0..n)
            .map(|_| {
                let mag = 0.2 + 1.2 * rng.gen::<f64>();
                if rng.gen::<bool>() {
                    mag
                } else {
                    -mag
                }
            })
            .collect()
    };

    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for case in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + case);
        let n = rng.gen_range(1..=8usize);
        let m = rng.gen_range(1..=8usize);
        let mut store = ParamStore::new();
        store.register("a", &[n], rand_values(&mut rng, n), true);
        store.register("b", &[n], rand_values(&mut rng, n), true);
        store.register("w", &[m, 2 * n], rand_values(&mut rng, m * 2 * n), true);
        store.register("bias", &[m], rand_values(&mut rng, m), true);
        store.register("c", &[m], rand_values(&mut rng, m), true);

        let build = move |g: &mut Graph, s: &ParamStore| -> NodeId {
            let a = g.param(s, ParamId(0));
            let b = g.param(s, ParamId(1));
            let w = g.param(s, ParamId(2));
            let bias = g.param(s, ParamId(3));
            let c = g.param(s, ParamId(4));
            let ab = g.concat(a, b);
            let pre = g.matvec(w, ab);
            let pre = g.add(pre, bias);
            let h1 = g.relu(pre);
            let gated = g.mul(h1, c);
            let h2 = g.sigmoid(gated);
            let s1 = g.sum(h2);
            let s2 = g.dot(a, b);
            let ones = g.constant(Tensor(vec![1.0; m]));
            let shifted = g.add(h1, ones);
            let s3 = g.cosine(shifted, c);
            let s4 = g.l2_norm_sq(b);
            let p = g.sigmoid(s2);
            let s5 = g.ln(p);
            let t1 = g.scalar_mul(0.5, s3);
            let t2 = g.mul(s4, s5);
            let acc = g.add(s1, t1);
            let acc = g.sub(acc, t2);
            let neg = g.scalar_mul(0.25, s2);
            g.add(acc, neg)
        };

        let mut g = Graph::new();
        let root = build(&mut g, &store);
        let grads = g.backward(root);
        let param_ids: Vec<_> = store.entries().map(|(id, _)| id).collect();
        for pid in param_ids {
            let base = store.value(pid).to_vec();
            for k in 0..base.len() {
                let mut probe = |delta: f64| {
                    let mut vals = base.clone();
                    vals[k] = base[k] + delta;
                    store.set_value(pid, vals);
                    let mut gp = Graph::new();
                    let rp = build(&mut gp, &store);
                    gp.scalar_value(rp)
                };
                let fd = (probe(STEP) - probe(-STEP)) / (2.0 * STEP);
                store.set_value(pid, base.clone());
                let analytic = grads.get(pid).map_or(0.0, |v| v[k]);
                let rel = (fd - analytic).abs() / fd.abs().max(analytic.abs()).max(SCALE_FLOOR);
                worst = worst.max(rel);
                checked += 1;
            }
        }
    }
    println!("gradcheck: {checked} gradient components over 100 graphs, max relative error {worst:.3e} (tolerance {REL_TOL:.0e})");
    if worst <= REL_TOL {
        Ok(ExitCode::SUCCESS)
    } else {
        Err("gradient check failed".into())
    }
}

fn run_inspect(path: &Path) -> Result<ExitCode, Box<dyn Error>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("checkpoint {}: {e}", path.display()))?;
    let ck: Checkpoint = serde_json::from_str(&text)?;
    let model = Model::from_checkpoint(&ck)?;
    let values = probe_regularizer_values(&model);
    let names = [
        "negation", "double negation",
        "and-identity", "and-annihilator", "and-idempotence", "and-complementation",
        "or-identity", "or-annihilator", "or-idempotence", "or-complementation",
    ];
    println!("logical-law residuals on the probe expression set (lower is better):");
    for (i, (name, v)) in names.iter().zip(values).enumerate() {
        println!("r{:<2} {name:<21} {v:.6}", i + 1);
    }
    println!("{:<25} {:.6}", "sum", values.iter().sum::<f64>());
    Ok(ExitCode::SUCCESS)
}
