//! Scratch diagnostics for benchmark ranking (run with --ignored --nocapture).

use noan_core::bench::builtin_dataset;
use noan_core::logic::parse_problem;
use noan_core::loss::RegularizerWeights;
use noan_core::model::ModelConfig;
use noan_core::train::{solve_with_candidates, TrainConfig};

fn run_config(label: &str, make: impl Fn(u64) -> TrainConfig) {
    let ds = builtin_dataset("murena").unwrap();
    let bp = &ds.problems[0]; // ABC:ABD::IJK:? — the flagship
    let problem = parse_problem(&bp.problem).unwrap();
    let mut ranks = Vec::new();
    for seed in 1u64..=5 {
        let cfg = make(seed);
        let candidates = bp.candidate_set().unwrap();
        let out = solve_with_candidates(&problem, Some(candidates), &cfg).unwrap();
        let r_ijl = out.ranked.rank_of(&"IJL".parse().unwrap()).unwrap();
        let r_ijk = out.ranked.rank_of(&"IJK".parse().unwrap()).unwrap();
        let p_ijl = out.ranked.entries.iter().find(|e| e.rank == r_ijl).unwrap().p;
        let top = &out.ranked.entries[0];
        println!(
            "{label} seed {seed}: IJL r{r_ijl} (p {p_ijl:.6}) IJK r{r_ijk} top {} (p {:.6}) best_ep {}/{} val {:.3}",
            top.candidate,
            top.p,
            out.best_epoch,
            out.log.len(),
            out.best_val_acc
        );
        ranks.push(r_ijl);
    }
    let med = {
        let mut s = ranks.clone();
        s.sort();
        s[s.len() / 2]
    };
    println!("{label} => IJL ranks {ranks:?} median {med}");
}

fn weights(lambda_l: f64) -> RegularizerWeights {
    RegularizerWeights { lambda_l, ..RegularizerWeights::default() }
}

#[test]
#[ignore]
fn combo_k16_h64_lam005() {
    run_config("k16-h64-l.05", |seed| TrainConfig {
        seed,
        oneshot_boost: 16,
        weights: weights(0.05),
        model: ModelConfig { hidden: 64, ..ModelConfig::default() },
        ..TrainConfig::default()
    });
}

#[test]
#[ignore]
fn combo_early_harvest() {
    run_config("k64-l0-e80", |seed| TrainConfig {
        seed,
        oneshot_boost: 64,
        weights: weights(0.0),
        epochs_max: 80,
        patience: 50,
        ..TrainConfig::default()
    });
}

#[test]
#[ignore]
fn combo_low_lr_long() {
    let adam = noan_core::autodiff::AdamConfig { lr: 0.001, ..Default::default() };
    run_config("k16-lr.001-long", move |seed| TrainConfig {
        seed,
        oneshot_boost: 16,
        adam,
        epochs_max: 600,
        patience: 600,
        ..TrainConfig::default()
    });
}
