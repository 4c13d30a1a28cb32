//! Per-problem training and candidate ranking.
//!
//! Each analogy problem gets a fresh model trained with mini-batch Adam on
//! the bundle's examples. After every epoch the model is scored in eval mode
//! on the train and validation splits; the parameter snapshot with the best
//! validation accuracy is kept (later epochs win ties), and training stops
//! after `patience` epochs without strict improvement or at `epochs_max`.
//! Candidates are then ranked by the truth probability of
//! `conj(query) -> conj(candidate)` under the best snapshot.

use crate::autodiff::{AdamConfig, Graph};
use crate::data::{
    build_bundle, candidate_expr, gen_candidates, CandidateSet, DataError, DatasetBundle,
};
use crate::logic::{parse_problem, AnalogyProblem, LetterString, LogicError};
use crate::loss::{total_loss, LossError, RegularizerWeights};
use crate::model::{Mode, Model, ModelConfig, ModelError};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Diverged { epoch: usize },
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("parse: {0}")]
    Parse(#[from] LogicError),
    #[error("datagen: {0}")]
    Data(#[from] DataError),
    #[error("train: {0}")]
    Train(#[from] TrainError),
}

impl SolveError {
    pub fn stage(&self) -> &'static str {
        match self {
            SolveError::Parse(_) => "parse",
            SolveError::Data(_) => "datagen",
            SolveError::Train(_) => "train",
        }
    }
}

/// Everything a training run needs. `seed` is the master seed; the model
/// init, dataset build, candidate generation and training loop each use a
/// sub-seed derived from it (streams 0..=3 in that order).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs_max: usize,
    pub batch_size: usize,
    pub patience: usize,
    /// How many times the problem's own example appears per epoch. The
    /// example is one pattern among ~280 commonsense rows; oversampling it
    /// gives the analogy pattern enough gradient share to shape the
    /// embeddings, which is what candidate ranking rides on. 1 = no boost.
    pub oneshot_boost: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    pub weights: RegularizerWeights,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        // Small batches matter here: the gradient noise of batch_size 8 is
        // what reliably knocks training out of the memorization basin and
        // into the generalizing one. Patience is sized so that seeds whose
        // validation accuracy jumps late (epoch ~180-260) are not cut off.
        TrainConfig {
            epochs_max: 300,
            batch_size: 8,
            patience: 150,
            oneshot_boost: 1,
            seed: 1,
            adam: AdamConfig::default(),
            weights: RegularizerWeights::default(),
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs_max < 1 {
            return Err(TrainError::InvalidConfig("epochs_max must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(TrainError::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.patience < 1 {
            return Err(TrainError::InvalidConfig("patience must be >= 1".into()));
        }
        if self.oneshot_boost < 1 {
            return Err(TrainError::InvalidConfig("oneshot_boost must be >= 1".into()));
        }
        if !(self.adam.lr > 0.0) {
            return Err(TrainError::InvalidConfig(format!("lr must be > 0, got {}", self.adam.lr)));
        }
        if self.weights.lambda_l < 0.0 || self.weights.lambda_len < 0.0 || self.weights.lambda_theta < 0.0 {
            return Err(TrainError::InvalidConfig("regularizer weights must be >= 0".into()));
        }
        self.model.validate().map_err(TrainError::Model)?;
        Ok(())
    }

    /// Sub-seed for one of the run's components (splitmix64 of the master
    /// seed and the stream index).
    pub fn sub_seed(&self, stream: u64) -> u64 {
        let mut z = self
            .seed
            .wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

const STREAM_MODEL: u64 = 0;
const STREAM_DATA: u64 = 1;
const STREAM_CANDIDATES: u64 = 2;
const STREAM_TRAIN: u64 = 3;

/// One row of the training log; component values are summed over the
/// epoch's batches, so the recomposition identity holds row-wise.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub bce: f64,
    pub r: [f64; 10],
    pub len_penalty: f64,
    pub theta_penalty: f64,
    pub total: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: Model,
    pub log: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_acc: f64,
}

/// Eval-mode accuracy: a prediction is correct iff (p > 0.5) == label.
/// Uses the tape-free forward pass, which is bit-identical to the graph.
pub fn accuracy(model: &Model, examples: &[crate::data::LabeledExample]) -> f64 {
    if examples.is_empty() {
        return 1.0;
    }
    let correct = examples
        .iter()
        .filter(|ex| (model.eval_truth(&ex.expr) > 0.5) == ex.label)
        .count();
    correct as f64 / examples.len() as f64
}

/// Train a fresh model on the bundle. The returned model carries the
/// best-validation-accuracy snapshot, not the final-epoch weights.
pub fn train(bundle: &DatasetBundle, cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let model_cfg = ModelConfig { seed: cfg.sub_seed(STREAM_MODEL), ..cfg.model };
    let mut model = Model::init(&model_cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.sub_seed(STREAM_TRAIN));

    let mut log = Vec::new();
    let mut best_val = f64::NEG_INFINITY;
    let mut best_epoch = 0usize;
    let mut best_snapshot = model.store.snapshot();
    let mut stale_epochs = 0usize;

    let mut order: Vec<usize> = (0..bundle.train.len()).collect();
    if let Some(i) = bundle.one_shot_idx {
        // oversample the problem's own example: it appears oneshot_boost
        // times per epoch, shuffled through the batches like any other row
        order.extend(std::iter::repeat(i).take(cfg.oneshot_boost.saturating_sub(1)));
    }
    for epoch in 1..=cfg.epochs_max {
        order.shuffle(&mut rng);

        let mut sums = EpochStats {
            epoch,
            bce: 0.0,
            r: [0.0; 10],
            len_penalty: 0.0,
            theta_penalty: 0.0,
            total: 0.0,
            train_acc: 0.0,
            val_acc: 0.0,
        };
        for batch in order.chunks(cfg.batch_size) {
            let mut g = Graph::with_capacity(batch.len() * 600);
            let t = model.anchor_node(&mut g);
            let mut predictions = Vec::with_capacity(batch.len());
            let mut traces = Vec::with_capacity(batch.len());
            for &i in batch {
                let ex = &bundle.train[i];
                let trace = model.assemble(&mut g, &ex.expr, Mode::Train, &mut rng);
                let p = model.similarity_node(&mut g, trace.output, t);
                predictions.push((p, ex.label));
                traces.push(trace);
            }
            let loss = total_loss(&mut g, &model, &predictions, &traces, &cfg.weights)?;
            let b = loss.breakdown;
            if !b.total.is_finite() {
                return Err(TrainError::Diverged { epoch });
            }
            sums.bce += b.bce;
            for i in 0..10 {
                sums.r[i] += b.r[i];
            }
            sums.len_penalty += b.len_penalty;
            sums.theta_penalty += b.theta_penalty;
            sums.total += b.total;

            let grads = g.backward(loss.total);
            model.store.adam_step(&cfg.adam, &grads);
        }

        sums.train_acc = accuracy(&model, &bundle.train);
        sums.val_acc = accuracy(&model, &bundle.validation);
        log.push(sums);

        if sums.val_acc > best_val {
            best_val = sums.val_acc;
            best_epoch = epoch;
            best_snapshot = model.store.snapshot();
            stale_epochs = 0;
        } else {
            if sums.val_acc == best_val {
                // equal quality: prefer the later, longer-trained weights
                best_epoch = epoch;
                best_snapshot = model.store.snapshot();
            }
            stale_epochs += 1;
            if stale_epochs >= cfg.patience {
                break;
            }
        }
    }

    model.store.restore(&best_snapshot);
    debug_assert!(log.iter().all(|e| e.val_acc <= best_val));
    Ok(TrainOutcome { model, log, best_epoch, best_val_acc: best_val })
}

/// One ranked candidate answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub candidate: LetterString,
    pub p: f64,
    pub rank: usize,
}

/// All candidates of one problem ordered by predicted truth, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedAnswers {
    pub problem: String,
    pub seed: u64,
    pub entries: Vec<RankedEntry>,
}

impl RankedAnswers {
    /// 1-based rank of `target`, or None when it is not in the candidate
    /// set (reported as ∞).
    pub fn rank_of(&self, target: &LetterString) -> Option<usize> {
        self.entries.iter().find(|e| &e.candidate == target).map(|e| e.rank)
    }
}

/// Order candidates by p descending; ties go to the shorter string, then
/// lexicographic. The sort is total, so input order never matters.
pub fn rank_candidates(
    model: &Model,
    problem: &AnalogyProblem,
    candidates: &CandidateSet,
    seed: u64,
) -> RankedAnswers {
    let mut rng = ChaCha8Rng::seed_from_u64(0); // eval mode ignores it
    let mut scored: Vec<(LetterString, f64)> = candidates
        .candidates
        .iter()
        .map(|c| {
            let expr = candidate_expr(problem, &c.answer);
            let (p, _) = model.predict_truth(&expr, Mode::Eval, &mut rng);
            (c.answer.clone(), p)
        })
        .collect();
    scored.sort_by(|(ca, pa), (cb, pb)| {
        pb.partial_cmp(pa)
            .expect("truth probabilities are never NaN")
            .then(ca.len().cmp(&cb.len()))
            .then(ca.cmp(cb))
    });
    RankedAnswers {
        problem: problem.to_string(),
        seed,
        entries: scored
            .into_iter()
            .enumerate()
            .map(|(i, (candidate, p))| RankedEntry { candidate, p, rank: i + 1 })
            .collect(),
    }
}

/// Ranking through the plain recursive evaluator instead of the graph
/// engine; used to cross-check that both paths order candidates identically.
pub fn rank_candidates_reference(
    model: &Model,
    problem: &AnalogyProblem,
    candidates: &CandidateSet,
    seed: u64,
) -> RankedAnswers {
    let mut scored: Vec<(LetterString, f64)> = candidates
        .candidates
        .iter()
        .map(|c| {
            let expr = candidate_expr(problem, &c.answer);
            (c.answer.clone(), crate::model::reference::predict_truth(model, &expr))
        })
        .collect();
    scored.sort_by(|(ca, pa), (cb, pb)| {
        pb.partial_cmp(pa)
            .expect("truth probabilities are never NaN")
            .then(ca.len().cmp(&cb.len()))
            .then(ca.cmp(cb))
    });
    RankedAnswers {
        problem: problem.to_string(),
        seed,
        entries: scored
            .into_iter()
            .enumerate()
            .map(|(i, (candidate, p))| RankedEntry { candidate, p, rank: i + 1 })
            .collect(),
    }
}

/// Full result of solving one problem.
#[derive(Debug)]
pub struct SolveOutcome {
    pub ranked: RankedAnswers,
    pub candidates: CandidateSet,
    pub model: Model,
    pub log: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_acc: f64,
}

/// End-to-end: parse, build data, train, rank. Candidate sets can be
/// supplied (benchmarks pass curated ones); otherwise they are generated.
pub fn solve_with_candidates(
    problem: &AnalogyProblem,
    candidates: Option<CandidateSet>,
    cfg: &TrainConfig,
) -> Result<SolveOutcome, SolveError> {
    cfg.validate()?;
    let bundle = build_bundle(problem, cfg.sub_seed(STREAM_DATA));
    let candidates = candidates.unwrap_or_else(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.sub_seed(STREAM_CANDIDATES));
        gen_candidates(problem, &mut rng)
    });
    let outcome = train(&bundle, cfg)?;
    let ranked = rank_candidates(&outcome.model, problem, &candidates, cfg.seed);
    Ok(SolveOutcome {
        ranked,
        candidates,
        model: outcome.model,
        log: outcome.log,
        best_epoch: outcome.best_epoch,
        best_val_acc: outcome.best_val_acc,
    })
}

pub fn solve(problem_text: &str, cfg: &TrainConfig) -> Result<SolveOutcome, SolveError> {
    let problem = parse_problem(problem_text)?;
    solve_with_candidates(&problem, None, cfg)
}

/// Write the per-epoch training log as CSV.
pub fn write_training_log(path: &Path, log: &[EpochStats]) -> std::io::Result<()> {
    let mut out = String::from(
        "epoch,bce,r1,r2,r3,r4,r5,r6,r7,r8,r9,r10,len_penalty,theta_penalty,total,train_acc,val_acc\n",
    );
    for e in log {
        out.push_str(&format!("{},{}", e.epoch, e.bce));
        for r in e.r {
            out.push_str(&format!(",{r}"));
        }
        out.push_str(&format!(
            ",{},{},{},{},{}\n",
            e.len_penalty, e.theta_penalty, e.total, e.train_acc, e.val_acc
        ));
    }
    std::fs::write(path, out)
}
