//! Data generation: the alphabet commonsense set, negative sampling, the
//! one-shot example, propagated validation data, and candidate answer sets.

use crate::logic::{implication_expr, to_nnf, AnalogyProblem, Expr, Letter, LetterString};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("negative sample request of {requested} exceeds pool of {available}")]
    PoolExhausted { requested: usize, available: usize },
}

/// One implication example `lhs -> rhs` with its truth label and compiled
/// NNF expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ExampleRepr", into = "ExampleRepr")]
pub struct LabeledExample {
    pub lhs: LetterString,
    pub rhs: LetterString,
    pub label: bool,
    pub expr: Expr,
}

impl LabeledExample {
    pub fn new(lhs: LetterString, rhs: LetterString, label: bool) -> LabeledExample {
        let expr = to_nnf(&implication_expr(&lhs, &rhs));
        LabeledExample { lhs, rhs, label, expr }
    }

    pub fn pair(&self) -> (&LetterString, &LetterString) {
        (&self.lhs, &self.rhs)
    }
}

// serialized form: the expression is derived, not stored
#[derive(Serialize, Deserialize)]
struct ExampleRepr {
    lhs: LetterString,
    rhs: LetterString,
    label: bool,
}

impl From<ExampleRepr> for LabeledExample {
    fn from(r: ExampleRepr) -> LabeledExample {
        LabeledExample::new(r.lhs, r.rhs, r.label)
    }
}

impl From<LabeledExample> for ExampleRepr {
    fn from(e: LabeledExample) -> ExampleRepr {
        ExampleRepr { lhs: e.lhs, rhs: e.rhs, label: e.label }
    }
}

/// Training and validation splits for one problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetBundle {
    pub train: Vec<LabeledExample>,
    pub validation: Vec<LabeledExample>,
    /// Index into `train` of the problem's own example pair, when the bundle
    /// has one. The trainer oversamples this example (`oneshot_boost`).
    #[serde(default)]
    pub one_shot_idx: Option<usize>,
}

/// The 156 commonsense positives: for every letter x (cyclically, so Z's
/// successor is A) the repetition, forward and reverse patterns at widths
/// one and two — x→x, x→x', x'→x, xx→xx, xx'→x'x'', x'x''→xx'.
pub fn gen_commonsense() -> Vec<LabeledExample> {
    let mut out = Vec::with_capacity(156);
    let mut seen = HashSet::new();
    for x in Letter::all() {
        let s = x.succ();
        let ss = s.succ();
        let one = |a: Letter| LetterString::new(vec![a]).unwrap();
        let two = |a: Letter, b: Letter| LetterString::new(vec![a, b]).unwrap();
        let pairs = [
            (one(x), one(x)),
            (one(x), one(s)),
            (one(s), one(x)),
            (two(x, x), two(x, x)),
            (two(x, s), two(s, ss)),
            (two(s, ss), two(x, s)),
        ];
        for (lhs, rhs) in pairs {
            if seen.insert((lhs.clone(), rhs.clone())) {
                out.push(LabeledExample::new(lhs, rhs, true));
            }
        }
    }
    out
}

/// Draw `count` negatives uniformly without replacement from all same-length
/// string pairs of length 1 or 2 that are not in `exclude`.
pub fn sample_negatives(
    exclude: &[LabeledExample],
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<LabeledExample>, DataError> {
    let excluded: HashSet<(LetterString, LetterString)> = exclude
        .iter()
        .map(|e| (e.lhs.clone(), e.rhs.clone()))
        .collect();

    // index space: 26^2 one-char pairs followed by 26^2 * 26^2 two-char pairs
    const ONE: usize = 26 * 26;
    const TWO: usize = ONE * ONE;
    let pool = ONE + TWO - excluded.iter().filter(|(a, _)| a.len() <= 2).count();
    if count > pool {
        return Err(DataError::PoolExhausted { requested: count, available: pool });
    }

    let decode = |idx: usize| -> (LetterString, LetterString) {
        if idx < ONE {
            let (a, b) = (idx / 26, idx % 26);
            (
                LetterString::new(vec![Letter::from_index(a)]).unwrap(),
                LetterString::new(vec![Letter::from_index(b)]).unwrap(),
            )
        } else {
            let j = idx - ONE;
            let (s1, s2) = (j / ONE, j % ONE);
            let two = |s: usize| {
                LetterString::new(vec![Letter::from_index(s / 26), Letter::from_index(s % 26)])
                    .unwrap()
            };
            (two(s1), two(s2))
        }
    };

    let mut drawn = HashSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let idx = rng.gen_range(0..ONE + TWO);
        let pair = decode(idx);
        if excluded.contains(&pair) || !drawn.insert(pair.clone()) {
            continue;
        }
        out.push(LabeledExample::new(pair.0, pair.1, false));
    }
    Ok(out)
}

/// The problem's own example pair, labeled true.
pub fn one_shot_example(p: &AnalogyProblem) -> LabeledExample {
    LabeledExample::new(p.initial.clone(), p.modified.clone(), true)
}

/// The one-shot pattern propagated through the alphabet: both sides shifted
/// by k for every k in 1..=25, all labeled true.
pub fn propagate_validation(p: &AnalogyProblem) -> Vec<LabeledExample> {
    (1..26)
        .map(|k| LabeledExample::new(p.initial.shifted(k), p.modified.shifted(k), true))
        .collect()
}

/// Fraction of the commonsense set held out for validation.
const HOLDOUT_FRACTION: f64 = 0.10;

/// Assemble the per-problem training bundle:
/// train = commonsense positives + sampled negatives − holdout, plus the
/// one-shot example (exactly once, even when it already occurs as a
/// commonsense positive); validation = the 25 propagated shifts plus the
/// 10% commonsense holdout. Negatives are drawn before the holdout shuffle;
/// that order is part of the determinism contract.
pub fn build_bundle(p: &AnalogyProblem, seed: u64) -> DatasetBundle {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let one_shot = one_shot_example(p);
    let positives = gen_commonsense();
    let mut exclude = positives.clone();
    exclude.push(one_shot.clone());
    let negatives = sample_negatives(&exclude, positives.len(), &mut rng)
        .expect("negative pool dwarfs the request");

    let mut commonsense: Vec<LabeledExample> = positives;
    commonsense.extend(negatives);

    let holdout_n = (commonsense.len() as f64 * HOLDOUT_FRACTION) as usize;
    // never hold out the one-shot pair itself: it must stay in train
    let mut eligible: Vec<usize> = (0..commonsense.len())
        .filter(|&i| commonsense[i].pair() != one_shot.pair())
        .collect();
    eligible.shuffle(&mut rng);
    let holdout: HashSet<usize> = eligible.into_iter().take(holdout_n).collect();

    let mut train = Vec::with_capacity(commonsense.len() - holdout_n + 1);
    let mut validation = propagate_validation(p);
    let mut one_shot_idx = None;
    for (i, ex) in commonsense.into_iter().enumerate() {
        if holdout.contains(&i) {
            validation.push(ex);
        } else {
            if one_shot_idx.is_none() && ex.pair() == one_shot.pair() && ex.label {
                one_shot_idx = Some(train.len());
            }
            train.push(ex);
        }
    }
    if one_shot_idx.is_none() {
        one_shot_idx = Some(train.len());
        train.push(one_shot);
    }

    DatasetBundle { train, validation, one_shot_idx }
}

/// Commonsense-only bundle (no problem attached): 90/10 train/validation
/// split of the 312 positives and negatives, for training-sanity checks.
pub fn commonsense_bundle(seed: u64) -> DatasetBundle {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let positives = gen_commonsense();
    let negatives =
        sample_negatives(&positives, positives.len(), &mut rng).expect("pool is large");
    let mut all = positives;
    all.extend(negatives);

    let holdout_n = (all.len() as f64 * HOLDOUT_FRACTION) as usize;
    let mut idx: Vec<usize> = (0..all.len()).collect();
    idx.shuffle(&mut rng);
    let holdout: HashSet<usize> = idx.into_iter().take(holdout_n).collect();

    let (mut train, mut validation) = (Vec::new(), Vec::new());
    for (i, ex) in all.into_iter().enumerate() {
        if holdout.contains(&i) {
            validation.push(ex);
        } else {
            train.push(ex);
        }
    }
    DatasetBundle { train, validation, one_shot_idx: None }
}

/// Where a candidate answer came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Curated,
    Repetition,
    Forward,
    Reverse,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub answer: LetterString,
    pub provenance: Provenance,
}

/// Exactly twenty deduplicated candidate answers for one query.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateSet {
    pub query: LetterString,
    pub candidates: Vec<Candidate>,
}

pub const CANDIDATE_COUNT: usize = 20;

/// Generate a candidate set from the query's own material: repetitions of
/// its first letter, forward families (successor runs, shifts, last-letter
/// successor, the one-shot echo using the example's last letter), reverse
/// families, then seeded random strings to fill up to twenty.
pub fn gen_candidates(p: &AnalogyProblem, rng: &mut ChaCha8Rng) -> CandidateSet {
    gen_candidates_with(p, &[], rng)
}

/// Like [`gen_candidates`], but `curated` entries (e.g. participant answers
/// from a benchmark file) are taken first and always survive.
pub fn gen_candidates_with(
    p: &AnalogyProblem,
    curated: &[LetterString],
    rng: &mut ChaCha8Rng,
) -> CandidateSet {
    assert!(curated.len() <= CANDIDATE_COUNT, "more than {CANDIDATE_COUNT} curated candidates");
    let q = p.query.letters();
    let len = q.len();
    let first = q[0];
    let last = q[len - 1];

    let mut set: Vec<Candidate> = Vec::with_capacity(CANDIDATE_COUNT);
    let mut seen: HashSet<LetterString> = HashSet::new();
    let push = |set: &mut Vec<Candidate>, seen: &mut HashSet<LetterString>, s: LetterString, prov: Provenance| {
        if set.len() < CANDIDATE_COUNT && seen.insert(s.clone()) {
            set.push(Candidate { answer: s, provenance: prov });
        }
    };

    for c in curated {
        push(&mut set, &mut seen, c.clone(), Provenance::Curated);
    }

    // repetition: first-letter powers and the query itself
    for n in [1usize, 2, 3, len] {
        let s = LetterString::new(vec![first; n.max(1)]).unwrap();
        push(&mut set, &mut seen, s, Provenance::Repetition);
    }
    push(&mut set, &mut seen, p.query.clone(), Provenance::Repetition);

    // forward derivations
    let mut with_last = q[..len - 1].to_vec();
    with_last.push(last.succ());
    push(&mut set, &mut seen, LetterString::new(with_last).unwrap(), Provenance::Forward);
    push(&mut set, &mut seen, p.query.shifted(1), Provenance::Forward);
    for n in 1..=len {
        let run: Vec<Letter> = (0..n).map(|i| first.shifted(i)).collect();
        push(&mut set, &mut seen, LetterString::new(run).unwrap(), Provenance::Forward);
        let run: Vec<Letter> = (0..n).map(|i| first.shifted(i + 1)).collect();
        push(&mut set, &mut seen, LetterString::new(run).unwrap(), Provenance::Forward);
    }
    let mut appended = q.to_vec();
    appended.push(last.succ());
    push(&mut set, &mut seen, LetterString::new(appended).unwrap(), Provenance::Forward);
    // echo of the example's modification: query prefix + its final letter
    let mut echo = q[..len - 1].to_vec();
    echo.push(*p.modified.letters().last().unwrap());
    push(&mut set, &mut seen, LetterString::new(echo).unwrap(), Provenance::Forward);

    // reverse derivations
    push(&mut set, &mut seen, p.query.reversed(), Provenance::Reverse);
    for n in 2..=len {
        let run: Vec<Letter> = (0..n).map(|i| first.shifted(26 - i % 26)).collect();
        push(&mut set, &mut seen, LetterString::new(run).unwrap(), Provenance::Reverse);
    }

    // seeded random fill
    while set.len() < CANDIDATE_COUNT {
        let n = rng.gen_range(1..=len + 2);
        let s: Vec<Letter> = (0..n).map(|_| Letter::from_index(rng.gen_range(0..26))).collect();
        push(&mut set, &mut seen, LetterString::new(s).unwrap(), Provenance::Random);
    }

    assert_eq!(set.len(), CANDIDATE_COUNT);
    CandidateSet { query: p.query.clone(), candidates: set }
}

/// NNF implication expression a candidate is scored with:
/// `conj(query) -> conj(candidate)`.
pub fn candidate_expr(p: &AnalogyProblem, candidate: &LetterString) -> Expr {
    to_nnf(&implication_expr(&p.query, candidate))
}

/// The probe expressions whose eval-mode W set is used to report
/// law-satisfaction scores: the one- and two-character forward patterns
/// for every letter.
pub fn probe_expressions() -> Vec<Expr> {
    let mut out = Vec::with_capacity(52);
    for x in Letter::all() {
        let s = x.succ();
        let ss = s.succ();
        let lhs = LetterString::new(vec![x]).unwrap();
        let rhs = LetterString::new(vec![s]).unwrap();
        out.push(to_nnf(&implication_expr(&lhs, &rhs)));
        let lhs = LetterString::new(vec![x, s]).unwrap();
        let rhs = LetterString::new(vec![s, ss]).unwrap();
        out.push(to_nnf(&implication_expr(&lhs, &rhs)));
    }
    out
}
