//! The regularizer sums are verified against module "doubles" whose behavior
//! is known in closed form: a NOT that is exactly the identity map and
//! AND/OR modules that project onto one operand, built by routing x through
//! relu as [x; -x] and recombining. Under those doubles every Table value
//! collapses to sigmoid(+-alpha).

use noan_core::autodiff::{Graph, Tensor};
use noan_core::logic::{Expr, Letter};
use noan_core::loss::{aggregate_w, logic_regularizers, total_loss, LossError, RegularizerWeights};
use noan_core::model::{Mode, Model, ModelConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SIG_10: f64 = 0.9999546021312976; // sigmoid(10)
const ONE_MINUS_SIG_10: f64 = 4.5397868702434395e-5; // sigmoid(-10)

fn cfg(d: usize, hidden: usize, seed: u64) -> ModelConfig {
    ModelConfig { d, alpha: 10.0, hidden, seed }
}

fn rng0() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}

// hidden x d matrix [I; -I]: relu of its product with x is [x+; x-]
fn split_stack(d: usize) -> Vec<f64> {
    let mut w = vec![0.0; 2 * d * d];
    for r in 0..d {
        w[r * d + r] = 1.0;
        w[(d + r) * d + r] = -1.0;
    }
    w
}

// d x 2d matrix [I | -I]: recombines [x+; x-] into x
fn recombine(d: usize) -> Vec<f64> {
    let mut w = vec![0.0; d * 2 * d];
    for r in 0..d {
        w[r * 2 * d + r] = 1.0;
        w[r * 2 * d + d + r] = -1.0;
    }
    w
}

// like split_stack but reading only one operand of a concatenated pair
fn split_select(d: usize, second: bool) -> Vec<f64> {
    let off = if second { d } else { 0 };
    let mut w = vec![0.0; 2 * d * 2 * d];
    for r in 0..d {
        w[r * 2 * d + off + r] = 1.0;
        w[(d + r) * 2 * d + off + r] = -1.0;
    }
    w
}

/// d=4, hidden=8 model where NOT(x) = x, AND(a,b) = a, OR(a,b) = b exactly.
fn doubled_model() -> Model {
    let d = 4;
    let mut m = Model::init(&cfg(d, 2 * d, 5)).unwrap();
    let zero_h = vec![0.0; 2 * d];
    let zero_d = vec![0.0; d];
    m.store.set_value(m.not.w1, split_stack(d));
    m.store.set_value(m.not.b1, zero_h.clone());
    m.store.set_value(m.not.w2, recombine(d));
    m.store.set_value(m.not.b2, zero_d.clone());
    m.store.set_value(m.and.w1, split_select(d, false));
    m.store.set_value(m.and.b1, zero_h.clone());
    m.store.set_value(m.and.w2, recombine(d));
    m.store.set_value(m.and.b2, zero_d.clone());
    m.store.set_value(m.or.w1, split_select(d, true));
    m.store.set_value(m.or.b1, zero_h);
    m.store.set_value(m.or.w2, recombine(d));
    m.store.set_value(m.or.b2, zero_d);
    m
}

#[test]
fn doubles_behave_as_constructed() {
    let m = doubled_model();
    let x = vec![0.3, -1.2, 0.0, 2.5];
    let y = vec![-0.7, 0.4, 1.1, -0.2];
    let mut g = Graph::new();
    let xn = g.constant(Tensor(x.clone()));
    let yn = g.constant(Tensor(y.clone()));
    let not_x = m.apply_not(&mut g, xn);
    let and_xy = m.apply_binary(&mut g, &m.and, xn, yn);
    let or_xy = m.apply_binary(&mut g, &m.or, xn, yn);
    assert_eq!(g.value(not_x), &x[..]);
    assert_eq!(g.value(and_xy), &x[..]);
    assert_eq!(g.value(or_xy), &y[..]);
}

#[test]
fn regularizers_match_closed_form_under_doubles() {
    // with NOT = id, AND = first, OR = second, and the probe w set to the
    // anchor's own value, every similarity in the table becomes
    // Sim(T, T) = sigmoid(10):
    //   r1 = Sim(w, w) + Sim(T, T)   (two summands for |W| = 1)
    //   r2..r10 = 1 - sigmoid(10) each
    let m = doubled_model();
    let mut g = Graph::new();
    let t_vals = m.store.value(m.t_anchor).to_vec();
    let w = g.constant(Tensor(t_vals));
    let r = logic_regularizers(&mut g, &m, &[(w, 1)]).unwrap();

    let r1 = g.scalar_value(r[0]);
    assert!((r1 - 2.0 * SIG_10).abs() < 1e-9, "r1 = {r1}");
    for (i, &node) in r.iter().enumerate().skip(1) {
        let v = g.scalar_value(node);
        assert!(
            (v - ONE_MINUS_SIG_10).abs() < 1e-9,
            "r{} = {v}, expected {ONE_MINUS_SIG_10}",
            i + 1
        );
    }
}

#[test]
fn identity_not_flips_r1_and_r2() {
    // spec'd sanity pair: a perfect double-negation (r2 per w ~ 4.54e-5)
    // is a maximal violation of the negation law (r1 per w ~ 0.99995)
    let mut m = Model::init(&cfg(4, 8, 11)).unwrap();
    m.store.set_value(m.not.w1, split_stack(4));
    m.store.set_value(m.not.b1, vec![0.0; 8]);
    m.store.set_value(m.not.w2, recombine(4));
    m.store.set_value(m.not.b2, vec![0.0; 4]);

    let mut g = Graph::new();
    let w = g.constant(Tensor(vec![0.9, -0.4, 0.2, 1.3]));
    let r = logic_regularizers(&mut g, &m, &[(w, 1)]).unwrap();
    let sim_nt_t = SIG_10; // NOT is identity, so Sim(NOT T, T) = sigmoid(10)
    let r1_per_w = g.scalar_value(r[0]) - sim_nt_t;
    assert!((r1_per_w - SIG_10).abs() < 1e-9);
    assert!((g.scalar_value(r[1]) - ONE_MINUS_SIG_10).abs() < 1e-9);
}

#[test]
fn occurrence_counts_scale_each_term() {
    let m = Model::init(&cfg(6, 6, 3)).unwrap();
    let probe = vec![0.4, -0.9, 0.15, 0.7, -0.3, 1.1];

    let mut g = Graph::new();
    let w = g.constant(Tensor(probe.clone()));
    let once = logic_regularizers(&mut g, &m, &[(w, 1)]).unwrap();
    let twice = logic_regularizers(&mut g, &m, &[(w, 2)]).unwrap();

    // r1 carries the fixed Sim(NOT T, T) summand; the per-w part doubles
    let (a, b) = (g.scalar_value(once[0]), g.scalar_value(twice[0]));
    assert!((b - a) > 0.0 || (b - a).abs() < 1e-12);
    let t_term = 2.0 * a - b; // solves a = x + t, b = 2x + t
    assert!(t_term > 0.0 && t_term < 1.0, "implied anchor term {t_term}");
    for i in 1..10 {
        let (a, b) = (g.scalar_value(once[i]), g.scalar_value(twice[i]));
        assert!((b - 2.0 * a).abs() < 1e-12, "r{}: {b} != 2*{a}", i + 1);
    }
}

#[test]
fn aggregation_counts_occurrences_in_first_seen_order() {
    let m = Model::init(&cfg(4, 4, 9)).unwrap();
    let v = |c: char| Expr::Var(Letter::from_char(c).unwrap());
    let e = Expr::And(vec![v('A'), v('A'), v('B')]);
    let mut g = Graph::new();
    let trace = m.assemble(&mut g, &e, Mode::Eval, &mut rng0());
    // w entries: A, A, B, fold intermediate, root
    assert_eq!(trace.w.len(), 5);

    let agg = aggregate_w(&[trace.clone()]);
    assert_eq!(agg.len(), 4);
    let emb_a = g.param(&m.store, m.emb[0]);
    let emb_b = g.param(&m.store, m.emb[1]);
    assert_eq!(agg[0], (emb_a, 2));
    assert_eq!(agg[1], (emb_b, 1));
    assert_eq!(agg[2].1, 1);
    assert_eq!(agg[3].1, 1);

    // two traces pool their occurrences
    let trace2 = m.assemble(&mut g, &v('A'), Mode::Eval, &mut rng0());
    let agg = aggregate_w(&[trace, trace2]);
    assert_eq!(agg[0], (emb_a, 3));
}

#[test]
fn bce_hits_textbook_values() {
    let m = Model::init(&cfg(4, 4, 2)).unwrap();
    let zeroed = RegularizerWeights { lambda_l: 0.0, lambda_len: 0.0, lambda_theta: 0.0 };
    let run = |p: f64, label: bool| {
        let mut g = Graph::new();
        let e = Expr::Var(Letter::from_char('A').unwrap());
        let trace = m.assemble(&mut g, &e, Mode::Eval, &mut rng0());
        let p_node = g.constant(Tensor::scalar(p));
        total_loss(&mut g, &m, &[(p_node, label)], &[trace], &zeroed)
            .unwrap()
            .breakdown
    };

    let b = run(0.5, true);
    assert_eq!(b.bce, -(0.5f64.ln()));
    assert_eq!(b.total, b.bce, "all penalty weights zeroed");

    let p = 1.0 / (1.0 + (-10.0f64).exp());
    let b = run(p, true);
    assert!((b.bce - -(p.ln())).abs() < 1e-15);
    assert!(b.bce < 5e-5, "confident correct answer is near-free");

    let b = run(0.3, false);
    assert!((b.bce - -((1.0 - 0.3f64).ln())).abs() < 1e-15);
}

#[test]
fn probabilities_outside_open_interval_are_rejected() {
    let m = Model::init(&cfg(4, 4, 2)).unwrap();
    for bad in [0.0, 1.0, 1.5, -0.2, f64::NAN] {
        let mut g = Graph::new();
        let e = Expr::Var(Letter::from_char('A').unwrap());
        let trace = m.assemble(&mut g, &e, Mode::Eval, &mut rng0());
        let p_node = g.constant(Tensor::scalar(bad));
        let err = total_loss(&mut g, &m, &[(p_node, true)], &[trace], &RegularizerWeights::default());
        assert!(
            matches!(err, Err(LossError::ProbabilityOutOfRange(_))),
            "p = {bad} must be rejected"
        );
    }
}

#[test]
fn unit_vector_length_penalty_is_one() {
    let m = Model::init(&cfg(4, 4, 2)).unwrap();
    let weights = RegularizerWeights { lambda_l: 0.0, lambda_len: 1.0, lambda_theta: 0.0 };
    let mut g = Graph::new();
    let w = g.constant(Tensor(vec![1.0, 0.0, 0.0, 0.0]));
    let trace = noan_core::model::GraphTrace { output: w, w: vec![w] };
    let loss = total_loss(&mut g, &m, &[], &[trace], &weights).unwrap();
    assert_eq!(loss.breakdown.len_penalty, 1.0);
    assert_eq!(loss.breakdown.bce, 0.0);
    assert_eq!(loss.breakdown.total, 1.0);
}

#[test]
fn total_recomposes_from_parts() {
    let m = Model::init(&ModelConfig { d: 8, hidden: 8, ..Default::default() }).unwrap();
    let weights = RegularizerWeights::default();
    let mut g = Graph::new();
    let e1 = noan_core::logic::to_nnf(&noan_core::logic::implication_expr(
        &"ABC".parse().unwrap(),
        &"ABD".parse().unwrap(),
    ));
    let e2 = noan_core::logic::to_nnf(&noan_core::logic::implication_expr(
        &"K".parse().unwrap(),
        &"K".parse().unwrap(),
    ));
    let t1 = m.assemble(&mut g, &e1, Mode::Eval, &mut rng0());
    let t2 = m.assemble(&mut g, &e2, Mode::Eval, &mut rng0());
    let anchor = m.anchor_node(&mut g);
    let p1 = m.similarity_node(&mut g, t1.output, anchor);
    let p2 = m.similarity_node(&mut g, t2.output, anchor);
    let loss = total_loss(&mut g, &m, &[(p1, false), (p2, true)], &[t1, t2], &weights).unwrap();

    let b = loss.breakdown;
    let recomposed = b.bce
        + weights.lambda_l * b.r_sum()
        + weights.lambda_len * b.len_penalty
        + weights.lambda_theta * b.theta_penalty;
    assert!((b.total - recomposed).abs() < 1e-12, "{} vs {recomposed}", b.total);
    assert!(b.bce >= 0.0 && b.len_penalty >= 0.0 && b.theta_penalty >= 0.0);
    for (i, ri) in b.r.iter().enumerate() {
        assert!(ri.is_finite() && *ri >= 0.0, "r{} = {ri}", i + 1);
    }
}

#[test]
fn regularizers_alone_drive_module_gradients() {
    // no labeled examples at all: the logical regularizers must still push
    // gradients into the NOT/AND/OR weights and the probe embedding
    let m = Model::init(&cfg(6, 6, 4)).unwrap();
    let weights = RegularizerWeights { lambda_l: 0.1, lambda_len: 0.0, lambda_theta: 0.0 };
    let mut g = Graph::new();
    let e = Expr::Var(Letter::from_char('Q').unwrap());
    let trace = m.assemble(&mut g, &e, Mode::Eval, &mut rng0());
    let loss = total_loss(&mut g, &m, &[], &[trace], &weights).unwrap();
    assert_eq!(loss.breakdown.bce, 0.0);

    let grads = g.backward(loss.total);
    for (name, id) in [
        ("not.w1", m.not.w1),
        ("and.w1", m.and.w1),
        ("or.w1", m.or.w1),
        ("emb.Q", m.emb[16]),
    ] {
        let gv = grads.get(id).unwrap_or_else(|| panic!("{name} got no gradient"));
        let norm: f64 = gv.iter().map(|x| x * x).sum();
        assert!(norm > 0.0, "{name} gradient is identically zero");
    }
}

#[test]
fn empty_w_collection_is_an_error() {
    let m = Model::init(&cfg(4, 4, 2)).unwrap();
    let mut g = Graph::new();
    assert!(matches!(
        logic_regularizers(&mut g, &m, &[]),
        Err(LossError::EmptyW)
    ));
    assert!(matches!(
        total_loss(&mut g, &m, &[], &[], &RegularizerWeights::default()),
        Err(LossError::EmptyW)
    ));
}
