use noan_core::logic::{implication_expr, to_nnf, Expr, Letter};
use noan_core::model::{reference, Mode, Model, ModelConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cfg(d: usize, hidden: usize, seed: u64) -> ModelConfig {
    ModelConfig { d, alpha: 10.0, hidden, seed }
}

fn rng0() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}

fn ls(s: &str) -> noan_core::logic::LetterString {
    s.parse().unwrap()
}

#[test]
fn init_is_seed_deterministic() {
    let a = Model::init(&cfg(8, 8, 7)).unwrap();
    let b = Model::init(&cfg(8, 8, 7)).unwrap();
    assert_eq!(a.store.snapshot(), b.store.snapshot());
    let c = Model::init(&cfg(8, 8, 8)).unwrap();
    assert_ne!(a.store.snapshot(), c.store.snapshot());
}

#[test]
fn anchor_is_nonzero_and_frozen() {
    let m = Model::init(&cfg(16, 16, 3)).unwrap();
    let t = m.store.value(m.t_anchor);
    assert!(t.iter().map(|x| x * x).sum::<f64>() > 0.0);
    assert!(!m.store.entry(m.t_anchor).trainable);
}

#[test]
fn trainable_parameter_count_matches_enumeration() {
    // d=2, hidden=2: 26 embeddings of 2, AND/OR (2x4 + 2 + 2x2 + 2 = 16
    // each), NOT (2x2 + 2 + 2x2 + 2 = 12): 52 + 16 + 16 + 12 = 96
    let m = Model::init(&cfg(2, 2, 1)).unwrap();
    assert_eq!(m.store.trainable_numel(), 96);
    // 26 embeddings + 3 modules x 4 tensors + the frozen anchor
    assert_eq!(m.store.len(), 39);
}

#[test]
fn config_validation_rejects_bad_values() {
    assert!(Model::init(&cfg(1, 4, 0)).is_err());
    assert!(Model::init(&cfg(4, 0, 0)).is_err());
    assert!(Model::init(&ModelConfig { alpha: 0.0, ..Default::default() }).is_err());
    assert!(Model::init(&ModelConfig { alpha: -3.0, ..Default::default() }).is_err());
}

// Independent oracle: expected size of the trace's W collection, counting a
// leaf per Var occurrence, one vector per NOT, and k-1 fold outputs for a
// k-ary connective.
fn expected_w_count(e: &Expr) -> usize {
    match e {
        Expr::Var(_) => 1,
        Expr::Not(x) => expected_w_count(x) + 1,
        Expr::And(xs) | Expr::Or(xs) => {
            xs.iter().map(expected_w_count).sum::<usize>() + (xs.len() - 1)
        }
    }
}

#[test]
fn trace_collects_every_occurrence_bottom_up() {
    let m = Model::init(&cfg(8, 8, 5)).unwrap();

    // single variable: the trace is just its embedding
    let (_, trace) = m.predict_truth(&Expr::Var(Letter::from_char('A').unwrap()), Mode::Eval, &mut rng0());
    assert_eq!(trace.w.len(), 1);
    assert_eq!(trace.w[0], m.store.value(m.emb[0]));
    assert_eq!(trace.output, trace.w[0]);

    // negation: leaf then NOT output, which is also the root
    let e = Expr::not(Expr::Var(Letter::from_char('B').unwrap()));
    let (_, trace) = m.predict_truth(&e, Mode::Eval, &mut rng0());
    assert_eq!(trace.w.len(), 2);
    assert_eq!(trace.w[0], m.store.value(m.emb[1]));
    assert_eq!(trace.output, trace.w[1]);

    // the worked example: NNF of ABC -> ABD has 6 leaf occurrences,
    // 3 NOT outputs, 2 inner fold intermediates, 2 connective outputs
    // and the root = 14 entries
    let e = to_nnf(&implication_expr(&ls("ABC"), &ls("ABD")));
    assert_eq!(expected_w_count(&e), 14);
    let (_, trace) = m.predict_truth(&e, Mode::Eval, &mut rng0());
    assert_eq!(trace.w.len(), 14);
    assert_eq!(trace.output, *trace.w.last().unwrap());

    // duplicated letters stay separate occurrences
    let e = to_nnf(&implication_expr(&ls("AAB"), &ls("AA")));
    let (_, trace) = m.predict_truth(&e, Mode::Eval, &mut rng0());
    assert_eq!(trace.w.len(), expected_w_count(&e));
}

#[test]
fn similarity_hits_its_anchor_values() {
    let m = Model::init(&cfg(4, 4, 1)).unwrap();
    let mut g = noan_core::autodiff::Graph::new();
    let sim = |g: &mut noan_core::autodiff::Graph, a: Vec<f64>, b: Vec<f64>| {
        let u = g.constant(noan_core::autodiff::Tensor(a));
        let v = g.constant(noan_core::autodiff::Tensor(b));
        let s = m.similarity_node(g, u, v);
        g.scalar_value(s)
    };

    // cos = 1 -> sigmoid(10)
    let p = sim(&mut g, vec![1.0, 2.0, 3.0, 4.0], vec![1.0, 2.0, 3.0, 4.0]);
    assert!((p - 0.9999546021312976).abs() < 1e-9);
    // orthogonal -> exactly 0.5
    let p = sim(&mut g, vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]);
    assert!((p - 0.5).abs() < 1e-15);
    // cos = -1 -> sigmoid(-10)
    let p = sim(&mut g, vec![1.0, -2.0, 0.5, 0.0], vec![-2.0, 4.0, -1.0, 0.0]);
    assert!((p - 4.5397868702434395e-5).abs() < 1e-12);
}

#[test]
fn similarity_is_scale_invariant() {
    let m = Model::init(&cfg(6, 6, 9)).unwrap();
    let mut rng = rng0();
    for _ in 0..50 {
        let u: Vec<f64> = (0..6).map(|_| rng.gen::<f64>() - 0.5).collect();
        let v: Vec<f64> = (0..6).map(|_| rng.gen::<f64>() - 0.5).collect();
        let mut g = noan_core::autodiff::Graph::new();
        let (un, vn) = (g.constant(noan_core::autodiff::Tensor(u.clone())), g.constant(noan_core::autodiff::Tensor(v.clone())));
        let p1 = {
            let s = m.similarity_node(&mut g, un, vn);
            g.scalar_value(s)
        };
        let scaled: Vec<f64> = u.iter().map(|x| x * 37.5).collect();
        let (us, vs) = (g.constant(noan_core::autodiff::Tensor(scaled)), g.constant(noan_core::autodiff::Tensor(v)));
        let p2 = {
            let s = m.similarity_node(&mut g, us, vs);
            g.scalar_value(s)
        };
        assert!((p1 - p2).abs() < 1e-12, "{p1} vs {p2}");
    }
}

fn random_expr(rng: &mut ChaCha8Rng, depth: usize) -> Expr {
    if depth == 0 || rng.gen::<f64>() < 0.3 {
        return Expr::Var(Letter::from_index(rng.gen_range(0..26)));
    }
    match rng.gen_range(0..3) {
        0 => Expr::not(random_expr(rng, depth - 1)),
        1 => Expr::And((0..rng.gen_range(2..=4)).map(|_| random_expr(rng, depth - 1)).collect()),
        _ => Expr::Or((0..rng.gen_range(2..=4)).map(|_| random_expr(rng, depth - 1)).collect()),
    }
}

#[test]
fn graph_forward_matches_recursive_reference() {
    let m = Model::init(&cfg(8, 8, 11)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    for i in 0..200 {
        let e = to_nnf(&random_expr(&mut rng, 4));
        let (p_graph, trace) = m.predict_truth(&e, Mode::Eval, &mut rng0());
        let out_ref = reference::forward(&m, &e);
        assert_eq!(trace.output.len(), out_ref.len());
        for (a, b) in trace.output.iter().zip(&out_ref) {
            assert!((a - b).abs() <= 1e-12, "case {i}: {a} vs {b}");
        }
        let p_ref = reference::predict_truth(&m, &e);
        assert!((p_graph - p_ref).abs() <= 1e-12, "case {i}: p {p_graph} vs {p_ref}");
    }
}

#[test]
fn tape_free_eval_is_bit_identical_to_the_graph() {
    // eval_truth backs the per-epoch accuracy sweeps, whose comparisons
    // against 0.5 feed early stopping — so "close" is not enough, the bits
    // must match the graph path exactly.
    for (d, hidden, seed) in [(8, 8, 11), (16, 32, 1), (4, 8, 7)] {
        let m = Model::init(&cfg(d, hidden, seed)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(321 + seed);
        for i in 0..200 {
            let e = to_nnf(&random_expr(&mut rng, 4));
            let (p_graph, _) = m.predict_truth(&e, Mode::Eval, &mut rng0());
            let p_eval = m.eval_truth(&e);
            assert_eq!(
                p_graph.to_bits(),
                p_eval.to_bits(),
                "case {i} (d={d}): {p_graph} vs {p_eval}"
            );
        }
    }
}

#[test]
fn eval_mode_is_deterministic_and_order_sensitive() {
    let m = Model::init(&cfg(8, 8, 2)).unwrap();
    let v = |c: char| Expr::Var(Letter::from_char(c).unwrap());
    let e = Expr::And(vec![v('A'), v('B'), v('C')]);
    let (p1, t1) = m.predict_truth(&e, Mode::Eval, &mut rng0());
    let (p2, t2) = m.predict_truth(&e, Mode::Eval, &mut ChaCha8Rng::seed_from_u64(999));
    assert_eq!(p1, p2, "eval mode must ignore the rng");
    assert_eq!(t1.output, t2.output);

    // left fold in expression order: And(a,b,c) = AND(AND(a,b),c)
    let ab = reference::forward(&m, &Expr::And(vec![v('A'), v('B')]));
    let manual = {
        let mut g = noan_core::autodiff::Graph::new();
        let abn = g.constant(noan_core::autodiff::Tensor(ab));
        let cn = g.param(&m.store, m.emb[2]);
        let out = m.apply_binary(&mut g, &m.and.clone(), abn, cn);
        g.value(out).to_vec()
    };
    for (a, b) in t1.output.iter().zip(&manual) {
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn train_mode_shuffles_operands_per_seed() {
    let m = Model::init(&cfg(8, 8, 4)).unwrap();
    let v = |c: char| Expr::Var(Letter::from_char(c).unwrap());
    let e_ab = Expr::And(vec![v('A'), v('B')]);
    let e_ba = Expr::And(vec![v('B'), v('A')]);
    let fwd_ab = reference::forward(&m, &e_ab);
    let fwd_ba = reference::forward(&m, &e_ba);

    let close = |x: &[f64], y: &[f64]| x.iter().zip(y).all(|(a, b)| (a - b).abs() <= 1e-12);
    let mut saw = [false, false];
    for seed in 0..32 {
        let (_, trace) = m.predict_truth(&e_ab, Mode::Train, &mut ChaCha8Rng::seed_from_u64(seed));
        if close(&trace.output, &fwd_ab) {
            saw[0] = true;
        } else if close(&trace.output, &fwd_ba) {
            saw[1] = true;
        } else {
            panic!("train-mode output is neither operand order");
        }
    }
    assert!(saw[0] && saw[1], "shuffling should produce both orders across seeds");
}

#[test]
fn truth_probability_stays_in_open_unit_interval() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let m = Model::init(&cfg(8, 8, 6)).unwrap();
    for _ in 0..50 {
        let e = to_nnf(&random_expr(&mut rng, 3));
        let (p, _) = m.predict_truth(&e, Mode::Eval, &mut rng0());
        assert!(p > 0.0 && p < 1.0);
    }
}

#[test]
fn non_nnf_input_is_normalized_internally() {
    let m = Model::init(&cfg(8, 8, 13)).unwrap();
    let v = |c: char| Expr::Var(Letter::from_char(c).unwrap());
    let e = Expr::not(Expr::And(vec![v('A'), v('B')]));
    let (p_raw, _) = m.predict_truth(&e, Mode::Eval, &mut rng0());
    let (p_nnf, _) = m.predict_truth(&to_nnf(&e), Mode::Eval, &mut rng0());
    assert_eq!(p_raw, p_nnf);
}

#[test]
fn checkpoint_round_trips_through_json() {
    let m = Model::init(&cfg(8, 8, 21)).unwrap();
    let e = to_nnf(&implication_expr(&ls("IJK"), &ls("IJL")));
    let (p_before, _) = m.predict_truth(&e, Mode::Eval, &mut rng0());

    let json = serde_json::to_string(&m.to_checkpoint()).unwrap();
    let restored = Model::from_checkpoint(&serde_json::from_str(&json).unwrap()).unwrap();
    let (p_after, _) = restored.predict_truth(&e, Mode::Eval, &mut rng0());
    assert_eq!(p_before, p_after);
    assert_eq!(
        m.store.value(m.t_anchor),
        restored.store.value(restored.t_anchor),
        "frozen anchor must survive the round trip"
    );

    // tampering with a parameter name is rejected
    let mut ck = m.to_checkpoint();
    ck.params[0].name = "emb.zz".into();
    assert!(Model::from_checkpoint(&ck).is_err());
}
