use noan_core::logic::*;
use proptest::prelude::*;

fn ls(s: &str) -> LetterString {
    s.parse().unwrap()
}

fn letter(c: char) -> Letter {
    Letter::from_char(c).unwrap()
}

#[test]
fn parse_and_render_round_trip() {
    let p = parse_problem("ABC:ABD::IJK:?").unwrap();
    assert_eq!(p.initial, ls("ABC"));
    assert_eq!(p.modified, ls("ABD"));
    assert_eq!(p.query, ls("IJK"));
    assert_eq!(p.to_string(), "ABC:ABD::IJK:?");

    // lowercase input canonicalizes to uppercase
    let q = parse_problem("abc:abd::ijk:?").unwrap();
    assert_eq!(q, p);
}

#[test]
fn parse_rejects_malformed_input() {
    assert!(matches!(
        parse_problem("ABC:ABD:IJK:?"),
        Err(LogicError::MalformedProblem(_))
    ));
    assert!(matches!(
        parse_problem("ABC:ABD::IJK:X"),
        Err(LogicError::MalformedProblem(_))
    ));
    assert!(matches!(
        parse_problem("ABC:ABD::IJK"),
        Err(LogicError::MalformedProblem(_))
    ));
    assert_eq!(
        parse_problem("AB1:ABD::IJK:?"),
        Err(LogicError::InvalidChar('1'))
    );
    assert_eq!(parse_problem(":ABD::IJK:?"), Err(LogicError::EmptyString));
    assert!("".parse::<LetterString>().is_err());
}

#[test]
fn letter_arithmetic_wraps_cyclically() {
    assert_eq!(letter('A').succ(), letter('B'));
    assert_eq!(letter('Z').succ(), letter('A'));
    assert_eq!(letter('Y').shifted(3), letter('B'));
    assert_eq!(ls("XYZ").shifted(1), ls("YZA"));
    assert_eq!(ls("ABC").reversed(), ls("CBA"));
    assert_eq!(Letter::all().count(), 26);
}

#[test]
fn conjunction_keeps_duplicates_and_order() {
    let e = conjunction_of(&ls("AAB"));
    assert_eq!(
        e,
        Expr::And(vec![
            Expr::Var(letter('A')),
            Expr::Var(letter('A')),
            Expr::Var(letter('B')),
        ])
    );
    // a single letter is a bare variable, not a unary conjunction
    assert_eq!(conjunction_of(&ls("Q")), Expr::Var(letter('Q')));
}

#[test]
fn implication_is_material() {
    let e = implication_expr(&ls("AB"), &ls("C"));
    assert_eq!(
        e,
        Expr::Or(vec![
            Expr::not(Expr::And(vec![
                Expr::Var(letter('A')),
                Expr::Var(letter('B')),
            ])),
            Expr::Var(letter('C')),
        ])
    );
}

#[test]
fn nnf_of_example_implication_has_frozen_shape() {
    // !(A & B & C) | (A & B & D)  ~~>  (!A | !B | !C) | (A & B & D)
    // with the inner Or kept nested, not flattened into the outer one.
    let e = implication_expr(&ls("ABC"), &ls("ABD"));
    let n = to_nnf(&e);
    let not_v = |c| Expr::not(Expr::Var(letter(c)));
    let v = |c| Expr::Var(letter(c));
    assert_eq!(
        n,
        Expr::Or(vec![
            Expr::Or(vec![not_v('A'), not_v('B'), not_v('C')]),
            Expr::And(vec![v('A'), v('B'), v('D')]),
        ])
    );
    assert_eq!(n.to_string(), "((!A | !B | !C) | (A & B & D))");
    assert_eq!(
        n.letters(),
        vec![letter('A'), letter('B'), letter('C'), letter('D')]
    );
}

#[test]
fn nnf_eliminates_double_negation() {
    let e = Expr::not(Expr::not(Expr::Var(letter('K'))));
    assert_eq!(to_nnf(&e), Expr::Var(letter('K')));
    let e = Expr::not(Expr::not(Expr::not(Expr::Var(letter('K')))));
    assert_eq!(to_nnf(&e), Expr::not(Expr::Var(letter('K'))));
}

// Exhaustive semantic check over the four letters the generator draws from.
fn equivalent(a: &Expr, b: &Expr) -> bool {
    let mut assignment = [false; 26];
    (0u32..16).all(|mask| {
        for i in 0..4 {
            assignment[i] = mask & (1 << i) != 0;
        }
        a.eval_boolean(&assignment) == b.eval_boolean(&assignment)
    })
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = (0usize..4).prop_map(|i| Expr::Var(Letter::from_index(i)));
    leaf.prop_recursive(6, 64, 4, |inner| {
        prop_oneof![
            inner.clone().prop_map(Expr::not),
            prop::collection::vec(inner.clone(), 2..5).prop_map(Expr::And),
            prop::collection::vec(inner, 2..5).prop_map(Expr::Or),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn nnf_preserves_semantics(e in arb_expr()) {
        let n = to_nnf(&e);
        prop_assert!(equivalent(&e, &n));
    }

    #[test]
    fn nnf_pushes_negation_to_leaves(e in arb_expr()) {
        prop_assert!(is_nnf(&to_nnf(&e)));
    }

    #[test]
    fn nnf_is_idempotent(e in arb_expr()) {
        let n = to_nnf(&e);
        prop_assert_eq!(to_nnf(&n), n);
    }
}
