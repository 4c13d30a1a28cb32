//! Propositional representation of letter-string analogies.
//!
//! An analogy "ABC:ABD::IJK:?" is compiled into material implications over
//! letter variables: the example pair becomes `conj(ABC) -> conj(ABD)` and
//! each candidate answer X is scored through `conj(IJK) -> conj(X)`, where
//! `conj` is the ordered conjunction of one variable per character.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum LogicError {
    #[error("invalid character {0:?}: expected ASCII letter A-Z")]
    InvalidChar(char),
    #[error("empty letter string")]
    EmptyString,
    #[error("malformed problem {0:?}: expected INITIAL:MODIFIED::QUERY:?")]
    MalformedProblem(String),
}

/// One of the 26 alphabet letters, stored as an index in `0..26`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter(u8);

impl Letter {
    pub fn from_index(i: usize) -> Letter {
        assert!(i < 26, "letter index {i} out of range");
        Letter(i as u8)
    }

    pub fn from_char(c: char) -> Result<Letter, LogicError> {
        if c.is_ascii_uppercase() {
            Ok(Letter(c as u8 - b'A'))
        } else if c.is_ascii_lowercase() {
            Ok(Letter(c as u8 - b'a'))
        } else {
            Err(LogicError::InvalidChar(c))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn as_char(self) -> char {
        (b'A' + self.0) as char
    }

    /// Cyclic successor: A->B, ..., Y->Z, Z->A.
    pub fn succ(self) -> Letter {
        Letter((self.0 + 1) % 26)
    }

    /// Cyclic shift by `k` positions.
    pub fn shifted(self, k: usize) -> Letter {
        Letter(((self.0 as usize + k) % 26) as u8)
    }

    pub fn all() -> impl Iterator<Item = Letter> {
        (0..26).map(|i| Letter(i as u8))
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// A non-empty sequence of letters, e.g. the "ABC" in an analogy.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LetterString(Vec<Letter>);

impl LetterString {
    pub fn new(letters: Vec<Letter>) -> Result<LetterString, LogicError> {
        if letters.is_empty() {
            return Err(LogicError::EmptyString);
        }
        Ok(LetterString(letters))
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false // the constructor rejects empty sequences
    }

    pub fn reversed(&self) -> LetterString {
        LetterString(self.0.iter().rev().copied().collect())
    }

    /// Every letter shifted cyclically by `k`.
    pub fn shifted(&self, k: usize) -> LetterString {
        LetterString(self.0.iter().map(|l| l.shifted(k)).collect())
    }
}

impl FromStr for LetterString {
    type Err = LogicError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let letters = s
            .chars()
            .map(Letter::from_char)
            .collect::<Result<Vec<_>, _>>()?;
        LetterString::new(letters)
    }
}

impl fmt::Display for LetterString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.0 {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl Serialize for LetterString {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for LetterString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// A letter-string analogy `initial : modified :: query : ?`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalogyProblem {
    pub initial: LetterString,
    pub modified: LetterString,
    pub query: LetterString,
}

/// Parse `"ABC:ABD::IJK:?"`. Lowercase input is accepted and canonicalized.
pub fn parse_problem(s: &str) -> Result<AnalogyProblem, LogicError> {
    let malformed = || LogicError::MalformedProblem(s.to_string());
    let (example, question) = s.split_once("::").ok_or_else(malformed)?;
    let (initial, modified) = example.split_once(':').ok_or_else(malformed)?;
    let (query, mark) = question.split_once(':').ok_or_else(malformed)?;
    if mark != "?" || initial.contains(':') || query.contains(':') {
        return Err(malformed());
    }
    Ok(AnalogyProblem {
        initial: initial.parse()?,
        modified: modified.parse()?,
        query: query.parse()?,
    })
}

impl fmt::Display for AnalogyProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}::{}:?", self.initial, self.modified, self.query)
    }
}

/// Propositional expression over letter variables.
///
/// `And`/`Or` are n-ary (at least two operands) and keep their operands in
/// the order they were built; repeated letters stay as repeated operands, so
/// "AAB" conjoins to `A & A & B`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Var(Letter),
    Not(Box<Expr>),
    And(Vec<Expr>),
    Or(Vec<Expr>),
}

impl Expr {
    pub fn var(l: Letter) -> Expr {
        Expr::Var(l)
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }

    pub fn and(operands: Vec<Expr>) -> Expr {
        assert!(operands.len() >= 2, "And needs at least two operands");
        Expr::And(operands)
    }

    pub fn or(operands: Vec<Expr>) -> Expr {
        assert!(operands.len() >= 2, "Or needs at least two operands");
        Expr::Or(operands)
    }

    /// All letters mentioned, in first-occurrence order, without duplicates.
    pub fn letters(&self) -> Vec<Letter> {
        let mut seen = [false; 26];
        let mut out = Vec::new();
        self.collect_letters(&mut seen, &mut out);
        out
    }

    fn collect_letters(&self, seen: &mut [bool; 26], out: &mut Vec<Letter>) {
        match self {
            Expr::Var(l) => {
                if !seen[l.index()] {
                    seen[l.index()] = true;
                    out.push(*l);
                }
            }
            Expr::Not(e) => e.collect_letters(seen, out),
            Expr::And(xs) | Expr::Or(xs) => {
                for x in xs {
                    x.collect_letters(seen, out);
                }
            }
        }
    }

    /// Plain two-valued evaluation under a truth assignment, used as the
    /// semantic oracle in tests.
    pub fn eval_boolean(&self, assignment: &[bool; 26]) -> bool {
        match self {
            Expr::Var(l) => assignment[l.index()],
            Expr::Not(e) => !e.eval_boolean(assignment),
            Expr::And(xs) => xs.iter().all(|x| x.eval_boolean(assignment)),
            Expr::Or(xs) => xs.iter().any(|x| x.eval_boolean(assignment)),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Var(l) => write!(f, "{l}"),
            Expr::Not(e) => write!(f, "!{e}"),
            Expr::And(xs) => write_joined(f, xs, " & "),
            Expr::Or(xs) => write_joined(f, xs, " | "),
        }
    }
}

fn write_joined(f: &mut fmt::Formatter<'_>, xs: &[Expr], sep: &str) -> fmt::Result {
    write!(f, "(")?;
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            write!(f, "{sep}")?;
        }
        write!(f, "{x}")?;
    }
    write!(f, ")")
}

/// Ordered conjunction of one variable per character; a single character is
/// just its variable.
pub fn conjunction_of(s: &LetterString) -> Expr {
    let vars: Vec<Expr> = s.letters().iter().map(|&l| Expr::Var(l)).collect();
    if vars.len() == 1 {
        vars.into_iter().next().unwrap()
    } else {
        Expr::And(vars)
    }
}

/// Material implication `lhs -> rhs` as `!conj(lhs) | conj(rhs)`.
pub fn implication_expr(lhs: &LetterString, rhs: &LetterString) -> Expr {
    Expr::Or(vec![
        Expr::not(conjunction_of(lhs)),
        conjunction_of(rhs),
    ])
}

/// Negation normal form: push negations to the leaves with De Morgan's laws
/// and drop double negations. Operand order is preserved and nothing is
/// flattened or deduplicated, so `!(A & B) | C` becomes `(!A | !B) | C` with
/// the nested `Or` kept as its own node.
pub fn to_nnf(e: &Expr) -> Expr {
    match e {
        Expr::Var(_) => e.clone(),
        Expr::Not(inner) => negate_nnf(inner),
        Expr::And(xs) => Expr::And(xs.iter().map(to_nnf).collect()),
        Expr::Or(xs) => Expr::Or(xs.iter().map(to_nnf).collect()),
    }
}

// NNF of `!e`.
fn negate_nnf(e: &Expr) -> Expr {
    match e {
        Expr::Var(l) => Expr::not(Expr::Var(*l)),
        Expr::Not(inner) => to_nnf(inner),
        Expr::And(xs) => Expr::Or(xs.iter().map(negate_nnf).collect()),
        Expr::Or(xs) => Expr::And(xs.iter().map(negate_nnf).collect()),
    }
}

/// True when negations apply only to variables, i.e. the expression is in
/// negation normal form.
pub fn is_nnf(e: &Expr) -> bool {
    match e {
        Expr::Var(_) => true,
        Expr::Not(inner) => matches!(**inner, Expr::Var(_)),
        Expr::And(xs) | Expr::Or(xs) => xs.iter().all(is_nnf),
    }
}
