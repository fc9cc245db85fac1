//! Formula generators shared by the solver-facing tests.

use nl2fol_core::{Arg, Formula, Term};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::TestRunner;

pub const PROPS: [&str; 4] = ["P", "Q", "R", "S"];

/// Quantifier-free formulas over at most four 0-ary predicates, with a
/// share of tautology-shaped instances so both verdicts occur.
pub fn propositional() -> impl Strategy<Value = Formula> {
    let leaf = (0..PROPS.len()).prop_map(|i| Formula::prop(PROPS[i]));
    let f = leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| Formula::implies(a, b)),
        ]
    });
    prop_oneof![
        2 => f.clone(),
        1 => (f.clone(), f.clone()).prop_map(|(a, b)| Formula::implies(Formula::and(a.clone(), b), a)),
        1 => (f.clone(), f.clone()).prop_map(|(a, b)| Formula::or(Formula::implies(a.clone(), b), a)),
        1 => f.prop_map(|a| Formula::or(a.clone(), Formula::not(a))),
    ]
}

/// Truth value under `env`, indexed like `PROPS`.
pub fn eval(f: &Formula, env: u32) -> bool {
    match f {
        Formula::Atom { predicate, .. } => {
            let i = PROPS.iter().position(|p| p == predicate).expect("known proposition");
            env >> i & 1 == 1
        }
        Formula::Not(a) => !eval(a, env),
        Formula::And(a, b) => eval(a, env) && eval(b, env),
        Formula::Or(a, b) => eval(a, env) || eval(b, env),
        Formula::Implies(a, b) => !eval(a, env) || eval(b, env),
        Formula::Forall(..) | Formula::Exists(..) => unreachable!("quantifier-free"),
    }
}

pub fn tautology(f: &Formula) -> bool {
    (0..1 << PROPS.len()).all(|env| eval(f, env))
}

fn term(name: &str, bound: &[&str]) -> Arg {
    if bound.contains(&name) {
        Arg::Term(Term::Var(name.into()))
    } else {
        Arg::Term(Term::Const(name.into()))
    }
}

/// First-order formulas with unary and binary predicates over a few
/// constants. Predicate positions keep one sort each, so every instance
/// type-checks.
pub fn first_order() -> impl Strategy<Value = Formula> {
    #[derive(Debug, Clone)]
    enum S {
        Unary(usize, usize),
        Binary(usize, usize, usize),
        Prop(usize),
        Not(Box<S>),
        Bin(u8, Box<S>, Box<S>),
        Quant(bool, usize, Box<S>),
    }
    // people: x y z a b; things: c d
    const PEOPLE: [&str; 5] = ["x", "y", "z", "a", "b"];
    const THINGS: [&str; 2] = ["c", "d"];
    fn build(s: &S, bound: &mut Vec<&'static str>) -> Formula {
        match s {
            S::Unary(p, a) => Formula::atom(["Tall", "Happy", "Old"][*p], vec![term(PEOPLE[*a], bound)]),
            S::Binary(p, a, b) => Formula::atom(
                ["Like", "Own"][*p],
                vec![term(PEOPLE[*a], bound), term(THINGS[*b], bound)],
            ),
            S::Prop(p) => Formula::prop(PROPS[*p]),
            S::Not(a) => Formula::not(build(a, bound)),
            S::Bin(op, a, b) => {
                let (a, b) = (build(a, bound), build(b, bound));
                match op {
                    0 => Formula::and(a, b),
                    1 => Formula::or(a, b),
                    _ => Formula::implies(a, b),
                }
            }
            S::Quant(all, v, body) => {
                let v = PEOPLE[*v];
                if bound.contains(&v) {
                    return build(body, bound);
                }
                bound.push(v);
                let b = build(body, bound);
                bound.pop();
                if *all {
                    Formula::forall(v, b)
                } else {
                    Formula::exists(v, b)
                }
            }
        }
    }
    let leaf = prop_oneof![
        (0..3usize, 0..5usize).prop_map(|(p, a)| S::Unary(p, a)),
        (0..2usize, 0..5usize, 0..2usize).prop_map(|(p, a, b)| S::Binary(p, a, b)),
        (0..PROPS.len()).prop_map(S::Prop),
    ];
    let shape = leaf.prop_recursive(5, 32, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| S::Not(Box::new(a))),
            (0..3u8, inner.clone(), inner.clone()).prop_map(|(o, a, b)| S::Bin(o, Box::new(a), Box::new(b))),
            (any::<bool>(), 0..3usize, inner).prop_map(|(q, v, b)| S::Quant(q, v, Box::new(b))),
        ]
    });
    shape.prop_map(|s| build(&s, &mut Vec::new()))
}

/// `n` values drawn from `strategy` with a fixed seed.
pub fn sample<S: Strategy>(strategy: S, n: usize) -> Vec<S::Value> {
    let mut runner = TestRunner::deterministic();
    (0..n).map(|_| strategy.new_tree(&mut runner).unwrap().current()).collect()
}

/// Malformed variants of well-formed formula text: truncations, deletions,
/// insertions of stray characters, and raw junk.
pub fn malformed(texts: &[String], n: usize) -> Vec<String> {
    use rand::{Rng, SeedableRng};
    const STRAY: &[char] = &['(', ')', ',', '.', '&', '|', '~', '-', '>', '=', '$', '\u{2200}', '#', ' '];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    (0..n)
        .map(|i| {
            let t: Vec<char> = texts[i % texts.len()].chars().collect();
            let at = rng.gen_range(0..=t.len());
            match i % 4 {
                0 => t[..at].iter().collect(),
                1 if !t.is_empty() => {
                    let at = at.min(t.len() - 1);
                    t[..at].iter().chain(&t[at + 1..]).collect()
                }
                2 => {
                    let c = STRAY[rng.gen_range(0..STRAY.len())];
                    t[..at].iter().chain(std::iter::once(&c)).chain(&t[at..]).collect()
                }
                _ => (0..rng.gen_range(0..30)).map(|_| STRAY[rng.gen_range(0..STRAY.len())]).collect(),
            }
        })
        .collect()
}
