//! Background facts as formulas, and their place in the final formula.

use std::collections::BTreeSet;

use nl2fol_core::{Arg, Formula, Term};

use super::types::{EntityRelation, PropertyAtom};

fn atom_with(atom: &PropertyAtom, subject: Option<&str>) -> Formula {
    let args = atom
        .args
        .iter()
        .enumerate()
        .map(|(i, a)| match subject {
            Some(v) if i == 0 => Arg::Term(Term::Var(v.to_string())),
            _ => Arg::Term(Term::Const(a.clone())),
        })
        .collect();
    Formula::atom(atom.predicate.clone(), args)
}

/// `forall x. (A(x, ..) -> B(x, ..))` when the two subjects are the same
/// entity or linked by an entity relation, otherwise the ground implication.
pub fn realize(a: &PropertyAtom, b: &PropertyAtom, relations: &[EntityRelation]) -> Formula {
    let shared = match (a.args.first(), b.args.first()) {
        (Some(sa), Some(sb)) => sa == sb || relations.iter().any(|r| r.links(sa, sb)),
        _ => false,
    };
    if !shared {
        return Formula::implies(atom_with(a, None), atom_with(b, None));
    }
    let taken: BTreeSet<&str> = a.args[1..]
        .iter()
        .chain(&b.args[1..])
        .map(String::as_str)
        .collect();
    let var = std::iter::once("x".to_string())
        .chain((1..).map(|i| format!("x{i}")))
        .find(|v| !taken.contains(v.as_str()))
        .expect("unbounded candidates");
    Formula::forall(
        var.clone(),
        Formula::implies(atom_with(a, Some(&var)), atom_with(b, Some(&var))),
    )
}

/// Conjuncts of the antecedent when `f` is an implication, else of `f`.
pub fn premises(f: &Formula) -> Vec<&Formula> {
    match f {
        Formula::Implies(a, _) => a.conjuncts(),
        other => other.conjuncts(),
    }
}

/// `(p, q)` when `f` is `forall* (p(..) -> q(..))`.
pub fn implication_predicates(f: &Formula) -> Option<(&str, &str)> {
    let mut body = f;
    while let Formula::Forall(_, inner) = body {
        body = inner;
    }
    match body {
        Formula::Implies(a, b) => match (a.as_ref(), b.as_ref()) {
            (Formula::Atom { predicate: p, .. }, Formula::Atom { predicate: q, .. }) => {
                Some((p.as_str(), q.as_str()))
            }
            _ => None,
        },
        _ => None,
    }
}

/// Number of premise conjuncts realizing `antecedent -> consequent`.
pub fn realizations(f: &Formula, antecedent: &str, consequent: &str) -> usize {
    premises(f)
        .into_iter()
        .filter(|c| implication_predicates(c) == Some((antecedent, consequent)))
        .count()
}

/// `f` with `fact` added as one more hypothesis.
pub fn with_fact(f: &Formula, fact: Formula) -> Formula {
    match f {
        Formula::Implies(a, c) => Formula::implies(Formula::and((**a).clone(), fact), (**c).clone()),
        other => Formula::implies(fact, other.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::types::{AtomSource, Relation};
    use nl2fol_core::parse_formula;

    fn atom(p: &str, args: &[&str]) -> PropertyAtom {
        PropertyAtom {
            predicate: p.into(),
            args: args.iter().map(|s| s.to_string()).collect(),
            source: AtomSource::Claim,
        }
    }

    #[test]
    fn subset_related_subjects_share_a_variable() {
        let rel = [EntityRelation {
            left: "x".into(),
            right: "y".into(),
            relation: Relation::SubsetLr,
        }];
        let f = realize(&atom("Like", &["y", "c"]), &atom("Love", &["x", "c"]), &rel);
        assert_eq!(f.to_string(), "forall x. (Like(x,c) -> Love(x,c))");
        let g = realize(&atom("JumpsOn", &["b", "s"]), &atom("Does", &["b", "y"]), &[]);
        assert_eq!(g.to_string(), "forall x. (JumpsOn(x,s) -> Does(x,y))");
        let h = realize(&atom("Red", &["bridge"]), &atom("Tall", &["man"]), &[]);
        assert_eq!(h.to_string(), "Red(bridge) -> Tall(man)");
        let k = realize(&atom("P", &["a", "x"]), &atom("Q", &["a"]), &[]);
        assert_eq!(k.to_string(), "forall x1. (P(x1,x) -> Q(x1))");
    }

    #[test]
    fn finds_realized_conjuncts() {
        let f = parse_formula(
            "(forall x (JumpsOn(x,s) -> Does(x,y)) & Red(bridge) & inMiddleOf(b,bridge) & JumpsOn(b,s)) -> Does(b,y)",
        )
        .unwrap();
        assert_eq!(realizations(&f, "JumpsOn", "Does"), 1);
        assert_eq!(realizations(&f, "Does", "JumpsOn"), 0);
        let g = with_fact(&f, parse_formula("Red(b) -> Red(s)").unwrap());
        assert_eq!(premises(&g).len(), 5);
    }
}
