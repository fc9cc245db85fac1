//! First-order formula syntax tree and structural operations.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

/// A term in argument position.
///
/// A name is a [`Term::Var`] exactly when an enclosing quantifier binds it;
/// every other name in term position is a [`Term::Const`]. The parser
/// performs this resolution.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    pub fn name(&self) -> &str {
        match self {
            Term::Var(n) | Term::Const(n) => n,
        }
    }
}

/// A predicate argument: an object term or a nested (Bool-sorted) formula.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Arg {
    Term(Term),
    Formula(Formula),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    /// Predicate application. An empty argument list is a 0-ary proposition.
    Atom { predicate: String, args: Vec<Arg> },
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Forall(String, Box<Formula>),
    Exists(String, Box<Formula>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AstError {
    #[error("predicate `{predicate}` used with arity {first} and arity {second}")]
    ArityConflict {
        predicate: String,
        first: usize,
        second: usize,
    },
    #[error("substituting `{from}` with `{to}` would be captured by a binder of `{to}`")]
    Capture { from: String, to: String },
}

impl Formula {
    pub fn atom<S: Into<String>>(predicate: S, args: Vec<Arg>) -> Self {
        Formula::Atom {
            predicate: predicate.into(),
            args,
        }
    }

    /// 0-ary proposition.
    pub fn prop<S: Into<String>>(name: S) -> Self {
        Formula::atom(name, Vec::new())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn forall<S: Into<String>>(var: S, body: Formula) -> Self {
        Formula::Forall(var.into(), Box::new(body))
    }

    pub fn exists<S: Into<String>>(var: S, body: Formula) -> Self {
        Formula::Exists(var.into(), Box::new(body))
    }

    /// Left-leaning conjunction of `parts`; `None` when `parts` is empty.
    pub fn conjoin<I: IntoIterator<Item = Formula>>(parts: I) -> Option<Formula> {
        parts.into_iter().reduce(Formula::and)
    }

    /// Flattens nested `And` nodes into their operands, left to right.
    pub fn conjuncts(&self) -> Vec<&Formula> {
        let mut out = Vec::new();
        fn go<'a>(f: &'a Formula, out: &mut Vec<&'a Formula>) {
            match f {
                Formula::And(a, b) => {
                    go(a, out);
                    go(b, out);
                }
                other => out.push(other),
            }
        }
        go(self, &mut out);
        out
    }

    /// Number of nodes, counting nested argument formulas.
    pub fn size(&self) -> usize {
        match self {
            Formula::Atom { args, .. } => {
                1 + args
                    .iter()
                    .map(|a| match a {
                        Arg::Term(_) => 1,
                        Arg::Formula(f) => f.size(),
                    })
                    .sum::<usize>()
            }
            Formula::Not(a) | Formula::Forall(_, a) | Formula::Exists(_, a) => 1 + a.size(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                1 + a.size() + b.size()
            }
        }
    }

    /// Visits every atom (including atoms nested as arguments) in pre-order.
    pub fn for_each_atom<'a>(&'a self, visit: &mut impl FnMut(&'a str, &'a [Arg])) {
        match self {
            Formula::Atom { predicate, args } => {
                visit(predicate, args);
                for arg in args {
                    if let Arg::Formula(f) = arg {
                        f.for_each_atom(visit);
                    }
                }
            }
            Formula::Not(a) | Formula::Forall(_, a) | Formula::Exists(_, a) => {
                a.for_each_atom(visit)
            }
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.for_each_atom(visit);
                b.for_each_atom(visit);
            }
        }
    }

    /// Every term occurrence in pre-order.
    pub fn terms(&self) -> Vec<&Term> {
        let mut out = Vec::new();
        self.for_each_atom(&mut |_, args| {
            for arg in args {
                if let Arg::Term(t) = arg {
                    out.push(t);
                }
            }
        });
        out
    }

    /// Constant names in first-occurrence order.
    pub fn constants(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        self.terms()
            .into_iter()
            .filter_map(|t| match t {
                Term::Const(n) if seen.insert(n.as_str()) => Some(n.as_str()),
                _ => None,
            })
            .collect()
    }

    /// Every identifier in the formula: predicates, terms and binders.
    pub fn names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        fn go(f: &Formula, out: &mut BTreeSet<String>) {
            match f {
                Formula::Atom { predicate, args } => {
                    out.insert(predicate.clone());
                    for arg in args {
                        match arg {
                            Arg::Term(t) => {
                                out.insert(t.name().into());
                            }
                            Arg::Formula(g) => go(g, out),
                        }
                    }
                }
                Formula::Not(a) => go(a, out),
                Formula::Forall(v, a) | Formula::Exists(v, a) => {
                    out.insert(v.clone());
                    go(a, out);
                }
                Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                    go(a, out);
                    go(b, out);
                }
            }
        }
        go(self, &mut out);
        out
    }

    pub fn is_quantifier_free(&self) -> bool {
        match self {
            Formula::Atom { args, .. } => args.iter().all(|a| match a {
                Arg::Term(_) => true,
                Arg::Formula(f) => f.is_quantifier_free(),
            }),
            Formula::Not(a) => a.is_quantifier_free(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.is_quantifier_free() && b.is_quantifier_free()
            }
            Formula::Forall(..) | Formula::Exists(..) => false,
        }
    }
}

/// Variable names not bound by any enclosing quantifier.
pub fn free_variables(f: &Formula) -> BTreeSet<String> {
    fn go(f: &Formula, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match f {
            Formula::Atom { args, .. } => {
                for arg in args {
                    match arg {
                        Arg::Term(Term::Var(v)) if !bound.contains(v) => {
                            out.insert(v.clone());
                        }
                        Arg::Term(_) => {}
                        Arg::Formula(g) => go(g, bound, out),
                    }
                }
            }
            Formula::Not(a) => go(a, bound, out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                go(a, bound, out);
                go(b, bound, out);
            }
            Formula::Forall(v, body) | Formula::Exists(v, body) => {
                bound.push(v.clone());
                go(body, bound, out);
                bound.pop();
            }
        }
    }
    let mut out = BTreeSet::new();
    go(f, &mut Vec::new(), &mut out);
    out
}

/// Maps each predicate to its arity, in lexicographic order.
pub fn collect_predicates(f: &Formula) -> Result<BTreeMap<String, usize>, AstError> {
    let mut arities: BTreeMap<String, usize> = BTreeMap::new();
    let mut conflict = None;
    f.for_each_atom(&mut |predicate, args| {
        if conflict.is_some() {
            return;
        }
        match arities.get(predicate) {
            Some(&first) if first != args.len() => {
                conflict = Some(AstError::ArityConflict {
                    predicate: predicate.into(),
                    first,
                    second: args.len(),
                });
            }
            Some(_) => {}
            None => {
                arities.insert(predicate.into(), args.len());
            }
        }
    });
    match conflict {
        Some(err) => Err(err),
        None => Ok(arities),
    }
}

/// Renames free variables and constants according to `mapping`.
///
/// Occurrences bound by a quantifier are left alone. A replacement that
/// would land under a binder of the same name is rejected.
pub fn substitute(f: &Formula, mapping: &BTreeMap<String, String>) -> Result<Formula, AstError> {
    fn go(
        f: &Formula,
        mapping: &BTreeMap<String, String>,
        bound: &mut Vec<String>,
    ) -> Result<Formula, AstError> {
        Ok(match f {
            Formula::Atom { predicate, args } => {
                let mut out = Vec::with_capacity(args.len());
                for arg in args {
                    out.push(match arg {
                        Arg::Term(t) => {
                            let name = t.name();
                            let is_bound = matches!(t, Term::Var(v) if bound.contains(v));
                            match mapping.get(name) {
                                Some(to) if !is_bound => {
                                    if bound.contains(to) {
                                        return Err(AstError::Capture {
                                            from: name.into(),
                                            to: to.clone(),
                                        });
                                    }
                                    Arg::Term(match t {
                                        Term::Var(_) => Term::Var(to.clone()),
                                        Term::Const(_) => Term::Const(to.clone()),
                                    })
                                }
                                _ => Arg::Term(t.clone()),
                            }
                        }
                        Arg::Formula(g) => Arg::Formula(go(g, mapping, bound)?),
                    });
                }
                Formula::Atom {
                    predicate: predicate.clone(),
                    args: out,
                }
            }
            Formula::Not(a) => Formula::not(go(a, mapping, bound)?),
            Formula::And(a, b) => Formula::and(go(a, mapping, bound)?, go(b, mapping, bound)?),
            Formula::Or(a, b) => Formula::or(go(a, mapping, bound)?, go(b, mapping, bound)?),
            Formula::Implies(a, b) => {
                Formula::implies(go(a, mapping, bound)?, go(b, mapping, bound)?)
            }
            Formula::Forall(v, body) | Formula::Exists(v, body) => {
                bound.push(v.clone());
                let body = go(body, mapping, bound);
                bound.pop();
                let body = body?;
                match f {
                    Formula::Forall(..) => Formula::forall(v.clone(), body),
                    _ => Formula::exists(v.clone(), body),
                }
            }
        })
    }
    go(f, mapping, &mut Vec::new())
}

/// Renames binders that shadow an enclosing binder of the same name.
///
/// The inner binder gets the first unused `name_N` suffix (N = 1, 2, ...),
/// and its bound occurrences follow it.
pub fn rename_shadowed(f: &Formula) -> Formula {
    let mut taken = f.names();
    let mut scope: Vec<(String, String)> = Vec::new();
    rename_go(f, &mut scope, &mut taken)
}

pub(crate) fn fresh_name(base: &str, taken: &mut BTreeSet<String>) -> String {
    let mut n = 1usize;
    loop {
        let candidate = alloc::format!("{base}_{n}");
        if !taken.contains(&candidate) {
            taken.insert(candidate.clone());
            return candidate;
        }
        n += 1;
    }
}

fn rename_go(
    f: &Formula,
    scope: &mut Vec<(String, String)>,
    taken: &mut BTreeSet<String>,
) -> Formula {
    match f {
        Formula::Atom { predicate, args } => Formula::Atom {
            predicate: predicate.clone(),
            args: args
                .iter()
                .map(|arg| match arg {
                    Arg::Term(Term::Var(v)) => {
                        let renamed = scope
                            .iter()
                            .rev()
                            .find(|(orig, _)| orig == v)
                            .map(|(_, new)| new.clone())
                            .unwrap_or_else(|| v.clone());
                        Arg::Term(Term::Var(renamed))
                    }
                    Arg::Term(t) => Arg::Term(t.clone()),
                    Arg::Formula(g) => Arg::Formula(rename_go(g, scope, taken)),
                })
                .collect(),
        },
        Formula::Not(a) => Formula::not(rename_go(a, scope, taken)),
        Formula::And(a, b) => Formula::and(rename_go(a, scope, taken), rename_go(b, scope, taken)),
        Formula::Or(a, b) => Formula::or(rename_go(a, scope, taken), rename_go(b, scope, taken)),
        Formula::Implies(a, b) => {
            Formula::implies(rename_go(a, scope, taken), rename_go(b, scope, taken))
        }
        Formula::Forall(v, body) | Formula::Exists(v, body) => {
            let shadows = scope.iter().any(|(orig, _)| orig == v);
            let name = if shadows {
                fresh_name(v, taken)
            } else {
                v.clone()
            };
            scope.push((v.clone(), name.clone()));
            let body = rename_go(body, scope, taken);
            scope.pop();
            match f {
                Formula::Forall(..) => Formula::forall(name, body),
                _ => Formula::exists(name, body),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn var(n: &str) -> Arg {
        Arg::Term(Term::Var(n.into()))
    }
    fn cst(n: &str) -> Arg {
        Arg::Term(Term::Const(n.into()))
    }
    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| String::from(*s)).collect()
    }
    fn map(xs: &[(&str, &str)]) -> BTreeMap<String, String> {
        xs.iter().map(|(a, b)| (String::from(*a), String::from(*b))).collect()
    }

    #[test]
    fn free_variables_examples() {
        let f = Formula::forall("x", Formula::atom("P", vec![var("x")]));
        assert_eq!(free_variables(&f), set(&[]));

        let f = Formula::and(
            Formula::atom("P", vec![var("x")]),
            Formula::atom("Q", vec![cst("c")]),
        );
        assert_eq!(free_variables(&f), set(&["x"]));

        let f = Formula::exists(
            "a",
            Formula::and(
                Formula::atom("P", vec![var("a")]),
                Formula::atom("Q", vec![var("b")]),
            ),
        );
        assert_eq!(free_variables(&f), set(&["b"]));
    }

    #[test]
    fn collect_predicates_examples() {
        let f = Formula::and(
            Formula::atom("Tall", vec![var("x")]),
            Formula::atom("Love", vec![var("x"), cst("c")]),
        );
        let preds = collect_predicates(&f).unwrap();
        let listed: Vec<_> = preds.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        assert_eq!(listed, vec![("Love", 2), ("Tall", 1)]);

        let f = Formula::and(
            Formula::atom("P", vec![var("x")]),
            Formula::atom("P", vec![var("x"), var("y")]),
        );
        assert_eq!(
            collect_predicates(&f),
            Err(AstError::ArityConflict {
                predicate: "P".into(),
                first: 1,
                second: 2
            })
        );

        let preds = collect_predicates(&Formula::prop("Rain")).unwrap();
        assert_eq!(preds.get("Rain"), Some(&0));
    }

    #[test]
    fn nested_argument_atoms_are_collected() {
        let f = Formula::atom(
            "A",
            vec![Arg::Formula(Formula::atom("C", vec![cst("y")]))],
        );
        let preds = collect_predicates(&f).unwrap();
        assert_eq!(preds.len(), 2);
        assert_eq!(preds["C"], 1);
    }

    #[test]
    fn substitute_examples() {
        let f = Formula::atom("JumpsOn", vec![cst("x"), cst("s")]);
        let g = substitute(&f, &map(&[("x", "boy"), ("s", "skateboard")])).unwrap();
        assert_eq!(g, Formula::atom("JumpsOn", vec![cst("boy"), cst("skateboard")]));

        let f = Formula::forall(
            "x",
            Formula::implies(
                Formula::atom("Tall", vec![var("x")]),
                Formula::atom("Like", vec![var("x"), cst("c")]),
            ),
        );
        let ident = map(&[("c", "c")]);
        assert_eq!(substitute(&f, &ident).unwrap(), f);

        let f = Formula::forall("x", Formula::atom("P", vec![var("x"), var("y")]));
        assert_eq!(
            substitute(&f, &map(&[("y", "x")])),
            Err(AstError::Capture {
                from: "y".into(),
                to: "x".into()
            })
        );
    }

    #[test]
    fn substitute_skips_bound_occurrences() {
        let f = Formula::and(
            Formula::forall("x", Formula::atom("P", vec![var("x")])),
            Formula::atom("P", vec![cst("x")]),
        );
        let g = substitute(&f, &map(&[("x", "k")])).unwrap();
        assert_eq!(
            g,
            Formula::and(
                Formula::forall("x", Formula::atom("P", vec![var("x")])),
                Formula::atom("P", vec![cst("k")]),
            )
        );
    }

    #[test]
    fn shadowed_binder_gets_suffix() {
        let f = Formula::forall(
            "x",
            Formula::and(
                Formula::atom("P", vec![var("x")]),
                Formula::exists("x", Formula::atom("Q", vec![var("x")])),
            ),
        );
        let g = rename_shadowed(&f);
        assert_eq!(
            g,
            Formula::forall(
                "x",
                Formula::and(
                    Formula::atom("P", vec![var("x")]),
                    Formula::exists("x_1", Formula::atom("Q", vec![var("x_1")])),
                ),
            )
        );
        // sibling binders are not shadowing
        let h = Formula::and(
            Formula::forall("x", Formula::atom("P", vec![var("x")])),
            Formula::forall("x", Formula::atom("Q", vec![var("x")])),
        );
        assert_eq!(rename_shadowed(&h), h);
    }

    #[test]
    fn conjuncts_flatten_left_leaning_tree() {
        let f = Formula::conjoin([Formula::prop("A"), Formula::prop("B"), Formula::prop("C")])
            .unwrap();
        assert_eq!(f.conjuncts().len(), 3);
        assert!(Formula::conjoin(Vec::new()).is_none());
    }
}
