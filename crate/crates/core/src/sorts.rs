//! Sort inference by union-find over predicate argument slots.
//!
//! Every predicate argument position and every term name starts in its own
//! class. A term argument joins the slot's class with the term's class; a
//! formula argument marks the slot Bool. A class that ends up holding both
//! a Bool mark and an object term is a sort conflict. Surviving object
//! classes are named `S0`, `S1`, ... in order of first occurrence.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::ast::{collect_predicates, AstError, Arg, Formula, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Sort {
    Bool,
    /// Union-find class not yet assigned a name; never present in a finished
    /// [`Signature`].
    Unresolved(u32),
    /// Generated uninterpreted sort `S<n>`.
    Named(u32),
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Bool => f.write_str("Bool"),
            Sort::Unresolved(c) => write!(f, "?{c}"),
            Sort::Named(n) => write!(f, "S{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SymbolKind {
    /// Only ever bound by quantifiers.
    Variable,
    /// Occurs free somewhere; declared as a 0-ary function.
    Constant,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PredicateSig {
    pub name: String,
    /// Argument sorts; the result sort is always Bool.
    pub args: Vec<Sort>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SymbolSig {
    pub name: String,
    pub sort: Sort,
    pub kind: SymbolKind,
}

/// Inferred sorts for every predicate and term name of one formula.
///
/// Entries are kept in first-occurrence order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Signature {
    pub predicates: Vec<PredicateSig>,
    pub symbols: Vec<SymbolSig>,
    /// Number of generated sorts (`S0` .. `S{n-1}`).
    pub sort_count: u32,
    /// Non-fatal remarks, e.g. predicates taking formula arguments.
    pub warnings: Vec<String>,
}

impl Signature {
    pub fn predicate(&self, name: &str) -> Option<&PredicateSig> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn symbol(&self, name: &str) -> Option<&SymbolSig> {
        self.symbols.iter().find(|s| s.name == name)
    }

    pub fn sort_of(&self, name: &str) -> Option<Sort> {
        self.symbol(name).map(|s| s.sort)
    }

    pub fn constants(&self) -> impl Iterator<Item = &SymbolSig> {
        self.symbols
            .iter()
            .filter(|s| s.kind == SymbolKind::Constant)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SortError {
    #[error(transparent)]
    Ast(#[from] AstError),
    #[error("incompatible sorts for argument {position} of `{predicate}`: Bool vs object")]
    IncompatibleSorts { predicate: String, position: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Node {
    Slot(String, usize),
    Symbol(String),
}

#[derive(Default)]
struct UnionFind {
    parent: Vec<usize>,
    is_bool: Vec<bool>,
    has_object: Vec<bool>,
    index: BTreeMap<Node, usize>,
}

impl UnionFind {
    fn node(&mut self, node: Node) -> usize {
        if let Some(&i) = self.index.get(&node) {
            return i;
        }
        let i = self.parent.len();
        self.parent.push(i);
        self.is_bool.push(false);
        self.has_object.push(matches!(node, Node::Symbol(_)));
        self.index.insert(node, i);
        i
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    /// Merges two classes; returns false if the merge mixes Bool and object.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return true;
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        self.is_bool[lo] |= self.is_bool[hi];
        self.has_object[lo] |= self.has_object[hi];
        !(self.is_bool[lo] && self.has_object[lo])
    }

    fn mark_bool(&mut self, i: usize) -> bool {
        let r = self.find(i);
        self.is_bool[r] = true;
        !self.has_object[r]
    }
}

/// Infers a [`Signature`] for `f`.
pub fn unify_sorts(f: &Formula) -> Result<Signature, SortError> {
    collect_predicates(f)?;
    let mut uf = UnionFind::default();
    let mut warnings = Vec::new();
    unify_go(f, &mut uf, &mut warnings)?;

    // Second pass: name classes and record entries in first-occurrence order.
    let mut names: BTreeMap<usize, u32> = BTreeMap::new();
    let mut sig = Signature {
        warnings,
        ..Signature::default()
    };
    let mut free_names: Vec<String> = Vec::new();
    collect_free(f, &mut Vec::new(), &mut free_names);
    name_go(f, &mut uf, &mut names, &mut sig, &free_names);
    sig.sort_count = names.len() as u32;
    Ok(sig)
}

fn unify_go(f: &Formula, uf: &mut UnionFind, warnings: &mut Vec<String>) -> Result<(), SortError> {
    match f {
        Formula::Atom { predicate, args } => {
            for (position, arg) in args.iter().enumerate() {
                let slot = uf.node(Node::Slot(predicate.clone(), position));
                let ok = match arg {
                    Arg::Term(t) => {
                        let sym = uf.node(Node::Symbol(t.name().into()));
                        uf.union(slot, sym)
                    }
                    Arg::Formula(g) => {
                        let warning = format!(
                            "`{predicate}` takes a formula as argument {position}; its slot is Bool-sorted"
                        );
                        if !warnings.contains(&warning) {
                            warnings.push(warning);
                        }
                        unify_go(g, uf, warnings)?;
                        uf.mark_bool(slot)
                    }
                };
                if !ok {
                    return Err(SortError::IncompatibleSorts {
                        predicate: predicate.clone(),
                        position,
                    });
                }
            }
            Ok(())
        }
        Formula::Not(a) => unify_go(a, uf, warnings),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            unify_go(a, uf, warnings)?;
            unify_go(b, uf, warnings)
        }
        Formula::Forall(v, body) | Formula::Exists(v, body) => {
            uf.node(Node::Symbol(v.clone()));
            unify_go(body, uf, warnings)
        }
    }
}

fn collect_free(f: &Formula, bound: &mut Vec<String>, out: &mut Vec<String>) {
    match f {
        Formula::Atom { args, .. } => {
            for arg in args {
                match arg {
                    Arg::Term(t) => {
                        let free = match t {
                            Term::Const(_) => true,
                            Term::Var(v) => !bound.contains(v),
                        };
                        if free && !out.iter().any(|n| n == t.name()) {
                            out.push(t.name().into());
                        }
                    }
                    Arg::Formula(g) => collect_free(g, bound, out),
                }
            }
        }
        Formula::Not(a) => collect_free(a, bound, out),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            collect_free(a, bound, out);
            collect_free(b, bound, out);
        }
        Formula::Forall(v, body) | Formula::Exists(v, body) => {
            bound.push(v.clone());
            collect_free(body, bound, out);
            bound.pop();
        }
    }
}

fn class_sort(uf: &mut UnionFind, names: &mut BTreeMap<usize, u32>, i: usize) -> Sort {
    let root = uf.find(i);
    if uf.is_bool[root] {
        return Sort::Bool;
    }
    let next = names.len() as u32;
    Sort::Named(*names.entry(root).or_insert(next))
}

fn note_symbol(
    name: &str,
    uf: &mut UnionFind,
    names: &mut BTreeMap<usize, u32>,
    sig: &mut Signature,
    free_names: &[String],
) {
    if sig.symbol(name).is_some() {
        return;
    }
    let i = uf.node(Node::Symbol(name.into()));
    let sort = class_sort(uf, names, i);
    let kind = if free_names.iter().any(|n| n == name) {
        SymbolKind::Constant
    } else {
        SymbolKind::Variable
    };
    sig.symbols.push(SymbolSig {
        name: name.into(),
        sort,
        kind,
    });
}

fn name_go(
    f: &Formula,
    uf: &mut UnionFind,
    names: &mut BTreeMap<usize, u32>,
    sig: &mut Signature,
    free_names: &[String],
) {
    match f {
        Formula::Atom { predicate, args } => {
            if sig.predicate(predicate).is_none() {
                let arg_sorts = (0..args.len())
                    .map(|p| {
                        let slot = uf.node(Node::Slot(predicate.clone(), p));
                        class_sort(uf, names, slot)
                    })
                    .collect();
                sig.predicates.push(PredicateSig {
                    name: predicate.clone(),
                    args: arg_sorts,
                });
            }
            for arg in args {
                match arg {
                    Arg::Term(t) => note_symbol(t.name(), uf, names, sig, free_names),
                    Arg::Formula(g) => name_go(g, uf, names, sig, free_names),
                }
            }
        }
        Formula::Not(a) => name_go(a, uf, names, sig, free_names),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            name_go(a, uf, names, sig, free_names);
            name_go(b, uf, names, sig, free_names);
        }
        Formula::Forall(v, body) | Formula::Exists(v, body) => {
            note_symbol(v, uf, names, sig, free_names);
            name_go(body, uf, names, sig, free_names);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_formula;
    use alloc::vec;

    const LF: &str = "((∀x (Like(x,c) -> Love(x,c))) & (∀x (Love(x,c) -> Like(x,c))) & (∃x (Tall(x) & Love(x,c)))) -> (∀y (Tall(y) -> Like(y,c)))";

    #[test]
    fn lf_example_signature() {
        let sig = unify_sorts(&parse_formula(LF).unwrap()).unwrap();
        let s0 = Sort::Named(0);
        let s1 = Sort::Named(1);
        assert_eq!(sig.predicate("Tall").unwrap().args, vec![s0]);
        assert_eq!(sig.predicate("Like").unwrap().args, vec![s0, s1]);
        assert_eq!(sig.predicate("Love").unwrap().args, vec![s0, s1]);
        assert_eq!(sig.sort_of("x"), Some(s0));
        assert_eq!(sig.sort_of("y"), Some(s0));
        assert_eq!(sig.sort_of("c"), Some(s1));
        assert_eq!(sig.symbol("c").unwrap().kind, SymbolKind::Constant);
        assert_eq!(sig.symbol("x").unwrap().kind, SymbolKind::Variable);
        assert_eq!(sig.sort_count, 2);
        assert!(sig.warnings.is_empty());
    }

    #[test]
    fn zero_ary_predicate() {
        let sig = unify_sorts(&parse_formula("Rain").unwrap()).unwrap();
        assert_eq!(sig.predicates, vec![PredicateSig { name: "Rain".into(), args: vec![] }]);
        assert_eq!(sig.sort_count, 0);
    }

    #[test]
    fn bool_vs_object_conflict() {
        let err = unify_sorts(&parse_formula("C(x) & A(x) & A(C(y))").unwrap()).unwrap_err();
        assert_eq!(
            err,
            SortError::IncompatibleSorts {
                predicate: "A".into(),
                position: 0
            }
        );
    }

    #[test]
    fn conflict_detected_in_either_order() {
        let err = unify_sorts(&parse_formula("A(C(y)) & A(x)").unwrap()).unwrap_err();
        assert!(matches!(err, SortError::IncompatibleSorts { position: 0, .. }));
    }

    #[test]
    fn bool_slot_sorts() {
        let sig = unify_sorts(&parse_formula("A(C(y), z) & A(P(), w)").unwrap()).unwrap();
        assert_eq!(sig.predicate("A").unwrap().args, vec![Sort::Bool, Sort::Named(0)]);
        assert_eq!(sig.predicate("C").unwrap().args, vec![Sort::Named(1)]);
        assert_eq!(sig.warnings.len(), 1);
    }

    #[test]
    fn arity_conflict_propagates() {
        assert!(matches!(
            unify_sorts(&parse_formula("P(x) & P(x, y)").unwrap()),
            Err(SortError::Ast(AstError::ArityConflict { .. }))
        ));
    }

    #[test]
    fn unused_binder_gets_own_sort() {
        let sig = unify_sorts(&parse_formula("forall z. P").unwrap()).unwrap();
        assert_eq!(sig.sort_of("z"), Some(Sort::Named(0)));
    }

    #[test]
    fn v_example_sorts() {
        let f = parse_formula(
            "(∀x (JumpsOn(x,s) -> Does(x,y)) & Red(bridge) & inMiddleOf(b, bridge) & JumpsOn(b,s)) -> Does(b,y)",
        )
        .unwrap();
        let sig = unify_sorts(&f).unwrap();
        assert_eq!(sig.sort_of("x"), sig.sort_of("b"));
        assert_eq!(sig.predicate("inMiddleOf").unwrap().args[1], sig.sort_of("bridge").unwrap());
        assert_ne!(sig.sort_of("s"), sig.sort_of("y"));
        assert_eq!(sig.sort_count, 4);
    }
}
