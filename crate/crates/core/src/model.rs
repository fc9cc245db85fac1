//! Solver model (counterexample) extraction.
//!
//! Solvers print `define-fun` entries whose bodies are small boolean terms
//! over universe elements (`S0!val!0` for z3, `@S0_0` or `@uc_S0_0` for
//! cvc4/cvc5). Each body is evaluated over the enumerated universe to get an
//! explicit truth table per predicate.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::sexpr::{parse_sexprs, SExpr, SExprError};
use crate::smt::{unquote_symbol, SmtScript};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Model {
    pub universes: Vec<Universe>,
    pub definitions: Vec<Definition>,
    /// Fragments that could not be interpreted, kept verbatim.
    pub unparsed: Vec<String>,
    /// Set when `unparsed` is non-empty or a universe had to be invented.
    pub incomplete: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Universe {
    pub sort: String,
    pub elements: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Definition {
    pub symbol: String,
    pub arg_sorts: Vec<String>,
    pub sort: String,
    pub interpretation: Interpretation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Interpretation {
    /// 0-ary symbol: `true`/`false` or a universe element.
    Value(String),
    /// Every argument tuple over the universes with its truth value.
    Table(Vec<Row>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Row {
    pub args: Vec<String>,
    pub value: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelParseError {
    #[error("unbalanced model output: {0}")]
    Unbalanced(#[from] SExprError),
}

impl Model {
    pub fn is_empty(&self) -> bool {
        self.definitions.is_empty()
    }

    pub fn definition(&self, symbol: &str) -> Option<&Definition> {
        self.definitions.iter().find(|d| d.symbol == symbol)
    }

    pub fn universe(&self, sort: &str) -> Option<&[String]> {
        self.universes
            .iter()
            .find(|u| u.sort == sort)
            .map(|u| u.elements.as_slice())
    }

    /// Argument tuples on which `symbol` is true.
    pub fn true_tuples(&self, symbol: &str) -> Vec<Vec<String>> {
        match self.definition(symbol).map(|d| &d.interpretation) {
            Some(Interpretation::Table(rows)) => rows
                .iter()
                .filter(|r| r.value)
                .map(|r| r.args.clone())
                .collect(),
            Some(Interpretation::Value(v)) if v == "true" => alloc::vec![Vec::new()],
            _ => Vec::new(),
        }
    }

    pub fn value(&self, symbol: &str) -> Option<&str> {
        match self.definition(symbol).map(|d| &d.interpretation) {
            Some(Interpretation::Value(v)) => Some(v),
            _ => None,
        }
    }
}

struct RawDef {
    params: Vec<(String, String)>,
    sort: String,
    body: SExpr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Value {
    Bool(bool),
    Elem(String),
}

impl Value {
    fn render(&self) -> String {
        match self {
            Value::Bool(b) => b.to_string(),
            Value::Elem(e) => e.clone(),
        }
    }
}

const MAX_DEPTH: usize = 64;

/// Parses solver model output (the text following `sat`).
///
/// Only symbols declared in `script` appear in `definitions`; auxiliary
/// solver functions are used for evaluation but not reported.
pub fn parse_model(raw: &str, script: &SmtScript) -> Result<Model, ModelParseError> {
    let exprs = parse_sexprs(raw)?;
    let mut entries: Vec<&SExpr> = Vec::new();
    for e in &exprs {
        match e {
            SExpr::Atom(_) => {}
            SExpr::List(items) if e.is_call("model") => entries.extend(&items[1..]),
            SExpr::List(_) if e.is_call("define-fun") || e.is_call("declare-fun") => {
                entries.push(e)
            }
            SExpr::List(items) => entries.extend(items.iter()),
        }
    }

    let mut model = Model::default();
    let mut defs: BTreeMap<String, RawDef> = BTreeMap::new();
    let mut universes: BTreeMap<String, Vec<String>> = script
        .sorts
        .iter()
        .map(|s| (s.clone(), Vec::new()))
        .collect();
    let add_elem = |universes: &mut BTreeMap<String, Vec<String>>, sort: &str, e: &str| {
        let elems = universes.entry(sort.into()).or_default();
        if !elems.iter().any(|x| x == e) {
            elems.push(e.into());
        }
    };

    for entry in entries {
        let items = entry.as_list().unwrap_or(&[]);
        match items {
            [SExpr::Atom(h), SExpr::Atom(name), SExpr::List(params), SExpr::Atom(sort)]
                if h == "declare-fun" && params.is_empty() =>
            {
                let name = unquote_symbol(name);
                if script.function(name).is_none() {
                    add_elem(&mut universes, sort, name);
                }
            }
            [SExpr::Atom(h), SExpr::Atom(name), SExpr::List(params), SExpr::Atom(sort), body]
                if h == "define-fun" =>
            {
                let mut ps = Vec::new();
                let mut ok = true;
                for p in params {
                    match p.as_list() {
                        Some([SExpr::Atom(n), SExpr::Atom(s)]) => ps.push((n.clone(), s.clone())),
                        _ => ok = false,
                    }
                }
                if !ok {
                    model.unparsed.push(entry.to_string());
                    continue;
                }
                defs.insert(
                    unquote_symbol(name).into(),
                    RawDef {
                        params: ps,
                        sort: sort.clone(),
                        body: body.clone(),
                    },
                );
            }
            [SExpr::Atom(h), ..] if h == "declare-sort" => {}
            _ => match cardinality(entry) {
                Some((sort, elems)) => elems.iter().for_each(|e| add_elem(&mut universes, &sort, e)),
                None => model.unparsed.push(entry.to_string()),
            },
        }
    }

    // Elements mentioned in bodies.
    for def in defs.values() {
        let mut found = Vec::new();
        if def.sort != "Bool" {
            collect_results(&def.body, &def.sort, &def.params, &defs, &mut found);
        }
        collect_elements(&def.body, &def.params, &defs, &mut found);
        for (sort, e) in found {
            add_elem(&mut universes, &sort, &e);
        }
    }
    for (sort, elems) in universes.iter_mut() {
        if elems.is_empty() {
            elems.push(format!("{sort}!val!0"));
            model.incomplete = true;
        }
    }

    for decl in &script.functions {
        let Some(def) = defs.get(&decl.name) else {
            continue;
        };
        let interpretation = if def.params.is_empty() {
            eval(&def.body, &BTreeMap::new(), &defs, 0).map(|v| Interpretation::Value(v.render()))
        } else {
            let mut rows = Vec::new();
            let domains: Vec<&[String]> = def
                .params
                .iter()
                .map(|(_, s)| universes.get(s).map(Vec::as_slice).unwrap_or(&[]))
                .collect();
            let mut result = Some(());
            for tuple in product(&domains) {
                let env: BTreeMap<String, Value> = def
                    .params
                    .iter()
                    .zip(&tuple)
                    .map(|((p, _), e)| (p.clone(), Value::Elem(e.clone())))
                    .collect();
                match eval(&def.body, &env, &defs, 0) {
                    Some(Value::Bool(b)) => rows.push(Row {
                        args: tuple,
                        value: b,
                    }),
                    _ => {
                        result = None;
                        break;
                    }
                }
            }
            result.map(|_| Interpretation::Table(rows))
        };
        match interpretation {
            Some(interpretation) => model.definitions.push(Definition {
                symbol: decl.name.clone(),
                arg_sorts: decl.args.clone(),
                sort: decl.ret.clone(),
                interpretation,
            }),
            None => model
                .unparsed
                .push(format!("(define-fun {} ... {})", decl.name, def.body)),
        }
    }

    model.universes = script
        .sorts
        .iter()
        .filter_map(|s| {
            universes.get(s).map(|elems| Universe {
                sort: s.clone(),
                elements: elems.clone(),
            })
        })
        .collect();
    if !model.unparsed.is_empty() {
        model.incomplete = true;
    }
    Ok(model)
}

fn product(domains: &[&[String]]) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = alloc::vec![Vec::new()];
    for dom in domains {
        let mut next = Vec::with_capacity(out.len() * dom.len());
        for prefix in &out {
            for e in dom.iter() {
                let mut t = prefix.clone();
                t.push(e.clone());
                next.push(t);
            }
        }
        out = next;
    }
    out
}

/// Leaf atoms in result position of an object-sorted body.
fn collect_results(
    e: &SExpr,
    sort: &str,
    params: &[(String, String)],
    defs: &BTreeMap<String, RawDef>,
    out: &mut Vec<(String, String)>,
) {
    match e {
        SExpr::Atom(a) => {
            let a = unquote_symbol(a);
            if !params.iter().any(|(p, _)| p == a) && !defs.contains_key(a) {
                out.push((sort.into(), a.into()));
            }
        }
        SExpr::List(items) => match items.as_slice() {
            [SExpr::Atom(h), _, t, f] if h == "ite" => {
                collect_results(t, sort, params, defs, out);
                collect_results(f, sort, params, defs, out);
            }
            [SExpr::Atom(h), _, body] if h == "let" => {
                collect_results(body, sort, params, defs, out)
            }
            _ => {}
        },
    }
}

fn collect_elements(
    e: &SExpr,
    params: &[(String, String)],
    defs: &BTreeMap<String, RawDef>,
    out: &mut Vec<(String, String)>,
) {
    let SExpr::List(items) = e else { return };
    match items.as_slice() {
        [SExpr::Atom(h), SExpr::Atom(x), SExpr::Atom(s)] if h == "as" => {
            out.push((s.clone(), unquote_symbol(x).into()));
        }
        [SExpr::Atom(h), rest @ ..] if h == "=" || h == "distinct" => {
            let sort = rest.iter().find_map(|r| {
                r.as_atom()
                    .and_then(|a| params.iter().find(|(p, _)| p == a).map(|(_, s)| s.clone()))
            });
            if let Some(sort) = sort {
                for r in rest {
                    if let SExpr::Atom(a) = r {
                        let a = unquote_symbol(a);
                        let is_param = params.iter().any(|(p, _)| p == a);
                        if !is_param && !defs.contains_key(a) && a != "true" && a != "false" {
                            out.push((sort.clone(), a.into()));
                        }
                    }
                }
            }
            for r in rest {
                collect_elements(r, params, defs, out);
            }
        }
        _ => {
            for i in items {
                collect_elements(i, params, defs, out);
            }
        }
    }
}

fn eval(
    e: &SExpr,
    env: &BTreeMap<String, Value>,
    defs: &BTreeMap<String, RawDef>,
    depth: usize,
) -> Option<Value> {
    if depth > MAX_DEPTH {
        return None;
    }
    match e {
        SExpr::Atom(a) => {
            let a = unquote_symbol(a);
            match a {
                "true" => Some(Value::Bool(true)),
                "false" => Some(Value::Bool(false)),
                _ => {
                    if let Some(v) = env.get(a) {
                        return Some(v.clone());
                    }
                    match defs.get(a) {
                        Some(def) if def.params.is_empty() => {
                            eval(&def.body, &BTreeMap::new(), defs, depth + 1)
                        }
                        _ => Some(Value::Elem(a.into())),
                    }
                }
            }
        }
        SExpr::List(items) => {
            let (head, args) = items.split_first()?;
            let head = head.as_atom()?;
            let bools = |args: &[SExpr]| -> Option<Vec<bool>> {
                args.iter()
                    .map(|a| match eval(a, env, defs, depth + 1)? {
                        Value::Bool(b) => Some(b),
                        Value::Elem(_) => None,
                    })
                    .collect()
            };
            match head {
                "not" => {
                    let b = bools(args)?;
                    (b.len() == 1).then(|| Value::Bool(!b[0]))
                }
                "and" => Some(Value::Bool(bools(args)?.into_iter().all(|b| b))),
                "or" => Some(Value::Bool(bools(args)?.into_iter().any(|b| b))),
                "xor" => Some(Value::Bool(
                    bools(args)?.into_iter().fold(false, |acc, b| acc ^ b),
                )),
                "=>" => {
                    let b = bools(args)?;
                    let (last, init) = b.split_last()?;
                    Some(Value::Bool(init.iter().rev().fold(*last, |acc, p| !p || acc)))
                }
                "=" | "distinct" => {
                    let vals: Vec<Value> = args
                        .iter()
                        .map(|a| eval(a, env, defs, depth + 1))
                        .collect::<Option<_>>()?;
                    let result = if head == "=" {
                        vals.windows(2).all(|w| w[0] == w[1])
                    } else {
                        (0..vals.len()).all(|i| (i + 1..vals.len()).all(|j| vals[i] != vals[j]))
                    };
                    Some(Value::Bool(result))
                }
                "ite" => {
                    let [c, t, f] = args else { return None };
                    match eval(c, env, defs, depth + 1)? {
                        Value::Bool(true) => eval(t, env, defs, depth + 1),
                        Value::Bool(false) => eval(f, env, defs, depth + 1),
                        Value::Elem(_) => None,
                    }
                }
                "let" => {
                    let [SExpr::List(bindings), body] = args else {
                        return None;
                    };
                    let mut inner = env.clone();
                    for b in bindings {
                        let [SExpr::Atom(name), value] = b.as_list()? else {
                            return None;
                        };
                        inner.insert(name.clone(), eval(value, env, defs, depth + 1)?);
                    }
                    eval(body, &inner, defs, depth + 1)
                }
                "as" => match args {
                    [SExpr::Atom(x), _] => Some(Value::Elem(unquote_symbol(x).into())),
                    _ => None,
                },
                f => {
                    let def = defs.get(unquote_symbol(f))?;
                    if def.params.len() != args.len() {
                        return None;
                    }
                    let mut inner = BTreeMap::new();
                    for ((p, _), a) in def.params.iter().zip(args) {
                        inner.insert(p.clone(), eval(a, env, defs, depth + 1)?);
                    }
                    eval(&def.body, &inner, defs, depth + 1)
                }
            }
        }
    }
}

/// `(forall ((x S)) (or (= x e0) (= x e1) ..))`: z3's statement of a finite
/// universe. Returns the sort and its elements.
fn cardinality(e: &SExpr) -> Option<(String, Vec<String>)> {
    let [SExpr::Atom(q), SExpr::List(binders), body] = e.as_list()? else {
        return None;
    };
    let [SExpr::List(b)] = binders.as_slice() else {
        return None;
    };
    let ([SExpr::Atom(var), SExpr::Atom(sort)], "forall") = (b.as_slice(), q.as_str()) else {
        return None;
    };
    let eqs: &[SExpr] = if body.is_call("or") { &body.as_list()?[1..] } else { core::slice::from_ref(body) };
    let mut elems = Vec::new();
    for eq in eqs {
        match eq.as_list()? {
            [SExpr::Atom(h), SExpr::Atom(a), SExpr::Atom(b)] if h == "=" => {
                let elem = if a == var { b } else if b == var { a } else { return None };
                elems.push(elem.clone());
            }
            _ => return None,
        }
    }
    Some((sort.clone(), elems))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smt::FunDecl;
    use alloc::vec;

    fn lf_script() -> SmtScript {
        SmtScript {
            logic: "UF".into(),
            sorts: vec!["S0".into(), "S1".into()],
            functions: vec![
                FunDecl { name: "Like".into(), args: vec!["S0".into(), "S1".into()], ret: "Bool".into() },
                FunDecl { name: "Love".into(), args: vec!["S0".into(), "S1".into()], ret: "Bool".into() },
                FunDecl { name: "Tall".into(), args: vec!["S0".into()], ret: "Bool".into() },
                FunDecl { name: "c".into(), args: vec![], ret: "S1".into() },
            ],
            assertion: "true".into(),
            commands: vec![],
        }
    }

    #[test]
    fn cvc_style_definition() {
        let raw = "(\n(define-fun Tall ((x S0)) Bool (= x @S0_0))\n)";
        let model = parse_model(raw, &lf_script()).unwrap();
        assert_eq!(model.true_tuples("Tall"), vec![vec![String::from("@S0_0")]]);
        assert_eq!(model.universe("S0"), Some(&[String::from("@S0_0")][..]));
    }

    #[test]
    fn cardinality_constraints() {
        let e = &crate::sexpr::parse_sexprs("(forall ((x S0)) (or (= x S0!val!0) (= x S0!val!1)))").unwrap()[0];
        assert_eq!(
            cardinality(e),
            Some((String::from("S0"), vec![String::from("S0!val!0"), String::from("S0!val!1")]))
        );
        let e = &crate::sexpr::parse_sexprs("(forall ((x S1)) (= S1!val!0 x))").unwrap()[0];
        assert_eq!(cardinality(e).unwrap().1, vec![String::from("S1!val!0")]);
        let e = &crate::sexpr::parse_sexprs("(forall ((x S1)) (P x))").unwrap()[0];
        assert_eq!(cardinality(e), None);
    }

    // Captured from z3 on the LF example script.
    const Z3_LF: &str = r#"(
  ;; universe for S0:
  ;;   S0!val!0 S0!val!1
  ;; -----------
  (declare-fun S0!val!0 () S0)
  (declare-fun S0!val!1 () S0)
  (forall ((x S0)) (or (= x S0!val!0) (= x S0!val!1)))
  (declare-fun S1!val!0 () S1)
  (forall ((x S1)) (= x S1!val!0))
  (define-fun c () S1
    S1!val!0)
  (define-fun Like ((x!0 S0) (x!1 S1)) Bool
    (and (= x!0 S0!val!0) (= x!1 S1!val!0)))
  (define-fun Love ((x!0 S0) (x!1 S1)) Bool
    (not (and (not (= x!0 S0!val!0)) (= x!1 S1!val!0))))
  (define-fun Tall ((x!0 S0)) Bool
    true)
)"#;

    #[test]
    fn z3_style_model() {
        let model = parse_model(Z3_LF, &lf_script()).unwrap();
        assert_eq!(model.universe("S0").unwrap().len(), 2);
        assert_eq!(model.value("c"), Some("S1!val!0"));
        assert_eq!(model.true_tuples("Tall").len(), 2);
        assert_eq!(
            model.true_tuples("Like"),
            vec![vec![String::from("S0!val!0"), String::from("S1!val!0")]]
        );
        assert_eq!(model.true_tuples("Love").len(), 1);
        assert!(model.unparsed.is_empty());
        assert!(!model.incomplete);
        assert_eq!(model.definitions.len(), 4);
    }

    #[test]
    fn empty_model() {
        let model = parse_model("(\n)", &lf_script()).unwrap();
        assert!(model.is_empty());
        let model = parse_model("", &SmtScript::parse("(set-logic UF)").unwrap()).unwrap();
        assert_eq!(model, Model::default());
    }

    #[test]
    fn malformed_is_an_error() {
        assert!(parse_model("((define-fun P () Bool true)", &lf_script()).is_err());
    }

    #[test]
    fn auxiliary_functions_and_ite() {
        let script = SmtScript::parse(
            "(declare-sort S0 0)(declare-fun P (S0) Bool)(declare-fun Q () Bool)(declare-fun a () S0)",
        )
        .unwrap();
        let raw = "((define-fun a () S0 (as @uc_S0_1 S0))
 (define-fun k!0 ((x S0)) S0 (ite (= x @uc_S0_1) @uc_S0_1 @uc_S0_0))
 (define-fun P ((x S0)) Bool (let ((y (k!0 x))) (= y @uc_S0_1)))
 (define-fun Q () Bool (=> (P a) false)))";
        let model = parse_model(raw, &script).unwrap();
        assert_eq!(model.value("a"), Some("@uc_S0_1"));
        assert_eq!(model.value("Q"), Some("false"));
        assert_eq!(model.true_tuples("P"), vec![vec![String::from("@uc_S0_1")]]);
        assert_eq!(model.universe("S0").unwrap().len(), 2);
        assert!(model.definition("k!0").is_none());
        assert!(!model.incomplete);
    }
}
