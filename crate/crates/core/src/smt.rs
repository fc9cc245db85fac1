//! SMT-LIB emission: prefix conversion and script layout.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::ast::{Arg, Formula, Term};
use crate::sexpr::{parse_sexprs, SExpr, SExprError};
use crate::sorts::{Signature, Sort};

pub const LOGIC: &str = "UF";
pub const CHECK_SAT: &str = "(check-sat)";
pub const GET_MODEL: &str = "(get-model)";

/// Words that cannot be used as plain user symbols in SMT-LIB.
const RESERVED: &[&str] = &[
    "and", "or", "not", "xor", "ite", "distinct", "true", "false", "let", "par", "as", "forall",
    "exists", "match", "Bool", "assert", "declare", "define", "push", "pop", "exit", "BINARY",
    "DECIMAL", "HEXADECIMAL", "NUMERAL", "STRING", "lambda",
];

/// Renders an identifier as an SMT-LIB symbol, quoting reserved words.
pub fn smt_symbol(name: &str) -> String {
    if RESERVED.contains(&name) {
        format!("|{name}|")
    } else {
        name.to_string()
    }
}

/// Inverse of [`smt_symbol`] for names read back from solver output.
pub fn unquote_symbol(sym: &str) -> &str {
    sym.strip_prefix('|')
        .and_then(|s| s.strip_suffix('|'))
        .unwrap_or(sym)
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FunDecl {
    pub name: String,
    pub args: Vec<String>,
    pub ret: String,
}

impl fmt::Display for FunDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(declare-fun {} ({}) {})",
            smt_symbol(&self.name),
            self.args.join(" "),
            self.ret
        )
    }
}

/// An SMT-LIB script asserting the negation of one formula.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SmtScript {
    pub logic: String,
    pub sorts: Vec<String>,
    pub functions: Vec<FunDecl>,
    /// The asserted term, e.g. `(not (=> P P))`.
    pub assertion: String,
    pub commands: Vec<String>,
}

impl SmtScript {
    /// Script lines in emission order.
    pub fn lines(&self) -> Vec<String> {
        let mut lines = vec![format!("(set-logic {})", self.logic)];
        lines.extend(self.sorts.iter().map(|s| format!("(declare-sort {s} 0)")));
        lines.extend(self.functions.iter().map(|d| d.to_string()));
        lines.push(format!("(assert {})", self.assertion));
        lines.extend(self.commands.iter().cloned());
        lines
    }

    /// Newline-terminated script text.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in self.lines() {
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    pub fn function(&self, name: &str) -> Option<&FunDecl> {
        self.functions.iter().find(|d| d.name == name)
    }

    /// Reads the declarations and assertion back out of script text.
    ///
    /// Multiple assertions are conjoined; unknown commands are kept in
    /// `commands`.
    pub fn parse(text: &str) -> Result<SmtScript, ScriptParseError> {
        let mut script = SmtScript {
            logic: String::new(),
            sorts: Vec::new(),
            functions: Vec::new(),
            assertion: String::new(),
            commands: Vec::new(),
        };
        let mut assertions = Vec::new();
        for cmd in parse_sexprs(text)? {
            let items = cmd
                .as_list()
                .ok_or_else(|| ScriptParseError::Malformed(cmd.to_string()))?;
            let head = items.first().and_then(SExpr::as_atom).unwrap_or_default();
            match (head, items) {
                ("set-logic", [_, SExpr::Atom(l)]) => script.logic = l.clone(),
                ("declare-sort", [_, SExpr::Atom(s), ..]) => script.sorts.push(s.clone()),
                ("declare-fun", [_, SExpr::Atom(name), SExpr::List(args), SExpr::Atom(ret)]) => {
                    script.functions.push(FunDecl {
                        name: unquote_symbol(name).into(),
                        args: args.iter().map(|a| a.to_string()).collect(),
                        ret: ret.clone(),
                    })
                }
                ("declare-const", [_, SExpr::Atom(name), SExpr::Atom(ret)]) => {
                    script.functions.push(FunDecl {
                        name: unquote_symbol(name).into(),
                        args: Vec::new(),
                        ret: ret.clone(),
                    })
                }
                ("assert", [_, term]) => assertions.push(term.to_string()),
                ("declare-sort" | "declare-fun" | "declare-const" | "assert" | "set-logic", _) => {
                    return Err(ScriptParseError::Malformed(cmd.to_string()))
                }
                _ => script.commands.push(cmd.to_string()),
            }
        }
        script.assertion = match assertions.len() {
            0 => "true".into(),
            1 => assertions.pop().unwrap_or_default(),
            _ => format!("(and {})", assertions.join(" ")),
        };
        Ok(script)
    }
}

impl fmt::Display for SmtScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScriptParseError {
    #[error(transparent)]
    SExpr(#[from] SExprError),
    #[error("malformed command `{0}`")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmitError {
    #[error("symbol `{0}` has no declaration in the signature")]
    UndeclaredSymbol(String),
}

fn sort_name(sort: Sort) -> Result<String, EmitError> {
    match sort {
        Sort::Unresolved(c) => Err(EmitError::UndeclaredSymbol(format!("?{c}"))),
        other => Ok(other.to_string()),
    }
}

/// Converts `f` to a prefix expression; quantifiers carry their bound
/// variable's sort from `sig`.
pub fn to_prefix(f: &Formula, sig: &Signature) -> Result<SExpr, EmitError> {
    let op = |name: &str, parts: Vec<SExpr>| {
        let mut items = vec![SExpr::atom(name)];
        items.extend(parts);
        SExpr::List(items)
    };
    Ok(match f {
        Formula::Atom { predicate, args } => {
            if args.is_empty() {
                SExpr::Atom(smt_symbol(predicate))
            } else {
                let mut items = vec![SExpr::Atom(smt_symbol(predicate))];
                for arg in args {
                    items.push(match arg {
                        Arg::Term(t) => SExpr::Atom(smt_symbol(t.name())),
                        Arg::Formula(g) => to_prefix(g, sig)?,
                    });
                }
                SExpr::List(items)
            }
        }
        Formula::Not(a) => op("not", vec![to_prefix(a, sig)?]),
        Formula::And(a, b) => op("and", vec![to_prefix(a, sig)?, to_prefix(b, sig)?]),
        Formula::Or(a, b) => op("or", vec![to_prefix(a, sig)?, to_prefix(b, sig)?]),
        Formula::Implies(a, b) => op("=>", vec![to_prefix(a, sig)?, to_prefix(b, sig)?]),
        Formula::Forall(v, body) | Formula::Exists(v, body) => {
            let sort = sig
                .sort_of(v)
                .ok_or_else(|| EmitError::UndeclaredSymbol(v.clone()))?;
            let binding = SExpr::list([SExpr::list([
                SExpr::Atom(smt_symbol(v)),
                SExpr::Atom(sort_name(sort)?),
            ])]);
            let kw = if matches!(f, Formula::Forall(..)) {
                "forall"
            } else {
                "exists"
            };
            op(kw, vec![binding, to_prefix(body, sig)?])
        }
    })
}

/// Builds the script `(assert (not f))` with declarations from `sig`.
pub fn emit_smt(f: &Formula, sig: &Signature) -> Result<SmtScript, EmitError> {
    check_covered(f, sig, &mut Vec::new())?;
    let mut functions = Vec::new();
    for p in &sig.predicates {
        functions.push(FunDecl {
            name: p.name.clone(),
            args: p
                .args
                .iter()
                .map(|s| sort_name(*s))
                .collect::<Result<_, _>>()?,
            ret: "Bool".into(),
        });
    }
    for c in sig.constants() {
        functions.push(FunDecl {
            name: c.name.clone(),
            args: Vec::new(),
            ret: sort_name(c.sort)?,
        });
    }
    let negated = SExpr::list([SExpr::atom("not"), to_prefix(f, sig)?]);
    Ok(SmtScript {
        logic: LOGIC.into(),
        sorts: (0..sig.sort_count).map(|n| format!("S{n}")).collect(),
        functions,
        assertion: negated.to_string(),
        commands: vec![CHECK_SAT.into(), GET_MODEL.into()],
    })
}

fn check_covered(f: &Formula, sig: &Signature, bound: &mut Vec<String>) -> Result<(), EmitError> {
    match f {
        Formula::Atom { predicate, args } => {
            match sig.predicate(predicate) {
                Some(p) if p.args.len() == args.len() => {}
                _ => return Err(EmitError::UndeclaredSymbol(predicate.clone())),
            }
            for arg in args {
                match arg {
                    Arg::Term(Term::Var(v)) if bound.contains(v) => {}
                    Arg::Term(t) => {
                        let declared = sig
                            .symbol(t.name())
                            .is_some_and(|s| s.kind == crate::sorts::SymbolKind::Constant);
                        if !declared {
                            return Err(EmitError::UndeclaredSymbol(t.name().into()));
                        }
                    }
                    Arg::Formula(g) => check_covered(g, sig, bound)?,
                }
            }
            Ok(())
        }
        Formula::Not(a) => check_covered(a, sig, bound),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            check_covered(a, sig, bound)?;
            check_covered(b, sig, bound)
        }
        Formula::Forall(v, body) | Formula::Exists(v, body) => {
            bound.push(v.clone());
            let r = check_covered(body, sig, bound);
            bound.pop();
            r
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_formula;
    use crate::sorts::unify_sorts;

    fn compile(src: &str) -> SmtScript {
        let f = parse_formula(src).unwrap();
        let sig = unify_sorts(&f).unwrap();
        emit_smt(&f, &sig).unwrap()
    }

    #[test]
    fn prefix_examples() {
        let f = parse_formula("P(x) -> Q(x)").unwrap();
        let sig = unify_sorts(&f).unwrap();
        assert_eq!(to_prefix(&f, &sig).unwrap().to_string(), "(=> (P x) (Q x))");

        let f = parse_formula("forall x. Tall(x)").unwrap();
        let sig = unify_sorts(&f).unwrap();
        assert_eq!(
            to_prefix(&f, &sig).unwrap().to_string(),
            "(forall ((x S0)) (Tall x))"
        );

        let f = parse_formula("~(P & Q)").unwrap();
        let sig = unify_sorts(&f).unwrap();
        assert_eq!(to_prefix(&f, &sig).unwrap().to_string(), "(not (and P Q))");
    }

    #[test]
    fn tautology_layout() {
        let script = compile("P -> P");
        assert_eq!(
            script.render(),
            "(set-logic UF)\n(declare-fun P () Bool)\n(assert (not (=> P P)))\n(check-sat)\n(get-model)\n"
        );
    }

    #[test]
    fn lf_example_layout() {
        let script = compile("((∀x (Like(x,c) -> Love(x,c))) & (∀x (Love(x,c) -> Like(x,c))) & (∃x (Tall(x) & Love(x,c)))) -> (∀y (Tall(y) -> Like(y,c)))");
        let text = script.render();
        let want = "(set-logic UF)
(declare-sort S0 0)
(declare-sort S1 0)
(declare-fun Like (S0 S1) Bool)
(declare-fun Love (S0 S1) Bool)
(declare-fun Tall (S0) Bool)
(declare-fun c () S1)
(assert (not (=> (and (and (forall ((x S0)) (=> (Like x c) (Love x c))) (forall ((x S0)) (=> (Love x c) (Like x c)))) (exists ((x S0)) (and (Tall x) (Love x c)))) (forall ((y S0)) (=> (Tall y) (Like y c))))))
(check-sat)
(get-model)
";
        assert_eq!(text, want);
        assert!(text.lines().all(|l| l == l.trim_end()));
    }

    #[test]
    fn reserved_names_are_quoted() {
        let script = compile("and(not, true)");
        assert!(script.render().contains("(declare-fun |and| (S0 S1) Bool)"));
        assert!(script.render().contains("(assert (not (|and| |not| |true|)))"));
    }

    #[test]
    fn formula_arguments_emit_nested_prefix() {
        let script = compile("A(C(y) & D)");
        assert!(script.render().contains("(declare-fun A (Bool) Bool)"));
        assert!(script.assertion.contains("(A (and (C y) D))"));
    }

    #[test]
    fn undeclared_symbol_detected() {
        let f = parse_formula("P(c)").unwrap();
        let sig = unify_sorts(&parse_formula("P(d)").unwrap()).unwrap();
        assert_eq!(
            emit_smt(&f, &sig),
            Err(EmitError::UndeclaredSymbol("c".into()))
        );
    }

    #[test]
    fn script_text_parses_back() {
        let script = compile("forall x. (P(x) -> Q(x, k))");
        let back = SmtScript::parse(&script.render()).unwrap();
        assert_eq!(back, script);
        assert!(SmtScript::parse("(assert (not P)").is_err());
    }
}
