//! Canonical ASCII rendering of formulas.
//!
//! Output always re-parses to the same tree. Parentheses are added only
//! where precedence or associativity requires them, with two exceptions:
//! a binary quantifier body is always parenthesized, and a quantifier used
//! as an operand is wrapped because `forall x. body` extends rightward.

use alloc::string::String;
use core::fmt::{self, Write};

use crate::ast::{Arg, Formula};

const TOP: u8 = 0;
const IMPLIES: u8 = 1;
const OR: u8 = 2;
const AND: u8 = 3;
const UNARY: u8 = 4;

pub fn pretty_print(f: &Formula) -> String {
    let mut out = String::new();
    write_formula(&mut out, f, TOP).expect("writing to a String cannot fail");
    out
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_formula(f, self, TOP)
    }
}

fn write_formula<W: Write>(out: &mut W, f: &Formula, ctx: u8) -> fmt::Result {
    match f {
        Formula::Atom { predicate, args } => {
            out.write_str(predicate)?;
            if !args.is_empty() {
                out.write_char('(')?;
                for (i, arg) in args.iter().enumerate() {
                    if i > 0 {
                        out.write_char(',')?;
                    }
                    match arg {
                        Arg::Term(t) => out.write_str(t.name())?,
                        // `P()` keeps a 0-ary argument distinct from a term
                        Arg::Formula(Formula::Atom { predicate, args }) if args.is_empty() => {
                            write!(out, "{predicate}()")?
                        }
                        Arg::Formula(g) => write_formula(out, g, TOP)?,
                    }
                }
                out.write_char(')')?;
            }
            Ok(())
        }
        Formula::Not(a) => {
            out.write_char('~')?;
            write_formula(out, a, UNARY)
        }
        Formula::And(a, b) => binary(out, a, b, " & ", AND, ctx),
        Formula::Or(a, b) => binary(out, a, b, " | ", OR, ctx),
        Formula::Implies(a, b) => {
            let wrap = ctx > IMPLIES;
            if wrap {
                out.write_char('(')?;
            }
            write_formula(out, a, IMPLIES + 1)?;
            out.write_str(" -> ")?;
            write_formula(out, b, IMPLIES)?;
            if wrap {
                out.write_char(')')?;
            }
            Ok(())
        }
        Formula::Forall(v, body) | Formula::Exists(v, body) => {
            let wrap = ctx > TOP;
            if wrap {
                out.write_char('(')?;
            }
            let kw = if matches!(f, Formula::Forall(..)) {
                "forall"
            } else {
                "exists"
            };
            write!(out, "{kw} {v}. ")?;
            match &**body {
                Formula::And(..) | Formula::Or(..) | Formula::Implies(..) => {
                    out.write_char('(')?;
                    write_formula(out, body, TOP)?;
                    out.write_char(')')?;
                }
                _ => write_formula(out, body, TOP)?,
            }
            if wrap {
                out.write_char(')')?;
            }
            Ok(())
        }
    }
}

fn binary<W: Write>(
    out: &mut W,
    a: &Formula,
    b: &Formula,
    op: &str,
    prec: u8,
    ctx: u8,
) -> fmt::Result {
    let wrap = ctx > prec;
    if wrap {
        out.write_char('(')?;
    }
    write_formula(out, a, prec)?;
    out.write_str(op)?;
    write_formula(out, b, prec + 1)?;
    if wrap {
        out.write_char(')')?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::Term;
    use crate::parser::parse_formula;
    use alloc::vec;

    fn a(p: &str, args: &[Arg]) -> Formula {
        Formula::atom(p, args.to_vec())
    }
    fn v(n: &str) -> Arg {
        Arg::Term(Term::Var(n.into()))
    }
    fn c(n: &str) -> Arg {
        Arg::Term(Term::Const(n.into()))
    }

    #[test]
    fn direct_printing() {
        let f = Formula::implies(a("P", &[c("x")]), a("Q", &[c("x")]));
        assert_eq!(pretty_print(&f), "P(x) -> Q(x)");

        let g = Formula::forall(
            "x",
            Formula::implies(a("Tall", &[v("x")]), a("Like", &[v("x"), c("c")])),
        );
        assert_eq!(pretty_print(&g), "forall x. (Tall(x) -> Like(x,c))");
    }

    #[test]
    fn minimal_parentheses() {
        let f = parse_formula("((P & Q) | R) -> (S -> T)").unwrap();
        assert_eq!(pretty_print(&f), "P & Q | R -> S -> T");
        let g = parse_formula("(P -> Q) -> R").unwrap();
        assert_eq!(pretty_print(&g), "(P -> Q) -> R");
        let h = parse_formula("P & (Q & R)").unwrap();
        assert_eq!(pretty_print(&h), "P & (Q & R)");
        let k = parse_formula("~(P | Q)").unwrap();
        assert_eq!(pretty_print(&k), "~(P | Q)");
    }

    #[test]
    fn quantifier_operands_wrapped() {
        let f = parse_formula("(forall x (P(x))) & Q").unwrap();
        let printed = pretty_print(&f);
        assert_eq!(printed, "(forall x. P(x)) & Q");
        assert_eq!(parse_formula(&printed).unwrap(), f);
    }

    #[test]
    fn zero_ary_formula_argument_round_trips() {
        let f = Formula::atom("A", vec![Arg::Formula(Formula::prop("P")), c("x")]);
        let printed = pretty_print(&f);
        assert_eq!(printed, "A(P(),x)");
        assert_eq!(parse_formula(&printed).unwrap(), f);
    }
}
