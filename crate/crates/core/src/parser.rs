//! Recursive-descent parser for formula text.
//!
//! Grammar (loosest binding first):
//!
//! ```text
//! formula  := or ( "->" formula )?              right-associative
//! or       := and ( "|" and )*                  left-associative
//! and      := unary ( "&" unary )*              left-associative
//! unary    := "~" unary | quant | primary
//! quant    := ("forall" | "exists") vars ( "." formula | unary )
//! vars     := IDENT | "(" IDENT ( "," IDENT )* ")"
//! primary  := "(" formula ")" | IDENT ( "(" args? ")" )?
//! args     := arg ( "," arg )*
//! arg      := IDENT                             when followed by "," or ")"
//!           | formula
//! ```

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::ast::{rename_shadowed, Arg, Formula, Term};
use crate::error::ParseError;
use crate::lexer::{tokenize, Token, TokenKind};

/// Tokenizes and parses `source`.
pub fn parse_formula(source: &str) -> Result<Formula, ParseError> {
    let tokens = tokenize(source)?;
    parse(&tokens)
}

/// Parses a complete token stream into a formula.
///
/// Names bound by an enclosing quantifier become variables, everything else
/// in term position becomes a constant. Shadowing binders are renamed.
pub fn parse(tokens: &[Token]) -> Result<Formula, ParseError> {
    check_balance(tokens)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        scope: Vec::new(),
    };
    let f = parser.formula()?;
    if let Some(tok) = parser.peek() {
        return Err(ParseError::Syntax {
            offset: tok.offset,
            expected: "end of input".into(),
            found: describe(Some(tok)),
        });
    }
    Ok(rename_shadowed(&f))
}

fn check_balance(tokens: &[Token]) -> Result<(), ParseError> {
    let mut open = Vec::new();
    for tok in tokens {
        match tok.kind {
            TokenKind::LParen => open.push(tok.offset),
            TokenKind::RParen if open.pop().is_none() => {
                return Err(ParseError::UnbalancedParens { offset: tok.offset });
            }
            _ => {}
        }
    }
    match open.pop() {
        Some(offset) => Err(ParseError::UnbalancedParens { offset }),
        None => Ok(()),
    }
}

fn describe(tok: Option<&Token>) -> String {
    match tok {
        Some(t) => format!("`{}`", t.text),
        None => "end of input".to_string(),
    }
}

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
    scope: Vec<String>,
}

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&'t Token> {
        self.tokens.get(self.pos)
    }

    fn peek_kind(&self) -> Option<TokenKind> {
        self.peek().map(|t| t.kind)
    }

    fn peek_kind_at(&self, ahead: usize) -> Option<TokenKind> {
        self.tokens.get(self.pos + ahead).map(|t| t.kind)
    }

    fn eof_offset(&self) -> usize {
        self.tokens.last().map(Token::end).unwrap_or(0)
    }

    fn error(&self, expected: &str) -> ParseError {
        let tok = self.peek();
        ParseError::Syntax {
            offset: tok.map(|t| t.offset).unwrap_or_else(|| self.eof_offset()),
            expected: expected.into(),
            found: describe(tok),
        }
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> Result<&'t Token, ParseError> {
        match self.peek() {
            Some(t) if t.kind == kind => {
                self.pos += 1;
                Ok(t)
            }
            _ => Err(self.error(what)),
        }
    }

    fn eat(&mut self, kind: TokenKind) -> bool {
        if self.peek_kind() == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.or()?;
        if self.eat(TokenKind::Implies) {
            let rhs = self.formula()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.and()?;
        while self.eat(TokenKind::Or) {
            let rhs = self.and()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.unary()?;
        while self.eat(TokenKind::And) {
            let rhs = self.unary()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        match self.peek_kind() {
            Some(TokenKind::Not) => {
                self.pos += 1;
                Ok(Formula::not(self.unary()?))
            }
            Some(TokenKind::Forall) | Some(TokenKind::Exists) => self.quantifier(),
            _ => self.primary(),
        }
    }

    fn quantifier(&mut self) -> Result<Formula, ParseError> {
        let universal = self.peek_kind() == Some(TokenKind::Forall);
        self.pos += 1;
        let mut vars = Vec::new();
        let parenthesized = self.peek_kind() == Some(TokenKind::LParen)
            && self.peek_kind_at(1) == Some(TokenKind::Ident)
            && matches!(
                self.peek_kind_at(2),
                Some(TokenKind::RParen) | Some(TokenKind::Comma)
            );
        if parenthesized {
            self.pos += 1;
            loop {
                vars.push(self.expect(TokenKind::Ident, "variable name")?.text.clone());
                if !self.eat(TokenKind::Comma) {
                    break;
                }
            }
            self.expect(TokenKind::RParen, "`)`")?;
        } else {
            vars.push(self.expect(TokenKind::Ident, "variable name")?.text.clone());
        }
        let depth = self.scope.len();
        self.scope.extend(vars.iter().cloned());
        let body = if self.eat(TokenKind::Dot) {
            self.formula()
        } else {
            self.unary()
        };
        self.scope.truncate(depth);
        let mut body = body?;
        for var in vars.into_iter().rev() {
            body = if universal {
                Formula::forall(var, body)
            } else {
                Formula::exists(var, body)
            };
        }
        Ok(body)
    }

    fn primary(&mut self) -> Result<Formula, ParseError> {
        match self.peek_kind() {
            Some(TokenKind::LParen) => {
                self.pos += 1;
                let f = self.formula()?;
                self.expect(TokenKind::RParen, "`)`")?;
                Ok(f)
            }
            Some(TokenKind::Ident) => {
                let name = self.tokens[self.pos].text.clone();
                self.pos += 1;
                if !self.eat(TokenKind::LParen) {
                    return Ok(Formula::prop(name));
                }
                let mut args = Vec::new();
                if !self.eat(TokenKind::RParen) {
                    loop {
                        args.push(self.arg()?);
                        if self.eat(TokenKind::Comma) {
                            continue;
                        }
                        self.expect(TokenKind::RParen, "`,` or `)`")?;
                        break;
                    }
                }
                Ok(Formula::atom(name, args))
            }
            _ => Err(self.error("formula")),
        }
    }

    fn arg(&mut self) -> Result<Arg, ParseError> {
        let bare_ident = self.peek_kind() == Some(TokenKind::Ident)
            && matches!(
                self.peek_kind_at(1),
                Some(TokenKind::Comma) | Some(TokenKind::RParen)
            );
        if bare_ident {
            let name = self.tokens[self.pos].text.clone();
            self.pos += 1;
            let term = if self.scope.contains(&name) {
                Term::Var(name)
            } else {
                Term::Const(name)
            };
            return Ok(Arg::Term(term));
        }
        Ok(Arg::Formula(self.formula()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn v(n: &str) -> Arg {
        Arg::Term(Term::Var(n.into()))
    }
    fn c(n: &str) -> Arg {
        Arg::Term(Term::Const(n.into()))
    }
    fn a1(p: &str, x: Arg) -> Formula {
        Formula::atom(p, vec![x])
    }
    fn a2(p: &str, x: Arg, y: Arg) -> Formula {
        Formula::atom(p, vec![x, y])
    }

    pub(crate) fn lf_example() -> Formula {
        let like_love = Formula::forall(
            "x",
            Formula::implies(a2("Like", v("x"), c("c")), a2("Love", v("x"), c("c"))),
        );
        let love_like = Formula::forall(
            "x",
            Formula::implies(a2("Love", v("x"), c("c")), a2("Like", v("x"), c("c"))),
        );
        let claim = Formula::exists(
            "x",
            Formula::and(a1("Tall", v("x")), a2("Love", v("x"), c("c"))),
        );
        let implication = Formula::forall(
            "y",
            Formula::implies(a1("Tall", v("y")), a2("Like", v("y"), c("c"))),
        );
        Formula::implies(
            Formula::and(Formula::and(like_love, love_like), claim),
            implication,
        )
    }

    #[test]
    fn lf_example_parses() {
        let src = "((∀x (Like(x,c) -> Love(x,c))) & (∀x (Love(x,c) -> Like(x,c))) & (∃x (Tall(x) & Love(x,c)))) -> (∀y (Tall(y) -> Like(y,c)))";
        assert_eq!(parse_formula(src).unwrap(), lf_example());
    }

    #[test]
    fn implies_is_right_associative() {
        let f = parse_formula("P(x) -> Q(x) -> R(x)").unwrap();
        assert_eq!(
            f,
            Formula::implies(
                a1("P", c("x")),
                Formula::implies(a1("Q", c("x")), a1("R", c("x")))
            )
        );
    }

    #[test]
    fn precedence_table() {
        let f = parse_formula("~P(x) & Q(x) | R(x) -> S(x)").unwrap();
        let want = Formula::implies(
            Formula::or(
                Formula::and(Formula::not(a1("P", c("x"))), a1("Q", c("x"))),
                a1("R", c("x")),
            ),
            a1("S", c("x")),
        );
        assert_eq!(f, want);
    }

    #[test]
    fn quantifier_forms_agree() {
        let want = Formula::forall("x", a1("Tall", v("x")));
        for src in [
            "forall x (Tall(x))",
            "forall x. Tall(x)",
            "∀x(Tall(x))",
            "FORALL (x) Tall(x)",
            "∀ x Tall(x)",
        ] {
            assert_eq!(parse_formula(src).unwrap(), want, "{src}");
        }
    }

    #[test]
    fn dot_body_extends_right() {
        let f = parse_formula("forall x. P(x) & Q(x)").unwrap();
        assert_eq!(
            f,
            Formula::forall("x", Formula::and(a1("P", v("x")), a1("Q", v("x"))))
        );
        let g = parse_formula("forall x (P(x)) & Q(x)").unwrap();
        assert_eq!(
            g,
            Formula::and(Formula::forall("x", a1("P", v("x"))), a1("Q", c("x")))
        );
    }

    #[test]
    fn variable_list_expands_to_nested_binders() {
        let f = parse_formula("exists (a, b) R(a, b)").unwrap();
        assert_eq!(
            f,
            Formula::exists("a", Formula::exists("b", a2("R", v("a"), v("b"))))
        );
    }

    #[test]
    fn formula_arguments() {
        let f = parse_formula("A(C(y), x, P())").unwrap();
        assert_eq!(
            f,
            Formula::atom(
                "A",
                vec![
                    Arg::Formula(a1("C", c("y"))),
                    c("x"),
                    Arg::Formula(Formula::prop("P"))
                ]
            )
        );
        let g = parse_formula("A(~B)").unwrap();
        assert_eq!(
            g,
            Formula::atom("A", vec![Arg::Formula(Formula::not(Formula::prop("B")))])
        );
    }

    #[test]
    fn shadowing_is_renamed() {
        let f = parse_formula("forall x. (P(x) & exists x. Q(x))").unwrap();
        assert_eq!(
            f,
            Formula::forall(
                "x",
                Formula::and(
                    a1("P", v("x")),
                    Formula::exists("x_1", a1("Q", v("x_1")))
                )
            )
        );
    }

    #[test]
    fn errors_are_positioned() {
        assert_eq!(
            parse_formula("(P(x) & Q(x)"),
            Err(ParseError::UnbalancedParens { offset: 0 })
        );
        assert_eq!(
            parse_formula("P(x))"),
            Err(ParseError::UnbalancedParens { offset: 4 })
        );
        match parse_formula("P(x) & -> Q(x)") {
            Err(ParseError::Syntax { offset, found, .. }) => {
                assert_eq!(offset, 7);
                assert_eq!(found, "`->`");
            }
            other => panic!("{other:?}"),
        }
        match parse_formula("") {
            Err(ParseError::Syntax { offset: 0, found, .. }) => assert_eq!(found, "end of input"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_formula("P Q"),
            Err(ParseError::Syntax { offset: 2, .. })
        ));
        assert!(matches!(
            parse_formula("forall . P"),
            Err(ParseError::Syntax { offset: 7, .. })
        ));
    }
}
