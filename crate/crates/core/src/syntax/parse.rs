//! Recursive-descent parser for the plain-text query syntax.
//!
//! Quantifiers are written `Exists x, ...` / `ForAll x, ...` and scope
//! maximally to the right; connectives are `~`, `^`, `V` with `~` binding
//! tightest; atoms are `P(t)`, `t <= t`, `t = t` and macro calls; constants
//! are tuples like `(0,1,?,0)` with `?` the undefined value.

use crate::error::{FoilError, Result};
use crate::instance::{PartialInstance, Trit};
use crate::syntax::ast::{Formula, MacroKind, Term};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Exists,
    Forall,
    Ident(String),
    MacroName(MacroKind),
    PosKw,
    Tilde,
    Caret,
    OrKw,
    LParen,
    RParen,
    Comma,
    Subseteq,
    Equals,
    Zero,
    One,
    Question,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn err_at(line: usize, col: usize, msg: impl Into<String>) -> FoilError {
    FoilError::Parse { line, col, msg: msg.into() }
}

fn lex(text: &str) -> Result<Vec<Spanned>> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        let (tline, tcol) = (line, col);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next().unwrap();
            if c == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            c
        };
        match c {
            c if c.is_whitespace() => {
                bump(&mut chars);
            }
            '(' => {
                bump(&mut chars);
                out.push(Spanned { tok: Tok::LParen, line: tline, col: tcol });
            }
            ')' => {
                bump(&mut chars);
                out.push(Spanned { tok: Tok::RParen, line: tline, col: tcol });
            }
            ',' => {
                bump(&mut chars);
                out.push(Spanned { tok: Tok::Comma, line: tline, col: tcol });
            }
            '~' => {
                bump(&mut chars);
                out.push(Spanned { tok: Tok::Tilde, line: tline, col: tcol });
            }
            '^' => {
                bump(&mut chars);
                out.push(Spanned { tok: Tok::Caret, line: tline, col: tcol });
            }
            '=' => {
                bump(&mut chars);
                out.push(Spanned { tok: Tok::Equals, line: tline, col: tcol });
            }
            '?' => {
                bump(&mut chars);
                out.push(Spanned { tok: Tok::Question, line: tline, col: tcol });
            }
            '<' => {
                bump(&mut chars);
                if chars.peek() == Some(&'=') {
                    bump(&mut chars);
                    out.push(Spanned { tok: Tok::Subseteq, line: tline, col: tcol });
                } else {
                    return Err(err_at(tline, tcol, "expected `<=`"));
                }
            }
            '0' => {
                bump(&mut chars);
                out.push(Spanned { tok: Tok::Zero, line: tline, col: tcol });
            }
            '1' => {
                bump(&mut chars);
                out.push(Spanned { tok: Tok::One, line: tline, col: tcol });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut word = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        word.push(bump(&mut chars));
                    } else {
                        break;
                    }
                }
                let tok = if word == "V" {
                    Tok::OrKw
                } else if word == "P" {
                    Tok::PosKw
                } else if word.eq_ignore_ascii_case("exists") {
                    Tok::Exists
                } else if word.eq_ignore_ascii_case("forall") {
                    Tok::Forall
                } else if let Some(kind) = MacroKind::from_name(&word) {
                    Tok::MacroName(kind)
                } else if word.eq_ignore_ascii_case("full") {
                    // FULL/ALLPOS/ALLNEG are extended atoms, not macros.
                    Tok::Ident("\u{0}FULL".into())
                } else if word.eq_ignore_ascii_case("allpos") {
                    Tok::Ident("\u{0}ALLPOS".into())
                } else if word.eq_ignore_ascii_case("allneg") {
                    Tok::Ident("\u{0}ALLNEG".into())
                } else {
                    Tok::Ident(word)
                };
                out.push(Spanned { tok, line: tline, col: tcol });
            }
            other => {
                return Err(err_at(tline, tcol, format!("unexpected character `{other}`")));
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    const_dim: Option<usize>,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos.min(self.toks.len().saturating_sub(1)))
            .map(|s| (s.line, s.col))
            .unwrap_or((1, 1))
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|s| s.tok.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        let (line, col) = self.here();
        match self.bump() {
            Some(t) if t == tok => Ok(()),
            Some(t) => Err(err_at(line, col, format!("expected {what}, found {t:?}"))),
            None => Err(err_at(line, col, format!("expected {what}, found end of input"))),
        }
    }

    fn formula(&mut self) -> Result<Formula> {
        match self.peek() {
            Some(Tok::Exists) | Some(Tok::Forall) => self.quantified(),
            _ => self.or_expr(),
        }
    }

    fn quantified(&mut self) -> Result<Formula> {
        let (line, col) = self.here();
        let quant = self.bump().unwrap();
        let name = match self.bump() {
            Some(Tok::Ident(name)) if !name.starts_with('\u{0}') => name,
            _ => return Err(err_at(line, col, "expected a variable name after quantifier")),
        };
        self.expect(Tok::Comma, "`,` after quantified variable")?;
        let body = self.formula()?;
        Ok(match quant {
            Tok::Exists => Formula::Exists(name, Box::new(body)),
            _ => Formula::Forall(name, Box::new(body)),
        })
    }

    fn or_expr(&mut self) -> Result<Formula> {
        let lhs = self.and_expr()?;
        if self.peek() == Some(&Tok::OrKw) {
            self.bump();
            let rhs = self.formula()?;
            Ok(Formula::or(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn and_expr(&mut self) -> Result<Formula> {
        let lhs = self.unary()?;
        if self.peek() == Some(&Tok::Caret) {
            self.bump();
            // Right-associative; a quantifier here scopes over the rest of
            // the region but stays inside the pending `V` context,
            // so delegate to and-level first.
            let rhs = match self.peek() {
                Some(Tok::Exists) | Some(Tok::Forall) => self.formula()?,
                _ => self.and_expr()?,
            };
            Ok(Formula::and(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn unary(&mut self) -> Result<Formula> {
        match self.peek() {
            Some(Tok::Tilde) => {
                self.bump();
                let inner = self.unary()?;
                Ok(Formula::not(inner))
            }
            Some(Tok::Exists) | Some(Tok::Forall) => self.quantified(),
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Formula> {
        let (line, col) = self.here();
        match self.peek() {
            Some(Tok::LParen) => {
                if matches!(self.peek2(), Some(Tok::Zero) | Some(Tok::One) | Some(Tok::Question)) {
                    let t = self.term()?;
                    self.binary_atom(t)
                } else {
                    self.bump();
                    let f = self.formula()?;
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(f)
                }
            }
            Some(Tok::PosKw) => {
                self.bump();
                self.expect(Tok::LParen, "`(` after P")?;
                let t = self.term()?;
                self.expect(Tok::RParen, "`)` after P argument")?;
                Ok(Formula::Pos(t))
            }
            Some(Tok::MacroName(kind)) => {
                let kind = *kind;
                self.bump();
                self.expect(Tok::LParen, "`(` after macro name")?;
                let mut args = vec![self.term()?];
                while self.peek() == Some(&Tok::Comma) {
                    self.bump();
                    args.push(self.term()?);
                }
                self.expect(Tok::RParen, "`)` after macro arguments")?;
                if args.len() != kind.arity() {
                    return Err(FoilError::MacroArity {
                        name: kind.name().into(),
                        expected: kind.arity(),
                        got: args.len(),
                    });
                }
                Ok(Formula::Macro(kind, args))
            }
            Some(Tok::Ident(name)) if name.starts_with('\u{0}') => {
                // FULL / ALLPOS / ALLNEG extended atoms.
                let which = name.trim_start_matches('\u{0}').to_string();
                self.bump();
                self.expect(Tok::LParen, "`(` after atom name")?;
                let t = self.term()?;
                self.expect(Tok::RParen, "`)` after atom argument")?;
                Ok(match which.as_str() {
                    "FULL" => Formula::FullAtom(t),
                    "ALLPOS" => Formula::AllPosAtom(t),
                    _ => Formula::AllNegAtom(t),
                })
            }
            Some(Tok::Ident(_)) => {
                let t = self.term()?;
                self.binary_atom(t)
            }
            _ => Err(err_at(line, col, "expected a formula")),
        }
    }

    fn binary_atom(&mut self, lhs: Term) -> Result<Formula> {
        let (line, col) = self.here();
        match self.bump() {
            Some(Tok::Subseteq) => {
                let rhs = self.term()?;
                Ok(Formula::Subsumed(lhs, rhs))
            }
            Some(Tok::Equals) => {
                let rhs = self.term()?;
                Ok(Formula::Eq(lhs, rhs))
            }
            _ => Err(err_at(line, col, "expected `<=` or `=` after term")),
        }
    }

    fn term(&mut self) -> Result<Term> {
        let (line, col) = self.here();
        match self.bump() {
            Some(Tok::Ident(name)) if !name.starts_with('\u{0}') => Ok(Term::Var(name)),
            Some(Tok::LParen) => {
                let mut values = Vec::new();
                loop {
                    match self.bump() {
                        Some(Tok::Zero) => values.push(Trit::Zero),
                        Some(Tok::One) => values.push(Trit::One),
                        Some(Tok::Question) => values.push(Trit::Bot),
                        _ => return Err(err_at(line, col, "expected 0, 1 or ? in constant")),
                    }
                    match self.bump() {
                        Some(Tok::Comma) => continue,
                        Some(Tok::RParen) => break,
                        _ => return Err(err_at(line, col, "expected `,` or `)` in constant")),
                    }
                }
                let c = PartialInstance::new(values);
                match self.const_dim {
                    Some(d) if d != c.dim() => {
                        return Err(err_at(
                            line,
                            col,
                            format!("constant of dimension {} after dimension {d}", c.dim()),
                        ))
                    }
                    None => self.const_dim = Some(c.dim()),
                    _ => {}
                }
                Ok(Term::Const(c))
            }
            _ => Err(err_at(line, col, "expected a term (variable or constant)")),
        }
    }
}

/// Parse one formula from `text`. Constants must all share one dimension.
pub fn parse_core(text: &str) -> Result<Formula> {
    let toks = lex(text)?;
    if toks.is_empty() {
        return Err(err_at(1, 1, "empty query"));
    }
    let mut p = Parser { toks, pos: 0, const_dim: None };
    let f = p.formula()?;
    if p.pos != p.toks.len() {
        let (line, col) = p.here();
        return Err(err_at(line, col, "trailing input after formula"));
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn appendix_example_query() {
        let text = "Exists x, Exists y, (P(x) V P(y)) ^ (~( x <= y ) ^ ~(y <= (?,?,?,0,1,?,?)))";
        let f = parse_core(text).unwrap();
        let mut quantifiers = 0;
        let mut g = &f;
        while let Formula::Exists(_, body) = g {
            quantifiers += 1;
            g = body;
        }
        assert_eq!(quantifiers, 2);
        // print ∘ parse is the identity up to whitespace on this query.
        let printed = parse_core(text).unwrap().to_string();
        let strip = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
        assert_eq!(strip(&printed), strip(text));
        assert_eq!(parse_core(&printed).unwrap(), f);
    }

    #[test]
    fn pos_of_constant() {
        let f = parse_core("P((1,0))").unwrap();
        assert_eq!(
            f,
            Formula::Pos(Term::Const(PartialInstance::parse("(1,0)").unwrap()))
        );
    }

    #[test]
    fn caret_binds_inside_quantifier_scope() {
        let f = parse_core("Exists x, x <= (0,1) ^ x <= (1,1)").unwrap();
        match f {
            Formula::Exists(x, body) => {
                assert_eq!(x, "x");
                assert!(matches!(*body, Formula::And(..)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn precedence_not_and_or() {
        // ~ binds tighter than ^, which binds tighter than V.
        let f = parse_core("~P(x) ^ P(y) V P(z)").unwrap();
        assert_eq!(
            f,
            Formula::or(
                Formula::and(
                    Formula::not(Formula::Pos(Term::var("x"))),
                    Formula::Pos(Term::var("y"))
                ),
                Formula::Pos(Term::var("z"))
            )
        );
    }

    #[test]
    fn mixed_constant_dimensions_rejected() {
        assert!(parse_core("(0,1) <= x ^ x <= (0,1,1)").is_err());
    }

    #[test]
    fn syntax_error_carries_position() {
        match parse_core("Exists x, P(x") {
            Err(FoilError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn macro_calls_parse() {
        let f = parse_core("full(x) ^ SR(x, y) ^ MATCH(x, y, (0,?), (1,?))").unwrap();
        match f {
            Formula::And(a, rest) => {
                assert!(matches!(*a, Formula::FullAtom(_)));
                match *rest {
                    Formula::And(b, c) => {
                        assert!(matches!(*b, Formula::Macro(MacroKind::Sr, _)));
                        assert!(matches!(*c, Formula::Macro(MacroKind::Match, _)));
                    }
                    other => panic!("unexpected {other:?}"),
                }
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_core("SR(x)").is_err());
    }

    #[test]
    fn lowercase_v_is_a_variable() {
        let f = parse_core("Exists v, P(v) V P(v)").unwrap();
        assert!(matches!(f, Formula::Exists(ref n, _) if n == "v"));
    }
}
