use super::ast::{Pos, Term};
use super::lexer::{tokenize, Tok, Token};
use super::FrontendError;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Assoc {
    Xfx,
    Xfy,
    Yfx,
}

fn infix(name: &str) -> Option<(u32, Assoc)> {
    Some(match name {
        ":-" => (1200, Assoc::Xfx),
        ":=" => (1150, Assoc::Xfx),
        "|" | ";" => (1100, Assoc::Xfy),
        "->" => (1050, Assoc::Xfy),
        "," => (1000, Assoc::Xfy),
        "=" | "is" | "<" | "=<" | ">" | ">=" | "=:=" | "=\\=" | "\\=" | "==" => (700, Assoc::Xfx),
        "+" | "-" => (500, Assoc::Yfx),
        "*" | "/" | "//" | "mod" => (400, Assoc::Yfx),
        ":" | "^" => (200, Assoc::Xfy),
        _ => return None,
    })
}

fn prefix(name: &str) -> Option<(u32, u32)> {
    // (priority, argument max)
    Some(match name {
        ":-" => (1200, 1199),
        "\\+" => (900, 900),
        "-" | "+" => (200, 200),
        _ => return None,
    })
}

/// A parsed top-level item: a clause term or a directive body.
#[derive(Clone, Debug)]
pub struct Sentence {
    pub term: Term,
    pub pos: Pos,
    /// Set when the sentence was `:- keyword body.`
    pub directive: Option<String>,
}

pub struct Parser {
    toks: Vec<Token>,
    i: usize,
}

const DIRECTIVES: [&str; 5] = ["regtype", "entry", "resource", "trust", "pred"];

impl Parser {
    pub fn new(src: &str) -> Result<Parser, FrontendError> {
        Ok(Parser {
            toks: tokenize(src)?,
            i: 0,
        })
    }

    fn peek(&self) -> &Token {
        &self.toks[self.i]
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.i + k).min(self.toks.len() - 1)].tok
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.i].clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn err<T>(&self, pos: Pos, msg: impl Into<String>) -> Result<T, FrontendError> {
        Err(FrontendError::Syntax {
            pos,
            msg: msg.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), FrontendError> {
        let t = self.next();
        if t.tok == tok {
            Ok(())
        } else {
            self.err(
                t.pos,
                format!("expected {what}, found {}", describe(&t.tok)),
            )
        }
    }

    pub fn sentences(mut self) -> Result<Vec<Sentence>, FrontendError> {
        let mut out = Vec::new();
        while self.peek().tok != Tok::Eof {
            let pos = self.peek().pos;
            let is_directive = self.peek().tok == Tok::Atom(":-".into());
            let sentence = if is_directive {
                self.next();
                let kw_pos = self.peek().pos;
                let keyword = match &self.peek().tok {
                    Tok::Atom(a)
                        if self.peek_at(1) != &Tok::CallParen
                            && DIRECTIVES.contains(&a.as_str()) =>
                    {
                        a.clone()
                    }
                    Tok::Atom(a) if self.peek_at(1) != &Tok::CallParen => {
                        return Err(FrontendError::UnknownDirective {
                            pos: kw_pos,
                            name: a.clone(),
                        });
                    }
                    other => {
                        let name = match other {
                            Tok::Atom(a) => a.clone(),
                            _ => describe(other),
                        };
                        return Err(FrontendError::UnknownDirective { pos: kw_pos, name });
                    }
                };
                self.next();
                let term = self.parse(1199)?.0;
                Sentence {
                    term,
                    pos,
                    directive: Some(keyword),
                }
            } else {
                let term = self.parse(1200)?.0;
                Sentence {
                    term,
                    pos,
                    directive: None,
                }
            };
            let t = self.next();
            if t.tok != Tok::End {
                return self.err(
                    t.pos,
                    format!("expected '.' at end of clause, found {}", describe(&t.tok)),
                );
            }
            out.push(sentence);
        }
        Ok(out)
    }

    fn starts_term(tok: &Tok) -> bool {
        matches!(
            tok,
            Tok::Atom(_) | Tok::QAtom(_) | Tok::Var(_) | Tok::Int(_) | Tok::LParen | Tok::LBracket
        )
    }

    fn infix_here(&self) -> Option<(String, u32, Assoc)> {
        let name = match &self.peek().tok {
            Tok::Atom(a) => a.clone(),
            Tok::Comma => ",".into(),
            Tok::Bar => "|".into(),
            _ => return None,
        };
        infix(&name).map(|(p, a)| (name, p, a))
    }

    fn parse(&mut self, max: u32) -> Result<(Term, u32), FrontendError> {
        let (mut left, mut left_prec) = self.primary(max)?;
        while let Some((name, p, assoc)) = self.infix_here() {
            let left_max = if assoc == Assoc::Yfx { p } else { p - 1 };
            let right_max = if assoc == Assoc::Xfy { p } else { p - 1 };
            if p > max || left_prec > left_max {
                break;
            }
            let op = self.next();
            if !Self::starts_term(&self.peek().tok) {
                return self.err(
                    op.pos,
                    format!("dangling operator '{name}': expected an operand"),
                );
            }
            let (right, _) = self.parse(right_max)?;
            left = Term::Compound(name, vec![left, right]);
            left_prec = p;
        }
        Ok((left, left_prec))
    }

    fn arglist(&mut self) -> Result<Vec<Term>, FrontendError> {
        let mut args = vec![self.parse(999)?.0];
        while self.peek().tok == Tok::Comma {
            self.next();
            args.push(self.parse(999)?.0);
        }
        self.expect(Tok::RParen, "')'")?;
        Ok(args)
    }

    fn primary(&mut self, max: u32) -> Result<(Term, u32), FrontendError> {
        let t = self.next();
        match t.tok {
            Tok::Int(n) => Ok((Term::Int(n), 0)),
            Tok::Var(v) => Ok((Term::Var(v), 0)),
            Tok::LParen | Tok::CallParen => {
                let (inner, _) = self.parse(1200)?;
                self.expect(Tok::RParen, "')'")?;
                Ok((inner, 0))
            }
            Tok::LBracket => {
                let mut items = vec![self.parse(999)?.0];
                while self.peek().tok == Tok::Comma {
                    self.next();
                    items.push(self.parse(999)?.0);
                }
                let tail = if self.peek().tok == Tok::Bar {
                    self.next();
                    self.parse(999)?.0
                } else {
                    Term::nil()
                };
                self.expect(Tok::RBracket, "']'")?;
                Ok((Term::list(items, tail), 0))
            }
            Tok::QAtom(a) => {
                if self.peek().tok == Tok::CallParen {
                    self.next();
                    Ok((Term::Compound(a, self.arglist()?), 0))
                } else {
                    Ok((Term::atom(&a), 0))
                }
            }
            Tok::Atom(a) => {
                if self.peek().tok == Tok::CallParen {
                    self.next();
                    return Ok((Term::Compound(a, self.arglist()?), 0));
                }
                if a == "-" {
                    if let Tok::Int(n) = self.peek().tok {
                        self.next();
                        return Ok((Term::Int(-n), 0));
                    }
                }
                if let Some((p, argmax)) = prefix(&a) {
                    if Self::starts_term(&self.peek().tok)
                        && self.infix_here().is_none_or(|(n, ..)| n == "-")
                    {
                        let p = p.min(max);
                        let (arg, _) = self.parse(argmax.min(p))?;
                        return Ok((Term::Compound(a, vec![arg]), p));
                    }
                }
                Ok((Term::atom(&a), 0))
            }
            other => self.err(t.pos, format!("unexpected {}", describe(&other))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Atom(a) | Tok::QAtom(a) => format!("'{a}'"),
        Tok::Var(v) => format!("variable {v}"),
        Tok::Int(n) => format!("integer {n}"),
        Tok::LParen | Tok::CallParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::LBracket => "'['".into(),
        Tok::RBracket => "']'".into(),
        Tok::Comma => "','".into(),
        Tok::Bar => "'|'".into(),
        Tok::End => "end of clause".into(),
        Tok::Eof => "end of input".into(),
    }
}

/// Parse a single term (used by tests and the report reader).
pub fn parse_term(src: &str) -> Result<Term, FrontendError> {
    let mut p = Parser::new(src)?;
    let (t, _) = p.parse(1200)?;
    match p.peek().tok {
        Tok::End | Tok::Eof => Ok(t),
        ref other => {
            let pos = p.peek().pos;
            p.err(pos, format!("trailing input: {}", describe(other)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operators_bind_correctly() {
        let t = parse_term("X is 1 + 2 * Y - 3").unwrap();
        assert_eq!(t.to_string(), "X is 1+2*Y-3");
        let Term::Compound(op, args) = &t else {
            panic!()
        };
        assert_eq!(op, "is");
        let Term::Compound(minus, _) = &args[1] else {
            panic!()
        };
        assert_eq!(minus, "-");
    }

    #[test]
    fn lists_and_negative_numbers() {
        let t = parse_term("[1, -2 | T]").unwrap();
        assert_eq!(
            t,
            Term::list(vec![Term::Int(1), Term::Int(-2)], Term::var("T"))
        );
        assert_eq!(parse_term("X - 1").unwrap().to_string(), "X-1");
    }

    #[test]
    fn dangling_operator_is_reported() {
        let err = Parser::new("p(X) :- X is 1+.")
            .unwrap()
            .sentences()
            .unwrap_err();
        match err {
            FrontendError::Syntax { pos, msg } => {
                assert_eq!(pos, Pos { line: 1, col: 15 });
                assert!(msg.contains("dangling"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn regtype_alternatives() {
        let s = Parser::new(":- regtype listnum := [] | [num|listnum].")
            .unwrap()
            .sentences()
            .unwrap();
        assert_eq!(s[0].directive.as_deref(), Some("regtype"));
        assert_eq!(s[0].term.to_string(), "':='(listnum,'|'([],[num|listnum]))");
    }
}
