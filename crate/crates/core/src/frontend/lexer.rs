use super::ast::Pos;
use super::FrontendError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Atom(String),
    /// Quoted atom; never treated as an operator.
    QAtom(String),
    Var(String),
    Int(i64),
    LParen,
    /// `(` immediately following a name: functional notation.
    CallParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Bar,
    End,
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

const SYMBOL_CHARS: &str = "+-*/\\^<>=~:.?@#&$";

pub fn tokenize(src: &str) -> Result<Vec<Token>, FrontendError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            bump!();
            bump!();
            loop {
                if i >= chars.len() {
                    return Err(FrontendError::Syntax {
                        pos,
                        msg: "unterminated block comment".into(),
                    });
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump!();
                    bump!();
                    break;
                }
                bump!();
            }
            continue;
        }
        let prev_is_name = matches!(
            out.last(),
            Some(Token {
                tok: Tok::QAtom(_) | Tok::Var(_),
                ..
            })
        ) || matches!(
            out.last(),
            Some(Token { tok: Tok::Atom(a), .. }) if a.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        );
        let adjacent = i > 0 && !chars[i - 1].is_whitespace();
        match c {
            '(' => {
                let tok = if prev_is_name && adjacent {
                    Tok::CallParen
                } else {
                    Tok::LParen
                };
                out.push(Token { tok, pos });
                bump!();
            }
            ')' => {
                out.push(Token {
                    tok: Tok::RParen,
                    pos,
                });
                bump!();
            }
            '[' => {
                if chars.get(i + 1) == Some(&']') {
                    out.push(Token {
                        tok: Tok::Atom("[]".into()),
                        pos,
                    });
                    bump!();
                    bump!();
                } else {
                    out.push(Token {
                        tok: Tok::LBracket,
                        pos,
                    });
                    bump!();
                }
            }
            ']' => {
                out.push(Token {
                    tok: Tok::RBracket,
                    pos,
                });
                bump!();
            }
            ',' => {
                out.push(Token {
                    tok: Tok::Comma,
                    pos,
                });
                bump!();
            }
            '|' => {
                out.push(Token { tok: Tok::Bar, pos });
                bump!();
            }
            '!' | ';' => {
                out.push(Token {
                    tok: Tok::Atom(c.to_string()),
                    pos,
                });
                bump!();
            }
            '\'' => {
                bump!();
                let mut s = String::new();
                loop {
                    if i >= chars.len() {
                        return Err(FrontendError::Syntax {
                            pos,
                            msg: "unterminated quoted atom".into(),
                        });
                    }
                    if chars[i] == '\\' && i + 1 < chars.len() {
                        bump!();
                        s.push(chars[i]);
                        bump!();
                        continue;
                    }
                    if chars[i] == '\'' {
                        bump!();
                        break;
                    }
                    s.push(chars[i]);
                    bump!();
                }
                out.push(Token {
                    tok: Tok::QAtom(s),
                    pos,
                });
            }
            c if c.is_ascii_digit() => {
                let mut s = String::new();
                while i < chars.len() && chars[i].is_ascii_digit() {
                    s.push(chars[i]);
                    bump!();
                }
                let n = s.parse::<i64>().map_err(|_| FrontendError::Syntax {
                    pos,
                    msg: format!("integer literal out of range: {s}"),
                })?;
                out.push(Token {
                    tok: Tok::Int(n),
                    pos,
                });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    s.push(chars[i]);
                    bump!();
                }
                let tok = if c.is_ascii_uppercase() || c == '_' {
                    Tok::Var(s)
                } else {
                    Tok::Atom(s)
                };
                out.push(Token { tok, pos });
            }
            c if SYMBOL_CHARS.contains(c) => {
                // a lone '.' followed by layout or EOF ends a clause
                if c == '.' {
                    let next = chars.get(i + 1).copied();
                    if next.is_none() || next.is_some_and(|n| n.is_whitespace() || n == '%') {
                        out.push(Token { tok: Tok::End, pos });
                        bump!();
                        continue;
                    }
                }
                let mut s = String::new();
                while i < chars.len() && SYMBOL_CHARS.contains(chars[i]) {
                    let ends_clause = chars[i] == '.'
                        && chars
                            .get(i + 1)
                            .is_none_or(|n| n.is_whitespace() || *n == '%');
                    if ends_clause && !s.is_empty() {
                        break;
                    }
                    s.push(chars[i]);
                    bump!();
                }
                out.push(Token {
                    tok: Tok::Atom(s),
                    pos,
                });
            }
            other => {
                return Err(FrontendError::Syntax {
                    pos,
                    msg: format!("unexpected character {other:?}"),
                });
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: Pos { line, col },
    });
    Ok(out)
}
