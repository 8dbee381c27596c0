//! Tokenizer for rule programs.
//!
//! Keywords are not distinguished here; the parser matches identifiers
//! case-insensitively. Three literal forms exist: 'single quoted strings'
//! (no escapes, a quote ends the literal), /regex literals/ (backslash
//! escapes a slash, every other escape is kept verbatim for the regex
//! compiler), and integers with an optional leading minus. `--` starts a
//! comment running to end of line.

use alloc::string::String;
use alloc::vec::Vec;

use crate::aql::AqlError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Str(String),
    Regex(String),
    Int(i64),
    /// One of `( ) , ; . *`
    Punct(char),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

struct Cursor<'a> {
    rest: core::str::Chars<'a>,
    line: u32,
    col: u32,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.rest.clone().next()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.rest.clone();
        it.next();
        it.next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.rest.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, AqlError> {
    let mut cur = Cursor {
        rest: src.chars(),
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    loop {
        // Skip whitespace and comments.
        loop {
            match cur.peek() {
                Some(c) if c.is_whitespace() => {
                    cur.bump();
                }
                Some('-') if cur.peek2() == Some('-') => {
                    while let Some(c) = cur.peek() {
                        if c == '\n' {
                            break;
                        }
                        cur.bump();
                    }
                }
                _ => break,
            }
        }
        let (line, col) = (cur.line, cur.col);
        let Some(c) = cur.peek() else {
            return Ok(out);
        };
        let tok = match c {
            '(' | ')' | ',' | ';' | '.' | '*' => {
                cur.bump();
                Tok::Punct(c)
            }
            '\'' => {
                cur.bump();
                let mut s = String::new();
                loop {
                    match cur.bump() {
                        Some('\'') => break,
                        Some(c) => s.push(c),
                        None => {
                            return Err(AqlError::Lex {
                                line,
                                col,
                                msg: String::from("unterminated string literal"),
                            })
                        }
                    }
                }
                Tok::Str(s)
            }
            '/' => {
                cur.bump();
                let mut s = String::new();
                loop {
                    match cur.bump() {
                        Some('/') => break,
                        Some('\\') => match cur.bump() {
                            // Only the delimiter needs unescaping; the regex
                            // compiler interprets everything else.
                            Some('/') => s.push('/'),
                            Some(c) => {
                                s.push('\\');
                                s.push(c);
                            }
                            None => {
                                return Err(AqlError::Lex {
                                    line,
                                    col,
                                    msg: String::from("unterminated regex literal"),
                                })
                            }
                        },
                        Some(c) => s.push(c),
                        None => {
                            return Err(AqlError::Lex {
                                line,
                                col,
                                msg: String::from("unterminated regex literal"),
                            })
                        }
                    }
                }
                Tok::Regex(s)
            }
            '-' | '0'..='9' => {
                let negative = c == '-';
                if negative {
                    cur.bump();
                    if !cur.peek().is_some_and(|c| c.is_ascii_digit()) {
                        return Err(AqlError::Lex {
                            line,
                            col,
                            msg: String::from("expected digits after '-'"),
                        });
                    }
                }
                let mut value: i64 = 0;
                while let Some(d) = cur.peek().and_then(|c| c.to_digit(10)) {
                    cur.bump();
                    value = value
                        .checked_mul(10)
                        .and_then(|v| v.checked_add(d as i64))
                        .ok_or(AqlError::Lex {
                            line,
                            col,
                            msg: String::from("integer literal out of range"),
                        })?;
                }
                Tok::Int(if negative { -value } else { value })
            }
            c if is_ident_start(c) => {
                let mut s = String::new();
                while let Some(c) = cur.peek() {
                    if !is_ident_continue(c) {
                        break;
                    }
                    s.push(c);
                    cur.bump();
                }
                Tok::Ident(s)
            }
            other => {
                return Err(AqlError::Lex {
                    line,
                    col,
                    msg: alloc::format!("unexpected character {other:?}"),
                })
            }
        };
        out.push(Token { tok, line, col });
    }
}
