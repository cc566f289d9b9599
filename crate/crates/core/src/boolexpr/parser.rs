use std::fmt;

use super::{BoolExpr, SYMBOL_COUNT};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Token {
    Symbol(u8),
    And,
    Or,
    Not,
    LParen,
    RParen,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SyntaxErrorKind {
    UnknownToken(String),
    SymbolOutOfRange(u64),
    UnexpectedToken,
    UnexpectedEnd,
    UnbalancedParen,
    Empty,
}

/// Parse failure with the byte offset where it was detected.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct SyntaxError {
    pub pos: usize,
    pub kind: SyntaxErrorKind,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            SyntaxErrorKind::UnknownToken(t) => write!(f, "unknown token {t:?} at {}", self.pos),
            SyntaxErrorKind::SymbolOutOfRange(i) => {
                write!(f, "Symbol_{i} at {} is out of range 0..8", self.pos)
            }
            SyntaxErrorKind::UnexpectedToken => write!(f, "unexpected token at {}", self.pos),
            SyntaxErrorKind::UnexpectedEnd => write!(f, "unexpected end of input at {}", self.pos),
            SyntaxErrorKind::UnbalancedParen => write!(f, "unbalanced parenthesis at {}", self.pos),
            SyntaxErrorKind::Empty => write!(f, "empty expression"),
        }
    }
}

const SYMBOL_PREFIX: &str = "Symbol_";

fn lex(text: &str) -> Result<Vec<(usize, Token)>, SyntaxError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'&' => Token::And,
            b'|' => Token::Or,
            b'~' => Token::Not,
            b'(' => Token::LParen,
            b')' => Token::RParen,
            _ if text[i..].starts_with(SYMBOL_PREFIX) => {
                let start = i;
                let digits_at = i + SYMBOL_PREFIX.len();
                let end = digits_at
                    + bytes[digits_at..]
                        .iter()
                        .take_while(|b| b.is_ascii_digit())
                        .count();
                if end == digits_at {
                    return Err(SyntaxError {
                        pos: start,
                        kind: SyntaxErrorKind::UnknownToken(text[start..end].to_string()),
                    });
                }
                let index: u64 = text[digits_at..end].parse().unwrap_or(u64::MAX);
                if index >= SYMBOL_COUNT as u64 {
                    return Err(SyntaxError {
                        pos: start,
                        kind: SyntaxErrorKind::SymbolOutOfRange(index),
                    });
                }
                out.push((start, Token::Symbol(index as u8)));
                i = end;
                continue;
            }
            _ => {
                let word: String = text[i..]
                    .chars()
                    .take_while(|ch| !ch.is_whitespace() && !"&|~()".contains(*ch))
                    .collect();
                let word = if word.is_empty() {
                    text[i..].chars().next().map(String::from).unwrap_or_default()
                } else {
                    word
                };
                return Err(SyntaxError {
                    pos: i,
                    kind: SyntaxErrorKind::UnknownToken(word),
                });
            }
        };
        out.push((i, tok));
        i += 1;
    }
    Ok(out)
}

/// Split an expression string into tokens.
pub fn tokenize(text: &str) -> Result<Vec<Token>, SyntaxError> {
    Ok(lex(text)?.into_iter().map(|(_, t)| t).collect())
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<Token> {
        self.tokens.get(self.at).map(|(_, t)| *t)
    }

    fn pos(&self) -> usize {
        self.tokens.get(self.at).map_or(self.end, |(p, _)| *p)
    }

    fn err(&self, kind: SyntaxErrorKind) -> SyntaxError {
        SyntaxError {
            pos: self.pos(),
            kind,
        }
    }

    fn or(&mut self) -> Result<BoolExpr, SyntaxError> {
        let mut lhs = self.and()?;
        while self.peek() == Some(Token::Or) {
            self.at += 1;
            lhs = BoolExpr::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<BoolExpr, SyntaxError> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(Token::And) {
            self.at += 1;
            lhs = BoolExpr::and(lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<BoolExpr, SyntaxError> {
        match self.peek() {
            Some(Token::Not) => {
                self.at += 1;
                Ok(BoolExpr::not(self.unary()?))
            }
            Some(Token::Symbol(i)) => {
                self.at += 1;
                Ok(BoolExpr::Var(i))
            }
            Some(Token::LParen) => {
                let open = self.pos();
                self.at += 1;
                let inner = self.or()?;
                if self.peek() != Some(Token::RParen) {
                    return Err(SyntaxError {
                        pos: if self.peek().is_none() { self.end } else { open },
                        kind: SyntaxErrorKind::UnbalancedParen,
                    });
                }
                self.at += 1;
                Ok(inner)
            }
            Some(Token::RParen) => Err(self.err(SyntaxErrorKind::UnbalancedParen)),
            Some(_) => Err(self.err(SyntaxErrorKind::UnexpectedToken)),
            None => Err(self.err(SyntaxErrorKind::UnexpectedEnd)),
        }
    }
}

/// Parse an expression. `~` binds tighter than `&`, which binds tighter than
/// `|`; binary operators associate to the left.
pub fn parse(text: &str) -> Result<BoolExpr, SyntaxError> {
    let tokens = lex(text)?;
    if tokens.is_empty() {
        return Err(SyntaxError {
            pos: 0,
            kind: SyntaxErrorKind::Empty,
        });
    }
    let mut p = Parser {
        tokens,
        at: 0,
        end: text.len(),
    };
    let expr = p.or()?;
    match p.peek() {
        None => Ok(expr),
        Some(Token::RParen) => Err(p.err(SyntaxErrorKind::UnbalancedParen)),
        Some(_) => Err(p.err(SyntaxErrorKind::UnexpectedToken)),
    }
}
