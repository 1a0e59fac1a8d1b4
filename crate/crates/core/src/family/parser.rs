//! Recursive-descent parser for entry expressions.
//!
//! ```text
//! expr   := term (('+'|'-') term)* ;
//! term   := '-'? factor (('*'|'/') factor)* ;
//! factor := atom ('^' INT)? ;
//! atom   := NUMBER | 'i' | IDENT | '(' expr ')' | FUNC '(' expr ')' ;
//! ```

use std::fmt;

use super::ast::{BinOp, Expr, Func};

/// Nesting limit; deeper input is rejected instead of overflowing the stack.
const MAX_DEPTH: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub enum ParseError {
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    UnknownIdentifier {
        name: String,
        line: usize,
        column: usize,
    },
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::Syntax { line, column, message } => {
                write!(f, "syntax error at {line}:{column}: {message}")
            }
            ParseError::UnknownIdentifier { name, line, column } => {
                write!(f, "unknown identifier `{name}` at {line}:{column}")
            }
        }
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Number { value: f64, integer: Option<u32> },
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Number { value, .. } => format!("number {value}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
    (line, column)
}

impl<'a> Lexer<'a> {
    fn syntax(&self, offset: usize, message: impl Into<String>) -> ParseError {
        let (line, column) = line_col(self.src, offset);
        ParseError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    fn next_token(&mut self) -> Result<(Tok, usize), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&b) = bytes.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        let single = match b {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = single {
            self.pos += 1;
            return Ok((t, start));
        }
        if b.is_ascii_digit() || b == b'.' {
            return self.number(start).map(|t| (t, start));
        }
        if b.is_ascii_alphabetic() || b == b'_' {
            while self.pos < bytes.len() && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_') {
                self.pos += 1;
            }
            return Ok((Tok::Ident(self.src[start..self.pos].to_string()), start));
        }
        let ch = self.src[start..].chars().next().unwrap_or('?');
        Err(self.syntax(start, format!("unexpected character `{ch}`")))
    }

    fn number(&mut self, start: usize) -> Result<Tok, ParseError> {
        let bytes = self.src.as_bytes();
        let digits = |pos: &mut usize| {
            let s = *pos;
            while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
                *pos += 1;
            }
            *pos - s
        };
        let int_digits = digits(&mut self.pos);
        let mut is_integer = true;
        if self.pos < bytes.len() && bytes[self.pos] == b'.' {
            self.pos += 1;
            is_integer = false;
            let frac = digits(&mut self.pos);
            if int_digits == 0 && frac == 0 {
                return Err(self.syntax(start, "malformed number"));
            }
        }
        if self.pos < bytes.len() && (bytes[self.pos] == b'e' || bytes[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < bytes.len() && (bytes[self.pos] == b'+' || bytes[self.pos] == b'-') {
                self.pos += 1;
            }
            if digits(&mut self.pos) == 0 {
                return Err(self.syntax(save, "malformed exponent"));
            }
            is_integer = false;
        }
        let text = &self.src[start..self.pos];
        let value: f64 = text.parse().map_err(|_| self.syntax(start, "malformed number"))?;
        if !value.is_finite() {
            return Err(self.syntax(start, "numeric literal out of range"));
        }
        let integer = if is_integer { text.parse::<u32>().ok() } else { None };
        Ok(Tok::Number { value, integer })
    }
}

/// Names visible to an expression, in parameter-slot order.
pub struct Scope<'a> {
    names: &'a [String],
}

impl<'a> Scope<'a> {
    pub fn new(names: &'a [String]) -> Self {
        Self { names }
    }

    fn resolve(&self, name: &str) -> Option<Expr> {
        if let Some(index) = self.names.iter().position(|n| n == name) {
            return Some(Expr::Param {
                name: name.to_string(),
                index,
            });
        }
        let re = self.names.iter().position(|n| *n == format!("re_{name}"))?;
        let im = self.names.iter().position(|n| *n == format!("im_{name}"))?;
        Some(Expr::Composite {
            name: name.to_string(),
            re,
            im,
        })
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    at: usize,
    scope: &'a Scope<'a>,
    depth: usize,
}

impl<'a> Parser<'a> {
    fn advance(&mut self) -> Result<(), ParseError> {
        let (tok, at) = self.lexer.next_token()?;
        self.tok = tok;
        self.at = at;
        Ok(())
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        self.lexer.syntax(self.at, message)
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if self.tok != want {
            return Err(self.error(format!("expected {}, found {}", want.describe(), self.tok.describe())));
        }
        self.advance()
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.error("expression nested too deeply"));
        }
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.advance()?;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = if self.tok == Tok::Minus {
            self.advance()?;
            Expr::Neg(Box::new(self.factor()?))
        } else {
            self.factor()?
        };
        loop {
            let op = match self.tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.advance()?;
            let rhs = self.factor()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.tok != Tok::Caret {
            return Ok(base);
        }
        self.advance()?;
        match self.tok {
            Tok::Number { integer: Some(k), .. } => {
                self.advance()?;
                Ok(Expr::Pow(Box::new(base), k))
            }
            _ => Err(self.error(format!(
                "exponent must be a non-negative integer literal, found {}",
                self.tok.describe()
            ))),
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match std::mem::replace(&mut self.tok, Tok::End) {
            Tok::Number { value, .. } => {
                self.advance()?;
                Ok(Expr::Const(value))
            }
            Tok::LParen => {
                self.advance()?;
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let at = self.at;
                self.advance()?;
                if let Some(func) = Func::from_name(&name) {
                    if self.tok != Tok::LParen {
                        return Err(self.lexer.syntax(at, format!("function `{name}` must be called with `(`")));
                    }
                    self.advance()?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen)?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                if name == "i" {
                    return Ok(Expr::ImagUnit);
                }
                self.scope.resolve(&name).ok_or_else(|| {
                    let (line, column) = line_col(self.lexer.src, at);
                    ParseError::UnknownIdentifier { name, line, column }
                })
            }
            other => {
                self.tok = other;
                Err(self.error(format!("expected a value, found {}", self.tok.describe())))
            }
        }
    }
}

/// Parses one entry expression against the given scope.
pub fn parse_expression(text: &str, scope: &Scope<'_>) -> Result<Expr, ParseError> {
    let mut p = Parser {
        lexer: Lexer { src: text, pos: 0 },
        tok: Tok::End,
        at: 0,
        scope,
        depth: 0,
    };
    p.advance()?;
    let e = p.expr()?;
    if p.tok != Tok::End {
        return Err(p.error(format!("unexpected {}", p.tok.describe())));
    }
    Ok(e)
}
