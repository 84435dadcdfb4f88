use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use super::{Expr, Func};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

fn syntax(offset: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        offset,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => out.push((Tok::Plus, start)),
            b'-' => out.push((Tok::Minus, start)),
            b'*' => out.push((Tok::Star, start)),
            b'/' => out.push((Tok::Slash, start)),
            b'^' => out.push((Tok::Caret, start)),
            b'(' => out.push((Tok::LParen, start)),
            b')' => out.push((Tok::RParen, start)),
            b',' => out.push((Tok::Comma, start)),
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let s = &text[start..i];
                let v: f64 = s
                    .parse()
                    .map_err(|_| syntax(start, format!("malformed number `{s}`")))?;
                out.push((Tok::Num(v), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), start));
                continue;
            }
            _ => {
                // Accept the typographic minus sign.
                if text[i..].starts_with('\u{2212}') {
                    out.push((Tok::Minus, start));
                    i += '\u{2212}'.len_utf8();
                    continue;
                }
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(syntax(start, format!("unexpected character `{ch}`")));
            }
        }
        i += 1;
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    declared: Option<&'a [&'a str]>,
}

const ADD_BP: (u8, u8) = (1, 2);
const MUL_BP: (u8, u8) = (3, 4);
const NEG_BP: u8 = 5;
const POW_BP: (u8, u8) = (8, 7);

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(syntax(self.offset(), format!("expected {what}")))
        }
    }

    /// Returns the parsed tree and whether it is a bare numeric literal, so
    /// that `-2` becomes a negative constant while `-(2)` stays a negation.
    fn expr(&mut self, min_bp: u8) -> Result<(Expr, bool)> {
        let (mut lhs, mut bare) = self.prefix()?;
        loop {
            let (l, r) = match self.peek() {
                Tok::Plus | Tok::Minus => ADD_BP,
                Tok::Star | Tok::Slash => MUL_BP,
                Tok::Caret => POW_BP,
                _ => break,
            };
            if l < min_bp {
                break;
            }
            let (op, _) = self.bump();
            let rhs_at = self.offset();
            let (rhs, _) = self.expr(r)?;
            lhs = match op {
                Tok::Plus => Expr::Add(Arc::new(lhs), Arc::new(rhs)),
                Tok::Minus => Expr::Sub(Arc::new(lhs), Arc::new(rhs)),
                Tok::Star => Expr::Mul(Arc::new(lhs), Arc::new(rhs)),
                Tok::Slash => Expr::Div(Arc::new(lhs), Arc::new(rhs)),
                _ => {
                    let n =
                        integer_exponent(&rhs).ok_or_else(|| syntax(rhs_at, "exponent must be a constant integer"))?;
                    Expr::Pow(Arc::new(lhs), n)
                }
            };
            bare = false;
        }
        Ok((lhs, bare))
    }

    fn prefix(&mut self) -> Result<(Expr, bool)> {
        let (tok, at) = self.bump();
        match tok {
            Tok::Num(v) => Ok((Expr::Real(v), true)),
            Tok::Minus => {
                let (inner, bare) = self.expr(NEG_BP)?;
                match inner {
                    Expr::Real(v) if bare => Ok((Expr::Real(-v), false)),
                    other => Ok((Expr::Neg(Arc::new(other)), false)),
                }
            }
            Tok::LParen => {
                let (inner, _) = self.expr(0)?;
                self.expect(Tok::RParen, "`)`")?;
                Ok((inner, false))
            }
            Tok::Ident(name) => self.ident(name, at).map(|e| (e, false)),
            Tok::End => Err(syntax(at, "unexpected end of input")),
            other => Err(syntax(at, format!("unexpected token {}", describe(&other)))),
        }
    }

    fn ident(&mut self, name: String, at: usize) -> Result<Expr> {
        let called = *self.peek() == Tok::LParen;
        if let Some(f) = Func::from_name(&name) {
            if !called {
                return Err(syntax(at, format!("function `{name}` needs an argument")));
            }
            self.bump();
            let (arg, _) = self.expr(0)?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(Expr::Call(f, Arc::new(arg)));
        }
        match name.as_str() {
            "complex" if called => {
                self.bump();
                let re_at = self.offset();
                let (re, _) = self.expr(0)?;
                self.expect(Tok::Comma, "`,`")?;
                let im_at = self.offset();
                let (im, _) = self.expr(0)?;
                self.expect(Tok::RParen, "`)`")?;
                let re = re
                    .as_real()
                    .ok_or_else(|| syntax(re_at, "complex() takes numeric literals"))?;
                let im = im
                    .as_real()
                    .ok_or_else(|| syntax(im_at, "complex() takes numeric literals"))?;
                return Ok(Expr::Complex(re, im));
            }
            "i" => return Ok(Expr::i()),
            "pi" => return Ok(Expr::Real(core::f64::consts::PI)),
            _ => {}
        }
        if called {
            return Err(syntax(at, format!("unknown function `{name}`")));
        }
        if let Some(declared) = self.declared {
            if !declared.contains(&name.as_str()) {
                return Err(Error::UnknownIdentifier {
                    name,
                    offset: at,
                    declared: declared.iter().map(|s| s.to_string()).collect(),
                });
            }
        }
        Ok(Expr::Var(name))
    }
}

fn integer_exponent(e: &Expr) -> Option<i32> {
    if !e.free_vars().is_empty() {
        return None;
    }
    let v = e.eval_real(&[("", 0.0)]).ok()?;
    if libm::trunc(v) == v && libm::fabs(v) <= i32::MAX as f64 {
        Some(v as i32)
    } else {
        None
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("{v}"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Slash => "`/`".into(),
        Tok::Caret => "`^`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::End => "end of input".into(),
    }
}

pub(super) fn parse(text: &str, declared: Option<&[&str]>) -> Result<Expr> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        declared,
    };
    let (e, _) = p.expr(0)?;
    match p.peek() {
        Tok::End => Ok(e),
        other => Err(syntax(p.offset(), format!("unexpected {}", describe(other)))),
    }
}
