use std::fmt;

use thiserror::Error;

use super::{Formula, PropId};
use crate::trace::Alphabet;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown proposition `{name}` at byte {pos}")]
    UnknownProposition { pos: usize, name: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    LParen,
    RParen,
    Bang,
    Amp,
    Bar,
    Ident(String),
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'!' => Tok::Bang,
            b'&' => Tok::Amp,
            b'|' => Tok::Bar,
            c if c.is_ascii_alphanumeric() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(text[start..i].to_string())));
                continue;
            }
            _ => {
                return Err(ParseError::Syntax {
                    pos: i,
                    msg: format!("unexpected character `{}`", text[i..].chars().next().unwrap()),
                })
            }
        };
        out.push((i, tok));
        i += 1;
    }
    Ok(out)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum BinOp {
    And,
    Or,
    Until,
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
    alphabet: &'a Alphabet,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |(p, _)| *p)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn binop(&self) -> Option<BinOp> {
        match self.peek()? {
            Tok::Amp => Some(BinOp::And),
            Tok::Bar => Some(BinOp::Or),
            Tok::Ident(s) if s == "U" => Some(BinOp::Until),
            _ => None,
        }
    }

    // A chain of one operator, right-nested; mixing operators needs parentheses.
    fn expr(&mut self) -> Result<Formula, ParseError> {
        let mut operands = vec![self.unary()?];
        let mut chain: Option<BinOp> = None;
        while let Some(op) = self.binop() {
            if chain.is_some_and(|c| c != op) {
                return self.err("mixed binary operators need parentheses");
            }
            chain = Some(op);
            self.at += 1;
            operands.push(self.unary()?);
        }
        let mut acc = operands.pop().unwrap();
        while let Some(left) = operands.pop() {
            acc = match chain.unwrap() {
                BinOp::And => Formula::and(left, acc),
                BinOp::Or => Formula::or(left, acc),
                BinOp::Until => Formula::until(left, acc),
            };
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        let pos = self.pos();
        match self.peek().cloned() {
            None => self.err("unexpected end of input"),
            Some(Tok::Bang) => {
                self.at += 1;
                Ok(Formula::not(self.unary()?))
            }
            Some(Tok::LParen) => {
                self.at += 1;
                let inner = self.expr()?;
                if self.peek() != Some(&Tok::RParen) {
                    return self.err("expected `)`");
                }
                self.at += 1;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                self.at += 1;
                match name.as_str() {
                    "X" => Ok(Formula::next(self.unary()?)),
                    "F" => Ok(Formula::finally(self.unary()?)),
                    "G" => Ok(Formula::globally(self.unary()?)),
                    "U" => Err(ParseError::Syntax {
                        pos,
                        msg: "`U` is a binary operator".into(),
                    }),
                    "true" => Ok(Formula::tt()),
                    "false" => Ok(Formula::ff()),
                    _ => self.atom(pos, &name),
                }
            }
            Some(t) => self.err(format!("unexpected token {t:?}")),
        }
    }

    fn atom(&self, pos: usize, name: &str) -> Result<Formula, ParseError> {
        if let Some(id) = self.alphabet.index_of(name) {
            return Ok(Formula::Atom(id));
        }
        if let Some(id) = name
            .strip_prefix('p')
            .and_then(|d| d.parse::<usize>().ok())
            .filter(|&id| id < self.alphabet.len())
        {
            return Ok(Formula::Atom(id as PropId));
        }
        Err(ParseError::UnknownProposition {
            pos,
            name: name.to_string(),
        })
    }
}

/// Parses the textual formula grammar: atoms, prefix `! X F G`, infix `& | U`.
pub fn parse_formula(text: &str, alphabet: &Alphabet) -> Result<Formula, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        at: 0,
        end: text.len(),
        alphabet,
    };
    let f = p.expr()?;
    if p.at != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(f)
}

pub(super) struct Printer<'a> {
    pub formula: &'a Formula,
    pub names: Option<&'a [String]>,
}

impl Printer<'_> {
    fn write(&self, f: &Formula, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match f {
            Formula::Atom(p) => match self.names.and_then(|n| n.get(*p as usize)) {
                Some(name) => write!(out, "{name}"),
                None => write!(out, "p{p}"),
            },
            Formula::Not(x) => {
                out.write_str("!")?;
                self.operand(x, out)
            }
            Formula::Next(x) => self.prefix("X", x, out),
            Formula::Finally(x) => self.prefix("F", x, out),
            Formula::Globally(x) => self.prefix("G", x, out),
            Formula::And(l, r) => self.infix("&", l, r, out),
            Formula::Or(l, r) => self.infix("|", l, r, out),
            Formula::Until(l, r) => self.infix("U", l, r, out),
        }
    }

    fn prefix(&self, op: &str, x: &Formula, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        out.write_str(op)?;
        if x.connective().arity() < 2 {
            out.write_str(" ")?;
        }
        self.operand(x, out)
    }

    fn operand(&self, x: &Formula, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        if x.connective().arity() == 2 {
            out.write_str("(")?;
            self.write(x, out)?;
            out.write_str(")")
        } else {
            self.write(x, out)
        }
    }

    fn infix(&self, op: &str, l: &Formula, r: &Formula, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.operand(l, out)?;
        write!(out, " {op} ")?;
        self.operand(r, out)
    }
}

impl fmt::Display for Printer<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.formula, f)
    }
}
