//! Hand-written lexer and recursive-descent parser for plan files.
//!
//! ```text
//! plan     := stmt*
//! stmt     := "saturate" INT | "wait" DURATION | "mw" ("on" FREQ | "off")
//!           | "laser" ("on" | "off") | "pulse" NUMBER PHASE
//!           | "acquire" INT DURATION | "loop" INT "{" stmt* "}"
//! DURATION := NUMBER ("s" | "ms" | "us")
//! FREQ     := NUMBER ("GHz" | "MHz")
//! PHASE    := "x" | "y" | "-x" | "-y"
//! ```
//! `#` starts a comment; newlines and `;` separate statements.

use super::ast::{Duration, FreqUnit, Frequency, Phase, PlanAst, Stmt, TimeUnit};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Number(String),
    Word(String),
    LBrace,
    RBrace,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let advance = |i: &mut usize, n: usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            ' ' | '\t' | '\r' | ';' => advance(&mut i, 1, &mut col),
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '{' => {
                out.push(Token { tok: Tok::LBrace, line: l0, column: c0 });
                advance(&mut i, 1, &mut col);
            }
            '}' => {
                out.push(Token { tok: Tok::RBrace, line: l0, column: c0 });
                advance(&mut i, 1, &mut col);
            }
            _ if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) => {
                let start = i;
                let mut j = i;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                if j < chars.len() && chars[j] == '.' {
                    j += 1;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                // Exponent only when a digit follows, so "5ms" stays number + unit.
                if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                    let mut k = j + 1;
                    if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                        k += 1;
                    }
                    if k < chars.len() && chars[k].is_ascii_digit() {
                        while k < chars.len() && chars[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let s: String = chars[start..j].iter().collect();
                out.push(Token { tok: Tok::Number(s), line: l0, column: c0 });
                advance(&mut i, j - start, &mut col);
            }
            _ if c.is_alphabetic() || (c == '-' && chars.get(i + 1).is_some_and(|n| n.is_alphabetic())) => {
                let start = i;
                let mut j = i + 1;
                while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                let s: String = chars[start..j].iter().collect();
                out.push(Token { tok: Tok::Word(s), line: l0, column: c0 });
                advance(&mut i, j - start, &mut col);
            }
            _ => return Err(err(l0, c0, format!("unexpected character '{c}'"))),
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn next(&mut self, what: &str) -> Result<Token> {
        match self.toks.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(t.clone())
            }
            None => Err(err(self.end.0, self.end.1, format!("unexpected end of input; expected {what}"))),
        }
    }

    fn word(&mut self, what: &str) -> Result<(String, Token)> {
        let t = self.next(what)?;
        match &t.tok {
            Tok::Word(w) => Ok((w.clone(), t.clone())),
            other => Err(err(t.line, t.column, format!("expected {what}, found {}", describe(other)))),
        }
    }

    fn number(&mut self, what: &str) -> Result<(f64, String, Token)> {
        let t = self.next(what)?;
        match &t.tok {
            Tok::Number(s) => {
                let v: f64 = s
                    .parse()
                    .map_err(|_| err(t.line, t.column, format!("malformed number '{s}'")))?;
                if !v.is_finite() {
                    return Err(err(t.line, t.column, format!("number '{s}' out of range")));
                }
                Ok((v, s.clone(), t.clone()))
            }
            other => Err(err(t.line, t.column, format!("expected {what}, found {}", describe(other)))),
        }
    }

    fn count(&mut self, what: &str) -> Result<u32> {
        let (_, s, t) = self.number(what)?;
        let n: u32 = s
            .parse()
            .map_err(|_| err(t.line, t.column, format!("{what} must be a whole number, got '{s}'")))?;
        if n == 0 {
            return Err(err(t.line, t.column, format!("{what} must be at least 1")));
        }
        Ok(n)
    }

    fn duration(&mut self) -> Result<Duration> {
        let (v, _, t) = self.number("a duration")?;
        let (u, ut) = self.word("a time unit (s, ms, us)").map_err(|e| match e {
            Error::Parse { line, column, .. } => err(line, column, "malformed unit; expected s, ms or us"),
            e => e,
        })?;
        let unit = TimeUnit::from_symbol(&u)
            .ok_or_else(|| err(ut.line, ut.column, format!("malformed unit '{u}'; expected s, ms or us")))?;
        if !(v > 0.0) {
            return Err(err(t.line, t.column, "duration must be positive"));
        }
        Ok(Duration::new(v, unit))
    }

    fn frequency(&mut self) -> Result<Frequency> {
        let (v, _, t) = self.number("a frequency")?;
        let (u, ut) = self.word("a frequency unit (GHz, MHz)").map_err(|e| match e {
            Error::Parse { line, column, .. } => err(line, column, "malformed unit; expected GHz or MHz"),
            e => e,
        })?;
        let unit = FreqUnit::from_symbol(&u)
            .ok_or_else(|| err(ut.line, ut.column, format!("malformed unit '{u}'; expected GHz or MHz")))?;
        if !(v > 0.0) {
            return Err(err(t.line, t.column, "frequency must be positive"));
        }
        Ok(Frequency::new(v, unit))
    }

    fn on_off(&mut self, kw: &str) -> Result<bool> {
        let (w, t) = self.word("'on' or 'off'")?;
        match w.as_str() {
            "on" => Ok(true),
            "off" => Ok(false),
            _ => Err(err(t.line, t.column, format!("{kw} expects 'on' or 'off', found '{w}'"))),
        }
    }

    fn stmt(&mut self) -> Result<Stmt> {
        let (kw, t) = self.word("a statement")?;
        Ok(match kw.as_str() {
            "saturate" => Stmt::Saturate(self.count("saturation pulse count")?),
            "wait" => Stmt::Wait(self.duration()?),
            "mw" => {
                if self.on_off("mw")? {
                    Stmt::MwOn(self.frequency()?)
                } else {
                    Stmt::MwOff
                }
            }
            "laser" => {
                if self.on_off("laser")? {
                    Stmt::LaserOn
                } else {
                    Stmt::LaserOff
                }
            }
            "pulse" => {
                let (a, _, at) = self.number("a flip angle in degrees")?;
                if !(a > 0.0 && a < 360.0) {
                    return Err(err(at.line, at.column, format!("flip angle {a} outside (0, 360)")));
                }
                let (p, pt) = self.word("a phase (x, y, -x, -y)")?;
                let phase = Phase::from_symbol(&p)
                    .ok_or_else(|| err(pt.line, pt.column, format!("unknown phase '{p}'")))?;
                Stmt::Pulse { angle_deg: a, phase }
            }
            "acquire" => {
                let n_points = self.count("point count")?;
                Stmt::Acquire { n_points, dwell: self.duration()? }
            }
            "loop" => {
                let count = self.count("loop count")?;
                let open = self.next("'{'")?;
                if open.tok != Tok::LBrace {
                    return Err(err(open.line, open.column, format!("expected '{{', found {}", describe(&open.tok))));
                }
                let mut body = Vec::new();
                loop {
                    match self.peek() {
                        None => return Err(err(open.line, open.column, "unbalanced braces: '{' is never closed")),
                        Some(Token { tok: Tok::RBrace, .. }) => {
                            self.pos += 1;
                            break;
                        }
                        Some(_) => body.push(self.stmt()?),
                    }
                }
                Stmt::Loop { count, body }
            }
            _ => return Err(err(t.line, t.column, format!("unknown keyword '{kw}'"))),
        })
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Number(s) => format!("number '{s}'"),
        Tok::Word(w) => format!("'{w}'"),
        Tok::LBrace => "'{'".into(),
        Tok::RBrace => "'}'".into(),
    }
}

pub fn parse_plan(text: &str) -> Result<PlanAst> {
    let toks = lex(text)?;
    let lines: Vec<&str> = text.split('\n').collect();
    let end = (lines.len(), lines.last().map_or(0, |l| l.chars().count()) + 1);
    let mut p = Parser { toks, pos: 0, end };
    let mut stmts = Vec::new();
    while let Some(t) = p.peek() {
        if t.tok == Tok::RBrace {
            return Err(err(t.line, t.column, "unbalanced braces: unexpected '}'"));
        }
        stmts.push(p.stmt()?);
    }
    Ok(PlanAst { stmts })
}
