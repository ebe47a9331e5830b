//! Strategy language: `s ; s`, `s | s`, `repeat(s)` and basic searches
//! `kind(size=N, bits=N, timeout=N)`.

use std::fmt;

use thiserror::Error;

use super::search::SearchBudget;
use crate::semiring::SemiringKind;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Strategy {
    Seq(Box<Strategy>, Box<Strategy>),
    Par(Box<Strategy>, Box<Strategy>),
    Repeat(Box<Strategy>),
    Basic(SemiringKind, SearchBudget),
}

pub const DEFAULT_STRATEGY: &str = "repeat(arithmetic(size=2,bits=4,timeout=30) | tropical(size=2,bits=4,timeout=30) | arctic(size=2,bits=4,timeout=30))";

pub const DEFAULT_BUDGET: SearchBudget = SearchBudget { size: 2, bits: 4, timeout_secs: 30 };

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("strategy syntax error at column {col}: {msg}")]
pub struct StrategyError {
    pub col: usize,
    pub msg: String,
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, StrategyError> {
        Err(StrategyError { col: self.src[..self.pos].chars().count() + 1, msg: msg.into() })
    }

    fn ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.ws();
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), StrategyError> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected `{c}`"))
        }
    }

    fn word(&mut self) -> &'a str {
        self.ws();
        let start = self.pos;
        while let Some(c) = self.src[self.pos..].chars().next() {
            if !(c.is_ascii_alphanumeric() || c == '_') {
                break;
            }
            self.pos += 1;
        }
        &self.src[start..self.pos]
    }

    fn seq(&mut self) -> Result<Strategy, StrategyError> {
        let mut s = self.par()?;
        while self.eat(';') {
            s = Strategy::Seq(Box::new(s), Box::new(self.par()?));
        }
        Ok(s)
    }

    fn par(&mut self) -> Result<Strategy, StrategyError> {
        let mut s = self.atom()?;
        while self.eat('|') {
            s = Strategy::Par(Box::new(s), Box::new(self.atom()?));
        }
        Ok(s)
    }

    fn atom(&mut self) -> Result<Strategy, StrategyError> {
        if self.eat('(') {
            let s = self.seq()?;
            self.expect(')')?;
            return Ok(s);
        }
        let at = self.pos;
        let w = self.word();
        if w.is_empty() {
            return self.err("expected a strategy");
        }
        if w == "repeat" {
            self.expect('(')?;
            if self.peek() == Some(')') {
                return self.err("repeat needs a strategy");
            }
            let s = self.seq()?;
            self.expect(')')?;
            return Ok(Strategy::Repeat(Box::new(s)));
        }
        let Ok(kind) = w.parse::<SemiringKind>() else {
            self.pos = at;
            return self.err(format!("unknown strategy `{w}`"));
        };
        let mut budget = DEFAULT_BUDGET;
        self.expect('(')?;
        let mut seen: Vec<&str> = Vec::new();
        if !self.eat(')') {
            loop {
                let key_at = self.pos;
                let key = self.word();
                if seen.contains(&key) {
                    self.pos = key_at;
                    return self.err(format!("parameter `{key}` given twice"));
                }
                self.expect('=')?;
                let num_at = self.pos;
                let num = self.word();
                let Ok(n) = num.parse::<u64>() else {
                    self.pos = num_at;
                    return self.err("expected a natural number");
                };
                match key {
                    "size" if n >= 1 => budget.size = n as usize,
                    "bits" if (1..=16).contains(&n) => budget.bits = n as u32,
                    "timeout" => budget.timeout_secs = n,
                    "size" | "bits" => {
                        self.pos = num_at;
                        return self.err(format!("{key} out of range"));
                    }
                    _ => {
                        self.pos = key_at;
                        return self.err(format!("unknown parameter `{key}`"));
                    }
                }
                seen.push(key);
                if self.eat(')') {
                    break;
                }
                self.expect(',')?;
            }
        }
        Ok(Strategy::Basic(kind, budget))
    }
}

pub fn parse_strategy(text: &str) -> Result<Strategy, StrategyError> {
    let mut p = Parser { src: text, pos: 0 };
    let s = p.seq()?;
    if p.peek().is_some() {
        return p.err("trailing input");
    }
    Ok(s)
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Seq(a, b) => write!(f, "{a} ; {b}"),
            Strategy::Par(a, b) => {
                let wrap = |s: &Strategy| matches!(s, Strategy::Seq(..));
                if wrap(a) { write!(f, "({a})")? } else { write!(f, "{a}")? }
                f.write_str(" | ")?;
                if wrap(b) || matches!(**b, Strategy::Par(..)) { write!(f, "({b})") } else { write!(f, "{b}") }
            }
            Strategy::Repeat(s) => write!(f, "repeat({s})"),
            Strategy::Basic(k, b) => write!(f, "{k}(size={},bits={},timeout={})", b.size, b.bits, b.timeout_secs),
        }
    }
}
