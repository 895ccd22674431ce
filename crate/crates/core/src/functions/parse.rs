//! Text grammar for function specs:
//!
//! ```text
//! spec   := name [ "(" arg ("," arg)* ")" ]
//! arg    := spec | key "=" value | value
//! ```
//!
//! Recognised names: `liouville`, `mobius` (or `moebius`), `one`,
//! `lambda_q(3)` / `lambda_q(q=3)`, `char(q=4,index=1)`,
//! `archimedean(t=1.5)` / `archimedean(1.5)`, `twist(char(...), t=2.0)`,
//! `product(spec, spec, ...)`, `conj(spec)`.

use thiserror::Error;

use super::{FunctionError, MultiplicativeFunctionSpec};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("column {column}: {message}")]
pub struct SpecParseError {
    /// 1-based character column in the input.
    pub column: usize,
    pub message: String,
}

pub fn parse_spec(input: &str) -> Result<MultiplicativeFunctionSpec, SpecParseError> {
    let mut p = Parser {
        chars: input.chars().collect(),
        pos: 0,
    };
    let spec = p.spec()?;
    p.skip_ws();
    if p.pos < p.chars.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(spec)
}

enum Arg {
    Spec(MultiplicativeFunctionSpec, usize),
    Value {
        key: Option<String>,
        text: String,
        column: usize,
    },
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn error(&self, message: impl Into<String>) -> SpecParseError {
        self.error_at(self.pos, message)
    }

    fn error_at(&self, pos: usize, message: impl Into<String>) -> SpecParseError {
        SpecParseError {
            column: pos + 1,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn word(&mut self) -> String {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len()
            && (self.chars[self.pos].is_alphanumeric()
                || matches!(self.chars[self.pos], '_' | '.' | '-' | '+'))
        {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn spec(&mut self) -> Result<MultiplicativeFunctionSpec, SpecParseError> {
        self.skip_ws();
        let start = self.pos;
        let name = self.word();
        if name.is_empty() {
            return Err(self.error("expected a function name"));
        }
        let args = if self.eat('(') {
            let args = self.args()?;
            if !self.eat(')') {
                return Err(self.error("expected ')'"));
            }
            args
        } else {
            Vec::new()
        };
        self.build(&name, start, args)
    }

    fn args(&mut self) -> Result<Vec<Arg>, SpecParseError> {
        let mut out = Vec::new();
        if self.peek() == Some(')') {
            return Ok(out);
        }
        loop {
            self.skip_ws();
            let start = self.pos;
            let word = self.word();
            if word.is_empty() {
                return Err(self.error("expected an argument"));
            }
            if self.eat('=') {
                self.skip_ws();
                let column = self.pos;
                let text = self.word();
                if text.is_empty() {
                    return Err(self.error(format!("expected a value for '{word}'")));
                }
                out.push(Arg::Value {
                    key: Some(word),
                    text,
                    column,
                });
            } else if is_number(&word) {
                out.push(Arg::Value {
                    key: None,
                    text: word,
                    column: start,
                });
            } else {
                self.pos = start;
                let spec = self.spec()?;
                out.push(Arg::Spec(spec, start));
            }
            if !self.eat(',') {
                break;
            }
        }
        Ok(out)
    }

    fn build(
        &self,
        name: &str,
        start: usize,
        args: Vec<Arg>,
    ) -> Result<MultiplicativeFunctionSpec, SpecParseError> {
        let lift = |e: FunctionError| self.error_at(start, e.to_string());
        match name {
            "liouville" | "mobius" | "moebius" | "one" => {
                if !args.is_empty() {
                    return Err(self.error_at(start, format!("'{name}' takes no arguments")));
                }
                Ok(match name {
                    "liouville" => MultiplicativeFunctionSpec::liouville(),
                    "one" => MultiplicativeFunctionSpec::one(),
                    _ => MultiplicativeFunctionSpec::moebius(),
                })
            }
            "lambda_q" => {
                let mut vals = self.values(args, &["q"], start)?;
                let q: u32 = self.int(&mut vals, "q", start)?;
                MultiplicativeFunctionSpec::lambda_q(q).map_err(lift)
            }
            "char" => {
                let mut vals = self.values(args, &["q", "index"], start)?;
                let q: u64 = self.int(&mut vals, "q", start)?;
                let index: u64 = self.int(&mut vals, "index", start)?;
                MultiplicativeFunctionSpec::character_by_index(q, index).map_err(lift)
            }
            "archimedean" => {
                let mut vals = self.values(args, &["t"], start)?;
                let t = self.float(&mut vals, "t", start)?;
                Ok(MultiplicativeFunctionSpec::archimedean(t))
            }
            "twist" => {
                let mut specs = Vec::new();
                let mut rest = Vec::new();
                for a in args {
                    match a {
                        Arg::Spec(s, col) => specs.push((s, col)),
                        other => rest.push(other),
                    }
                }
                if specs.len() != 1 {
                    return Err(self.error_at(start, "twist needs exactly one char(...) argument"));
                }
                let (inner, col) = specs.pop().expect("one spec");
                let chi = match inner.kind() {
                    super::FunctionKind::Character(chi) => (**chi).clone(),
                    _ => return Err(self.error_at(col, "twist expects a char(...) argument")),
                };
                let mut vals = self.values(rest, &["t"], start)?;
                let t = self.float(&mut vals, "t", start)?;
                Ok(MultiplicativeFunctionSpec::twisted(chi, t))
            }
            "product" | "conj" => {
                let mut specs = Vec::new();
                for a in args {
                    match a {
                        Arg::Spec(s, _) => specs.push(s),
                        Arg::Value { column, .. } => {
                            return Err(self.error_at(column, format!("'{name}' takes only functions")))
                        }
                    }
                }
                if name == "conj" {
                    if specs.len() != 1 {
                        return Err(self.error_at(start, "conj takes exactly one function"));
                    }
                    Ok(MultiplicativeFunctionSpec::conjugate(specs.pop().expect("one")))
                } else {
                    MultiplicativeFunctionSpec::product(specs).map_err(lift)
                }
            }
            other => Err(self.error_at(start, format!("unknown function '{other}'"))),
        }
    }

    /// Match positional and keyword values against `keys`.
    fn values(
        &self,
        args: Vec<Arg>,
        keys: &[&str],
        start: usize,
    ) -> Result<Vec<(String, String, usize)>, SpecParseError> {
        let mut out: Vec<(String, String, usize)> = Vec::new();
        let mut positional = 0;
        for a in args {
            match a {
                Arg::Spec(_, col) => return Err(self.error_at(col, "unexpected function argument")),
                Arg::Value { key, text, column } => {
                    let key = match key {
                        Some(k) => {
                            if !keys.contains(&k.as_str()) {
                                return Err(self.error_at(column, format!("unknown parameter '{k}'")));
                            }
                            k
                        }
                        None => {
                            let Some(k) = keys.get(positional) else {
                                return Err(self.error_at(column, "too many arguments"));
                            };
                            positional += 1;
                            k.to_string()
                        }
                    };
                    if out.iter().any(|(k, _, _)| *k == key) {
                        return Err(self.error_at(column, format!("duplicate parameter '{key}'")));
                    }
                    out.push((key, text, column));
                }
            }
        }
        let _ = start;
        Ok(out)
    }

    fn take(
        &self,
        vals: &mut Vec<(String, String, usize)>,
        key: &str,
        start: usize,
    ) -> Result<(String, usize), SpecParseError> {
        match vals.iter().position(|(k, _, _)| k == key) {
            Some(i) => {
                let (_, text, col) = vals.remove(i);
                Ok((text, col))
            }
            None => Err(self.error_at(start, format!("missing parameter '{key}'"))),
        }
    }

    fn int<T: std::str::FromStr>(
        &self,
        vals: &mut Vec<(String, String, usize)>,
        key: &str,
        start: usize,
    ) -> Result<T, SpecParseError> {
        let (text, col) = self.take(vals, key, start)?;
        text.parse()
            .map_err(|_| self.error_at(col, format!("'{key}' must be a non-negative integer, got '{text}'")))
    }

    fn float(
        &self,
        vals: &mut Vec<(String, String, usize)>,
        key: &str,
        start: usize,
    ) -> Result<f64, SpecParseError> {
        let (text, col) = self.take(vals, key, start)?;
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.error_at(col, format!("'{key}' must be a finite number, got '{text}'"))),
        }
    }
}

fn is_number(s: &str) -> bool {
    s.parse::<f64>().is_ok()
}
