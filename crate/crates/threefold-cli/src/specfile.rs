//! The flat key-value text format shared by spec files, map files, cocycle
//! files and config files, plus the series expression parser that reads the
//! canonical renderings back in.
//!
//! ```text
//! # W_2 deformed by tau = u2
//! k1 = 2
//! k2 = 0
//! perturb.v1 = z*u2
//! ```

use num_rational::BigRational;
use num_traits::One;
use thiserror::Error;
use threefold_core::cech::VectorCochain;
use threefold_core::deform::MapSpec;
use threefold_core::geometry::{Slot, ThreefoldSpec};
use threefold_core::series::{Chart, Exponent, MultiSeries, TruncationPolicy, Var};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: expected `key = value`")]
    BadLine { line: usize },
    #[error("missing key `{0}`")]
    MissingKey(&'static str),
    #[error("key `{key}`: {message}")]
    BadValue { key: String, message: String },
    #[error("series `{input}`: {message}")]
    BadSeries { input: String, message: String },
}

/// An ordered list of key/value pairs; keys may repeat.
pub type Document = Vec<(String, String)>;

pub fn parse_document(text: &str) -> Result<Document, ParseError> {
    let mut doc = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ParseError::BadLine { line: idx + 1 });
        };
        doc.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(doc)
}

fn lookup<'a>(doc: &'a Document, key: &'static str) -> Option<&'a str> {
    doc.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

fn require<'a>(doc: &'a Document, key: &'static str) -> Result<&'a str, ParseError> {
    lookup(doc, key).ok_or(ParseError::MissingKey(key))
}

fn parse_int(doc: &Document, key: &'static str) -> Result<i32, ParseError> {
    require(doc, key)?.parse().map_err(|_| ParseError::BadValue {
        key: key.to_string(),
        message: "not an integer".to_string(),
    })
}

// ---- series expressions ----

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(i64),
    Ident(String),
    Caret,
    Star,
    Plus,
    Minus,
    Slash,
}

fn tokenize(input: &str) -> Result<Vec<Token>, String> {
    let mut tokens = Vec::new();
    let mut chars = input.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            ' ' | '\t' => {
                chars.next();
            }
            '^' => {
                chars.next();
                tokens.push(Token::Caret);
            }
            '*' => {
                chars.next();
                tokens.push(Token::Star);
            }
            '+' => {
                chars.next();
                tokens.push(Token::Plus);
            }
            '-' => {
                chars.next();
                tokens.push(Token::Minus);
            }
            '/' => {
                chars.next();
                tokens.push(Token::Slash);
            }
            '0'..='9' => {
                let mut n = 0i64;
                while let Some(d) = chars.peek().and_then(|c| c.to_digit(10)) {
                    n = n
                        .checked_mul(10)
                        .and_then(|n| n.checked_add(d as i64))
                        .ok_or("number overflow")?;
                    chars.next();
                }
                tokens.push(Token::Number(n));
            }
            'a'..='z' | 'A'..='Z' => {
                let mut ident = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() {
                        ident.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                tokens.push(Token::Ident(ident));
            }
            other => return Err(format!("unexpected character `{other}`")),
        }
    }
    Ok(tokens)
}

fn var_of(name: &str) -> Option<(Chart, Var)> {
    match name {
        "z" => Some((Chart::U, Var::Base)),
        "u1" => Some((Chart::U, Var::Fiber1)),
        "u2" => Some((Chart::U, Var::Fiber2)),
        "xi" => Some((Chart::V, Var::Base)),
        "v1" => Some((Chart::V, Var::Fiber1)),
        "v2" => Some((Chart::V, Var::Fiber2)),
        _ => None,
    }
}

struct SeriesParser {
    tokens: Vec<Token>,
    pos: usize,
}

impl SeriesParser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn parse_signed_int(&mut self) -> Result<i64, String> {
        let negative = matches!(self.peek(), Some(Token::Minus));
        if negative {
            self.next();
        }
        match self.next() {
            Some(Token::Number(n)) => Ok(if negative { -n } else { n }),
            other => Err(format!("expected an integer, found {other:?}")),
        }
    }

    /// One term: coefficient times variable powers.
    fn parse_term(
        &mut self,
        chart_seen: &mut Option<Chart>,
    ) -> Result<(Exponent, BigRational), String> {
        let mut coeff = BigRational::one();
        let mut exp = [0i64; 3];
        let mut any_factor = false;
        loop {
            match self.peek().cloned() {
                Some(Token::Number(n)) => {
                    self.next();
                    let mut q = 1i64;
                    if matches!(self.peek(), Some(Token::Slash)) {
                        self.next();
                        q = match self.next() {
                            Some(Token::Number(d)) if d != 0 => d,
                            _ => return Err("bad denominator".to_string()),
                        };
                    }
                    coeff *= BigRational::new(n.into(), q.into());
                    any_factor = true;
                }
                Some(Token::Ident(name)) => {
                    self.next();
                    let (chart, var) =
                        var_of(&name).ok_or(format!("unknown variable `{name}`"))?;
                    match chart_seen {
                        Some(c) if *c != chart => {
                            return Err("mixed chart variables in one expression".to_string())
                        }
                        Some(_) => {}
                        None => *chart_seen = Some(chart),
                    }
                    let mut e = 1i64;
                    if matches!(self.peek(), Some(Token::Caret)) {
                        self.next();
                        e = self.parse_signed_int()?;
                    }
                    if var != Var::Base && e < 0 {
                        return Err("fiber exponents must be nonnegative".to_string());
                    }
                    exp[var.index()] += e;
                    any_factor = true;
                }
                _ => break,
            }
            if matches!(self.peek(), Some(Token::Star)) {
                self.next();
                continue;
            }
            break;
        }
        if !any_factor {
            return Err("empty term".to_string());
        }
        let z: i32 = exp[0].try_into().map_err(|_| "base exponent too large")?;
        let u1: u32 = exp[1].try_into().map_err(|_| "negative fiber exponent")?;
        let u2: u32 = exp[2].try_into().map_err(|_| "negative fiber exponent")?;
        Ok((Exponent::new(z, u1, u2), coeff))
    }
}

/// Parse a canonical series expression. Constants carry no chart of their
/// own, so the expected chart decides; variables must belong to it.
pub fn parse_series(
    input: &str,
    chart: Chart,
    policy: TruncationPolicy,
) -> Result<MultiSeries, ParseError> {
    let fail = |message: String| ParseError::BadSeries { input: input.to_string(), message };
    let tokens = tokenize(input).map_err(&fail)?;
    let mut parser = SeriesParser { tokens, pos: 0 };
    let mut out = MultiSeries::zero(chart, policy);
    let mut chart_seen = None;
    let mut sign = BigRational::one();
    if matches!(parser.peek(), Some(Token::Minus)) {
        parser.next();
        sign = -sign;
    }
    loop {
        let (e, c) = parser.parse_term(&mut chart_seen).map_err(&fail)?;
        out = out
            .add(&MultiSeries::monomial(chart, policy, e, c * sign.clone()))
            .expect("same chart");
        match parser.next() {
            None => break,
            Some(Token::Plus) => sign = BigRational::one(),
            Some(Token::Minus) => sign = -BigRational::one(),
            other => return Err(fail(format!("expected + or -, found {other:?}"))),
        }
    }
    if let Some(seen) = chart_seen {
        if seen != chart {
            return Err(fail(format!("expression uses {seen} variables, expected {chart}")));
        }
    }
    if out.boundary_touched() {
        return Err(fail("a term falls outside the truncation window".to_string()));
    }
    Ok(out)
}

// ---- typed documents ----

pub fn parse_threefold_spec(
    text: &str,
    policy: TruncationPolicy,
) -> Result<ThreefoldSpec, ParseError> {
    let doc = parse_document(text)?;
    let k1 = parse_int(&doc, "k1")?;
    let k2 = parse_int(&doc, "k2")?;
    let mut spec = ThreefoldSpec::w_pair(k1, k2);
    for (key, value) in &doc {
        let slot = match key.as_str() {
            "perturb.v1" => Slot::V1,
            "perturb.v2" => Slot::V2,
            _ => continue,
        };
        let series = parse_series(value, Chart::U, policy)?;
        spec = spec.with_perturbation(slot, series);
    }
    Ok(spec)
}

/// Canonical text rendering of a spec, used for files, hashing and the
/// output of `integrate`.
pub fn render_threefold_spec(spec: &ThreefoldSpec) -> String {
    let mut out = format!("k1 = {}\nk2 = {}\n", spec.k1, spec.k2);
    for (slot, series) in &spec.perturbations {
        out.push_str(&format!("perturb.{slot} = {series}\n"));
    }
    out
}

pub fn parse_map_spec(text: &str, policy: TruncationPolicy) -> Result<MapSpec, ParseError> {
    let doc = parse_document(text)?;
    let series = |key: &'static str, chart: Chart| -> Result<MultiSeries, ParseError> {
        parse_series(require(&doc, key)?, chart, policy)
    };
    Ok(MapSpec::new(
        [
            series("map.u.1", Chart::U)?,
            series("map.u.2", Chart::U)?,
            series("map.u.3", Chart::U)?,
        ],
        [
            series("map.v.1", Chart::V)?,
            series("map.v.2", Chart::V)?,
            series("map.v.3", Chart::V)?,
        ],
    ))
}

pub fn parse_cocycle(text: &str, policy: TruncationPolicy) -> Result<VectorCochain, ParseError> {
    let doc = parse_document(text)?;
    let mut components = Vec::new();
    for key in ["cocycle.1", "cocycle.2", "cocycle.3"] {
        let series = match lookup(&doc, key) {
            Some(value) => parse_series(value, Chart::U, policy)?,
            None => MultiSeries::zero(Chart::U, policy),
        };
        components.push(series);
    }
    Ok(VectorCochain { components })
}
